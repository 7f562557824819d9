#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tgnet/kernels.hpp"

// Reference kernels: straight loops, no threading. The OpenMP variants in
// kernels_omp.cpp must stay bit-identical to these.

namespace tgnet::kernels::serial {

void dense_forward(const double* x, const double* w, const double* bias,
                   double* y, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = bias ? bias[j] : 0.0;
      const double* xi = x + i * k;
      const double* wj = w + j * k;
      for (std::size_t l = 0; l < k; ++l) acc += xi[l] * wj[l];
      y[i * n + j] = acc;
    }
  }
}

void matmul_nn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      c[i * n + j] += acc;
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
      c[i * n + j] += acc;
    }
  }
}

void bias_grad_acc(const double* dy, double* db, std::size_t m,
                   std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += dy[i * n + j];
    db[j] += acc;
  }
}

void relu_forward(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_acc(const double* x, const double* dy, double* dx,
                       std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

namespace {

// Sorted copy of a neighbor list; aggregation order must not depend on how
// the list happens to be stored.
inline int sorted_neighbors(const std::vector<int>& nbrs, int* buf,
                            std::vector<int>& heap_buf) {
  const int deg = static_cast<int>(nbrs.size());
  int* out = buf;
  if (deg > 32) {
    heap_buf.assign(nbrs.begin(), nbrs.end());
    std::sort(heap_buf.begin(), heap_buf.end());
    return deg;
  }
  for (int i = 0; i < deg; ++i) {
    int v = nbrs[i];
    int j = i;
    while (j > 0 && out[j - 1] > v) {
      out[j] = out[j - 1];
      --j;
    }
    out[j] = v;
  }
  return deg;
}


// Sum of x[u*f + c] over the neighbor list, addends sorted by value so the
// reduction order does not depend on index labels.
inline double value_sorted_sum(const double* x, const std::vector<int>& nbrs,
                               std::size_t c, std::size_t f) {
  double vals[32];
  std::vector<double> heap_vals;
  const int deg = static_cast<int>(nbrs.size());
  double* v = vals;
  if (deg > 32) {
    heap_vals.resize(nbrs.size());
    v = heap_vals.data();
  }
  for (int u = 0; u < deg; ++u)
    v[u] = x[static_cast<std::size_t>(nbrs[u]) * f + c];
  std::sort(v, v + deg);
  double acc = 0.0;
  for (int u = 0; u < deg; ++u) acc += v[u];
  return acc;
}

}  // namespace

void neighbor_mean_forward(const double* x, const RegionGraph& g, int batch,
                           std::size_t f, double* y) {
  const int n = g.n_nodes;
  for (int b = 0; b < batch; ++b) {
    const double* xb = x + static_cast<std::size_t>(b) * n * f;
    double* yb = y + static_cast<std::size_t>(b) * n * f;
    for (int i = 0; i < n; ++i) {
      const auto& nbrs = g.neighbors[i];
      const int deg = static_cast<int>(nbrs.size());
      double* yi = yb + static_cast<std::size_t>(i) * f;
      std::fill(yi, yi + f, 0.0);
      if (deg == 0) continue;
      // summing the addends in value order keeps the result independent of
      // both the adjacency-list order and any relabeling of node indices
      const double inv = 1.0 / deg;
      for (std::size_t c = 0; c < f; ++c)
        yi[c] = value_sorted_sum(xb, nbrs, c, f) * inv;
    }
  }
}

void neighbor_mean_backward_acc(const double* dy, const RegionGraph& g,
                                int batch, std::size_t f, double* dx) {
  const int n = g.n_nodes;
  for (int b = 0; b < batch; ++b) {
    const double* dyb = dy + static_cast<std::size_t>(b) * n * f;
    double* dxb = dx + static_cast<std::size_t>(b) * n * f;
    for (int u = 0; u < n; ++u) {
      int buf[32];
      std::vector<int> heap_buf;
      const int deg = sorted_neighbors(g.neighbors[u], buf, heap_buf);
      const int* idx = heap_buf.empty() ? buf : heap_buf.data();
      double* du = dxb + static_cast<std::size_t>(u) * f;
      for (int v = 0; v < deg; ++v) {
        const int i = idx[v];
        const double inv = 1.0 / g.degree(i);
        const double* di = dyb + static_cast<std::size_t>(i) * f;
        for (std::size_t c = 0; c < f; ++c) du[c] += di[c] * inv;
      }
    }
  }
}

void batchnorm_stats(const double* x, std::size_t m, std::size_t n,
                     double* mean, double* var) {
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += x[i * n + j];
    const double mu = s / static_cast<double>(m);
    double v = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = x[i * n + j] - mu;
      v += d * d;
    }
    mean[j] = mu;
    var[j] = v / static_cast<double>(m);
  }
}

void batchnorm_forward(const double* x, const double* mean, const double* var,
                       const double* gamma, const double* beta, double eps,
                       std::size_t m, std::size_t n, double* y, double* xhat) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double inv = 1.0 / std::sqrt(var[j] + eps);
      const double xh = (x[i * n + j] - mean[j]) * inv;
      xhat[i * n + j] = xh;
      y[i * n + j] = gamma[j] * xh + beta[j];
    }
  }
}

void batchnorm_backward_acc(const double* dy, const double* xhat,
                            const double* gamma, const double* var, double eps,
                            std::size_t m, std::size_t n, double* dx,
                            double* dgamma, double* dbeta) {
  for (std::size_t j = 0; j < n; ++j) {
    double sum_dy = 0.0;
    double sum_dyx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum_dy += dy[i * n + j];
      sum_dyx += dy[i * n + j] * xhat[i * n + j];
    }
    dgamma[j] += sum_dyx;
    dbeta[j] += sum_dy;
    const double inv = 1.0 / std::sqrt(var[j] + eps);
    const double scale = gamma[j] * inv;
    const double im = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      dx[i * n + j] +=
          scale * (dy[i * n + j] - sum_dy * im - xhat[i * n + j] * sum_dyx * im);
    }
  }
}

void avg_pool_forward(const double* x, int batch, int rows, int cols,
                      std::size_t f, double* y) {
  const int cr = pooled_dim(rows);
  const int cc = pooled_dim(cols);
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(batch) * cr * cc; ++p) {
    const int b = static_cast<int>(p / (cr * cc));
    const int rc = static_cast<int>(p % (cr * cc));
    const int r = rc / cc;
    const int c = rc % cc;
    double* yp = y + static_cast<std::size_t>(p) * f;
    std::fill(yp, yp + f, 0.0);
    for (int dr = 0; dr < 2; ++dr) {
      for (int dc = 0; dc < 2; ++dc) {
        const int fr = std::min(2 * r + dr, rows - 1);
        const int fc = std::min(2 * c + dc, cols - 1);
        const double* xp =
            x + (static_cast<std::size_t>(b) * rows * cols + fr * cols + fc) * f;
        for (std::size_t ch = 0; ch < f; ++ch) yp[ch] += xp[ch];
      }
    }
    for (std::size_t ch = 0; ch < f; ++ch) yp[ch] *= 0.25;
  }
}

void avg_pool_backward_acc(const double* dy, int batch, int rows, int cols,
                           std::size_t f, double* dx) {
  const int cr = pooled_dim(rows);
  const int cc = pooled_dim(cols);
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(batch) * cr * cc; ++p) {
    const int b = static_cast<int>(p / (cr * cc));
    const int rc = static_cast<int>(p % (cr * cc));
    const int r = rc / cc;
    const int c = rc % cc;
    const double* dp = dy + static_cast<std::size_t>(p) * f;
    for (int dr = 0; dr < 2; ++dr) {
      for (int dc = 0; dc < 2; ++dc) {
        const int fr = std::min(2 * r + dr, rows - 1);
        const int fc = std::min(2 * c + dc, cols - 1);
        double* xp =
            dx + (static_cast<std::size_t>(b) * rows * cols + fr * cols + fc) * f;
        for (std::size_t ch = 0; ch < f; ++ch) xp[ch] += 0.25 * dp[ch];
      }
    }
  }
}

void unpool_forward(const double* x, int batch, int rows, int cols,
                    std::size_t f, double* y) {
  const int cc = pooled_dim(cols);
  const int cr = pooled_dim(rows);
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(batch) * rows * cols;
       ++p) {
    const int b = static_cast<int>(p / (rows * cols));
    const int rc = static_cast<int>(p % (rows * cols));
    const int r = rc / cols;
    const int c = rc % cols;
    const double* xp =
        x + (static_cast<std::size_t>(b) * cr * cc + (r / 2) * cc + c / 2) * f;
    double* yp = y + static_cast<std::size_t>(p) * f;
    for (std::size_t ch = 0; ch < f; ++ch) yp[ch] = xp[ch];
  }
}

void unpool_backward_acc(const double* dy, int batch, int rows, int cols,
                         std::size_t f, double* dx) {
  const int cr = pooled_dim(rows);
  const int cc = pooled_dim(cols);
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(batch) * cr * cc; ++p) {
    const int b = static_cast<int>(p / (cr * cc));
    const int rc = static_cast<int>(p % (cr * cc));
    const int r = rc / cc;
    const int c = rc % cc;
    double* dp = dx + static_cast<std::size_t>(p) * f;
    for (int dr = 0; dr < 2; ++dr) {
      for (int dc = 0; dc < 2; ++dc) {
        const int fr = 2 * r + dr;
        const int fc = 2 * c + dc;
        if (fr >= rows || fc >= cols) continue;
        const double* sp =
            dy + (static_cast<std::size_t>(b) * rows * cols + fr * cols + fc) * f;
        for (std::size_t ch = 0; ch < f; ++ch) dp[ch] += sp[ch];
      }
    }
  }
}

void conv3x3_forward(const double* x, const double* kernel, int batch,
                     int rows, int cols, std::size_t fi, std::size_t fo,
                     double* y) {
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(batch) * rows * cols;
       ++p) {
    const int b = static_cast<int>(p / (rows * cols));
    const int rc = static_cast<int>(p % (rows * cols));
    const int r = rc / cols;
    const int c = rc % cols;
    double* yp = y + static_cast<std::size_t>(p) * fo;
    for (std::size_t o = 0; o < fo; ++o) {
      double acc = 0.0;
      for (int dr = 0; dr < 3; ++dr) {
        const int sr = r + dr - 1;
        if (sr < 0 || sr >= rows) continue;
        for (int dc = 0; dc < 3; ++dc) {
          const int sc = c + dc - 1;
          if (sc < 0 || sc >= cols) continue;
          const double* xp =
              x +
              (static_cast<std::size_t>(b) * rows * cols + sr * cols + sc) * fi;
          const double* kp = kernel + ((o * fi) * 9) + dr * 3 + dc;
          for (std::size_t in = 0; in < fi; ++in)
            acc += xp[in] * kp[in * 9];
        }
      }
      yp[o] = acc;
    }
  }
}

void conv3x3_backward_acc(const double* x, const double* kernel,
                          const double* dy, int batch, int rows, int cols,
                          std::size_t fi, std::size_t fo, double* dx,
                          double* dkernel) {
  // dx: correlate dy with the transposed kernel.
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(batch) * rows * cols;
       ++p) {
    const int b = static_cast<int>(p / (rows * cols));
    const int rc = static_cast<int>(p % (rows * cols));
    const int r = rc / cols;
    const int c = rc % cols;
    double* dxp = dx + static_cast<std::size_t>(p) * fi;
    for (int dr = 0; dr < 3; ++dr) {
      const int or_ = r - (dr - 1);
      if (or_ < 0 || or_ >= rows) continue;
      for (int dc = 0; dc < 3; ++dc) {
        const int oc = c - (dc - 1);
        if (oc < 0 || oc >= cols) continue;
        const double* dyp =
            dy +
            (static_cast<std::size_t>(b) * rows * cols + or_ * cols + oc) * fo;
        for (std::size_t o = 0; o < fo; ++o) {
          const double g = dyp[o];
          const double* kp = kernel + ((o * fi) * 9) + dr * 3 + dc;
          for (std::size_t in = 0; in < fi; ++in) dxp[in] += g * kp[in * 9];
        }
      }
    }
  }
  // dkernel: one reduction per kernel element over all output positions.
  const std::int64_t kn = static_cast<std::int64_t>(fo * fi * 9);
  for (std::int64_t q = 0; q < kn; ++q) {
    const std::size_t o = static_cast<std::size_t>(q / (fi * 9));
    const std::size_t in = static_cast<std::size_t>((q / 9) % fi);
    const int dr = static_cast<int>((q % 9) / 3);
    const int dc = static_cast<int>(q % 3);
    double acc = 0.0;
    for (int b = 0; b < batch; ++b) {
      for (int r = 0; r < rows; ++r) {
        const int sr = r + dr - 1;
        if (sr < 0 || sr >= rows) continue;
        for (int c = 0; c < cols; ++c) {
          const int sc = c + dc - 1;
          if (sc < 0 || sc >= cols) continue;
          acc += dy[(static_cast<std::size_t>(b) * rows * cols + r * cols + c) *
                        fo +
                    o] *
                 x[(static_cast<std::size_t>(b) * rows * cols + sr * cols + sc) *
                       fi +
                   in];
        }
      }
    }
    dkernel[q] += acc;
  }
}

}  // namespace tgnet::kernels::serial
