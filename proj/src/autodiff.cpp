#include "tgnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "tgnet/error.hpp"
#include "tgnet/kernels.hpp"

namespace tgnet::ad {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace

void assert_all_finite(const Tensor& t, const char* what) {
  for (double v : t.data)
    if (!std::isfinite(v))
      throw NumericError(std::string("non-finite value in ") + what);
}

Id Tape::push(Tensor value, bool requires_grad,
              std::function<void(Tape&, Id)> back) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size() - 1);
}

Id Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Id Tape::dense(Id x, Id w, Id b) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  const std::size_t m = xv.rows();
  const std::size_t k = xv.cols();
  const std::size_t n = wv.rows();
  require(wv.cols() == k, "dense: weight/input width mismatch");
  const double* bias = nullptr;
  if (b != kNone) {
    require(val(b).size() == n, "dense: bias size mismatch");
    bias = val(b).data.data();
  }
  Tensor y{m, n};
  kernels::dense_forward(xv.data.data(), wv.data.data(), bias, y.data.data(),
                         m, k, n);
  const bool rg = requires_grad(x) || requires_grad(w) ||
                  (b != kNone && requires_grad(b));
  return push(std::move(y), rg, [x, w, b, m, k, n](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    if (t.requires_grad(x))
      kernels::matmul_nn_acc(dy.data.data(), t.val(w).data.data(),
                             t.grad_mut(x).data.data(), m, n, k);
    if (t.requires_grad(w))
      kernels::matmul_tn_acc(dy.data.data(), t.val(x).data.data(),
                             t.grad_mut(w).data.data(), n, m, k);
    if (b != kNone && t.requires_grad(b))
      kernels::bias_grad_acc(dy.data.data(), t.grad_mut(b).data.data(), m, n);
  });
}

Id Tape::relu(Id x) {
  const Tensor& xv = val(x);
  Tensor y(xv.shape);
  kernels::relu_forward(xv.data.data(), y.data.data(), xv.size());
  return push(std::move(y), requires_grad(x), [x](Tape& t, Id self) {
    if (!t.requires_grad(x)) return;
    const Tensor& dy = t.grad(self);
    kernels::relu_backward_acc(t.val(x).data.data(), dy.data.data(),
                               t.grad_mut(x).data.data(), dy.size());
  });
}

Id Tape::add(Id a, Id b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  require(av.same_shape(bv), "add: shape mismatch");
  Tensor y(av.shape);
  for (std::size_t i = 0; i < y.size(); ++i)
    y.data[i] = av.data[i] + bv.data[i];
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(y), rg, [a, b](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    for (Id p : {a, b}) {
      if (!t.requires_grad(p)) continue;
      Tensor& dst = t.grad_mut(p);
      for (std::size_t i = 0; i < dy.size(); ++i) dst.data[i] += dy.data[i];
    }
  });
}

Id Tape::concat_cols(Id a, Id b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  const std::size_t m = av.rows();
  require(bv.rows() == m, "concat: row count mismatch");
  const std::size_t fa = av.cols();
  const std::size_t fb = bv.cols();
  Tensor y{m, fa + fb};
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(&av.data[i * fa], fa, &y.data[i * (fa + fb)]);
    std::copy_n(&bv.data[i * fb], fb, &y.data[i * (fa + fb) + fa]);
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(y), rg, [a, b, m, fa, fb](Tape& t, Id self) {
    const Tensor& dy = t.grad(self);
    if (t.requires_grad(a)) {
      Tensor& da = t.grad_mut(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < fa; ++j)
          da.data[i * fa + j] += dy.data[i * (fa + fb) + j];
    }
    if (t.requires_grad(b)) {
      Tensor& db = t.grad_mut(b);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < fb; ++j)
          db.data[i * fb + j] += dy.data[i * (fa + fb) + fa + j];
    }
  });
}

Id Tape::neighbor_mean(Id x, const RegionGraph* graph, int batch) {
  const Tensor& xv = val(x);
  const std::size_t f = xv.cols();
  require(xv.rows() == static_cast<std::size_t>(graph->n_nodes) * batch,
          "neighbor_mean: rows must equal batch * n_nodes");
  Tensor y(xv.shape);
  kernels::neighbor_mean_forward(xv.data.data(), *graph, batch, f,
                                 y.data.data());
  return push(std::move(y), requires_grad(x), [x, graph, batch, f](Tape& t,
                                                                   Id self) {
    if (!t.requires_grad(x)) return;
    kernels::neighbor_mean_backward_acc(t.grad(self).data.data(), *graph,
                                        batch, f, t.grad_mut(x).data.data());
  });
}

Id Tape::batch_norm(Id x, Id gamma, Id beta, Tensor* running_mean,
                    Tensor* running_var, Mode mode, double momentum,
                    double eps) {
  const Tensor& xv = val(x);
  const std::size_t m = xv.rows();
  const std::size_t n = xv.cols();
  require(val(gamma).size() == n && val(beta).size() == n,
          "batch_norm: gamma/beta width mismatch");
  require(running_mean->size() == n && running_var->size() == n,
          "batch_norm: running stats width mismatch");

  Tensor y{m, n};
  Tensor xhat{m, n};
  if (mode == Mode::kTrain) {
    if (m < 2) throw NumericError("batch_norm: train mode needs >= 2 rows");
    Tensor mean{std::size_t{1}, n};
    Tensor var{std::size_t{1}, n};
    kernels::batchnorm_stats(xv.data.data(), m, n, mean.data.data(),
                             var.data.data());
    kernels::batchnorm_forward(xv.data.data(), mean.data.data(),
                               var.data.data(), val(gamma).data.data(),
                               val(beta).data.data(), eps, m, n, y.data.data(),
                               xhat.data.data());
    for (std::size_t j = 0; j < n; ++j) {
      running_mean->data[j] =
          momentum * running_mean->data[j] + (1.0 - momentum) * mean.data[j];
      running_var->data[j] =
          momentum * running_var->data[j] + (1.0 - momentum) * var.data[j];
    }
    const bool rg =
        requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
    Tensor var_saved = std::move(var);
    Tensor xhat_saved = std::move(xhat);
    return push(std::move(y), rg,
                [x, gamma, beta, m, n, eps, var_saved = std::move(var_saved),
                 xhat_saved = std::move(xhat_saved)](Tape& t, Id self) {
                  const Tensor& dy = t.grad(self);
                  Tensor dg{std::size_t{1}, n};
                  Tensor db{std::size_t{1}, n};
                  Tensor dx{m, n};
                  kernels::batchnorm_backward_acc(
                      dy.data.data(), xhat_saved.data.data(),
                      t.val(gamma).data.data(), var_saved.data.data(), eps, m,
                      n, dx.data.data(), dg.data.data(), db.data.data());
                  if (t.requires_grad(x)) {
                    Tensor& dst = t.grad_mut(x);
                    for (std::size_t i = 0; i < dst.size(); ++i)
                      dst.data[i] += dx.data[i];
                  }
                  if (t.requires_grad(gamma)) {
                    Tensor& dst = t.grad_mut(gamma);
                    for (std::size_t j = 0; j < n; ++j)
                      dst.data[j] += dg.data[j];
                  }
                  if (t.requires_grad(beta)) {
                    Tensor& dst = t.grad_mut(beta);
                    for (std::size_t j = 0; j < n; ++j)
                      dst.data[j] += db.data[j];
                  }
                });
  }

  // Eval: running statistics are constants, so the op is affine per feature.
  std::vector<double> invstd(n);
  for (std::size_t j = 0; j < n; ++j)
    invstd[j] = 1.0 / std::sqrt(running_var->data[j] + eps);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (xv.data[i * n + j] - running_mean->data[j]) * invstd[j];
      xhat.data[i * n + j] = xh;
      y.data[i * n + j] = val(gamma).data[j] * xh + val(beta).data[j];
    }
  }
  const bool rg =
      requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
  Tensor xhat_saved = std::move(xhat);
  return push(std::move(y), rg,
              [x, gamma, beta, m, n, invstd = std::move(invstd),
               xhat_saved = std::move(xhat_saved)](Tape& t, Id self) {
                const Tensor& dy = t.grad(self);
                if (t.requires_grad(x)) {
                  Tensor& dst = t.grad_mut(x);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                      dst.data[i * n + j] += dy.data[i * n + j] *
                                             t.val(gamma).data[j] * invstd[j];
                }
                if (t.requires_grad(gamma)) {
                  Tensor& dst = t.grad_mut(gamma);
                  for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < m; ++i)
                      acc += dy.data[i * n + j] * xhat_saved.data[i * n + j];
                    dst.data[j] += acc;
                  }
                }
                if (t.requires_grad(beta)) {
                  Tensor& dst = t.grad_mut(beta);
                  for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < m; ++i)
                      acc += dy.data[i * n + j];
                    dst.data[j] += acc;
                  }
                }
              });
}

Id Tape::dropout(Id x, double p, Mode mode, Rng* rng) {
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
  if (mode == Mode::kEval || p == 0.0) return x;
  require(rng != nullptr, "dropout: train mode needs an rng");
  const Tensor& xv = val(x);
  // Mask generation is sequential by construction: the rng stream is part of
  // the determinism contract.
  std::vector<double> mask(xv.size());
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng->uniform() < p ? 0.0 : keep_scale;
  Tensor y(xv.shape);
  for (std::size_t i = 0; i < y.size(); ++i)
    y.data[i] = xv.data[i] * mask[i];
  return push(std::move(y), requires_grad(x),
              [x, mask = std::move(mask)](Tape& t, Id self) {
                if (!t.requires_grad(x)) return;
                const Tensor& dy = t.grad(self);
                Tensor& dst = t.grad_mut(x);
                for (std::size_t i = 0; i < dy.size(); ++i)
                  dst.data[i] += dy.data[i] * mask[i];
              });
}

Id Tape::avg_pool_grid(Id x, int batch, int rows, int cols) {
  const Tensor& xv = val(x);
  const std::size_t f = xv.cols();
  require(xv.rows() == static_cast<std::size_t>(batch) * rows * cols,
          "avg_pool: rows must equal batch * rows * cols");
  const std::size_t coarse =
      static_cast<std::size_t>(batch) * kernels::pooled_dim(rows) *
      kernels::pooled_dim(cols);
  Tensor y{coarse, f};
  kernels::avg_pool_forward(xv.data.data(), batch, rows, cols, f,
                            y.data.data());
  return push(std::move(y), requires_grad(x),
              [x, batch, rows, cols, f](Tape& t, Id self) {
                if (!t.requires_grad(x)) return;
                kernels::avg_pool_backward_acc(t.grad(self).data.data(), batch,
                                               rows, cols, f,
                                               t.grad_mut(x).data.data());
              });
}

Id Tape::nearest_unpool(Id x, int batch, int rows, int cols) {
  const Tensor& xv = val(x);
  const std::size_t f = xv.cols();
  require(xv.rows() == static_cast<std::size_t>(batch) *
                           kernels::pooled_dim(rows) *
                           kernels::pooled_dim(cols),
          "unpool: rows must equal batch * coarse dims");
  Tensor y{static_cast<std::size_t>(batch) * rows * cols, f};
  kernels::unpool_forward(xv.data.data(), batch, rows, cols, f,
                          y.data.data());
  return push(std::move(y), requires_grad(x),
              [x, batch, rows, cols, f](Tape& t, Id self) {
                if (!t.requires_grad(x)) return;
                kernels::unpool_backward_acc(t.grad(self).data.data(), batch,
                                             rows, cols, f,
                                             t.grad_mut(x).data.data());
              });
}

Id Tape::conv3x3(Id x, Id kernel, int batch, int rows, int cols) {
  const Tensor& xv = val(x);
  const Tensor& kv = val(kernel);
  require(kv.shape.size() == 4 && kv.shape[2] == 3 && kv.shape[3] == 3,
          "conv3x3: kernel must be [out x in x 3 x 3]");
  const std::size_t fi = kv.shape[1];
  const std::size_t fo = kv.shape[0];
  require(xv.cols() == fi, "conv3x3: input width mismatch");
  require(xv.rows() == static_cast<std::size_t>(batch) * rows * cols,
          "conv3x3: rows must equal batch * rows * cols");
  Tensor y{static_cast<std::size_t>(batch) * rows * cols, fo};
  kernels::conv3x3_forward(xv.data.data(), kv.data.data(), batch, rows, cols,
                           fi, fo, y.data.data());
  const bool rg = requires_grad(x) || requires_grad(kernel);
  return push(std::move(y), rg,
              [x, kernel, batch, rows, cols, fi, fo](Tape& t, Id self) {
                const Tensor& dy = t.grad(self);
                Tensor dx_scratch;
                Tensor dk_scratch;
                double* dx = nullptr;
                double* dk = nullptr;
                if (t.requires_grad(x)) dx = t.grad_mut(x).data.data();
                if (t.requires_grad(kernel))
                  dk = t.grad_mut(kernel).data.data();
                if (!dx) {
                  dx_scratch = Tensor(t.val(x).shape);
                  dx = dx_scratch.data.data();
                }
                if (!dk) {
                  dk_scratch = Tensor(t.val(kernel).shape);
                  dk = dk_scratch.data.data();
                }
                kernels::conv3x3_backward_acc(t.val(x).data.data(),
                                              t.val(kernel).data.data(),
                                              dy.data.data(), batch, rows,
                                              cols, fi, fo, dx, dk);
              });
}

Id Tape::concat_broadcast(Id x, Id per_example, int nodes) {
  const Tensor& xv = val(x);
  const Tensor& gv = val(per_example);
  const std::size_t b = gv.rows();
  const std::size_t d = gv.cols();
  const std::size_t f = xv.cols();
  require(xv.rows() == b * nodes,
          "concat_broadcast: rows must equal batch * nodes");
  Tensor y{xv.rows(), f + d};
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    const std::size_t ex = i / nodes;
    std::copy_n(&xv.data[i * f], f, &y.data[i * (f + d)]);
    std::copy_n(&gv.data[ex * d], d, &y.data[i * (f + d) + f]);
  }
  const bool rg = requires_grad(x) || requires_grad(per_example);
  return push(std::move(y), rg,
              [x, per_example, nodes, b, d, f](Tape& t, Id self) {
                const Tensor& dy = t.grad(self);
                const std::size_t m = t.val(x).rows();
                if (t.requires_grad(x)) {
                  Tensor& dst = t.grad_mut(x);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < f; ++j)
                      dst.data[i * f + j] += dy.data[i * (f + d) + j];
                }
                if (t.requires_grad(per_example)) {
                  Tensor& dst = t.grad_mut(per_example);
                  for (std::size_t ex = 0; ex < b; ++ex)
                    for (std::size_t i = 0; i < static_cast<std::size_t>(nodes);
                         ++i)
                      for (std::size_t j = 0; j < d; ++j)
                        dst.data[ex * d + j] +=
                            dy.data[(ex * nodes + i) * (f + d) + f + j];
                }
              });
}

Id Tape::mse_loss(Id pred, Id target) {
  const Tensor& pv = val(pred);
  const Tensor& tv = val(target);
  require(pv.same_shape(tv), "mse_loss: shape mismatch");
  const std::size_t n = pv.size();
  require(n > 0, "mse_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pv.data[i] - tv.data[i];
    acc += d * d;
  }
  Tensor y{std::size_t{1}, std::size_t{1}};
  y.data[0] = acc / static_cast<double>(n);
  assert_all_finite(y, "mse_loss");
  const bool rg = requires_grad(pred) || requires_grad(target);
  return push(std::move(y), rg, [pred, target, n](Tape& t, Id self) {
    const double g = t.grad(self).data[0] * 2.0 / static_cast<double>(n);
    const Tensor& pv = t.val(pred);
    const Tensor& tv = t.val(target);
    if (t.requires_grad(pred)) {
      Tensor& dst = t.grad_mut(pred);
      for (std::size_t i = 0; i < n; ++i)
        dst.data[i] += g * (pv.data[i] - tv.data[i]);
    }
    if (t.requires_grad(target)) {
      Tensor& dst = t.grad_mut(target);
      for (std::size_t i = 0; i < n; ++i)
        dst.data[i] -= g * (pv.data[i] - tv.data[i]);
    }
  });
}

Id Tape::mae_loss(Id pred, Id target) {
  const Tensor& pv = val(pred);
  const Tensor& tv = val(target);
  require(pv.same_shape(tv), "mae_loss: shape mismatch");
  const std::size_t n = pv.size();
  require(n > 0, "mae_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(pv.data[i] - tv.data[i]);
  Tensor y{std::size_t{1}, std::size_t{1}};
  y.data[0] = acc / static_cast<double>(n);
  assert_all_finite(y, "mae_loss");
  const bool rg = requires_grad(pred) || requires_grad(target);
  return push(std::move(y), rg, [pred, target, n](Tape& t, Id self) {
    const double g = t.grad(self).data[0] / static_cast<double>(n);
    const Tensor& pv = t.val(pred);
    const Tensor& tv = t.val(target);
    // subgradient at zero is zero
    auto sign = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
    if (t.requires_grad(pred)) {
      Tensor& dst = t.grad_mut(pred);
      for (std::size_t i = 0; i < n; ++i)
        dst.data[i] += g * sign(pv.data[i] - tv.data[i]);
    }
    if (t.requires_grad(target)) {
      Tensor& dst = t.grad_mut(target);
      for (std::size_t i = 0; i < n; ++i)
        dst.data[i] -= g * sign(pv.data[i] - tv.data[i]);
    }
  });
}

void Tape::backward(Id root) {
  require(root >= 0 && root < static_cast<Id>(nodes_.size()),
          "backward: bad root id");
  require(nodes_[root].value.size() == 1, "backward: root must be scalar");
  for (Node& node : nodes_) {
    if (node.requires_grad) {
      node.grad = Tensor(node.value.shape);
    }
  }
  if (!nodes_[root].requires_grad) nodes_[root].grad = Tensor(nodes_[root].value.shape);
  nodes_[root].grad.data[0] = 1.0;
  for (Id i = static_cast<Id>(nodes_.size()) - 1; i >= 0; --i) {
    Node& node = nodes_[i];
    if (!node.back || !node.requires_grad) continue;
    if (i > root) continue;  // nodes created after the root cannot feed it
    node.back(*this, i);
  }
}

GradCheckReport grad_check(const LossFn& fn, const std::vector<Tensor>& params,
                           std::size_t samples_per_tensor, double step,
                           Rng& rng) {
  // Analytic pass.
  Tape tape;
  std::vector<Id> ids;
  ids.reserve(params.size());
  for (const Tensor& p : params) ids.push_back(tape.leaf(p, true));
  const Id loss = fn(tape, ids);
  tape.backward(loss);

  auto eval_loss = [&](const std::vector<Tensor>& p) {
    Tape t;
    std::vector<Id> leaf_ids;
    leaf_ids.reserve(p.size());
    for (const Tensor& q : p) leaf_ids.push_back(t.leaf(q, false));
    return t.scalar(fn(t, leaf_ids));
  };

  GradCheckReport report;
  std::vector<Tensor> work = params;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const std::size_t sz = params[pi].size();
    std::vector<std::size_t> elems;
    if (samples_per_tensor == 0 || sz <= samples_per_tensor) {
      elems.resize(sz);
      for (std::size_t i = 0; i < sz; ++i) elems[i] = i;
    } else {
      for (std::size_t s = 0; s < samples_per_tensor; ++s)
        elems.push_back(static_cast<std::size_t>(rng.below(sz)));
    }
    for (std::size_t e : elems) {
      const double orig = work[pi].data[e];
      work[pi].data[e] = orig + step;
      const double up = eval_loss(work);
      work[pi].data[e] = orig - step;
      const double dn = eval_loss(work);
      work[pi].data[e] = orig;
      const double numeric = (up - dn) / (2.0 * step);
      const double analytic = tape.grad(ids[pi]).data[e];
      const double mag = std::max(std::abs(numeric), std::abs(analytic));
      double rel = 0.0;
      if (mag > 1e-8) rel = std::abs(numeric - analytic) / mag;
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.n_checked;
    }
  }
  return report;
}

}  // namespace tgnet::ad
