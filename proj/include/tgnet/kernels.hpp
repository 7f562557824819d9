#pragma once

#include <cstddef>

#include "tgnet/graph.hpp"

namespace tgnet::kernels {

// Numeric kernels behind the autodiff ops. The primary entry points are
// OpenMP-parallel; kernels::serial holds the plain-loop reference used by the
// tests and the benchmark. Both variants compute every output element with
// the same fixed sequential reduction order, so results are bit-identical to
// each other and independent of the thread count.
//
// Forward kernels overwrite their output; backward kernels accumulate (+=).

// y[m x n] = x[m x k] * w[n x k]^T (+ bias[n] when bias != nullptr)
void dense_forward(const double* x, const double* w, const double* bias,
                   double* y, std::size_t m, std::size_t k, std::size_t n);

// c[m x n] += a[m x k] * b[k x n]
void matmul_nn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n);

// c[m x n] += a[k x m]^T * b[k x n]
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n);

// db[n] += column sums of dy[m x n]
void bias_grad_acc(const double* dy, double* db, std::size_t m, std::size_t n);

void relu_forward(const double* x, double* y, std::size_t n);
// dx += dy * (x > 0)
void relu_backward_acc(const double* x, const double* dy, double* dx,
                       std::size_t n);

// Per-example mean over sorted neighbor indices; empty neighborhood -> zero
// row. x and y are (batch*n_nodes) x f.
void neighbor_mean_forward(const double* x, const RegionGraph& g, int batch,
                           std::size_t f, double* y);
// Gradient via the symmetric gather: dx[u] += sum_{i in N(u)} dy[i]/deg(i).
void neighbor_mean_backward_acc(const double* dy, const RegionGraph& g,
                                int batch, std::size_t f, double* dx);

// Per-feature batch statistics over m rows (biased variance).
void batchnorm_stats(const double* x, std::size_t m, std::size_t n,
                     double* mean, double* var);
// y = gamma * (x - mean)/sqrt(var+eps) + beta; also emits xhat.
void batchnorm_forward(const double* x, const double* mean, const double* var,
                       const double* gamma, const double* beta, double eps,
                       std::size_t m, std::size_t n, double* y, double* xhat);
// Train-mode backward through the batch statistics.
void batchnorm_backward_acc(const double* dy, const double* xhat,
                            const double* gamma, const double* var, double eps,
                            std::size_t m, std::size_t n, double* dx,
                            double* dgamma, double* dbeta);

// 2x2 average pooling over a rows x cols grid per example, odd edges padded
// by replication. x is (batch*rows*cols) x f, y is (batch*cr*cc) x f with
// cr = (rows+1)/2, cc = (cols+1)/2.
void avg_pool_forward(const double* x, int batch, int rows, int cols,
                      std::size_t f, double* y);
void avg_pool_backward_acc(const double* dy, int batch, int rows, int cols,
                           std::size_t f, double* dx);

// Nearest-neighbor unpool: replicate each coarse cell onto its 2x2 block,
// cropped to rows x cols.
void unpool_forward(const double* x, int batch, int rows, int cols,
                    std::size_t f, double* y);
void unpool_backward_acc(const double* dy, int batch, int rows, int cols,
                         std::size_t f, double* dx);

// Same-padding 3x3 convolution over the grid; kernel is fo x fi x 3 x 3.
void conv3x3_forward(const double* x, const double* kernel, int batch,
                     int rows, int cols, std::size_t fi, std::size_t fo,
                     double* y);
void conv3x3_backward_acc(const double* x, const double* kernel,
                          const double* dy, int batch, int rows, int cols,
                          std::size_t fi, std::size_t fo, double* dx,
                          double* dkernel);

namespace serial {

void dense_forward(const double* x, const double* w, const double* bias,
                   double* y, std::size_t m, std::size_t k, std::size_t n);
void matmul_nn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n);
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n);
void bias_grad_acc(const double* dy, double* db, std::size_t m, std::size_t n);
void relu_forward(const double* x, double* y, std::size_t n);
void relu_backward_acc(const double* x, const double* dy, double* dx,
                       std::size_t n);
void neighbor_mean_forward(const double* x, const RegionGraph& g, int batch,
                           std::size_t f, double* y);
void neighbor_mean_backward_acc(const double* dy, const RegionGraph& g,
                                int batch, std::size_t f, double* dx);
void batchnorm_stats(const double* x, std::size_t m, std::size_t n,
                     double* mean, double* var);
void batchnorm_forward(const double* x, const double* mean, const double* var,
                       const double* gamma, const double* beta, double eps,
                       std::size_t m, std::size_t n, double* y, double* xhat);
void batchnorm_backward_acc(const double* dy, const double* xhat,
                            const double* gamma, const double* var, double eps,
                            std::size_t m, std::size_t n, double* dx,
                            double* dgamma, double* dbeta);
void avg_pool_forward(const double* x, int batch, int rows, int cols,
                      std::size_t f, double* y);
void avg_pool_backward_acc(const double* dy, int batch, int rows, int cols,
                           std::size_t f, double* dx);
void unpool_forward(const double* x, int batch, int rows, int cols,
                    std::size_t f, double* y);
void unpool_backward_acc(const double* dy, int batch, int rows, int cols,
                         std::size_t f, double* dx);
void conv3x3_forward(const double* x, const double* kernel, int batch,
                     int rows, int cols, std::size_t fi, std::size_t fo,
                     double* y);
void conv3x3_backward_acc(const double* x, const double* kernel,
                          const double* dy, int batch, int rows, int cols,
                          std::size_t fi, std::size_t fo, double* dx,
                          double* dkernel);

}  // namespace serial

// Coarse grid dims after one 2x2 pooling stage.
inline int pooled_dim(int d) { return (d + 1) / 2; }

}  // namespace tgnet::kernels
