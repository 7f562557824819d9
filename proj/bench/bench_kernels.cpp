// Timing comparison between the OpenMP kernels and the serial reference,
// with a bitwise equality check on every output.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "tgnet/graph.hpp"
#include "tgnet/kernels.hpp"
#include "tgnet/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace tgnet;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warmup
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void report(const std::string& name, double serial_ms, double omp_ms,
            bool equal) {
  std::printf("%-18s serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   %s\n",
              name.c_str(), serial_ms, omp_ms, serial_ms / omp_ms,
              equal ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both columns are serial\n");
#endif
  Rng rng(42);
  const int reps = 10;

  {
    const std::size_t m = 512, k = 256, n = 512;
    const auto x = random_vec(m * k, rng);
    const auto w = random_vec(n * k, rng);
    std::vector<double> y1(m * n), y2(m * n);
    const double ts = time_ms(
        [&] { kernels::serial::dense_forward(x.data(), w.data(), nullptr,
                                             y1.data(), m, k, n); },
        reps);
    const double tp = time_ms(
        [&] { kernels::dense_forward(x.data(), w.data(), nullptr, y2.data(),
                                     m, k, n); },
        reps);
    report("dense_forward", ts, tp, bitwise_equal(y1, y2));
  }

  {
    const int rows = 64, cols = 64, batch = 8;
    const std::size_t f = 64;
    const RegionGraph g = build_lattice_graph(rows, cols);
    const auto x = random_vec(static_cast<std::size_t>(batch) * g.n_nodes * f, rng);
    std::vector<double> y1(x.size()), y2(x.size());
    const double ts = time_ms(
        [&] { kernels::serial::neighbor_mean_forward(x.data(), g, batch, f,
                                                     y1.data()); },
        reps);
    const double tp = time_ms(
        [&] { kernels::neighbor_mean_forward(x.data(), g, batch, f,
                                             y2.data()); },
        reps);
    report("neighbor_mean", ts, tp, bitwise_equal(y1, y2));
  }

  {
    const int rows = 48, cols = 48, batch = 4;
    const std::size_t fi = 32, fo = 32;
    const auto x = random_vec(static_cast<std::size_t>(batch) * rows * cols * fi, rng);
    const auto kern = random_vec(fo * fi * 9, rng);
    std::vector<double> y1(static_cast<std::size_t>(batch) * rows * cols * fo);
    std::vector<double> y2(y1.size());
    const double ts = time_ms(
        [&] { kernels::serial::conv3x3_forward(x.data(), kern.data(), batch,
                                               rows, cols, fi, fo, y1.data()); },
        reps);
    const double tp = time_ms(
        [&] { kernels::conv3x3_forward(x.data(), kern.data(), batch, rows,
                                       cols, fi, fo, y2.data()); },
        reps);
    report("conv3x3", ts, tp, bitwise_equal(y1, y2));
  }

  {
    const std::size_t m = 16384, n = 256;
    const auto x = random_vec(m * n, rng);
    std::vector<double> mean1(n), var1(n), mean2(n), var2(n);
    const double ts = time_ms(
        [&] { kernels::serial::batchnorm_stats(x.data(), m, n, mean1.data(),
                                               var1.data()); },
        reps);
    const double tp = time_ms(
        [&] { kernels::batchnorm_stats(x.data(), m, n, mean2.data(),
                                       var2.data()); },
        reps);
    report("batchnorm_stats", ts, tp,
           bitwise_equal(mean1, mean2) && bitwise_equal(var1, var2));
  }
  return 0;
}
