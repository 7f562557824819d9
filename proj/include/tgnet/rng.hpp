#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tgnet {

// splitmix64 generator. Chosen over std::mt19937 so that seeded runs are
// reproducible across standard libraries, not just across runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Independent deterministic substream; `stream` tags the purpose.
  Rng fork(std::uint64_t stream) const {
    Rng child(mix(state_, 0x6a09e667f3bcc909ULL + stream));
    return child;
  }

  // Poisson via cumulative exponentials; safe for any lambda >= 0.
  std::uint32_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    std::uint32_t k = 0;
    double acc = 0.0;
    for (;;) {
      acc += -std::log(1.0 - uniform());
      if (acc > lambda) return k;
      ++k;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    Rng tmp(a ^ (b * 0x9e3779b97f4a7c15ULL));
    return tmp.next_u64();
  }

 private:
  std::uint64_t state_;
};

}  // namespace tgnet
