#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace bpmf {

// splitmix64 step; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return mix64(mix64(master ^ mix64(a)) ^ mix64(b ^ 0x5851f42d4c957f2dULL));
}

// Deterministic generator with explicit normal/complex-normal sampling (the
// standard-library distributions are implementation defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  double uniform01() {  // in [0,1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  int uniform_int(int n) {  // in [0,n)
    return static_cast<int>(eng_() % static_cast<std::uint64_t>(n));
  }

  double normal() {  // N(0,1), Box-Muller
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  // proper complex normal CN(0,1): variance 1/2 per component
  std::complex<double> cnormal() {
    return {normal() * M_SQRT1_2, normal() * M_SQRT1_2};
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace bpmf
