#pragma once
#include <cstdint>
#include <cmath>

namespace brw {

//============================================================
// Counter-based random streams.
//
// Each stream is keyed by (seed, replica, generation); draw k of a
// stream is a pure function of (key, k), so replicas are reproducible
// independently of scheduling or worker count.  The generator is the
// splitmix64 finalizer applied to key + k * golden gamma; it is
// bijective in the counter and passes standard avalanche batteries.
//============================================================

namespace detail {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// One hash round used to fold stream coordinates into the key.
inline std::uint64_t fold(std::uint64_t h, std::uint64_t v) {
  return mix64((h + kGamma) ^ (v * 0xbf58476d1ce4e5b9ull));
}

}  // namespace detail

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t replica, std::uint64_t generation)
      : key_(detail::fold(detail::fold(detail::fold(0x243f6a8885a308d3ull, seed),
                                       replica),
                          generation)) {}

  std::uint64_t next_u64() {
    return detail::mix64(key_ + (++ctr_) * detail::kGamma);
  }

  // Uniform on the open interval (0,1); never returns 0 or 1, so logs
  // and Box-Muller are safe.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  double next_uniform(double a, double b) { return a + (b - a) * next_unit(); }

  bool next_bernoulli(double p) { return next_unit() < p; }

  double next_exponential() { return -std::log(next_unit()); }

  // Box-Muller pair; fixed consumption of two uniforms.
  void next_normal_pair(double& z0, double& z1) {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    z0 = r * std::cos(t);
    z1 = r * std::sin(t);
  }

  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double z0, z1;
    next_normal_pair(z0, z1);
    spare_ = z1;
    have_spare_ = true;
    return z0;
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace brw
