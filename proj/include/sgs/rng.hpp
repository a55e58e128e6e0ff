#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace sgs::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream purposes. Every random draw in the library comes from a stream
// derived from (seed, purpose, a, b), so results never depend on call or
// scheduling order.
enum class Purpose : std::uint64_t {
  DensitySample = 1,
  ChainInit = 2,
  ChainStep = 3,
  Perturbation = 4,
  LossEval = 5,
  SlicedDirections = 6,
  Rademacher = 7,
  FitData = 8,
  Features = 9,
  SteinCheck = 10,
  Bootstrap = 11,
  SmoothingGap = 12,
};

// Counter-based splitmix64 sequence.
class Stream {
 public:
  explicit Stream(std::uint64_t state) : state_(state) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  // uniform in (0,1)
  double next_unit() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  Eigen::VectorXd normal_vector(Eigen::Index d) {
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = next_normal();
    return z;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Stream derive(std::uint64_t seed, Purpose purpose, std::uint64_t a = 0,
                     std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed + kGolden);
  h = mix64(h ^ (static_cast<std::uint64_t>(purpose) + kGolden));
  h = mix64(h ^ (a + kGolden));
  h = mix64(h ^ (b + kGolden));
  return Stream(h);
}

}  // namespace sgs::rng
