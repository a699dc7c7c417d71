#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace readsim {

namespace detail {

// SplitMix64 finalizer (Steele, Lea, Flood; public-domain constants).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Deterministic counter-based random stream.
///
/// Every stream is addressed by a (master seed, path) pair: forking with
/// `child(key)` appends one path component. Identical (seed, path) always
/// replays the identical draw sequence, independent of what any other
/// stream did, which is what makes sharded runs reproduce serial runs.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(detail::mix64(seed + detail::kGolden)) {}

  /// Derive an independent substream for one path component.
  [[nodiscard]] RngStream child(std::uint64_t key) const {
    RngStream s(0);
    s.state_ = detail::mix64(state_ ^ (detail::kGolden + key * 0x589965cc75374cc3ULL));
    return s;
  }

  [[nodiscard]] RngStream descend(std::initializer_list<std::uint64_t> path) const {
    RngStream s = *this;
    for (auto k : path) s = s.child(k);
    return s;
  }

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /// Uniform double in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Multiply-shift bound (bias < 2^-64).
  std::uint32_t next_index(std::uint32_t n) {
    return static_cast<std::uint32_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return next_unit() < p; }

  /// Marsaglia-Tsang gamma; shapes below 1 go through the boost identity.
  double gamma(double shape) {
    if (shape < 1.0) {
      double u = next_unit();
      while (u <= 0.0) u = next_unit();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = next_unit();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  /// Geometric on {1, 2, ...} with mean `mean` (mean >= 1).
  std::uint64_t geometric(double mean) {
    if (mean <= 1.0) return 1;
    const double q = 1.0 - 1.0 / mean;  // failure probability
    double u = next_unit();
    while (u <= 0.0) u = next_unit();
    return 1 + static_cast<std::uint64_t>(std::floor(std::log(u) / std::log(q)));
  }

  /// Box-Muller (single use; the pair's second value is discarded to keep
  /// the draw count per call fixed).
  double normal() {
    double u1 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

/// Fixed path keys so every module derives substreams the same way.
/// Reader streams are keyed by (patient, visit, role) and deliberately NOT
/// by framework: frameworks compared on one cohort see the same human reads
/// (common random numbers), mirroring how one set of radiologists would
/// serve all three workflows.
namespace streams {
inline constexpr std::uint64_t kRealmRun = 0x01;
inline constexpr std::uint64_t kRealmCohort = 0x02;
inline constexpr std::uint64_t kRealmReads = 0x03;
inline constexpr std::uint64_t kRealmCalibration = 0x04;

inline constexpr std::uint64_t kStageBaseline = 0x10;
inline constexpr std::uint64_t kStageProgression = 0x11;
inline constexpr std::uint64_t kStageRead = 0x12;
inline constexpr std::uint64_t kStageMissing = 0x13;

inline constexpr std::uint64_t kRoleHuman1 = 0x21;
inline constexpr std::uint64_t kRoleHuman2 = 0x22;
inline constexpr std::uint64_t kRoleArbitrator = 0x23;
inline constexpr std::uint64_t kRoleAi = 0x24;
}  // namespace streams

}  // namespace readsim
