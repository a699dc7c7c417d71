#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "readsim/cohort.hpp"
#include "readsim/errors.hpp"
#include "readsim/rng.hpp"
#include "readsim/scoring.hpp"

namespace readsim {

/// Row-stochastic 4x4 matrix: row = true grade, column = read grade.
using ConfusionMatrix = std::array<std::array<double, 4>, 4>;

inline void validate_confusion(const ConfusionMatrix& m, double tol = 1e-9) {
  for (const auto& row : m) {
    double sum = 0.0;
    for (double p : row) {
      if (p < 0.0) throw InvalidMatrix("confusion matrix entry below zero");
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol)
      throw InvalidMatrix("confusion matrix row does not sum to 1");
  }
}

/// Mean of the per-class recalls (the diagonal of a row-stochastic matrix).
inline double balanced_accuracy(const ConfusionMatrix& m) {
  validate_confusion(m);
  return (m[0][0] + m[1][1] + m[2][2] + m[3][3]) / 4.0;
}

inline ConfusionMatrix identity_confusion() {
  return {{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}};
}

inline ConfusionMatrix uniform_confusion() {
  return {{{0.25, 0.25, 0.25, 0.25},
           {0.25, 0.25, 0.25, 0.25},
           {0.25, 0.25, 0.25, 0.25},
           {0.25, 0.25, 0.25, 0.25}}};
}

/// Default stand-in for the trained grading model: 65% recall on every
/// class, the remaining mass on the other classes with each nearer class
/// carrying twice the weight of the next one out. Keeps errors
/// ordinal-plausible while matching the one published accuracy figure.
inline ConfusionMatrix default_trained_confusion() {
  return {{{0.65, 0.20, 0.10, 0.05},
           {0.14, 0.65, 0.14, 0.07},
           {0.07, 0.14, 0.65, 0.14},
           {0.05, 0.10, 0.20, 0.65}}};
}

/// Human reader epsilon calibrated so a two-reader workflow on the
/// MEASURE-1-like preset disagrees on the total in about 48.9% of readings.
inline constexpr double kCalibratedHumanEpsilon = 0.0175;

/// Noisy human: each corner independently errs with probability epsilon,
/// and an error moves one grade to an adjacent category (boundary grades
/// have a single neighbor, which then takes all the error mass).
struct HumanReaderParams {
  double epsilon = kCalibratedHumanEpsilon;

  /// Induced 4x4 confusion matrix; rows sum to 1, epsilon = 0 is identity.
  /// Boundary grades have one neighbor, which takes the whole error mass.
  [[nodiscard]] ConfusionMatrix confusion() const {
    const double e = epsilon;
    return {{{1 - e, e, 0, 0},
             {e / 2, 1 - e, e / 2, 0},
             {0, e / 2, 1 - e, e / 2},
             {0, 0, e, 1 - e}}};
  }
};

/// One human reading of a complete truth vector.
///
/// Two uniforms are consumed per corner whether or not an error fires, so
/// a given stream yields reads that vary monotonically with epsilon
/// (useful for calibration) and stay aligned across parameter changes.
inline CornerVector read_human(const CornerVector& truth, const HumanReaderParams& params,
                               RngStream rng) {
  CornerVector out;
  for (int i = 0; i < kCornerCount; ++i) {
    const int g = truth[i].grade();
    const double u_err = rng.next_unit();
    const double u_dir = rng.next_unit();
    if (u_err >= params.epsilon) {
      out[i] = truth[i];
      continue;
    }
    int read;
    if (g == 0)
      read = 1;
    else if (g == kMaxGrade)
      read = kMaxGrade - 1;
    else
      read = (u_dir < 0.5) ? g - 1 : g + 1;
    out[i] = CornerScore(read);
  }
  return out;
}

enum class AiKind { kTrained, kRandom, kNaive };

inline const char* ai_kind_name(AiKind k) {
  switch (k) {
    case AiKind::kTrained: return "trained";
    case AiKind::kRandom: return "random";
    case AiKind::kNaive: return "naive";
  }
  return "?";
}

/// AI reader model. Trained draws from a per-class confusion row; random is
/// uniform over the four grades; naive always answers zero. Missingness is
/// patient-visit level: the model either grades the whole visit or none of
/// it. The synthetic random/naive models never fail to produce scores, so
/// their default miss probability is zero; the trained default reflects
/// the pipeline's observed coverage (282 of 361 patients graded).
struct AIModelSpec {
  AiKind kind = AiKind::kTrained;
  ConfusionMatrix confusion = default_trained_confusion();
  double patient_missingness_prob = 0.0;

  static AIModelSpec trained(double p_miss = 0.22,
                             const ConfusionMatrix& m = default_trained_confusion()) {
    validate_confusion(m);
    return {AiKind::kTrained, m, p_miss};
  }
  static AIModelSpec random() { return {AiKind::kRandom, uniform_confusion(), 0.0}; }
  static AIModelSpec naive() {
    return {AiKind::kNaive,
            ConfusionMatrix{{{1, 0, 0, 0}, {1, 0, 0, 0}, {1, 0, 0, 0}, {1, 0, 0, 0}}},
            0.0};
  }
};

/// One AI reading; nullopt means the whole patient-visit is unreadable.
inline std::optional<CornerVector> read_ai(const CornerVector& truth, const AIModelSpec& spec,
                                           RngStream rng) {
  const double u_miss = rng.child(streams::kStageMissing).next_unit();
  if (u_miss < spec.patient_missingness_prob) return std::nullopt;

  RngStream grades = rng.child(streams::kStageRead);
  CornerVector out;
  switch (spec.kind) {
    case AiKind::kNaive:
      out = uniform_corners(0);
      break;
    case AiKind::kRandom:
      for (int i = 0; i < kCornerCount; ++i)
        out[i] = CornerScore(static_cast<int>(grades.next_index(4)));
      break;
    case AiKind::kTrained:
      for (int i = 0; i < kCornerCount; ++i) {
        const auto& row = spec.confusion[static_cast<std::size_t>(truth[i].grade())];
        const double u = grades.next_unit();
        double acc = 0.0;
        int read = kMaxGrade;
        for (int k = 0; k <= kMaxGrade; ++k) {
          acc += row[static_cast<std::size_t>(k)];
          if (u < acc) {
            read = k;
            break;
          }
        }
        out[i] = CornerScore(read);
      }
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Human-noise calibration
// ---------------------------------------------------------------------------

namespace detail {

/// Disagreement rate of a two-human workflow at a given epsilon, over a
/// fixed simulated batch of patient-visits (both visits per patient).
inline double two_reader_disagreement_rate(double epsilon, const std::vector<PatientTruth>& cohort,
                                           const DisagreementRule& rule, RngStream reads_root) {
  const HumanReaderParams params{epsilon};
  std::int64_t disagreements = 0, units = 0;
  for (const auto& p : cohort) {
    for (int visit = 0; visit < 2; ++visit) {
      const CornerVector& truth = (visit == 0) ? p.baseline : p.week104;
      RngStream unit =
          reads_root.child(static_cast<std::uint64_t>(p.patient_id)).child(static_cast<std::uint64_t>(visit));
      const TotalScore t1 = total_score(read_human(truth, params, unit.child(streams::kRoleHuman1)));
      const TotalScore t2 = total_score(read_human(truth, params, unit.child(streams::kRoleHuman2)));
      disagreements += is_disagreement(t1, t2, rule) ? 1 : 0;
      ++units;
    }
  }
  return static_cast<double>(disagreements) / static_cast<double>(units);
}

}  // namespace detail

/// Find the per-corner error rate whose simulated two-reader arbitration
/// rate lands within two percentage points of the target. Bisection over a
/// bracket grown from zero, each step evaluated on a fixed >= 10^4-unit
/// Monte-Carlo batch with common random numbers (so the rate is a stable,
/// monotone function of epsilon across steps).
inline HumanReaderParams calibrate_human_noise(double target_arbitration_rate,
                                               const PopulationSpec& cohort_spec,
                                               const DisagreementRule& rule, RngStream rng,
                                               double tolerance = 0.02) {
  if (!(target_arbitration_rate > 0.0 && target_arbitration_rate < 1.0))
    throw Error("calibrate_human_noise: target must be in (0,1)");
  if (rule.mode != DisagreementRule::Mode::kThreshold)
    throw Error("calibrate_human_noise: requires a threshold-mode rule");

  PopulationSpec batch_spec = cohort_spec;
  batch_spec.n_patients = 6000;  // 12000 reading units per evaluation
  const auto cohort = sample_cohort(batch_spec, rng.child(streams::kRealmCohort));
  RngStream reads_root = rng.child(streams::kRealmReads);

  auto rate_at = [&](double eps) {
    return detail::two_reader_disagreement_rate(eps, cohort, rule, reads_root);
  };

  const double rate_zero = rate_at(0.0);
  if (std::abs(rate_zero - target_arbitration_rate) <= tolerance) return HumanReaderParams{0.0};
  if (target_arbitration_rate < rate_zero)
    throw Unachievable("calibrate_human_noise: target below the zero-noise rate");

  // Grow the upper bracket; the kernel saturates near epsilon = 1 (reads of
  // all-zero patients become deterministic again), so the reachable maximum
  // may sit strictly inside [0,1].
  double lo = 0.0, hi = 0.0;
  double rate_hi = rate_zero;
  for (double probe : {0.02, 0.05, 0.1, 0.2, 0.4, 0.7, 1.0}) {
    hi = probe;
    rate_hi = rate_at(hi);
    if (rate_hi >= target_arbitration_rate) break;
    lo = probe;
  }
  if (rate_hi < target_arbitration_rate)
    throw Unachievable("calibrate_human_noise: target above the reachable disagreement rate");

  double eps = hi, rate = rate_hi;
  for (int iter = 0; iter < 60; ++iter) {
    eps = 0.5 * (lo + hi);
    rate = rate_at(eps);
    if (std::abs(rate - target_arbitration_rate) <= tolerance * 0.5) break;
    if (rate < target_arbitration_rate)
      lo = eps;
    else
      hi = eps;
  }
  if (std::abs(rate - target_arbitration_rate) > tolerance)
    throw Unachievable("calibrate_human_noise: bisection did not reach tolerance (rate " +
                       std::to_string(rate) + ")");
  return HumanReaderParams{eps};
}

}  // namespace readsim
