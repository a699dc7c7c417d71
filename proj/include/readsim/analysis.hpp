#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "readsim/cohort.hpp"
#include "readsim/errors.hpp"
#include "readsim/workflow.hpp"

namespace readsim {

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the regularized incomplete beta (Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

/// Two-sided tail probability of Student's t.
inline double t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) return 1.0;
  if (std::isinf(t)) return 0.0;
  return reg_inc_beta(df / 2.0, 0.5, df / (df + t * t));
}

inline double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_sd(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Arm summaries
// ---------------------------------------------------------------------------

/// One patient's consensus endpoints across both visits.
struct PatientEndpoints {
  int patient_id = 0;
  Arm arm = Arm::kTreatment;
  double baseline = 0.0;
  double week104 = 0.0;

  [[nodiscard]] double worsening() const { return week104 - baseline; }
};

struct ConsensusRecord {
  int patient_id = 0;
  Arm arm = Arm::kTreatment;
  Visit visit = Visit::kBaseline;
  double consensus = 0.0;
};

/// Pair per-visit consensus records into per-patient endpoints; a patient
/// with one visit missing is an error.
inline std::vector<PatientEndpoints> pair_visits(std::span<const ConsensusRecord> records) {
  struct Partial {
    Arm arm;
    std::optional<double> baseline, week104;
  };
  std::map<int, Partial> by_patient;
  for (const auto& r : records) {
    auto& p = by_patient[r.patient_id];
    p.arm = r.arm;
    if (r.visit == Visit::kBaseline)
      p.baseline = r.consensus;
    else
      p.week104 = r.consensus;
  }
  std::vector<PatientEndpoints> out;
  out.reserve(by_patient.size());
  for (const auto& [id, p] : by_patient) {
    if (!p.baseline || !p.week104)
      throw MissingVisit("pair_visits: patient " + std::to_string(id) + " lacks a visit");
    out.push_back({id, p.arm, *p.baseline, *p.week104});
  }
  return out;
}

/// Table-3-style row: mean(SD) of baseline, week-104 and worsening for one
/// arm. Sample SD (n-1 denominator), so n >= 2 per arm.
struct ArmSummary {
  Arm arm = Arm::kTreatment;
  int n = 0;
  double baseline_mean = 0.0, baseline_sd = 0.0;
  double week104_mean = 0.0, week104_sd = 0.0;
  double worsening_mean = 0.0, worsening_sd = 0.0;
};

inline std::vector<ArmSummary> summarize_arms(std::span<const PatientEndpoints> patients) {
  std::vector<ArmSummary> out;
  for (Arm arm : {Arm::kTreatment, Arm::kControl}) {
    std::vector<double> base, week, wors;
    for (const auto& p : patients) {
      if (p.arm != arm) continue;
      base.push_back(p.baseline);
      week.push_back(p.week104);
      wors.push_back(p.worsening());
    }
    if (base.size() < 2)
      throw InsufficientData(std::string("summarize_arms: arm '") + arm_name(arm) +
                             "' has fewer than 2 patients");
    ArmSummary s;
    s.arm = arm;
    s.n = static_cast<int>(base.size());
    s.baseline_mean = detail::mean_of(base);
    s.baseline_sd = detail::sample_sd(base, s.baseline_mean);
    s.week104_mean = detail::mean_of(week);
    s.week104_sd = detail::sample_sd(week, s.week104_mean);
    s.worsening_mean = detail::mean_of(wors);
    s.worsening_sd = detail::sample_sd(wors, s.worsening_mean);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Welch's t-test
// ---------------------------------------------------------------------------

struct WelchResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  bool significant = false;
};

/// Welch's two-sided t-test from summary statistics.
inline WelchResult welch_from_summary(double mean_a, double sd_a, int n_a, double mean_b,
                                      double sd_b, int n_b, double alpha = 0.05) {
  if (n_a < 2 || n_b < 2)
    throw InsufficientData("welch_from_summary: both samples need n >= 2");
  const double va = sd_a * sd_a / n_a;
  const double vb = sd_b * sd_b / n_b;
  const double se2 = va + vb;
  WelchResult r;
  r.alpha = alpha;
  if (se2 <= 0.0) {
    // Degenerate samples: equal constants are indistinguishable, unequal
    // constants are separated with certainty.
    r.t_statistic = (mean_a == mean_b)
                        ? 0.0
                        : std::copysign(std::numeric_limits<double>::infinity(), mean_a - mean_b);
    r.degrees_of_freedom = static_cast<double>(n_a + n_b - 2);
    r.p_value = (mean_a == mean_b) ? 1.0 : 0.0;
  } else {
    r.t_statistic = (mean_a - mean_b) / std::sqrt(se2);
    r.degrees_of_freedom = se2 * se2 / (va * va / (n_a - 1) + vb * vb / (n_b - 1));
    r.p_value = detail::t_two_sided_p(r.t_statistic, r.degrees_of_freedom);
  }
  r.significant = r.p_value < alpha;
  return r;
}

inline WelchResult welch_test(std::span<const double> sample_a, std::span<const double> sample_b,
                              double alpha = 0.05) {
  if (sample_a.size() < 2 || sample_b.size() < 2)
    throw InsufficientData("welch_test: both samples need n >= 2");
  const double ma = detail::mean_of(sample_a);
  const double mb = detail::mean_of(sample_b);
  return welch_from_summary(ma, detail::sample_sd(sample_a, ma), static_cast<int>(sample_a.size()),
                            mb, detail::sample_sd(sample_b, mb), static_cast<int>(sample_b.size()),
                            alpha);
}

// ---------------------------------------------------------------------------
// Distribution views
// ---------------------------------------------------------------------------

/// Right-continuous empirical CDF over the sample.
class EcdfCurve {
 public:
  explicit EcdfCurve(std::span<const double> values) {
    if (values.empty()) throw EmptyInput("ecdf: empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (!xs_.empty() && xs_.back() == sorted[i]) {
        fractions_.back() = static_cast<double>(i + 1) / n;
      } else {
        xs_.push_back(sorted[i]);
        fractions_.push_back(static_cast<double>(i + 1) / n);
      }
    }
  }

  /// P(X <= x).
  [[nodiscard]] double fraction_at(double x) const {
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    if (it == xs_.begin()) return 0.0;
    return fractions_[static_cast<std::size_t>(it - xs_.begin() - 1)];
  }

  /// P(X < x), the left limit at x.
  [[nodiscard]] double fraction_below(double x) const {
    const auto it = std::lower_bound(xs_.begin(), xs_.end(), x);
    if (it == xs_.begin()) return 0.0;
    return fractions_[static_cast<std::size_t>(it - xs_.begin() - 1)];
  }

  [[nodiscard]] const std::vector<double>& support() const { return xs_; }
  [[nodiscard]] const std::vector<double>& fractions() const { return fractions_; }

 private:
  std::vector<double> xs_;
  std::vector<double> fractions_;
};

inline EcdfCurve ecdf(std::span<const double> values) { return EcdfCurve(values); }

/// Histogram with left-closed right-open bins; the final bin also takes
/// values equal to the last edge. Values outside the edges are not counted.
inline std::vector<std::int64_t> worsening_histogram(std::span<const double> values,
                                                     std::span<const double> bin_edges) {
  if (bin_edges.size() < 2) throw UnsortedEdges("worsening_histogram: need at least two edges");
  for (std::size_t i = 1; i < bin_edges.size(); ++i)
    if (!(bin_edges[i] > bin_edges[i - 1]))
      throw UnsortedEdges("worsening_histogram: edges must be strictly increasing");

  std::vector<std::int64_t> counts(bin_edges.size() - 1, 0);
  for (double v : values) {
    if (v < bin_edges.front() || v > bin_edges.back()) continue;
    if (v == bin_edges.back()) {
      ++counts.back();
      continue;
    }
    const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v);
    ++counts[static_cast<std::size_t>(it - bin_edges.begin() - 1)];
  }
  return counts;
}

/// Fraction of patients with worsening at or above the threshold;
/// equals 1 - P(X < threshold) by construction.
inline double progression_rate(std::span<const double> worsenings, double threshold = 2.0) {
  if (worsenings.empty()) throw EmptyInput("progression_rate: empty sample");
  std::int64_t count = 0;
  for (double w : worsenings) count += (w >= threshold) ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(worsenings.size());
}

// ---------------------------------------------------------------------------
// Cross-framework consistency
// ---------------------------------------------------------------------------

struct FrameworkAnalysis {
  std::string framework;
  WelchResult test;
  std::vector<ArmSummary> arms;
};

struct FrameworkDeviation {
  std::string framework;
  double worsening_dev_treatment = 0.0;  // vs the reference framework
  double worsening_dev_control = 0.0;
};

struct ConsistencyReport {
  bool consistent = true;       // same significance conclusion everywhere
  std::string reference;        // usually HDR
  std::vector<std::string> offenders;
  std::vector<FrameworkDeviation> deviations;
};

inline ConsistencyReport framework_consistency_report(
    std::span<const FrameworkAnalysis> frameworks, const std::string& reference_name = "HDR") {
  if (frameworks.size() < 2)
    throw InsufficientData("framework_consistency_report: need at least two frameworks");

  const FrameworkAnalysis* ref = nullptr;
  for (const auto& f : frameworks)
    if (f.framework == reference_name) ref = &f;
  if (!ref) ref = &frameworks[0];

  auto arm_mean = [](const FrameworkAnalysis& f, Arm arm) {
    for (const auto& s : f.arms)
      if (s.arm == arm) return s.worsening_mean;
    throw MissingVisit("framework_consistency_report: missing arm summary");
  };

  ConsistencyReport report;
  report.reference = ref->framework;
  for (const auto& f : frameworks) {
    if (f.test.significant != ref->test.significant) {
      report.consistent = false;
      report.offenders.push_back(f.framework);
    }
    report.deviations.push_back(
        {f.framework, arm_mean(f, Arm::kTreatment) - arm_mean(*ref, Arm::kTreatment),
         arm_mean(f, Arm::kControl) - arm_mean(*ref, Arm::kControl)});
  }
  return report;
}

}  // namespace readsim
