#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "readsim/errors.hpp"
#include "readsim/rng.hpp"
#include "readsim/scoring.hpp"

namespace readsim {

enum class Arm { kTreatment, kControl };

inline const char* arm_name(Arm a) { return a == Arm::kTreatment ? "treatment" : "control"; }

/// Patient-level disease extent: a healthy point mass at zero plus a Beta
/// law over the fraction of corners carrying structural change. The two
/// levels are what let a heavily zero-inflated corner marginal coexist
/// with heavy-tailed patient totals.
struct SeverityMixture {
  double healthy_fraction = 0.0;  // P(patient has all-zero corners by construction)
  double alpha = 1.0;             // Beta shape of per-corner damage probability
  double beta = 1.0;
};

/// True per-patient worsening budget: zero for most patients, a geometric
/// jump for the few progressors. Heavy tail is deliberate (SD >> mean).
struct ProgressionParams {
  double progressor_fraction = 0.0;  // P(budget > 0)
  double mean_jump = 1.0;            // mean of the geometric jump, given > 0
};

struct PopulationSpec {
  int n_patients = 0;
  std::array<int, 2> allocation_ratio = {2, 1};  // treatment : control
  SeverityMixture severity;
  // Grade mix for affected corners (classes 1..3, normalized internally)
  // and the pooled-marginal calibration target.
  std::array<double, 4> corner_marginal = {1.0, 0.0, 0.0, 0.0};
  ProgressionParams progression_treatment;
  ProgressionParams progression_control;

  void validate() const {
    if (n_patients < 0) throw ValidationError("PopulationSpec: n_patients must be >= 0");
    if (allocation_ratio[0] <= 0 || allocation_ratio[1] <= 0)
      throw ValidationError("PopulationSpec: allocation ratio parts must be positive");
    double sum = 0.0;
    for (double p : corner_marginal) {
      if (p < 0.0) throw ValidationError("PopulationSpec: corner_marginal entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw ValidationError("PopulationSpec: corner_marginal must sum to 1");
    if (severity.healthy_fraction < 0.0 || severity.healthy_fraction > 1.0)
      throw ValidationError("PopulationSpec: healthy_fraction must be in [0,1]");
    if (severity.alpha <= 0.0 || severity.beta <= 0.0)
      throw ValidationError("PopulationSpec: severity Beta shapes must be positive");
    for (const auto* p : {&progression_treatment, &progression_control}) {
      if (p->progressor_fraction < 0.0 || p->progressor_fraction > 1.0)
        throw ValidationError("PopulationSpec: progressor_fraction must be in [0,1]");
      if (p->mean_jump < 1.0)
        throw ValidationError("PopulationSpec: mean_jump must be >= 1");
    }
  }
};

struct PatientTruth {
  int patient_id = 0;
  Arm arm = Arm::kTreatment;
  CornerVector baseline;
  CornerVector week104;
};

namespace detail {

/// Grade distribution of an affected corner: classes 1..3 of the marginal,
/// renormalized.
inline std::array<double, 3> affected_grade_mix(const PopulationSpec& spec) {
  const double mass =
      spec.corner_marginal[1] + spec.corner_marginal[2] + spec.corner_marginal[3];
  if (mass <= 0.0) return {1.0, 0.0, 0.0};
  return {spec.corner_marginal[1] / mass, spec.corner_marginal[2] / mass,
          spec.corner_marginal[3] / mass};
}

inline int sample_affected_grade(const std::array<double, 3>& mix, double u) {
  if (u < mix[0]) return 1;
  if (u < mix[0] + mix[1]) return 2;
  return 3;
}

}  // namespace detail

/// Draw one patient's latent baseline reading.
inline CornerVector sample_patient_baseline(const PopulationSpec& spec, RngStream rng) {
  CornerVector corners = uniform_corners(0);
  if (rng.bernoulli(spec.severity.healthy_fraction)) return corners;

  const double damage = rng.beta(spec.severity.alpha, spec.severity.beta);
  const auto mix = detail::affected_grade_mix(spec);
  for (int i = 0; i < kCornerCount; ++i) {
    const bool affected = rng.bernoulli(damage);
    const double u_grade = rng.next_unit();  // drawn unconditionally, keeps streams aligned
    if (affected) corners[i] = CornerScore(detail::sample_affected_grade(mix, u_grade));
  }
  return corners;
}

/// Advance a baseline truth to week 104: draw a nonnegative worsening
/// budget and spend it one grade at a time on randomly chosen corners.
/// Truth never improves; saturated corners absorb nothing.
inline CornerVector progress_patient(const CornerVector& baseline, Arm arm,
                                     const PopulationSpec& spec, RngStream rng) {
  const ProgressionParams& prog =
      (arm == Arm::kTreatment) ? spec.progression_treatment : spec.progression_control;
  CornerVector week104 = baseline;

  std::uint64_t budget = 0;
  if (rng.bernoulli(prog.progressor_fraction)) budget = rng.geometric(prog.mean_jump);

  for (std::uint64_t step = 0; step < budget; ++step) {
    int open[kCornerCount];
    int n_open = 0;
    for (int i = 0; i < kCornerCount; ++i)
      if (week104[i].grade() < kMaxGrade) open[n_open++] = i;
    if (n_open == 0) break;
    const int pick = open[rng.next_index(static_cast<std::uint32_t>(n_open))];
    week104[pick] = CornerScore(week104[pick].grade() + 1);
  }
  return week104;
}

/// Exact integer arm split by largest-remainder rounding of the ratio.
inline std::array<int, 2> arm_counts(int n, std::array<int, 2> ratio) {
  const double denom = static_cast<double>(ratio[0] + ratio[1]);
  const double quota_t = n * ratio[0] / denom;
  const double quota_c = n * ratio[1] / denom;
  int n_t = static_cast<int>(std::floor(quota_t));
  int n_c = static_cast<int>(std::floor(quota_c));
  if (n_t + n_c < n) {
    if (quota_t - n_t >= quota_c - n_c)
      ++n_t;
    else
      ++n_c;
  }
  return {n_t, n_c};
}

/// Sample a full cohort with stable dense patient ids. Per-patient
/// substreams make the result identical whether generated serially or in
/// shards.
inline std::vector<PatientTruth> sample_cohort(const PopulationSpec& spec, RngStream rng) {
  spec.validate();
  const auto counts = arm_counts(spec.n_patients, spec.allocation_ratio);
  std::vector<PatientTruth> cohort;
  cohort.reserve(static_cast<std::size_t>(spec.n_patients));
  for (int id = 0; id < spec.n_patients; ++id) {
    PatientTruth p;
    p.patient_id = id;
    p.arm = (id < counts[0]) ? Arm::kTreatment : Arm::kControl;
    RngStream patient = rng.child(static_cast<std::uint64_t>(id));
    p.baseline = sample_patient_baseline(spec, patient.child(streams::kStageBaseline));
    p.week104 =
        progress_patient(p.baseline, p.arm, spec, patient.child(streams::kStageProgression));
    cohort.push_back(p);
  }
  return cohort;
}

/// MEASURE-1-like preset: corner marginal near (0.81, 0.03, 0.05, 0.11),
/// patient totals near mean 10.5 / SD 17, worsening means 0.54 / 0.91.
inline PopulationSpec measure1_like() {
  PopulationSpec spec;
  spec.n_patients = 361;
  spec.allocation_ratio = {2, 1};
  spec.severity = {0.40, 0.318031, 0.737934};
  spec.corner_marginal = {0.819294, 0.028533, 0.047554, 0.104620};
  spec.progression_treatment = {0.0456, 11.84};
  spec.progression_control = {0.0769, 11.84};
  return spec;
}

/// PREVENT-like preset: much milder population, over 90% of patients with
/// zero total, totals near mean 0.8, near-zero worsening in both arms.
inline PopulationSpec prevent_like() {
  PopulationSpec spec;
  spec.n_patients = 555;
  spec.allocation_ratio = {2, 1};
  spec.severity = {0.92, 12.0, 52.0};
  spec.corner_marginal = {0.985, 0.004, 0.004, 0.007};
  spec.progression_treatment = {0.0058, 5.17};
  spec.progression_control = {0.0058, 5.17};
  return spec;
}

inline std::optional<PopulationSpec> preset_by_name(const std::string& name) {
  if (name == "measure1-like") return measure1_like();
  if (name == "prevent-like") return prevent_like();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Population calibration
// ---------------------------------------------------------------------------

struct PopulationTargets {
  std::array<double, 4> corner_marginal = {0.81, 0.03, 0.05, 0.11};
  double total_mean = 10.3;
  double total_sd = 17.1;
  double worsening_mean_treatment = 0.54;
  double worsening_mean_control = 0.91;
  double worsening_sd = 4.5;                       // overdispersion target
  std::optional<double> zero_total_fraction;       // optional: min share of all-zero patients
  int n_patients = 361;
  std::array<int, 2> allocation_ratio = {2, 1};
};

struct CalibrationGates {
  double marginal_abs = 0.02;   // per class
  double total_mean_abs = 1.0;
  double worsening_mean_abs = 0.2;
  int eval_patients = 20000;    // Monte-Carlo cohort size per evaluation step
};

namespace detail {

struct CohortMoments {
  std::array<double, 4> marginal{};
  double total_mean = 0.0;
  double total_sd = 0.0;
  double zero_fraction = 0.0;
  double worsening_mean_treatment = 0.0;
  double worsening_mean_control = 0.0;
};

inline CohortMoments measure_cohort(const PopulationSpec& spec, RngStream rng) {
  CohortMoments m;
  const auto cohort = sample_cohort(spec, rng);
  if (cohort.empty()) return m;
  std::array<std::int64_t, 4> counts{};
  double sum = 0.0, sum2 = 0.0;
  std::int64_t zeros = 0;
  double wors_sum[2] = {0.0, 0.0};
  std::int64_t wors_n[2] = {0, 0};
  for (const auto& p : cohort) {
    int t = 0;
    for (auto c : p.baseline) {
      ++counts[static_cast<std::size_t>(c.grade())];
      t += c.grade();
    }
    sum += t;
    sum2 += static_cast<double>(t) * t;
    if (t == 0) ++zeros;
    const double w = total_score(p.week104).value() - t;
    const int a = (p.arm == Arm::kTreatment) ? 0 : 1;
    wors_sum[a] += w;
    ++wors_n[a];
  }
  const double n = static_cast<double>(cohort.size());
  for (std::size_t k = 0; k < 4; ++k) m.marginal[k] = counts[k] / (n * kCornerCount);
  m.total_mean = sum / n;
  m.total_sd = std::sqrt(std::max(0.0, sum2 / n - m.total_mean * m.total_mean));
  m.zero_fraction = zeros / n;
  m.worsening_mean_treatment = wors_n[0] ? wors_sum[0] / wors_n[0] : 0.0;
  m.worsening_mean_control = wors_n[1] ? wors_sum[1] / wors_n[1] : 0.0;
  return m;
}

/// Solve Beta(a,b) from the first two raw moments of s.
inline std::optional<std::array<double, 2>> beta_from_moments(double e1, double e2) {
  if (!(e1 > 0.0 && e1 < 1.0)) return std::nullopt;
  if (!(e2 > e1 * e1 && e2 < e1)) return std::nullopt;
  const double ratio = e2 / e1;  // equals (a+1)/(a+b+1)
  const double a = (ratio - 1.0) / (1.0 - ratio / e1);
  if (!(a > 0.0)) return std::nullopt;
  const double b = a * (1.0 - e1) / e1;
  if (!(b > 0.0)) return std::nullopt;
  return std::array<double, 2>{a, b};
}

inline double expected_all_clear(double a, double b, RngStream rng) {
  // E[(1-s)^24] over Beta(a,b), by plain Monte Carlo.
  constexpr int kDraws = 40000;
  double acc = 0.0;
  for (int i = 0; i < kDraws; ++i)
    acc += std::pow(1.0 - rng.beta(a, b), kCornerCount);
  return acc / kDraws;
}

}  // namespace detail

/// Fit a PopulationSpec to the targets: an analytic moment solve for the
/// severity mixture, then bounded Monte-Carlo correction rounds for the
/// progression means. Gates follow `CalibrationGates`; failure reports the
/// best residuals seen.
inline PopulationSpec calibrate_population(const PopulationTargets& targets, RngStream rng,
                                           const CalibrationGates& gates = {}) {
  const auto& pi = targets.corner_marginal;
  double pi_sum = pi[0] + pi[1] + pi[2] + pi[3];
  if (std::abs(pi_sum - 1.0) > 1e-6)
    throw ValidationError("calibrate_population: corner_marginal must sum to 1");
  const double mass = pi[1] + pi[2] + pi[3];
  if (mass <= 0.0)
    throw ValidationError("calibrate_population: corner_marginal has no disease mass");

  const double mean_grade = pi[1] + 2.0 * pi[2] + 3.0 * pi[3];
  const double implied_mean = kCornerCount * mean_grade;

  // Blend the generative marginal toward the total-mean target, staying
  // within the per-class marginal gate (margin left for Monte-Carlo noise).
  const double lambda_ideal = targets.total_mean / implied_mean;
  const double lambda_slack = (gates.marginal_abs * 0.75) / mass;
  const double lambda =
      std::clamp(lambda_ideal, 1.0 - lambda_slack, 1.0 + lambda_slack);

  PopulationSpec spec;
  spec.n_patients = targets.n_patients;
  spec.allocation_ratio = targets.allocation_ratio;
  spec.corner_marginal = {1.0 - lambda * mass, lambda * pi[1], lambda * pi[2], lambda * pi[3]};

  // Moments of the per-corner damage probability implied by the targets.
  const double mu_g = mean_grade / mass;                            // mean affected grade
  const double m2_g = (pi[1] + 4.0 * pi[2] + 9.0 * pi[3]) / mass;   // second moment
  const double q_es = lambda * mass;                                // (1-f_h) * E[s]
  const double total_mean = kCornerCount * q_es * mu_g;
  const double total_m2_target = targets.total_sd * targets.total_sd + total_mean * total_mean;
  const double c1 = kCornerCount * m2_g * q_es;
  const double c2 = (static_cast<double>(kCornerCount) * kCornerCount - kCornerCount) *
                    mu_g * mu_g;
  double q_es2 = (total_m2_target - c1) / c2;
  // Feasibility floor: E[s^2] >= E[s]^2 requires q*E[s^2] >= (q*E[s])^2 / q.
  q_es2 = std::max(q_es2, q_es * q_es * 1.02);
  q_es2 = std::min(q_es2, q_es * 0.999);

  // Severity mixture: choose the healthy fraction, then solve the Beta
  // shape from the conditional moments. With a zero-fraction target the
  // healthy fraction is searched and the SD target turns soft (a high zero
  // share plus a fixed mean pins the dispersion; the gates do not include
  // the SD, so the trade goes to the zero fraction).
  auto solve_mixture = [&](double f_h, bool relax_sd) -> std::optional<SeverityMixture> {
    const double q = 1.0 - f_h;
    if (q <= q_es * 1.001) return std::nullopt;
    const double e1 = q_es / q;
    double e2 = q_es2 / q;
    if (relax_sd) e2 = std::clamp(e2, e1 * e1 * 1.05, e1 * 0.995);
    const auto ab = detail::beta_from_moments(e1, e2);
    if (!ab) return std::nullopt;
    return SeverityMixture{f_h, (*ab)[0], (*ab)[1]};
  };

  std::optional<SeverityMixture> mixture;
  if (targets.zero_total_fraction) {
    double best_gap = 1e9;
    for (int i = 0; i <= 195; ++i) {
      const double f_h = 0.005 * i;
      auto cand = solve_mixture(f_h, true);
      if (!cand) continue;
      const double p0 = f_h + (1.0 - f_h) * detail::expected_all_clear(
                                                cand->alpha, cand->beta,
                                                rng.child(streams::kRealmCalibration).child(i));
      const double gap = std::abs(p0 - *targets.zero_total_fraction);
      if (p0 >= *targets.zero_total_fraction && gap < best_gap) {
        best_gap = gap;
        mixture = cand;
      }
    }
    if (!mixture)
      throw CalibrationFailed(
          "calibrate_population: no severity mixture reaches the zero-total fraction");
  } else {
    const double ratio = q_es2 / q_es;  // = E[s^2]/E[s], healthy-fraction free
    for (double scale : {0.65, 0.5, 0.8, 0.35, 0.9}) {
      mixture = solve_mixture(std::clamp(1.0 - q_es / (scale * ratio), 0.0, 0.98), false);
      if (mixture) break;
    }
    if (!mixture)
      throw CalibrationFailed("calibrate_population: severity moment solve infeasible");
  }
  spec.severity = *mixture;

  // Progression: geometric jump size from the overdispersion target,
  // progressor fractions from the arm means.
  const double w_ref = std::max(targets.worsening_mean_control, 1e-6);
  const double mean_jump = std::max(
      1.0, 0.5 * ((targets.worsening_sd * targets.worsening_sd + w_ref * w_ref) / w_ref + 1.0));
  spec.progression_treatment = {
      std::clamp(targets.worsening_mean_treatment / mean_jump, 0.0, 1.0), mean_jump};
  spec.progression_control = {
      std::clamp(targets.worsening_mean_control / mean_jump, 0.0, 1.0), mean_jump};

  // Monte-Carlo correction rounds: nudge progressor fractions for
  // saturation losses, then check every gate.
  PopulationSpec eval_spec = spec;
  eval_spec.n_patients = gates.eval_patients;
  std::string residuals;
  for (int round = 0; round < 6; ++round) {
    const auto m = detail::measure_cohort(eval_spec, rng.child(100 + round));
    bool ok = true;
    residuals.clear();
    for (std::size_t k = 0; k < 4; ++k) {
      const double dev = std::abs(m.marginal[k] - pi[k]);
      if (dev > gates.marginal_abs) {
        ok = false;
        residuals += " marginal[" + std::to_string(k) + "] dev=" + std::to_string(dev);
      }
    }
    if (std::abs(m.total_mean - targets.total_mean) > gates.total_mean_abs) {
      ok = false;
      residuals += " total_mean=" + std::to_string(m.total_mean);
    }
    const double dev_t = m.worsening_mean_treatment - targets.worsening_mean_treatment;
    const double dev_c = m.worsening_mean_control - targets.worsening_mean_control;
    if (std::abs(dev_t) > gates.worsening_mean_abs || std::abs(dev_c) > gates.worsening_mean_abs) {
      ok = false;
      residuals += " worsening_dev=(" + std::to_string(dev_t) + "," + std::to_string(dev_c) + ")";
      auto nudge = [](ProgressionParams& p, double achieved, double target) {
        if (achieved > 1e-9) p.progressor_fraction =
            std::clamp(p.progressor_fraction * target / achieved, 0.0, 1.0);
      };
      nudge(eval_spec.progression_treatment, m.worsening_mean_treatment,
            targets.worsening_mean_treatment);
      nudge(eval_spec.progression_control, m.worsening_mean_control,
            targets.worsening_mean_control);
    }
    if (ok) {
      spec.severity = eval_spec.severity;
      spec.progression_treatment = eval_spec.progression_treatment;
      spec.progression_control = eval_spec.progression_control;
      return spec;
    }
  }
  throw CalibrationFailed("calibrate_population: gates not met after correction rounds;" +
                          residuals);
}

}  // namespace readsim
