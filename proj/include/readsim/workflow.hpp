#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "readsim/cohort.hpp"
#include "readsim/economics.hpp"
#include "readsim/errors.hpp"
#include "readsim/readers.hpp"
#include "readsim/rng.hpp"
#include "readsim/scoring.hpp"

namespace readsim {

enum class FrameworkKind { kHdr, kAiIr, kAiSr };

inline const char* framework_name(FrameworkKind k) {
  switch (k) {
    case FrameworkKind::kHdr: return "HDR";
    case FrameworkKind::kAiIr: return "AI_IR";
    case FrameworkKind::kAiSr: return "AI_SR";
  }
  return "?";
}

inline std::optional<FrameworkKind> framework_by_name(const std::string& name) {
  if (name == "HDR") return FrameworkKind::kHdr;
  if (name == "AI_IR") return FrameworkKind::kAiIr;
  if (name == "AI_SR") return FrameworkKind::kAiSr;
  return std::nullopt;
}

enum class Visit { kBaseline = 0, kWeek104 = 1 };

inline const char* visit_name(Visit v) { return v == Visit::kBaseline ? "baseline" : "week104"; }

enum class ReaderRole { kHuman1, kHuman2, kArbitrator, kAi };

inline const char* role_name(ReaderRole r) {
  switch (r) {
    case ReaderRole::kHuman1: return "human1";
    case ReaderRole::kHuman2: return "human2";
    case ReaderRole::kArbitrator: return "arbitrator";
    case ReaderRole::kAi: return "ai";
  }
  return "?";
}

struct WorkflowConfig {
  FrameworkKind framework = FrameworkKind::kHdr;
  DisagreementRule disagreement = DisagreementRule::threshold(0);
  PoolingPolicy pooling = PoolingPolicy::kMeanOfAllReads;
  std::optional<AIModelSpec> ai;  // absent for HDR
  HumanReaderParams human_first;
  HumanReaderParams human_second;
  HumanReaderParams human_arbitrator;

  void validate() const {
    if (framework != FrameworkKind::kHdr && !ai)
      throw ValidationError("WorkflowConfig: AI frameworks require an AI model spec");
  }
};

struct ReadRecord {
  ReaderRole role;
  std::optional<double> total;  // nullopt: AI declared the visit unreadable
};

struct WorkflowOutcome {
  int patient_id = 0;
  Visit visit = Visit::kBaseline;
  FrameworkKind framework = FrameworkKind::kHdr;
  std::vector<ReadRecord> reads_taken;
  bool used_second_human = false;
  bool used_arbitration = false;
  bool ai_missing = false;
  double consensus = 0.0;
};

namespace detail {

/// Disagreement check bound to a run: threshold rules evaluate directly,
/// percentile rules compare against the batch cut computed in the first
/// pass over the run's first-stage reads.
struct DisagreementContext {
  DisagreementRule rule;
  std::optional<double> batch_cut;

  [[nodiscard]] bool check(TotalScore a, TotalScore b) const {
    if (rule.mode == DisagreementRule::Mode::kThreshold) return is_disagreement(a, b, rule);
    if (!batch_cut)
      throw MissingBatchContext("percentile disagreement rule outside a batch run");
    return std::abs(a.value() - b.value()) >= *batch_cut;
  }
};

/// Derive the stream for one reader of one patient-visit. Shared by every
/// framework: comparisons between frameworks on the same cohort see the
/// same human reads.
inline RngStream reader_stream(RngStream reads_root, int patient_id, Visit visit,
                               std::uint64_t role_key) {
  return reads_root.child(static_cast<std::uint64_t>(patient_id))
      .child(static_cast<std::uint64_t>(visit))
      .child(role_key);
}

inline WorkflowOutcome run_hdr_unit(const CornerVector& truth, const WorkflowConfig& cfg,
                                    RngStream reads_root, int patient_id, Visit visit,
                                    const DisagreementContext& ctx) {
  WorkflowOutcome out;
  out.patient_id = patient_id;
  out.visit = visit;
  out.framework = FrameworkKind::kHdr;

  const TotalScore t1 = total_score(read_human(
      truth, cfg.human_first, reader_stream(reads_root, patient_id, visit, streams::kRoleHuman1)));
  const TotalScore t2 = total_score(read_human(
      truth, cfg.human_second, reader_stream(reads_root, patient_id, visit, streams::kRoleHuman2)));
  out.reads_taken.push_back({ReaderRole::kHuman1, t1.value()});
  out.reads_taken.push_back({ReaderRole::kHuman2, t2.value()});
  out.used_second_human = true;  // both humans always read

  std::vector<TotalScore> pool = {t1, t2};
  std::optional<std::size_t> arb_index;
  if (ctx.check(t1, t2)) {
    const TotalScore t_arb = total_score(
        read_human(truth, cfg.human_arbitrator,
                   reader_stream(reads_root, patient_id, visit, streams::kRoleArbitrator)));
    out.reads_taken.push_back({ReaderRole::kArbitrator, t_arb.value()});
    out.used_arbitration = true;
    arb_index = pool.size();
    pool.push_back(t_arb);
  }
  out.consensus = pool_consensus(pool, cfg.pooling, arb_index).value();
  return out;
}

inline WorkflowOutcome run_ai_ir_unit(const CornerVector& truth, const WorkflowConfig& cfg,
                                      RngStream reads_root, int patient_id, Visit visit,
                                      const DisagreementContext& ctx) {
  WorkflowOutcome out;
  out.patient_id = patient_id;
  out.visit = visit;
  out.framework = FrameworkKind::kAiIr;

  const auto ai_read = read_ai(truth, *cfg.ai,
                               reader_stream(reads_root, patient_id, visit, streams::kRoleAi));
  const TotalScore t1 = total_score(read_human(
      truth, cfg.human_first, reader_stream(reads_root, patient_id, visit, streams::kRoleHuman1)));

  std::vector<TotalScore> pool;
  std::optional<std::size_t> arb_index;
  if (!ai_read) {
    // A failed AI prediction is an automatic disagreement: the unit falls
    // back to two humans with the usual human-human escalation.
    out.ai_missing = true;
    out.reads_taken.push_back({ReaderRole::kAi, std::nullopt});
    out.reads_taken.push_back({ReaderRole::kHuman1, t1.value()});
    const TotalScore t2 = total_score(
        read_human(truth, cfg.human_second,
                   reader_stream(reads_root, patient_id, visit, streams::kRoleHuman2)));
    out.reads_taken.push_back({ReaderRole::kHuman2, t2.value()});
    out.used_second_human = true;
    pool = {t1, t2};
    if (ctx.check(t1, t2)) {
      const TotalScore t_arb = total_score(
          read_human(truth, cfg.human_arbitrator,
                     reader_stream(reads_root, patient_id, visit, streams::kRoleArbitrator)));
      out.reads_taken.push_back({ReaderRole::kArbitrator, t_arb.value()});
      out.used_arbitration = true;
      arb_index = pool.size();
      pool.push_back(t_arb);
    }
  } else {
    const TotalScore t_ai = total_score(*ai_read);
    out.reads_taken.push_back({ReaderRole::kAi, t_ai.value()});
    out.reads_taken.push_back({ReaderRole::kHuman1, t1.value()});
    pool = {t_ai, t1};  // the AI score enters the consensus
    if (ctx.check(t_ai, t1)) {
      const TotalScore t_arb = total_score(
          read_human(truth, cfg.human_arbitrator,
                     reader_stream(reads_root, patient_id, visit, streams::kRoleArbitrator)));
      out.reads_taken.push_back({ReaderRole::kArbitrator, t_arb.value()});
      out.used_arbitration = true;
      arb_index = pool.size();
      pool.push_back(t_arb);
    }
  }
  out.consensus = pool_consensus(pool, cfg.pooling, arb_index).value();
  return out;
}

inline WorkflowOutcome run_ai_sr_unit(const CornerVector& truth, const WorkflowConfig& cfg,
                                      RngStream reads_root, int patient_id, Visit visit,
                                      const DisagreementContext& ctx) {
  WorkflowOutcome out;
  out.patient_id = patient_id;
  out.visit = visit;
  out.framework = FrameworkKind::kAiSr;

  const auto ai_read = read_ai(truth, *cfg.ai,
                               reader_stream(reads_root, patient_id, visit, streams::kRoleAi));
  const TotalScore t1 = total_score(read_human(
      truth, cfg.human_first, reader_stream(reads_root, patient_id, visit, streams::kRoleHuman1)));

  out.ai_missing = !ai_read.has_value();
  out.reads_taken.push_back(
      {ReaderRole::kAi, ai_read ? std::optional<double>(total_score(*ai_read).value())
                                : std::nullopt});
  out.reads_taken.push_back({ReaderRole::kHuman1, t1.value()});

  // The AI only screens: its score never enters the consensus pool.
  std::vector<TotalScore> pool = {t1};
  std::optional<std::size_t> arb_index;
  const bool escalate = !ai_read || ctx.check(total_score(*ai_read), t1);
  if (escalate) {
    const TotalScore t2 = total_score(
        read_human(truth, cfg.human_second,
                   reader_stream(reads_root, patient_id, visit, streams::kRoleHuman2)));
    out.reads_taken.push_back({ReaderRole::kHuman2, t2.value()});
    out.used_second_human = true;
    pool.push_back(t2);
    if (ctx.check(t1, t2)) {
      const TotalScore t_arb = total_score(
          read_human(truth, cfg.human_arbitrator,
                     reader_stream(reads_root, patient_id, visit, streams::kRoleArbitrator)));
      out.reads_taken.push_back({ReaderRole::kArbitrator, t_arb.value()});
      out.used_arbitration = true;
      arb_index = pool.size();
      pool.push_back(t_arb);
    }
  }
  out.consensus = pool_consensus(pool, cfg.pooling, arb_index).value();
  return out;
}

inline WorkflowOutcome run_unit(const CornerVector& truth, const WorkflowConfig& cfg,
                                RngStream reads_root, int patient_id, Visit visit,
                                const DisagreementContext& ctx) {
  cfg.validate();
  switch (cfg.framework) {
    case FrameworkKind::kHdr: return run_hdr_unit(truth, cfg, reads_root, patient_id, visit, ctx);
    case FrameworkKind::kAiIr:
      return run_ai_ir_unit(truth, cfg, reads_root, patient_id, visit, ctx);
    case FrameworkKind::kAiSr:
      return run_ai_sr_unit(truth, cfg, reads_root, patient_id, visit, ctx);
  }
  throw Error("run_unit: unknown framework");
}

/// First-stage absolute discrepancy of one unit, used to fix the
/// percentile cut: HDR compares its two humans, the AI frameworks compare
/// the AI against the first human. A missing AI read has no discrepancy;
/// it forces escalation regardless of the cut.
inline std::optional<double> first_stage_gap(const CornerVector& truth, const WorkflowConfig& cfg,
                                             RngStream reads_root, int patient_id, Visit visit) {
  const TotalScore t1 = total_score(read_human(
      truth, cfg.human_first, reader_stream(reads_root, patient_id, visit, streams::kRoleHuman1)));
  if (cfg.framework == FrameworkKind::kHdr) {
    const TotalScore t2 = total_score(
        read_human(truth, cfg.human_second,
                   reader_stream(reads_root, patient_id, visit, streams::kRoleHuman2)));
    return std::abs(t1.value() - t2.value());
  }
  const auto ai_read = read_ai(truth, *cfg.ai,
                               reader_stream(reads_root, patient_id, visit, streams::kRoleAi));
  if (!ai_read) return std::nullopt;
  return std::abs(total_score(*ai_read).value() - t1.value());
}

}  // namespace detail

/// Run one framework on one patient-visit. Percentile-mode rules need a
/// batch and are only available through run_trial.
inline WorkflowOutcome run_hdr(const CornerVector& truth, const WorkflowConfig& cfg, RngStream rng,
                               int patient_id = 0, Visit visit = Visit::kBaseline) {
  if (cfg.framework != FrameworkKind::kHdr) throw Error("run_hdr: config is not HDR");
  return detail::run_hdr_unit(truth, cfg, rng, patient_id, visit, {cfg.disagreement, {}});
}

inline WorkflowOutcome run_ai_ir(const CornerVector& truth, const WorkflowConfig& cfg,
                                 RngStream rng, int patient_id = 0,
                                 Visit visit = Visit::kBaseline) {
  if (cfg.framework != FrameworkKind::kAiIr) throw Error("run_ai_ir: config is not AI_IR");
  cfg.validate();
  return detail::run_ai_ir_unit(truth, cfg, rng, patient_id, visit, {cfg.disagreement, {}});
}

inline WorkflowOutcome run_ai_sr(const CornerVector& truth, const WorkflowConfig& cfg,
                                 RngStream rng, int patient_id = 0,
                                 Visit visit = Visit::kBaseline) {
  if (cfg.framework != FrameworkKind::kAiSr) throw Error("run_ai_sr: config is not AI_SR");
  cfg.validate();
  return detail::run_ai_sr_unit(truth, cfg, rng, patient_id, visit, {cfg.disagreement, {}});
}

/// Run the configured framework on both visits of every patient. Outcomes
/// are ordered by (patient, visit) and identical for any worker count:
/// every read draws from a stream addressed by (patient, visit, role).
/// Percentile-mode disagreement is resolved batch-wide first (the cut over
/// all first-stage reads of the run), then applied during escalation.
inline std::vector<WorkflowOutcome> run_trial(const std::vector<PatientTruth>& cohort,
                                              const WorkflowConfig& cfg, RngStream reads_root,
                                              int n_threads = 1) {
  cfg.validate();
  if (cohort.empty()) throw EmptyInput("run_trial: empty cohort");

  detail::DisagreementContext ctx{cfg.disagreement, {}};
  if (cfg.disagreement.mode == DisagreementRule::Mode::kPercentile) {
    std::vector<double> gaps;
    gaps.reserve(cohort.size() * 2);
    for (const auto& p : cohort)
      for (Visit v : {Visit::kBaseline, Visit::kWeek104}) {
        const CornerVector& truth = (v == Visit::kBaseline) ? p.baseline : p.week104;
        if (auto gap = detail::first_stage_gap(truth, cfg, reads_root, p.patient_id, v))
          gaps.push_back(*gap);
      }
    if (gaps.empty())
      throw MissingBatchContext("run_trial: no readable first-stage pairs for percentile rule");
    ctx.batch_cut = percentile_cut(gaps, cfg.disagreement.q);
  }

  std::vector<WorkflowOutcome> outcomes(cohort.size() * 2);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& p = cohort[i];
      outcomes[2 * i] =
          detail::run_unit(p.baseline, cfg, reads_root, p.patient_id, Visit::kBaseline, ctx);
      outcomes[2 * i + 1] =
          detail::run_unit(p.week104, cfg, reads_root, p.patient_id, Visit::kWeek104, ctx);
    }
  };

  const int threads = std::max(1, n_threads);
  if (threads == 1 || cohort.size() < 2) {
    worker(0, cohort.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cohort.size() + threads - 1) / threads;
    for (std::size_t begin = 0; begin < cohort.size(); begin += chunk)
      pool.emplace_back(worker, begin, std::min(begin + chunk, cohort.size()));
    for (auto& t : pool) t.join();
  }
  return outcomes;
}

/// Unit-level escalation rates (Table-1 style, per reading).
inline EscalationRates escalation_rates(std::span<const WorkflowOutcome> outcomes) {
  if (outcomes.empty()) throw EmptyInput("escalation_rates: no outcomes");
  std::int64_t second = 0, arb = 0;
  for (const auto& o : outcomes) {
    second += o.used_second_human ? 1 : 0;
    arb += o.used_arbitration ? 1 : 0;
  }
  const double n = static_cast<double>(outcomes.size());
  return {second / n, arb / n};
}

/// Patient-level variant: a patient counts once if any of their visits
/// escalated.
inline EscalationRates escalation_rates_by_patient(std::span<const WorkflowOutcome> outcomes) {
  if (outcomes.empty()) throw EmptyInput("escalation_rates_by_patient: no outcomes");
  struct Flags {
    bool second = false, arb = false;
  };
  std::vector<std::pair<int, Flags>> patients;
  for (const auto& o : outcomes) {
    auto it = std::find_if(patients.begin(), patients.end(),
                           [&](const auto& pr) { return pr.first == o.patient_id; });
    if (it == patients.end()) {
      patients.push_back({o.patient_id, {}});
      it = std::prev(patients.end());
    }
    it->second.second |= o.used_second_human;
    it->second.arb |= o.used_arbitration;
  }
  std::int64_t second = 0, arb = 0;
  for (const auto& [id, f] : patients) {
    second += f.second ? 1 : 0;
    arb += f.arb ? 1 : 0;
  }
  const double n = static_cast<double>(patients.size());
  return {second / n, arb / n};
}

}  // namespace readsim
