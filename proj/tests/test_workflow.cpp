#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>

#include "readsim/workflow.hpp"

using namespace readsim;
using Catch::Approx;

namespace {

WorkflowConfig make_config(FrameworkKind fw, std::optional<AIModelSpec> ai = std::nullopt,
                           double epsilon = 0.0) {
  WorkflowConfig cfg;
  cfg.framework = fw;
  cfg.ai = std::move(ai);
  cfg.human_first = cfg.human_second = cfg.human_arbitrator = HumanReaderParams{epsilon};
  return cfg;
}

CornerVector mixed_truth() {
  CornerVector v;
  for (int i = 0; i < kCornerCount; ++i) v[i] = CornerScore((i * 5) % 4);
  return v;
}

double pooled_from_roles(const WorkflowOutcome& o, bool include_ai) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : o.reads_taken) {
    if (!r.total) continue;
    if (!include_ai && r.role == ReaderRole::kAi) continue;
    sum += *r.total;
    ++n;
  }
  return sum / n;
}

}  // namespace

TEST_CASE("noise-free HDR agrees and reproduces the truth") {
  const auto truth = mixed_truth();
  const auto out = run_hdr(truth, make_config(FrameworkKind::kHdr), RngStream(1));
  REQUIRE(out.used_second_human);
  REQUIRE_FALSE(out.used_arbitration);
  REQUIRE(out.consensus == total_score(truth).value());
  REQUIRE(out.reads_taken.size() == 2);
}

TEST_CASE("forced disagreement escalates HDR to the arbitrator") {
  // first reader exact, second reader errs on every corner: 0 vs 24 on an
  // all-zero patient
  WorkflowConfig cfg = make_config(FrameworkKind::kHdr);
  cfg.human_second = HumanReaderParams{1.0};
  cfg.human_arbitrator = HumanReaderParams{0.0};
  const auto out = run_hdr(uniform_corners(0), cfg, RngStream(2));
  REQUIRE(out.used_arbitration);
  REQUIRE(out.reads_taken.size() == 3);
  REQUIRE(out.consensus == Approx((0.0 + 24.0 + 0.0) / 3.0));
}

TEST_CASE("AI-IR with a perfect model never escalates") {
  const auto truth = mixed_truth();
  const auto cfg =
      make_config(FrameworkKind::kAiIr, AIModelSpec::trained(0.0, identity_confusion()));
  const auto out = run_ai_ir(truth, cfg, RngStream(3));
  REQUIRE_FALSE(out.used_second_human);
  REQUIRE_FALSE(out.used_arbitration);
  REQUIRE_FALSE(out.ai_missing);
  REQUIRE(out.consensus == total_score(truth).value());
}

TEST_CASE("AI-IR pools the AI score when it is present") {
  const auto cfg = make_config(FrameworkKind::kAiIr, AIModelSpec::random());
  const auto out = run_ai_ir(uniform_corners(0), cfg, RngStream(4));
  // random total is essentially never 0, so the unit escalates
  REQUIRE(out.used_arbitration);
  REQUIRE_FALSE(out.used_second_human);
  REQUIRE(out.consensus == Approx(pooled_from_roles(out, /*include_ai=*/true)));
  REQUIRE(out.consensus > 0.0);
}

TEST_CASE("a missing AI read falls back to two humans in AI-IR") {
  auto ai = AIModelSpec::trained();
  ai.patient_missingness_prob = 1.0;
  const auto cfg = make_config(FrameworkKind::kAiIr, ai);
  const auto out = run_ai_ir(mixed_truth(), cfg, RngStream(5));
  REQUIRE(out.ai_missing);
  REQUIRE(out.used_second_human);
  REQUIRE_FALSE(out.used_arbitration);  // noise-free humans agree
  REQUIRE(out.consensus == total_score(mixed_truth()).value());
  // the missing AI read is on the ledger but contributes nothing
  REQUIRE(out.reads_taken[0].role == ReaderRole::kAi);
  REQUIRE_FALSE(out.reads_taken[0].total.has_value());
}

TEST_CASE("AI-SR stands on the first human when the AI agrees") {
  const auto truth = mixed_truth();
  const auto cfg =
      make_config(FrameworkKind::kAiSr, AIModelSpec::trained(0.0, identity_confusion()));
  const auto out = run_ai_sr(truth, cfg, RngStream(6));
  REQUIRE_FALSE(out.used_second_human);
  REQUIRE_FALSE(out.used_arbitration);
  REQUIRE(out.consensus == total_score(truth).value());
}

TEST_CASE("naive AI on an all-zero patient agrees at zero in AI-SR") {
  const auto cfg = make_config(FrameworkKind::kAiSr, AIModelSpec::naive());
  const auto out = run_ai_sr(uniform_corners(0), cfg, RngStream(7));
  REQUIRE_FALSE(out.used_second_human);
  REQUIRE(out.consensus == 0.0);
}

TEST_CASE("the AI score never enters an AI-SR consensus") {
  RngStream rng(8);
  for (int rep = 0; rep < 200; ++rep) {
    const auto kind = static_cast<AiKind>(rng.next_index(3));
    AIModelSpec ai = kind == AiKind::kTrained  ? AIModelSpec::trained(0.2)
                     : kind == AiKind::kRandom ? AIModelSpec::random()
                                               : AIModelSpec::naive();
    WorkflowConfig cfg = make_config(FrameworkKind::kAiSr, ai, 0.05);
    CornerVector truth;
    for (int i = 0; i < kCornerCount; ++i)
      truth[i] = CornerScore(static_cast<int>(rng.next_index(4)));
    const auto out = run_ai_sr(truth, cfg, rng.child(1000 + rep));
    REQUIRE(out.consensus == Approx(pooled_from_roles(out, /*include_ai=*/false)));
  }
}

TEST_CASE("random AI makes AI-SR behave like HDR") {
  PopulationSpec spec = measure1_like();
  spec.n_patients = 200;
  const auto cohort = sample_cohort(spec, RngStream(9).child(streams::kRealmCohort));
  RngStream reads = RngStream(9).child(streams::kRealmReads);
  const auto sr = run_trial(cohort, make_config(FrameworkKind::kAiSr, AIModelSpec::random(), 0.0175),
                            reads);
  const auto rates = escalation_rates(sr);
  REQUIRE(rates.p_second_human > 0.99);

  // common reader streams: the human-only pool reproduces HDR exactly on
  // every escalated unit
  const auto hdr = run_trial(cohort, make_config(FrameworkKind::kHdr, std::nullopt, 0.0175), reads);
  for (std::size_t i = 0; i < sr.size(); ++i)
    if (sr[i].used_second_human) REQUIRE(sr[i].consensus == hdr[i].consensus);
}

TEST_CASE("a perfect AI and noise-free humans collapse all frameworks") {
  PopulationSpec spec = measure1_like();
  spec.n_patients = 50;
  const auto cohort = sample_cohort(spec, RngStream(10).child(streams::kRealmCohort));
  RngStream reads = RngStream(10).child(streams::kRealmReads);
  const auto perfect = AIModelSpec::trained(0.0, identity_confusion());
  const auto hdr = run_trial(cohort, make_config(FrameworkKind::kHdr), reads);
  const auto ir = run_trial(cohort, make_config(FrameworkKind::kAiIr, perfect), reads);
  const auto sr = run_trial(cohort, make_config(FrameworkKind::kAiSr, perfect), reads);
  for (std::size_t i = 0; i < hdr.size(); ++i) {
    const auto& p = cohort[i / 2];
    const double truth =
        total_score(i % 2 == 0 ? p.baseline : p.week104).value();
    REQUIRE(hdr[i].consensus == truth);
    REQUIRE(ir[i].consensus == truth);
    REQUIRE(sr[i].consensus == truth);
    REQUIRE_FALSE(hdr[i].used_arbitration);
    REQUIRE_FALSE(ir[i].used_arbitration);
    REQUIRE_FALSE(sr[i].used_arbitration);
  }
}

TEST_CASE("run_trial yields two ordered outcomes per patient") {
  PopulationSpec spec = measure1_like();
  spec.n_patients = 1;
  auto cohort = sample_cohort(spec, RngStream(11));
  auto outs = run_trial(cohort, make_config(FrameworkKind::kHdr), RngStream(11).child(1));
  REQUIRE(outs.size() == 2);
  REQUIRE(outs[0].visit == Visit::kBaseline);
  REQUIRE(outs[1].visit == Visit::kWeek104);

  spec.n_patients = 361;
  cohort = sample_cohort(spec, RngStream(12));
  outs = run_trial(cohort, make_config(FrameworkKind::kHdr, std::nullopt, 0.0175),
                   RngStream(12).child(1));
  REQUIRE(outs.size() == 722);
  for (std::size_t i = 0; i < outs.size(); ++i) {
    REQUIRE(outs[i].patient_id == static_cast<int>(i / 2));
    REQUIRE(outs[i].visit == (i % 2 == 0 ? Visit::kBaseline : Visit::kWeek104));
  }
}

TEST_CASE("worker count never changes the outcome list") {
  PopulationSpec spec = measure1_like();
  spec.n_patients = 97;
  const auto cohort = sample_cohort(spec, RngStream(13).child(streams::kRealmCohort));
  const auto cfg = make_config(FrameworkKind::kAiSr, AIModelSpec::trained(), 0.0175);
  RngStream reads = RngStream(13).child(streams::kRealmReads);
  const auto serial = run_trial(cohort, cfg, reads, 1);
  const auto sharded = run_trial(cohort, cfg, reads, 8);
  REQUIRE(serial.size() == sharded.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].consensus == sharded[i].consensus);
    REQUIRE(serial[i].used_second_human == sharded[i].used_second_human);
    REQUIRE(serial[i].used_arbitration == sharded[i].used_arbitration);
    REQUIRE(serial[i].ai_missing == sharded[i].ai_missing);
  }
}

TEST_CASE("percentile disagreement flags the top of the batch") {
  PopulationSpec spec = measure1_like();
  spec.n_patients = 150;
  const auto cohort = sample_cohort(spec, RngStream(14).child(streams::kRealmCohort));
  WorkflowConfig cfg = make_config(FrameworkKind::kHdr, std::nullopt, 0.0175);
  cfg.disagreement = DisagreementRule::percentile(0.05);
  RngStream reads = RngStream(14).child(streams::kRealmReads);
  const auto outs = run_trial(cohort, cfg, reads);

  // oracle: recompute the first-stage gaps and the cut
  std::vector<double> gaps;
  for (const auto& p : cohort)
    for (Visit v : {Visit::kBaseline, Visit::kWeek104})
      gaps.push_back(*detail::first_stage_gap(v == Visit::kBaseline ? p.baseline : p.week104, cfg,
                                              reads, p.patient_id, v));
  const double cut = percentile_cut(gaps, 0.05);
  for (std::size_t i = 0; i < outs.size(); ++i)
    REQUIRE(outs[i].used_arbitration == (gaps[i] >= cut));

  // within ties, exactly ceil(q*N) or more units escalate, never fewer
  std::size_t flagged = 0;
  for (const auto& o : outs) flagged += o.used_arbitration ? 1 : 0;
  REQUIRE(flagged >= static_cast<std::size_t>(std::ceil(0.05 * gaps.size())));
}

TEST_CASE("percentile mode outside a batch run is an error") {
  WorkflowConfig cfg = make_config(FrameworkKind::kHdr, std::nullopt, 0.2);
  cfg.disagreement = DisagreementRule::percentile(0.05);
  bool threw = false;
  for (int rep = 0; rep < 50 && !threw; ++rep) {
    try {
      run_hdr(mixed_truth(), cfg, RngStream(rep));
    } catch (const MissingBatchContext&) {
      threw = true;
    }
  }
  REQUIRE(threw);
}

TEST_CASE("escalation rates: HDR is always 1.0 second humans") {
  PopulationSpec spec = measure1_like();
  spec.n_patients = 40;
  const auto cohort = sample_cohort(spec, RngStream(15).child(streams::kRealmCohort));
  RngStream reads = RngStream(15).child(streams::kRealmReads);

  const auto hdr_rates =
      escalation_rates(run_trial(cohort, make_config(FrameworkKind::kHdr, std::nullopt, 0.0175), reads));
  REQUIRE(hdr_rates.p_second_human == 1.0);

  // AI-IR with no missingness never needs a second human
  const auto ir_rates = escalation_rates(
      run_trial(cohort, make_config(FrameworkKind::kAiIr, AIModelSpec::random()), reads));
  REQUIRE(ir_rates.p_second_human == 0.0);

  // perfect AI in AI-SR never escalates at all
  const auto sr_rates = escalation_rates(run_trial(
      cohort, make_config(FrameworkKind::kAiSr, AIModelSpec::trained(0.0, identity_confusion())),
      reads));
  REQUIRE(sr_rates.p_second_human == 0.0);
  REQUIRE(sr_rates.p_arbitration == 0.0);

  REQUIRE_THROWS_AS(escalation_rates({}), EmptyInput);
}

TEST_CASE("patient-level rates count a patient once") {
  PopulationSpec spec = measure1_like();
  spec.n_patients = 30;
  const auto cohort = sample_cohort(spec, RngStream(16).child(streams::kRealmCohort));
  const auto outs = run_trial(cohort, make_config(FrameworkKind::kAiSr, AIModelSpec::random(), 0.0175),
                              RngStream(16).child(streams::kRealmReads));
  const auto unit = escalation_rates(outs);
  const auto patient = escalation_rates_by_patient(outs);
  REQUIRE(patient.p_second_human >= unit.p_second_human);
  REQUIRE(patient.p_arbitration >= unit.p_arbitration);
}

TEST_CASE("arbitration flags are consistent with the reads taken") {
  RngStream rng(17);
  PopulationSpec spec = measure1_like();
  spec.n_patients = 60;
  const auto cohort = sample_cohort(spec, rng.child(streams::kRealmCohort));
  for (auto fw : {FrameworkKind::kHdr, FrameworkKind::kAiIr, FrameworkKind::kAiSr}) {
    const auto cfg = make_config(
        fw, fw == FrameworkKind::kHdr ? std::nullopt : std::optional(AIModelSpec::trained(0.22)),
        0.05);
    for (const auto& o : run_trial(cohort, cfg, rng.child(streams::kRealmReads))) {
      bool has_arb = false, has_h2 = false;
      for (const auto& r : o.reads_taken) {
        has_arb |= r.role == ReaderRole::kArbitrator;
        has_h2 |= r.role == ReaderRole::kHuman2;
      }
      REQUIRE(o.used_arbitration == has_arb);
      REQUIRE(o.used_second_human == has_h2);
      if (o.ai_missing) REQUIRE(o.used_second_human);
    }
  }
}

TEST_CASE("workflow config validation requires an AI spec for AI frameworks") {
  WorkflowConfig cfg;
  cfg.framework = FrameworkKind::kAiIr;
  REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
}
