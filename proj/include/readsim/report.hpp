#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "readsim/analysis.hpp"
#include "readsim/economics.hpp"
#include "readsim/errors.hpp"
#include "readsim/ledger.hpp"
#include "readsim/textio.hpp"

namespace readsim {

struct ReportOptions {
  CostParams cost;
  std::vector<double> r_grid = {1, 2, 3, 4, 5};
  double alpha = 0.05;
  double progression_threshold = 2.0;
  std::string format = "csv";  // csv | json
};

struct FileEntry {
  std::string name;
  std::string hash;  // fnv1a-64 of the bytes written
  std::uint64_t bytes = 0;
};

/// A rectangular report with an embedded schema tag, rendered to CSV or
/// JSON. All cells are preformatted strings so both renderings agree.
struct Table {
  std::string name;    // file stem, e.g. "rates"
  std::string schema;  // e.g. "readsim.rates.v1"
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string render_csv(const Table& t) {
  std::string out = "# schema: " + t.schema + "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

inline std::string render_json(const Table& t) {
  nlohmann::json j;
  j["schema"] = t.schema;
  j["columns"] = t.columns;
  j["rows"] = t.rows;
  return j.dump(2) + "\n";
}

inline FileEntry write_table(const Table& t, const std::string& out_dir,
                             const std::string& format) {
  const std::string content = (format == "json") ? render_json(t) : render_csv(t);
  const std::string name = t.name + (format == "json" ? ".json" : ".csv");
  write_file((std::filesystem::path(out_dir) / name).string(), content);
  return {name, hex16(fnv1a64(content)), content.size()};
}

struct LedgerView {
  std::vector<std::string> frameworks;  // canonical order, as present
  std::vector<int> run_ids;             // sorted
  // consensus rows only, grouped by framework
  std::map<std::string, std::vector<const LedgerRow*>> consensus;
};

inline LedgerView scan_ledger(std::span<const LedgerRow> rows) {
  LedgerView view;
  std::set<int> runs;
  for (const auto& r : rows) {
    runs.insert(r.run_id);
    if (r.reader_role == "consensus") view.consensus[r.framework].push_back(&r);
  }
  view.run_ids.assign(runs.begin(), runs.end());
  for (const char* fw : {"HDR", "AI_IR", "AI_SR"})
    if (view.consensus.count(fw)) view.frameworks.push_back(fw);
  // any nonstandard framework labels, in lexical order
  for (const auto& [fw, _] : view.consensus)
    if (std::find(view.frameworks.begin(), view.frameworks.end(), fw) == view.frameworks.end())
      view.frameworks.push_back(fw);
  return view;
}

inline Arm arm_from_string(const std::string& s) {
  if (s == "treatment") return Arm::kTreatment;
  if (s == "control") return Arm::kControl;
  throw ParseError("unknown arm '" + s + "'");
}

/// Unit rates over a set of consensus rows.
inline EscalationRates rates_of(std::span<const LedgerRow* const> rows) {
  if (rows.empty()) throw EmptyInput("rates_of: no consensus rows");
  std::int64_t second = 0, arb = 0;
  for (const auto* r : rows) {
    second += (r->used_second_human && *r->used_second_human) ? 1 : 0;
    arb += (r->used_arbitration && *r->used_arbitration) ? 1 : 0;
  }
  const double n = static_cast<double>(rows.size());
  return {second / n, arb / n};
}

inline EscalationRates patient_rates_of(std::span<const LedgerRow* const> rows) {
  std::map<std::pair<int, int>, std::pair<bool, bool>> by_patient;  // (run, patient)
  for (const auto* r : rows) {
    auto& f = by_patient[{r->run_id, r->patient_id}];
    f.first |= r->used_second_human && *r->used_second_human;
    f.second |= r->used_arbitration && *r->used_arbitration;
  }
  if (by_patient.empty()) throw EmptyInput("patient_rates_of: no consensus rows");
  std::int64_t second = 0, arb = 0;
  for (const auto& [key, f] : by_patient) {
    second += f.first ? 1 : 0;
    arb += f.second ? 1 : 0;
  }
  const double n = static_cast<double>(by_patient.size());
  return {second / n, arb / n};
}

/// Per-patient endpoints from consensus rows; patients are keyed by
/// (run, patient) so pooled views across replications stay distinct.
inline std::vector<PatientEndpoints> endpoints_of(std::span<const LedgerRow* const> rows) {
  std::vector<ConsensusRecord> records;
  records.reserve(rows.size());
  for (const auto* r : rows) {
    ConsensusRecord c;
    c.patient_id = r->run_id * 1000000 + r->patient_id;
    c.arm = arm_from_string(r->arm);
    c.visit = (r->visit == "baseline") ? Visit::kBaseline : Visit::kWeek104;
    if (!r->consensus) throw ParseError("consensus row without consensus value");
    c.consensus = *r->consensus;
    records.push_back(c);
  }
  return pair_visits(records);
}

inline std::string mean_sd_cell(double mean, double sd) {
  return format_fixed(mean, 2) + "(" + format_fixed(sd, 2) + ")";
}

template <typename Pred>
inline std::vector<const LedgerRow*> filter(std::span<const LedgerRow* const> rows, Pred pred) {
  std::vector<const LedgerRow*> out;
  for (const auto* r : rows)
    if (pred(*r)) out.push_back(r);
  return out;
}

}  // namespace detail

/// Compute every analysis table from a readings ledger. The ledger is the
/// single source: re-running this on a persisted ledger reproduces a
/// simulation's statistics exactly.
inline std::vector<Table> build_report_tables(std::span<const LedgerRow> rows,
                                              const ReportOptions& opts) {
  const auto view = detail::scan_ledger(rows);
  if (view.frameworks.empty()) return {};

  Table rates{"rates",
              "readsim.rates.v1",
              {"run", "framework", "reading_units", "p_second_human", "p_arbitration",
               "p_second_human_by_patient", "p_arbitration_by_patient"},
              {}};
  Table summaries{"summaries",
                  "readsim.summaries.v1",
                  {"run", "method", "arm", "baseline", "week104", "worsening"},
                  {}};
  Table tests{"tests",
              "readsim.tests.v1",
              {"run", "framework", "n_treatment", "n_control", "t_statistic",
               "degrees_of_freedom", "p_value", "alpha", "significant",
               "worsening_dev_vs_reference_treatment", "worsening_dev_vs_reference_control",
               "reference", "consistent_all"},
              {}};
  Table costs{"costs", "readsim.costs.v1", {"framework", "r", "expected_cost"}, {}};
  Table ecdf_table{"ecdf", "readsim.ecdf.v1", {"framework", "arm", "x", "cum_fraction"}, {}};
  Table histogram{"histogram",
                  "readsim.histogram.v1",
                  {"framework", "arm", "bin_left", "bin_right", "count"},
                  {}};

  // Group labels: one per replication plus the pooled view. A single
  // replication is its own pool, so only the pooled rows are emitted.
  std::vector<std::pair<std::string, int>> groups;  // (label, run id or -1 for pooled)
  if (view.run_ids.size() > 1)
    for (int run : view.run_ids) groups.emplace_back(std::to_string(run), run);
  groups.emplace_back("pooled", -1);

  std::map<std::string, EscalationRates> pooled_rates;

  for (const auto& [label, run] : groups) {
    std::vector<FrameworkAnalysis> analyses;
    for (const auto& fw : view.frameworks) {
      const auto& all_fw = view.consensus.at(fw);
      const auto rows_fw = (run < 0) ? std::vector<const LedgerRow*>(all_fw.begin(), all_fw.end())
                                     : detail::filter(all_fw, [run = run](const LedgerRow& r) {
                                         return r.run_id == run;
                                       });
      const auto unit_rates = detail::rates_of(rows_fw);
      const auto patient_rates = detail::patient_rates_of(rows_fw);
      if (run < 0) pooled_rates[fw] = unit_rates;
      rates.rows.push_back({label, fw, std::to_string(rows_fw.size()),
                            format_double(unit_rates.p_second_human),
                            format_double(unit_rates.p_arbitration),
                            format_double(patient_rates.p_second_human),
                            format_double(patient_rates.p_arbitration)});

      const auto endpoints = detail::endpoints_of(rows_fw);
      FrameworkAnalysis fa;
      fa.framework = fw;
      fa.arms = summarize_arms(endpoints);
      std::vector<double> wors_t, wors_c;
      for (const auto& p : endpoints)
        (p.arm == Arm::kTreatment ? wors_t : wors_c).push_back(p.worsening());
      fa.test = welch_test(wors_t, wors_c, opts.alpha);
      for (const auto& s : fa.arms)
        summaries.rows.push_back({label, fw, arm_name(s.arm),
                                  detail::mean_sd_cell(s.baseline_mean, s.baseline_sd),
                                  detail::mean_sd_cell(s.week104_mean, s.week104_sd),
                                  detail::mean_sd_cell(s.worsening_mean, s.worsening_sd)});
      analyses.push_back(std::move(fa));

      if (run < 0) {
        // Distribution views over the pooled worsenings.
        for (Arm arm : {Arm::kTreatment, Arm::kControl}) {
          std::vector<double> w;
          for (const auto& p : endpoints)
            if (p.arm == arm) w.push_back(p.worsening());
          if (w.empty()) continue;
          const EcdfCurve curve(w);
          for (std::size_t i = 0; i < curve.support().size(); ++i)
            ecdf_table.rows.push_back({fw, arm_name(arm), format_double(curve.support()[i]),
                                       format_double(curve.fractions()[i])});
        }
      }
    }

    // Consistency across frameworks within this group.
    std::optional<ConsistencyReport> consistency;
    if (analyses.size() >= 2) consistency = framework_consistency_report(analyses);
    for (std::size_t i = 0; i < analyses.size(); ++i) {
      const auto& fa = analyses[i];
      int n_t = 0, n_c = 0;
      for (const auto& s : fa.arms) (s.arm == Arm::kTreatment ? n_t : n_c) = s.n;
      std::string dev_t = "0", dev_c = "0", reference = fa.framework,
                  consistent = "1";
      if (consistency) {
        dev_t = format_double(consistency->deviations[i].worsening_dev_treatment);
        dev_c = format_double(consistency->deviations[i].worsening_dev_control);
        reference = consistency->reference;
        consistent = consistency->consistent ? "1" : "0";
      }
      tests.rows.push_back({label, fa.framework, std::to_string(n_t), std::to_string(n_c),
                            format_double(fa.test.t_statistic),
                            format_double(fa.test.degrees_of_freedom),
                            format_double(fa.test.p_value), format_double(fa.test.alpha),
                            fa.test.significant ? "1" : "0", dev_t, dev_c, reference, consistent});
    }
  }

  // Cost curves from the pooled rates.
  std::vector<FrameworkRates> fr;
  for (const auto& fw : view.frameworks)
    fr.push_back({fw, pooled_rates.at(fw), fw != "HDR"});
  for (const auto& report : cost_sweep(fr, opts.cost, opts.r_grid))
    for (const auto& [r, cost] : report.sweep)
      costs.rows.push_back({report.framework, format_double(r), format_double(cost)});

  // Shared histogram bins across frameworks so the bars are comparable.
  {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    std::map<std::string, std::map<Arm, std::vector<double>>> worsenings;
    for (const auto& fw : view.frameworks) {
      const auto& all_fw = view.consensus.at(fw);
      for (const auto& p : detail::endpoints_of(all_fw)) {
        worsenings[fw][p.arm].push_back(p.worsening());
        lo = any ? std::min(lo, p.worsening()) : p.worsening();
        hi = any ? std::max(hi, p.worsening()) : p.worsening();
        any = true;
      }
    }
    std::vector<double> edges;
    for (double e = std::floor(lo) - 0.5; e <= std::ceil(hi) + 0.5; e += 1.0)
      edges.push_back(e);
    if (edges.size() < 2) edges = {lo - 0.5, lo + 0.5};
    for (const auto& fw : view.frameworks)
      for (Arm arm : {Arm::kTreatment, Arm::kControl}) {
        const auto it = worsenings[fw].find(arm);
        if (it == worsenings[fw].end()) continue;
        const auto counts = worsening_histogram(it->second, edges);
        for (std::size_t b = 0; b < counts.size(); ++b)
          histogram.rows.push_back({fw, arm_name(arm), format_double(edges[b]),
                                    format_double(edges[b + 1]), std::to_string(counts[b])});
      }
  }

  return {rates, costs, summaries, tests, ecdf_table, histogram};
}

/// Write every report table; returns the file inventory.
inline std::vector<FileEntry> emit_reports(std::span<const LedgerRow> rows,
                                           const ReportOptions& opts,
                                           const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<FileEntry> files;
  for (const auto& table : build_report_tables(rows, opts))
    files.push_back(detail::write_table(table, out_dir, opts.format));
  return files;
}

}  // namespace readsim
