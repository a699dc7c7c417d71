#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "readsim/config.hpp"
#include "readsim/ledger.hpp"
#include "readsim/report.hpp"
#include "readsim/version.hpp"

namespace readsim {

struct RunManifest {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::vector<std::string> frameworks;
  std::vector<FileEntry> files;
  double duration_ms = 0.0;
};

namespace detail {

inline void write_manifest(const RunManifest& manifest, const nlohmann::json& extra,
                           const std::string& out_dir) {
  nlohmann::json j;
  j["schema"] = "readsim.manifest.v1";
  j["tool_version"] = manifest.tool_version;
  j["config_digest"] = manifest.config_digest;
  j["seed"] = manifest.seed;
  j["frameworks"] = manifest.frameworks;
  auto files = nlohmann::json::array();
  for (const auto& f : manifest.files)
    files.push_back({{"name", f.name}, {"hash", f.hash}, {"bytes", f.bytes}});
  j["files"] = files;
  j["duration_ms"] = manifest.duration_ms;
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_file((std::filesystem::path(out_dir) / "manifest.json").string(), j.dump(2) + "\n");
}

}  // namespace detail

/// Simulate every replication of every configured framework and build the
/// full readings ledger. Frameworks share the cohort and the human-reader
/// streams within a replication, so cross-framework comparisons are paired.
inline std::vector<LedgerRow> simulate_ledger(const ScenarioConfig& cfg) {
  std::vector<LedgerRow> rows;
  for (int rep = 0; rep < cfg.replications; ++rep) {
    RngStream root = RngStream(cfg.seed)
                         .child(streams::kRealmRun)
                         .child(static_cast<std::uint64_t>(rep));
    const auto cohort = sample_cohort(cfg.population, root.child(streams::kRealmCohort));
    RngStream reads_root = root.child(streams::kRealmReads);
    for (FrameworkKind fw : cfg.frameworks) {
      const auto wf = build_workflow_config(cfg, fw);
      const auto outcomes = run_trial(cohort, wf, reads_root, cfg.threads);
      auto fw_rows = make_ledger_rows(rep, wf, cohort, outcomes);
      rows.insert(rows.end(), fw_rows.begin(), fw_rows.end());
    }
  }
  return rows;
}

/// Full reproduction run: ledger + analysis reports + manifest, all under
/// cfg.out_dir. Byte-identical for identical (config, seed), regardless of
/// the worker count.
inline RunManifest run_scenario(const ScenarioConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.population.validate();
  cfg.cost.validate();

  RunManifest manifest;
  manifest.config_digest = config_digest(cfg);
  manifest.seed = cfg.seed;
  manifest.tool_version = kToolVersion;
  for (auto f : cfg.frameworks) manifest.frameworks.push_back(framework_name(f));

  std::filesystem::create_directories(cfg.out_dir);
  if (!cfg.frameworks.empty()) {
    const auto rows = simulate_ledger(cfg);
    const std::string ledger_text = write_ledger_csv(rows);
    write_file((std::filesystem::path(cfg.out_dir) / "ledger.csv").string(), ledger_text);
    manifest.files.push_back({"ledger.csv", hex16(fnv1a64(ledger_text)), ledger_text.size()});

    ReportOptions opts;
    opts.cost = cfg.cost;
    opts.r_grid = cfg.r_grid;
    opts.format = cfg.format;
    for (auto& f : emit_reports(rows, opts, cfg.out_dir)) manifest.files.push_back(std::move(f));
  }

  manifest.duration_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  detail::write_manifest(manifest, {{"config", to_json(cfg)}}, cfg.out_dir);
  return manifest;
}

/// Cost sweep only (the relative-arbitration-cost figure): simulates the
/// configured frameworks to measure escalation rates, then writes costs.csv
/// and the manifest.
inline RunManifest run_cost_sweep(const ScenarioConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest manifest;
  manifest.config_digest = config_digest(cfg);
  manifest.seed = cfg.seed;
  manifest.tool_version = kToolVersion;
  for (auto f : cfg.frameworks) manifest.frameworks.push_back(framework_name(f));

  std::filesystem::create_directories(cfg.out_dir);
  if (!cfg.frameworks.empty()) {
    const auto rows = simulate_ledger(cfg);
    ReportOptions opts;
    opts.cost = cfg.cost;
    opts.r_grid = cfg.r_grid;
    opts.format = cfg.format;
    for (const auto& table : build_report_tables(rows, opts))
      if (table.name == "costs" || table.name == "rates")
        manifest.files.push_back(detail::write_table(table, cfg.out_dir, opts.format));
  }

  manifest.duration_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  detail::write_manifest(manifest, {{"config", to_json(cfg)}}, cfg.out_dir);
  return manifest;
}

/// Re-run the statistics of a persisted ledger. Produces the same report
/// files as the simulation that wrote the ledger.
inline RunManifest analyze_ledger(const std::string& ledger_path, const ReportOptions& opts,
                                  const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string ledger_text = read_file(ledger_path);
  const auto rows = parse_ledger_csv(ledger_text);

  RunManifest manifest;
  manifest.config_digest = hex16(fnv1a64(ledger_text));  // digest of the analyzed ledger
  manifest.tool_version = kToolVersion;
  for (const auto& fw : detail::scan_ledger(rows).frameworks) manifest.frameworks.push_back(fw);
  manifest.files = emit_reports(rows, opts, out_dir);
  manifest.duration_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  detail::write_manifest(manifest, {{"source_ledger", ledger_path}}, out_dir);
  return manifest;
}

}  // namespace readsim
