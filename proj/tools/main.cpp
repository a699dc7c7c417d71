// readsim CLI: scenario simulation, cost sweeps, calibration and ledger
// re-analysis for multi-reader grading workflows.

#include <cstdio>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "readsim/readsim.hpp"

namespace {

using nlohmann::json;

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<std::string> format;
};

void add_common(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--seed", flags->seed, "override the config seed");
  cmd->add_option("--out", flags->out_dir, "override the output directory");
  cmd->add_option("--threads", flags->threads, "worker threads (never changes outputs)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--format", flags->format, "report format: csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
}

readsim::ScenarioConfig load_config(const std::string& path, const CommonFlags& flags) {
  auto cfg = readsim::parse_config(path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  if (flags.threads) cfg.threads = *flags.threads;
  if (flags.format) cfg.format = *flags.format;
  return cfg;
}

void print_manifest(const readsim::RunManifest& manifest, const std::string& out_dir) {
  std::printf("wrote %zu file(s) + manifest.json to %s (config digest %s)\n",
              manifest.files.size(), out_dir.c_str(), manifest.config_digest.c_str());
}

readsim::EscalationRates parse_rate_pair(const std::string& text, const std::string& flag) {
  const auto comma = text.find(',');
  if (comma == std::string::npos)
    throw readsim::ParseError(flag + " expects 'p_second,p_arbitration'");
  return {readsim::parse_double(text.substr(0, comma)),
          readsim::parse_double(text.substr(comma + 1))};
}

int run_calibrate(const std::string& targets_path, const std::optional<std::string>& out_path) {
  json targets;
  try {
    targets = json::parse(readsim::read_file(targets_path));
  } catch (const json::parse_error& e) {
    throw readsim::ParseError(std::string("targets file is not valid JSON: ") + e.what());
  }
  for (const auto& [key, value] : targets.items())
    if (key != "seed" && key != "human" && key != "population")
      throw readsim::ParseError("unknown key '" + key + "' in targets file");
  if (!targets.contains("seed"))
    throw readsim::ValidationError("targets file requires a 'seed'");
  const readsim::RngStream rng(targets.at("seed").get<std::uint64_t>());

  json result;
  readsim::PopulationSpec cohort_spec = readsim::measure1_like();

  if (targets.contains("population")) {
    const auto& p = targets.at("population");
    for (const auto& [key, value] : p.items()) {
      static const std::set<std::string> allowed = {
          "corner_marginal",   "total_mean",       "total_sd",
          "worsening_mean_treatment", "worsening_mean_control", "worsening_sd",
          "zero_total_fraction",      "n_patients",             "allocation_ratio"};
      if (!allowed.count(key))
        throw readsim::ParseError("unknown key 'population." + key + "' in targets file");
    }
    readsim::PopulationTargets t;
    if (p.contains("corner_marginal")) {
      const auto& m = p.at("corner_marginal");
      if (!m.is_array() || m.size() != 4)
        throw readsim::ParseError("population.corner_marginal must have 4 entries");
      for (std::size_t k = 0; k < 4; ++k) t.corner_marginal[k] = m[k].get<double>();
    }
    if (p.contains("total_mean")) t.total_mean = p.at("total_mean").get<double>();
    if (p.contains("total_sd")) t.total_sd = p.at("total_sd").get<double>();
    if (p.contains("worsening_mean_treatment"))
      t.worsening_mean_treatment = p.at("worsening_mean_treatment").get<double>();
    if (p.contains("worsening_mean_control"))
      t.worsening_mean_control = p.at("worsening_mean_control").get<double>();
    if (p.contains("worsening_sd")) t.worsening_sd = p.at("worsening_sd").get<double>();
    if (p.contains("zero_total_fraction"))
      t.zero_total_fraction = p.at("zero_total_fraction").get<double>();
    if (p.contains("n_patients")) t.n_patients = p.at("n_patients").get<int>();
    if (p.contains("allocation_ratio")) {
      const auto& r = p.at("allocation_ratio");
      if (!r.is_array() || r.size() != 2)
        throw readsim::ParseError("population.allocation_ratio must be [t, c]");
      t.allocation_ratio = {r[0].get<int>(), r[1].get<int>()};
    }
    cohort_spec = readsim::calibrate_population(t, rng.child(1));
    result["population"] = {
        {"n_patients", cohort_spec.n_patients},
        {"allocation_ratio", {cohort_spec.allocation_ratio[0], cohort_spec.allocation_ratio[1]}},
        {"healthy_fraction", cohort_spec.severity.healthy_fraction},
        {"severity_alpha", cohort_spec.severity.alpha},
        {"severity_beta", cohort_spec.severity.beta},
        {"corner_marginal", cohort_spec.corner_marginal},
        {"progression",
         {{"treatment",
           {{"progressor_fraction", cohort_spec.progression_treatment.progressor_fraction},
            {"mean_jump", cohort_spec.progression_treatment.mean_jump}}},
          {"control",
           {{"progressor_fraction", cohort_spec.progression_control.progressor_fraction},
            {"mean_jump", cohort_spec.progression_control.mean_jump}}}}}};
  }

  if (targets.contains("human")) {
    const auto& h = targets.at("human");
    for (const auto& [key, value] : h.items())
      if (key != "target_arbitration_rate")
        throw readsim::ParseError("unknown key 'human." + key + "' in targets file");
    const double target = h.at("target_arbitration_rate").get<double>();
    const auto params = readsim::calibrate_human_noise(
        target, cohort_spec, readsim::DisagreementRule::threshold(0), rng.child(2));
    result["human"] = {{"epsilon", params.epsilon}};
  }

  const std::string text = result.dump(2) + "\n";
  if (out_path) {
    readsim::write_file(*out_path, text);
    std::printf("wrote %s\n", out_path->c_str());
  } else {
    std::fputs(text.c_str(), stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"readsim: simulator for human/AI medical-image reading workflows"};
  app.require_subcommand(1);

  std::function<int()> action;

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a scenario config end to end");
  static std::string sim_config;
  static CommonFlags sim_flags;
  sim->add_option("config,--config", sim_config, "scenario config JSON")->required();
  add_common(sim, &sim_flags);
  sim->callback([&] {
    action = [] {
      const auto cfg = load_config(sim_config, sim_flags);
      const auto manifest = readsim::run_scenario(cfg);
      print_manifest(manifest, cfg.out_dir);
      return 0;
    };
  });

  // sweep-cost
  auto* sweep = app.add_subcommand("sweep-cost", "escalation rates and cost curves only");
  static std::string sweep_config;
  static CommonFlags sweep_flags;
  sweep->add_option("config,--config", sweep_config, "scenario config JSON")->required();
  add_common(sweep, &sweep_flags);
  sweep->callback([&] {
    action = [] {
      const auto cfg = load_config(sweep_config, sweep_flags);
      const auto manifest = readsim::run_cost_sweep(cfg);
      print_manifest(manifest, cfg.out_dir);
      return 0;
    };
  });

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "fit population and reader-noise parameters");
  static std::string cal_targets;
  static std::optional<std::string> cal_out;
  cal->add_option("targets", cal_targets, "calibration targets JSON")->required();
  cal->add_option("--out", cal_out, "write the calibrated parameters to a file");
  cal->callback([&] { action = [] { return run_calibrate(cal_targets, cal_out); }; });

  // crossover
  auto* cross = app.add_subcommand(
      "crossover", "arbitration-cost ratio where AI-SR becomes cheaper than AI-IR");
  static std::string cross_ir, cross_sr;
  static double cross_c_first = 1.0, cross_c_second = 1.0, cross_c_ai = 0.0;
  cross->add_option("--ir", cross_ir, "AI-IR rates as 'p_second,p_arbitration'")->required();
  cross->add_option("--sr", cross_sr, "AI-SR rates as 'p_second,p_arbitration'")->required();
  cross->add_option("--c-first", cross_c_first, "price of the first human read");
  cross->add_option("--c-second", cross_c_second, "price of the second human read");
  cross->add_option("--c-ai", cross_c_ai, "price of an AI read");
  cross->callback([&] {
    action = [] {
      readsim::CostParams params;
      params.c_first = cross_c_first;
      params.c_second = cross_c_second;
      params.c_ai = cross_c_ai;
      const auto r = readsim::crossover_ratio(parse_rate_pair(cross_ir, "--ir"),
                                              parse_rate_pair(cross_sr, "--sr"), params);
      if (!r) {
        std::printf("none\n");
        return 0;
      }
      std::printf("%s\n", readsim::format_fixed(*r, 3).c_str());
      return 0;
    };
  });

  // analyze
  auto* ana = app.add_subcommand("analyze", "recompute statistics from a stored ledger");
  static std::string ana_ledger;
  static std::string ana_out = "analysis";
  static std::optional<std::string> ana_config;
  static std::optional<std::string> ana_format;
  ana->add_option("ledger", ana_ledger, "ledger.csv produced by simulate")->required();
  ana->add_option("--out", ana_out, "output directory");
  ana->add_option("--config", ana_config, "scenario config supplying cost parameters");
  ana->add_option("--format", ana_format, "report format: csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  ana->callback([&] {
    action = [] {
      readsim::ReportOptions opts;
      if (ana_config) {
        const auto cfg = readsim::parse_config(*ana_config);
        opts.cost = cfg.cost;
        opts.r_grid = cfg.r_grid;
        opts.format = cfg.format;
      }
      if (ana_format) opts.format = *ana_format;
      const auto manifest = readsim::analyze_ledger(ana_ledger, opts, ana_out);
      print_manifest(manifest, ana_out);
      return 0;
    };
  });

  CLI11_PARSE(app, argc, argv);

  try {
    return action ? action() : 1;
  } catch (const readsim::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const readsim::ValidationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const readsim::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntimeError;
  }
}
