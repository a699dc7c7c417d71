#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "readsim/cohort.hpp"
#include "readsim/economics.hpp"
#include "readsim/errors.hpp"
#include "readsim/readers.hpp"
#include "readsim/textio.hpp"
#include "readsim/workflow.hpp"

namespace readsim {

/// Everything one reproduction run needs. The seed is mandatory: there is
/// no wall-clock fallback, a config fully determines its outputs.
struct ScenarioConfig {
  std::uint64_t seed = 0;
  std::string population_preset;  // empty when the population is inline
  PopulationSpec population;
  std::vector<FrameworkKind> frameworks = {FrameworkKind::kHdr, FrameworkKind::kAiIr,
                                           FrameworkKind::kAiSr};
  AIModelSpec ai = AIModelSpec::trained();
  DisagreementRule disagreement = DisagreementRule::threshold(0);
  PoolingPolicy pooling = PoolingPolicy::kMeanOfAllReads;
  std::array<HumanReaderParams, 3> humans = {HumanReaderParams{}, HumanReaderParams{},
                                             HumanReaderParams{}};
  CostParams cost;
  std::vector<double> r_grid = {1, 2, 3, 4, 5};
  int replications = 1;
  std::string out_dir = "out";
  int threads = 1;
  std::string format = "csv";  // csv | json
};

inline WorkflowConfig build_workflow_config(const ScenarioConfig& cfg, FrameworkKind framework) {
  WorkflowConfig wf;
  wf.framework = framework;
  wf.disagreement = cfg.disagreement;
  wf.pooling = cfg.pooling;
  if (framework != FrameworkKind::kHdr) wf.ai = cfg.ai;
  wf.human_first = cfg.humans[0];
  wf.human_second = cfg.humans[1];
  wf.human_arbitrator = cfg.humans[2];
  return wf;
}

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ParseError("unknown key '" + key + "' in " + where);
}

inline double require_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + " must be a number");
  return j.get<double>();
}

inline PopulationSpec parse_population(const json& j, std::string* preset_name) {
  if (!j.is_object()) throw ParseError("'population' must be an object");
  if (j.contains("preset")) {
    reject_unknown_keys(j, {"preset"}, "population");
    const auto name = j.at("preset").get<std::string>();
    auto spec = preset_by_name(name);
    if (!spec) throw ValidationError("unknown population preset '" + name + "'");
    *preset_name = name;
    return *spec;
  }
  reject_unknown_keys(j,
                      {"n_patients", "allocation_ratio", "healthy_fraction", "severity_alpha",
                       "severity_beta", "corner_marginal", "progression"},
                      "population");
  PopulationSpec spec;
  spec.n_patients = j.at("n_patients").get<int>();
  if (j.contains("allocation_ratio")) {
    const auto& r = j.at("allocation_ratio");
    if (!r.is_array() || r.size() != 2) throw ParseError("allocation_ratio must be [t, c]");
    spec.allocation_ratio = {r[0].get<int>(), r[1].get<int>()};
  }
  spec.severity.healthy_fraction = require_number(j.at("healthy_fraction"), "healthy_fraction");
  spec.severity.alpha = require_number(j.at("severity_alpha"), "severity_alpha");
  spec.severity.beta = require_number(j.at("severity_beta"), "severity_beta");
  const auto& m = j.at("corner_marginal");
  if (!m.is_array() || m.size() != 4) throw ParseError("corner_marginal must have 4 entries");
  for (std::size_t k = 0; k < 4; ++k)
    spec.corner_marginal[k] = require_number(m[k], "corner_marginal");
  const auto& prog = j.at("progression");
  reject_unknown_keys(prog, {"treatment", "control"}, "population.progression");
  auto parse_prog = [](const json& p, const std::string& where) {
    reject_unknown_keys(p, {"progressor_fraction", "mean_jump"}, where);
    return ProgressionParams{require_number(p.at("progressor_fraction"), where),
                             require_number(p.at("mean_jump"), where)};
  };
  spec.progression_treatment = parse_prog(prog.at("treatment"), "progression.treatment");
  spec.progression_control = parse_prog(prog.at("control"), "progression.control");
  spec.validate();
  return spec;
}

inline AIModelSpec parse_ai(const json& j) {
  reject_unknown_keys(j, {"kind", "p_miss", "confusion"}, "ai");
  const auto kind = j.at("kind").get<std::string>();
  AIModelSpec spec;
  if (kind == "trained")
    spec = AIModelSpec::trained();
  else if (kind == "random")
    spec = AIModelSpec::random();
  else if (kind == "naive")
    spec = AIModelSpec::naive();
  else
    throw ValidationError("ai.kind must be trained|random|naive");
  if (j.contains("p_miss")) {
    spec.patient_missingness_prob = require_number(j.at("p_miss"), "ai.p_miss");
    if (spec.patient_missingness_prob < 0.0 || spec.patient_missingness_prob > 1.0)
      throw ValidationError("ai.p_miss must be in [0,1]");
  }
  if (j.contains("confusion")) {
    if (kind != "trained") throw ValidationError("ai.confusion only applies to the trained kind");
    const auto& c = j.at("confusion");
    if (!c.is_array() || c.size() != 4) throw ParseError("ai.confusion must be a 4x4 matrix");
    for (std::size_t r = 0; r < 4; ++r) {
      if (!c[r].is_array() || c[r].size() != 4)
        throw ParseError("ai.confusion must be a 4x4 matrix");
      for (std::size_t k = 0; k < 4; ++k)
        spec.confusion[r][k] = require_number(c[r][k], "ai.confusion");
    }
    try {
      validate_confusion(spec.confusion);
    } catch (const InvalidMatrix& e) {
      throw ValidationError(std::string("ai.confusion: ") + e.what());
    }
  }
  return spec;
}

inline DisagreementRule parse_disagreement(const json& j) {
  reject_unknown_keys(j, {"mode", "delta", "q"}, "disagreement");
  const auto mode = j.at("mode").get<std::string>();
  if (mode == "threshold") {
    int delta = 0;
    if (j.contains("delta")) delta = j.at("delta").get<int>();
    if (delta < 0) throw ValidationError("disagreement.delta must be >= 0");
    return DisagreementRule::threshold(delta);
  }
  if (mode == "percentile") {
    if (!j.contains("q")) throw ParseError("percentile disagreement needs 'q'");
    const double q = require_number(j.at("q"), "disagreement.q");
    if (!(q > 0.0 && q <= 1.0)) throw ValidationError("disagreement.q must be in (0,1]");
    return DisagreementRule::percentile(q);
  }
  throw ValidationError("disagreement.mode must be threshold|percentile");
}

inline PoolingPolicy parse_pooling(const json& j) {
  const auto s = j.get<std::string>();
  if (s == "mean_all") return PoolingPolicy::kMeanOfAllReads;
  if (s == "mean_excluding_arbitrator") return PoolingPolicy::kMeanExcludingArbitrator;
  if (s == "arbitrator_overrides") return PoolingPolicy::kArbitratorOverrides;
  throw ValidationError("pooling must be mean_all|mean_excluding_arbitrator|arbitrator_overrides");
}

inline const char* pooling_name(PoolingPolicy p) {
  switch (p) {
    case PoolingPolicy::kMeanOfAllReads: return "mean_all";
    case PoolingPolicy::kMeanExcludingArbitrator: return "mean_excluding_arbitrator";
    case PoolingPolicy::kArbitratorOverrides: return "arbitrator_overrides";
  }
  return "?";
}

}  // namespace detail

inline ScenarioConfig parse_config_json(const nlohmann::json& j) {
  using detail::reject_unknown_keys;
  using detail::require_number;
  if (!j.is_object()) throw ParseError("config root must be a JSON object");
  reject_unknown_keys(j,
                      {"seed", "population", "frameworks", "ai", "disagreement", "pooling",
                       "human", "cost", "replications", "out_dir", "threads", "format"},
                      "config root");

  ScenarioConfig cfg;
  if (!j.contains("seed")) throw ValidationError("config requires a 'seed' (no clock default)");
  if (!j.at("seed").is_number_unsigned())
    throw ValidationError("'seed' must be a nonnegative integer");
  cfg.seed = j.at("seed").get<std::uint64_t>();

  if (!j.contains("population")) throw ValidationError("config requires 'population'");
  cfg.population = detail::parse_population(j.at("population"), &cfg.population_preset);

  if (j.contains("frameworks")) {
    const auto& fws = j.at("frameworks");
    if (!fws.is_array() || fws.empty())
      throw ValidationError("'frameworks' must be a nonempty array");
    cfg.frameworks.clear();
    for (const auto& f : fws) {
      const auto name = f.get<std::string>();
      const auto kind = framework_by_name(name);
      if (!kind) throw ValidationError("unknown framework '" + name + "'");
      if (std::find(cfg.frameworks.begin(), cfg.frameworks.end(), *kind) != cfg.frameworks.end())
        throw ValidationError("framework '" + name + "' listed twice");
      cfg.frameworks.push_back(*kind);
    }
  }

  if (j.contains("ai")) cfg.ai = detail::parse_ai(j.at("ai"));
  if (j.contains("disagreement")) cfg.disagreement = detail::parse_disagreement(j.at("disagreement"));
  if (j.contains("pooling")) cfg.pooling = detail::parse_pooling(j.at("pooling"));

  if (j.contains("human")) {
    const auto& h = j.at("human");
    reject_unknown_keys(h, {"epsilon", "epsilons"}, "human");
    if (h.contains("epsilon") && h.contains("epsilons"))
      throw ValidationError("human: give either 'epsilon' or 'epsilons', not both");
    auto check = [](double e) {
      if (e < 0.0 || e > 1.0) throw ValidationError("human epsilon must be in [0,1]");
      return HumanReaderParams{e};
    };
    if (h.contains("epsilon")) {
      const auto p = check(require_number(h.at("epsilon"), "human.epsilon"));
      cfg.humans = {p, p, p};
    } else if (h.contains("epsilons")) {
      const auto& arr = h.at("epsilons");
      if (!arr.is_array() || arr.size() != 3)
        throw ParseError("human.epsilons must have 3 entries (first, second, arbitrator)");
      for (std::size_t i = 0; i < 3; ++i)
        cfg.humans[i] = check(require_number(arr[i], "human.epsilons"));
    }
  }

  if (j.contains("cost")) {
    const auto& c = j.at("cost");
    reject_unknown_keys(c, {"c_first", "c_second", "arbitration_ratio", "c_ai", "r_grid"}, "cost");
    if (c.contains("c_first")) cfg.cost.c_first = require_number(c.at("c_first"), "cost.c_first");
    if (c.contains("c_second"))
      cfg.cost.c_second = require_number(c.at("c_second"), "cost.c_second");
    if (c.contains("arbitration_ratio"))
      cfg.cost.arbitration_ratio = require_number(c.at("arbitration_ratio"), "cost.arbitration_ratio");
    if (c.contains("c_ai")) cfg.cost.c_ai = require_number(c.at("c_ai"), "cost.c_ai");
    cfg.cost.validate();
    if (c.contains("r_grid")) {
      const auto& g = c.at("r_grid");
      if (!g.is_array() || g.empty()) throw ValidationError("cost.r_grid must be nonempty");
      cfg.r_grid.clear();
      for (const auto& r : g) {
        const double v = require_number(r, "cost.r_grid");
        if (v <= 0.0) throw ValidationError("cost.r_grid entries must be > 0");
        cfg.r_grid.push_back(v);
      }
    }
  }

  if (j.contains("replications")) {
    if (!j.at("replications").is_number_integer())
      throw ParseError("'replications' must be an integer");
    cfg.replications = j.at("replications").get<int>();
    if (cfg.replications < 1) throw ValidationError("'replications' must be >= 1");
  }
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("threads")) {
    cfg.threads = j.at("threads").get<int>();
    if (cfg.threads < 1) throw ValidationError("'threads' must be >= 1");
  }
  if (j.contains("format")) {
    cfg.format = j.at("format").get<std::string>();
    if (cfg.format != "csv" && cfg.format != "json")
      throw ValidationError("'format' must be csv|json");
  }
  return cfg;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return parse_config_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
}

inline ScenarioConfig parse_config(const std::string& path) {
  return parse_config_text(read_file(path));
}

/// Canonical JSON for the effective config: defaults applied, keys sorted.
/// The manifest digest hashes this, so it moves iff the content moves.
inline nlohmann::json to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  if (!cfg.population_preset.empty()) {
    j["population"] = {{"preset", cfg.population_preset}};
  } else {
    const auto& p = cfg.population;
    j["population"] = {
        {"n_patients", p.n_patients},
        {"allocation_ratio", {p.allocation_ratio[0], p.allocation_ratio[1]}},
        {"healthy_fraction", p.severity.healthy_fraction},
        {"severity_alpha", p.severity.alpha},
        {"severity_beta", p.severity.beta},
        {"corner_marginal", p.corner_marginal},
        {"progression",
         {{"treatment",
           {{"progressor_fraction", p.progression_treatment.progressor_fraction},
            {"mean_jump", p.progression_treatment.mean_jump}}},
          {"control",
           {{"progressor_fraction", p.progression_control.progressor_fraction},
            {"mean_jump", p.progression_control.mean_jump}}}}}};
  }
  auto fw_names = nlohmann::json::array();
  for (auto f : cfg.frameworks) fw_names.push_back(framework_name(f));
  j["frameworks"] = fw_names;
  j["ai"] = {{"kind", ai_kind_name(cfg.ai.kind)},
             {"p_miss", cfg.ai.patient_missingness_prob},
             {"confusion", cfg.ai.confusion}};
  if (cfg.disagreement.mode == DisagreementRule::Mode::kThreshold)
    j["disagreement"] = {{"mode", "threshold"}, {"delta", cfg.disagreement.delta}};
  else
    j["disagreement"] = {{"mode", "percentile"}, {"q", cfg.disagreement.q}};
  j["pooling"] = detail::pooling_name(cfg.pooling);
  j["human"] = {{"epsilons",
                 {cfg.humans[0].epsilon, cfg.humans[1].epsilon, cfg.humans[2].epsilon}}};
  j["cost"] = {{"c_first", cfg.cost.c_first},
               {"c_second", cfg.cost.c_second},
               {"arbitration_ratio", cfg.cost.arbitration_ratio},
               {"c_ai", cfg.cost.c_ai},
               {"r_grid", cfg.r_grid}};
  j["replications"] = cfg.replications;
  // threads and out_dir are execution details: they must not move the digest
  j["format"] = cfg.format;
  return j;
}

/// Content digest of the effective config (output directory excluded:
/// where results land does not change what they are).
inline std::string config_digest(const ScenarioConfig& cfg) {
  return hex16(fnv1a64(to_json(cfg).dump()));
}

}  // namespace readsim
