#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "readsim/errors.hpp"

namespace readsim {

/// Fractions of reading units that needed a second human / an arbitrator.
struct EscalationRates {
  double p_second_human = 0.0;
  double p_arbitration = 0.0;
};

/// Per-stage reading prices. The arbitration price is expressed as a ratio
/// to the second read, matching how the cost sweep is reported.
struct CostParams {
  double c_first = 1.0;
  double c_second = 1.0;
  double arbitration_ratio = 1.0;  // c_arb / c_second
  double c_ai = 0.0;               // AI reads priced at zero by default

  void validate() const {
    if (c_first < 0.0 || c_second < 0.0 || c_ai < 0.0)
      throw ValidationError("CostParams: prices must be >= 0");
    if (arbitration_ratio <= 0.0)
      throw ValidationError("CostParams: arbitration_ratio must be > 0");
  }
};

/// Expected price of one reading unit:
///   c_first + p_second * c_second + p_arb * r * c_second + c_ai.
inline double expected_cost(const EscalationRates& rates, const CostParams& params) {
  params.validate();
  if (rates.p_second_human < 0.0 || rates.p_second_human > 1.0 || rates.p_arbitration < 0.0 ||
      rates.p_arbitration > 1.0)
    throw Error("expected_cost: rates must lie in [0,1]");
  return params.c_first + rates.p_second_human * params.c_second +
         rates.p_arbitration * params.arbitration_ratio * params.c_second + params.c_ai;
}

struct CostReport {
  std::string framework;
  double p_second = 0.0;
  double p_arb = 0.0;
  double expected_cost_per_reading = 0.0;          // at params.arbitration_ratio
  std::vector<std::pair<double, double>> sweep;    // (r, cost)
};

struct FrameworkRates {
  std::string framework;  // "HDR", "AI_IR", "AI_SR"
  EscalationRates rates;
  bool uses_ai = false;   // HDR carries no AI read, so no c_ai term
};

/// Per-framework cost curves over a grid of arbitration-cost ratios.
inline std::vector<CostReport> cost_sweep(std::span<const FrameworkRates> rates_by_framework,
                                          const CostParams& params,
                                          std::span<const double> r_grid) {
  if (r_grid.empty()) throw Error("cost_sweep: empty ratio grid");
  for (double r : r_grid)
    if (r <= 0.0) throw Error("cost_sweep: ratios must be positive");

  std::vector<CostReport> reports;
  reports.reserve(rates_by_framework.size());
  for (const auto& fr : rates_by_framework) {
    CostParams p = params;
    if (!fr.uses_ai) p.c_ai = 0.0;
    CostReport report;
    report.framework = fr.framework;
    report.p_second = fr.rates.p_second_human;
    report.p_arb = fr.rates.p_arbitration;
    report.expected_cost_per_reading = expected_cost(fr.rates, p);
    for (double r : r_grid) {
      CostParams at_r = p;
      at_r.arbitration_ratio = r;
      report.sweep.emplace_back(r, expected_cost(fr.rates, at_r));
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

/// Arbitration-cost ratio where the two linear cost curves meet; nullopt
/// when the curves are parallel or the meeting point is not positive.
inline std::optional<double> crossover_ratio(const EscalationRates& rates_ir,
                                             const EscalationRates& rates_sr,
                                             const CostParams& params = {}) {
  params.validate();
  const double slope_gap = (rates_ir.p_arbitration - rates_sr.p_arbitration) * params.c_second;
  const double intercept_gap =
      (rates_ir.p_second_human - rates_sr.p_second_human) * params.c_second;
  if (slope_gap == 0.0) return std::nullopt;
  const double r = -intercept_gap / slope_gap;
  if (r <= 0.0) return std::nullopt;
  return r;
}

}  // namespace readsim
