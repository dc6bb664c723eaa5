#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcsgrid/dcopf.hpp"
#include "vcsgrid/decomposition.hpp"

namespace vcsgrid {

struct GreedyOptions {
  int max_iter = 50;
  double min_saving = 1e-2;       // $/h a committed switch must save
  double threshold_frac = 0.10;   // local greedy only
  bool refresh_decomposition = true;
};

struct SwitchingPlan {
  std::vector<LineId> outages;
  std::vector<double> objectives;       // base cost followed by the cost after each outage
  std::vector<long> solves_per_step;    // candidate DCOPFs evaluated in each search round
  long total_solves = 0;                // including the base solve
  std::string stop_reason;
  OpfSolution final_solution;
  GridCase final_case;

  double saving() const { return objectives.empty() ? 0.0 : objectives.front() - objectives.back(); }
};

// In-service lines whose removal keeps the network connected, optionally
// restricted to `restrict_to` (line positions). Result is ascending.
inline std::vector<std::size_t> allowable_outages(const GridCase& gc,
                                                  const std::optional<std::vector<std::size_t>>& restrict_to = std::nullopt) {
  std::vector<bool> is_bridge(gc.num_lines(), false);
  for (auto b : bridges(Graph(gc))) is_bridge[b] = true;
  std::vector<bool> allowed(gc.num_lines(), !restrict_to.has_value());
  if (restrict_to)
    for (auto k : *restrict_to) allowed.at(k) = true;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < gc.num_lines(); ++k)
    if (gc.lines[k].in_service && !is_bridge[k] && allowed[k]) out.push_back(k);
  return out;
}

namespace detail {

// Returns the candidate line positions for the next round, or nullopt to stop
// (with `reason` filled in).
using ScopeFn = std::function<std::optional<std::vector<std::size_t>>(const GridCase&, const OpfSolution&, std::string& reason)>;

inline SwitchingPlan run_greedy(const GridCase& gc, const GreedyOptions& opt, const ScopeFn& scope) {
  SwitchingPlan plan;
  GridCase current = gc;
  OpfSolution sol = solve_dcopf(current, true);
  plan.total_solves = 1;
  if (!sol.optimal()) throw SolverError("base case DCOPF is infeasible");
  plan.objectives.push_back(sol.objective);
  plan.stop_reason = "max_iter";

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    std::string reason;
    auto candidates = scope(current, sol, reason);
    if (!candidates) {
      plan.stop_reason = reason;
      break;
    }
    const auto sf = shift_factor_matrix(current);
    const ShiftFactorDcopf opf(current);
    const auto base = opf.sensitivities(sf);
    const auto hint = congested_lines(current, sol);

    std::optional<std::size_t> best;
    double best_cost = sol.objective;
    const double tie = 1e-9 * std::max(1.0, std::abs(sol.objective));
    long solves = 0;
    for (auto k : *candidates) {
      ++solves;
      const auto out = opf.solve(ShiftFactorDcopf::without(base, sf, k), true, hint);
      if (out.status != OpfStatus::optimal) continue;
      if (out.objective < best_cost - tie) {
        best_cost = out.objective;
        best = k;
      }
    }
    plan.total_solves += solves;
    plan.solves_per_step.push_back(solves);
    if (!best || sol.objective - best_cost <= opt.min_saving) {
      plan.stop_reason = "no_improving_switch";
      break;
    }
    current = with_line_status(current, current.lines[*best].id, false);
    if (!is_connected(Graph(current))) throw TopologyError("committed switch disconnected the network");
    // Bookkeeping re-solve for duals; the evaluation above already paid for it.
    sol = solve_dcopf(current, true);
    if (!sol.optimal()) throw SolverError("committed topology became infeasible on re-solve");
    plan.outages.push_back(current.lines[*best].id);
    plan.objectives.push_back(sol.objective);
  }
  plan.final_solution = sol;
  plan.final_case = std::move(current);
  return plan;
}

}  // namespace detail

// Each round re-solves the DCOPF for every allowable single outage and
// commits the one with the largest saving.
inline SwitchingPlan standard_greedy(const GridCase& gc, const GreedyOptions& opt = {}) {
  return detail::run_greedy(gc, opt, [](const GridCase& cur, const OpfSolution&, std::string&) {
    return std::optional<std::vector<std::size_t>>(allowable_outages(cur));
  });
}

// Same loop as standard_greedy, but candidates are limited to the congested
// sub-grid found by decompose_by_lmp on the current solution.
inline SwitchingPlan local_greedy(const GridCase& gc, const GreedyOptions& opt = {}) {
  std::optional<std::vector<LineId>> frozen;  // scope line ids when not refreshing
  return detail::run_greedy(gc, opt, [&](const GridCase& cur, const OpfSolution& sol, std::string& reason) -> std::optional<std::vector<std::size_t>> {
    if (congested_lines(cur, sol).empty()) {
      reason = "no_congestion";
      return std::nullopt;
    }
    std::vector<std::size_t> scope;
    if (opt.refresh_decomposition || !frozen) {
      const auto d = decompose_by_lmp(cur, sol, {opt.threshold_frac});
      scope = d.congested_subgrid().lines;
      frozen.emplace();
      for (auto k : scope) frozen->push_back(cur.lines[k].id);
    } else {
      for (auto id : *frozen) scope.push_back(cur.line_index(id));
    }
    return allowable_outages(cur, scope);
  });
}

inline nlohmann::json to_json(const SwitchingPlan& plan) {
  return {{"outages", plan.outages},
          {"objectives", plan.objectives},
          {"solves_per_step", plan.solves_per_step},
          {"total_solves", plan.total_solves},
          {"saving", plan.saving()},
          {"stop_reason", plan.stop_reason}};
}

}  // namespace vcsgrid
