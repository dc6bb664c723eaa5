#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "vcsgrid/lp.hpp"
#include "vcsgrid/netmodel.hpp"
#include "vcsgrid/sensitivity.hpp"

namespace vcsgrid {

enum class OpfStatus { optimal, infeasible };

enum class Formulation {
  nodal,         // angles and flows as variables; LMPs are nodal balance duals
  shift_factor,  // dispatch only, lazily added flow limits; LMPs rebuilt from line duals
};

struct OpfSolution {
  OpfStatus status = OpfStatus::infeasible;
  Formulation formulation = Formulation::nodal;
  Eigen::VectorXd dispatch;  // MW per generator
  Eigen::VectorXd flows;     // MW per line, signed from -> to
  Eigen::VectorXd lmp;       // $/MWh per bus
  Eigen::VectorXd mu;        // $/MWh per line, >= 0
  double objective = 0.0;    // $/h
  std::size_t reference_index = 0;
  int simplex_iterations = 0;

  bool optimal() const { return status == OpfStatus::optimal; }

  // mu with the sign of the binding direction (positive when the from -> to
  // limit binds).
  Eigen::VectorXd signed_shadow_prices() const {
    Eigen::VectorXd s = mu;
    for (Eigen::Index k = 0; k < s.size(); ++k) s(k) = flows(k) < 0 ? -mu(k) : mu(k);
    return s;
  }
};

class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Generator output columns shared by both formulations: one bounded column
// per linear generator, a fixed p_min column plus one column per block for
// piecewise generators.
struct GenColumns {
  std::vector<std::size_t> owner;  // generator position per column
  std::vector<double> lower, upper, cost;
};

inline GenColumns generator_columns(const GridCase& gc) {
  GenColumns cols;
  for (std::size_t g = 0; g < gc.generators.size(); ++g) {
    const auto& gen = gc.generators[g];
    if (gen.segments.empty()) {
      cols.owner.push_back(g);
      cols.lower.push_back(gen.p_min);
      cols.upper.push_back(gen.p_max);
      cols.cost.push_back(gen.cost);
      continue;
    }
    cols.owner.push_back(g);
    cols.lower.push_back(gen.p_min);
    cols.upper.push_back(gen.p_min);
    cols.cost.push_back(gen.segments.front().marginal_cost);
    for (const auto& s : gen.segments) {
      cols.owner.push_back(g);
      cols.lower.push_back(0.0);
      cols.upper.push_back(s.width);
      cols.cost.push_back(s.marginal_cost);
    }
  }
  return cols;
}

inline Eigen::VectorXd dispatch_from_columns(const GridCase& gc, const GenColumns& cols, const Eigen::VectorXd& x) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gc.generators.size()));
  for (std::size_t c = 0; c < cols.owner.size(); ++c) d(static_cast<Eigen::Index>(cols.owner[c])) += x(static_cast<Eigen::Index>(c));
  return d;
}

inline void check_costs(const lp::Result& r) {
  if (r.status == lp::Status::unbounded) throw SolverError("DCOPF is unbounded; check generator cost data");
  if (r.status == lp::Status::iteration_limit) throw SolverError("DCOPF simplex hit its iteration limit");
}

}  // namespace detail

// DC optimal power flow in the angle formulation. Rows are nodal balances
// (duals = LMPs) and flow definitions f = b (theta_from - theta_to); flow
// variables carry the limits, so line shadow prices are their reduced costs.
inline OpfSolution solve_dcopf(const GridCase& gc, bool enforce_limits = true) {
  using Eigen::Index;
  const auto cols = detail::generator_columns(gc);
  const Index ng = static_cast<Index>(cols.owner.size());
  const Index nb = static_cast<Index>(gc.num_buses());
  std::vector<std::size_t> live;
  for (std::size_t k = 0; k < gc.lines.size(); ++k)
    if (gc.lines[k].in_service) live.push_back(k);
  const Index nl = static_cast<Index>(live.size());
  const std::size_t ref = gc.reference_index();

  // Columns: [gen blocks | phase (theta * base_mva) | flows]; rows: [buses | lines].
  const Index n = ng + nb + nl, m = nb + nl;
  std::vector<Eigen::Triplet<double>> trip;
  lp::LinearProgram prog;
  prog.b = Eigen::VectorXd::Zero(m);
  prog.c = Eigen::VectorXd::Zero(n);
  prog.lower = Eigen::VectorXd::Constant(n, -lp::kInf);
  prog.upper = Eigen::VectorXd::Constant(n, lp::kInf);

  std::unordered_map<BusId, Index> pos;
  for (Index i = 0; i < nb; ++i) pos.emplace(gc.buses[static_cast<std::size_t>(i)].id, i);

  for (Index c = 0; c < ng; ++c) {
    const auto& gen = gc.generators[cols.owner[static_cast<std::size_t>(c)]];
    trip.emplace_back(pos.at(gen.at_bus), c, 1.0);
    prog.lower(c) = cols.lower[static_cast<std::size_t>(c)];
    prog.upper(c) = cols.upper[static_cast<std::size_t>(c)];
    prog.c(c) = cols.cost[static_cast<std::size_t>(c)];
  }
  for (Index i = 0; i < nb; ++i) prog.b(i) = gc.buses[static_cast<std::size_t>(i)].load;
  prog.lower(ng + static_cast<Index>(ref)) = 0.0;
  prog.upper(ng + static_cast<Index>(ref)) = 0.0;

  for (Index k = 0; k < nl; ++k) {
    const auto& l = gc.lines[live[static_cast<std::size_t>(k)]];
    const Index f = pos.at(l.from_bus), t = pos.at(l.to_bus);
    const Index col = ng + nb + k, row = nb + k;
    trip.emplace_back(f, col, -1.0);
    trip.emplace_back(t, col, 1.0);
    trip.emplace_back(row, col, 1.0);
    trip.emplace_back(row, ng + f, -l.susceptance);
    trip.emplace_back(row, ng + t, l.susceptance);
    if (enforce_limits && l.has_limit()) {
      prog.lower(col) = -l.limit;
      prog.upper(col) = l.limit;
    }
  }
  prog.a.resize(m, n);
  prog.a.setFromTriplets(trip.begin(), trip.end());

  const auto r = lp::solve(prog);
  detail::check_costs(r);

  OpfSolution sol;
  sol.formulation = Formulation::nodal;
  sol.reference_index = ref;
  sol.simplex_iterations = r.iterations;
  if (r.status != lp::Status::optimal) return sol;
  sol.status = OpfStatus::optimal;
  sol.objective = r.objective;
  sol.dispatch = detail::dispatch_from_columns(gc, cols, r.x);
  sol.lmp = r.row_duals.head(nb);
  sol.flows = Eigen::VectorXd::Zero(static_cast<Index>(gc.num_lines()));
  sol.mu = Eigen::VectorXd::Zero(static_cast<Index>(gc.num_lines()));
  for (Index k = 0; k < nl; ++k) {
    const auto line = static_cast<Index>(live[static_cast<std::size_t>(k)]);
    const Index col = ng + nb + k;
    sol.flows(line) = r.x(col);
    if (prog.upper(col) < lp::kInf) sol.mu(line) = std::abs(r.reduced_costs(col));
  }
  return sol;
}

// Rebuilds LMPs from line shadow prices: lambda_i = lambda_ref - sum_j mu_j psi(j, i),
// with `signed_mu` oriented like the rows of `sf`.
inline Eigen::VectorXd lmp_via_shift_factors(const ShiftFactorMatrix& sf, const Eigen::VectorXd& signed_mu, double lambda_ref) {
  if (signed_mu.size() != sf.psi.rows()) throw std::invalid_argument("shadow price vector does not match shift factor rows");
  return Eigen::VectorXd::Constant(sf.psi.cols(), lambda_ref) - sf.psi.transpose() * signed_mu;
}

// Dispatch-only DCOPF over a fixed shift factor matrix. Only limits that bind
// or are violated enter the LP; the rest are checked after each solve.
class ShiftFactorDcopf {
public:
  explicit ShiftFactorDcopf(const GridCase& gc) : gc_(&gc), cols_(detail::generator_columns(gc)) {
    load_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gc.num_buses()));
    for (std::size_t i = 0; i < gc.buses.size(); ++i) load_(static_cast<Eigen::Index>(i)) = gc.buses[i].load;
    for (auto owner : cols_.owner) col_bus_.push_back(gc.bus_index(gc.generators[owner].at_bus));
    limit_.resize(static_cast<Eigen::Index>(gc.num_lines()));
    for (std::size_t k = 0; k < gc.lines.size(); ++k)
      limit_(static_cast<Eigen::Index>(k)) = gc.lines[k].has_limit() ? gc.lines[k].limit : lp::kInf;
  }

  // Shift factor columns of the generator blocks and the flows caused by load.
  struct Sensitivities {
    Eigen::MatrixXd gen;        // lines x generator columns
    Eigen::VectorXd load_flow;  // lines
  };

  Sensitivities sensitivities(const ShiftFactorMatrix& sf) const {
    Sensitivities s;
    s.gen.resize(sf.psi.rows(), static_cast<Eigen::Index>(col_bus_.size()));
    for (std::size_t c = 0; c < col_bus_.size(); ++c) s.gen.col(static_cast<Eigen::Index>(c)) = sf.psi.col(static_cast<Eigen::Index>(col_bus_[c]));
    s.load_flow = -(sf.psi * load_);
    return s;
  }

  // Sensitivities after taking `outage` out, by rank-one update.
  static Sensitivities without(const Sensitivities& s, const ShiftFactorMatrix& sf, std::size_t outage) {
    const auto [f, t] = sf.orientation[outage];
    const auto k = static_cast<Eigen::Index>(outage);
    const Eigen::VectorXd transfer = sf.psi.col(static_cast<Eigen::Index>(f)) - sf.psi.col(static_cast<Eigen::Index>(t));
    const double denom = 1.0 - transfer(k);
    if (std::abs(denom) < 1e-10) throw TopologyError("outage islands the network");
    const Eigen::VectorXd u = transfer / denom;
    Sensitivities out{s.gen, s.load_flow};
    out.gen.noalias() += u * s.gen.row(k);
    out.load_flow += u * s.load_flow(k);
    out.gen.row(k).setZero();
    out.load_flow(k) = 0.0;
    return out;
  }

  struct Outcome {
    OpfStatus status = OpfStatus::infeasible;
    double objective = 0.0;
    Eigen::VectorXd column_values;
    Eigen::VectorXd flows;
    Eigen::VectorXd signed_mu;
    double lambda_ref = 0.0;
    std::vector<std::size_t> active;  // lines whose limits were in the LP
  };

  Outcome solve(const Sensitivities& s, bool enforce_limits = true, std::span<const std::size_t> hint = {}) const {
    std::vector<std::size_t> active;
    if (enforce_limits)
      for (auto k : hint)
        if (std::isfinite(limit_(static_cast<Eigen::Index>(k))) && s.gen.row(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff() > 0)
          active.push_back(k);
    const Eigen::Index nc = static_cast<Eigen::Index>(col_bus_.size());
    const double tol = 1e-6;
    for (int round = 0; round < 100; ++round) {
      const Eigen::Index m = 1 + static_cast<Eigen::Index>(active.size());
      lp::LinearProgram prog;
      const Eigen::Index n = nc + static_cast<Eigen::Index>(active.size());
      std::vector<Eigen::Triplet<double>> trip;
      prog.b = Eigen::VectorXd::Zero(m);
      prog.c = Eigen::VectorXd::Zero(n);
      prog.lower.resize(n);
      prog.upper.resize(n);
      prog.b(0) = load_.sum();
      for (Eigen::Index c = 0; c < nc; ++c) {
        trip.emplace_back(0, c, 1.0);
        prog.lower(c) = cols_.lower[static_cast<std::size_t>(c)];
        prog.upper(c) = cols_.upper[static_cast<std::size_t>(c)];
        prog.c(c) = cols_.cost[static_cast<std::size_t>(c)];
      }
      for (std::size_t a = 0; a < active.size(); ++a) {
        const auto k = static_cast<Eigen::Index>(active[a]);
        const auto row = static_cast<Eigen::Index>(a + 1);
        for (Eigen::Index c = 0; c < nc; ++c)
          if (s.gen(k, c) != 0.0) trip.emplace_back(row, c, s.gen(k, c));
        trip.emplace_back(row, nc + static_cast<Eigen::Index>(a), -1.0);
        prog.b(row) = -s.load_flow(k);
        prog.lower(nc + static_cast<Eigen::Index>(a)) = -limit_(k);
        prog.upper(nc + static_cast<Eigen::Index>(a)) = limit_(k);
      }
      prog.a.resize(m, n);
      prog.a.setFromTriplets(trip.begin(), trip.end());
      const auto r = lp::solve(prog);
      detail::check_costs(r);
      Outcome out;
      if (r.status != lp::Status::optimal) return out;
      const Eigen::VectorXd x = r.x.head(nc);
      out.flows = s.gen * x + s.load_flow;
      if (enforce_limits) {
        std::vector<std::pair<double, std::size_t>> violated;
        for (Eigen::Index k = 0; k < out.flows.size(); ++k) {
          const double excess = std::abs(out.flows(k)) - limit_(k);
          if (excess > tol && std::find(active.begin(), active.end(), static_cast<std::size_t>(k)) == active.end())
            violated.emplace_back(excess, static_cast<std::size_t>(k));
        }
        if (!violated.empty()) {
          std::sort(violated.begin(), violated.end(), std::greater<>());
          for (std::size_t v = 0; v < std::min<std::size_t>(violated.size(), 8); ++v) active.push_back(violated[v].second);
          continue;
        }
      }
      out.status = OpfStatus::optimal;
      out.objective = r.objective;
      out.column_values = x;
      out.lambda_ref = r.row_duals(0);
      out.signed_mu = Eigen::VectorXd::Zero(out.flows.size());
      // Line row: sum psi g - s = -load_flow, so its dual is -(signed shadow price).
      for (std::size_t a = 0; a < active.size(); ++a) out.signed_mu(static_cast<Eigen::Index>(active[a])) = -r.row_duals(static_cast<Eigen::Index>(a + 1));
      out.active = std::move(active);
      return out;
    }
    throw SolverError("shift factor DCOPF did not converge on an active set");
  }

  OpfSolution to_solution(const Outcome& o, const ShiftFactorMatrix& sf) const {
    OpfSolution sol;
    sol.formulation = Formulation::shift_factor;
    sol.reference_index = sf.reference_index;
    if (o.status != OpfStatus::optimal) return sol;
    sol.status = OpfStatus::optimal;
    sol.objective = o.objective;
    sol.dispatch = detail::dispatch_from_columns(*gc_, cols_, o.column_values);
    sol.flows = o.flows;
    sol.mu = o.signed_mu.cwiseAbs();
    sol.lmp = lmp_via_shift_factors(sf, o.signed_mu, o.lambda_ref);
    return sol;
  }

private:
  const GridCase* gc_;
  detail::GenColumns cols_;
  std::vector<std::size_t> col_bus_;
  Eigen::VectorXd load_;
  Eigen::VectorXd limit_;
};

inline OpfSolution solve_dcopf(const GridCase& gc, bool enforce_limits, Formulation formulation) {
  if (formulation == Formulation::nodal) return solve_dcopf(gc, enforce_limits);
  const auto sf = shift_factor_matrix(gc);
  ShiftFactorDcopf opf(gc);
  return opf.to_solution(opf.solve(opf.sensitivities(sf), enforce_limits), sf);
}

// Lines at their limit (within `eps_pu` per unit) or carrying a positive shadow price.
inline std::vector<std::size_t> congested_lines(const GridCase& gc, const OpfSolution& sol, double eps_pu = 1e-6,
                                                double mu_tol = 1e-6) {
  std::vector<std::size_t> out;
  if (!sol.optimal()) return out;
  for (std::size_t k = 0; k < gc.lines.size(); ++k) {
    const auto& l = gc.lines[k];
    if (!l.in_service || !l.has_limit()) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    if (l.limit - std::abs(sol.flows(kk)) <= eps_pu * gc.base_mva || sol.mu(kk) > mu_tol) out.push_back(k);
  }
  return out;
}

struct MasReport {
  OpfStatus constrained_status = OpfStatus::infeasible;
  double constrained_cost = 0.0;
  double unconstrained_cost = 0.0;
  std::optional<double> mas;  // undefined when the constrained case is infeasible
};

// Maximum attainable savings: constrained minus unconstrained DCOPF cost.
inline MasReport mas(const GridCase& gc) {
  MasReport rep;
  const auto con = solve_dcopf(gc, true);
  const auto unc = solve_dcopf(gc, false);
  if (!unc.optimal()) throw SolverError("unconstrained DCOPF infeasible: generation cannot cover load");
  rep.unconstrained_cost = unc.objective;
  rep.constrained_status = con.status;
  if (con.optimal()) {
    rep.constrained_cost = con.objective;
    rep.mas = con.objective - unc.objective;
  }
  return rep;
}

// True when LMPs stay put (within `tol` relative) under a tiny deterministic
// cost perturbation, i.e. the optimum is not dual degenerate.
inline bool duals_are_stable(const GridCase& gc, const OpfSolution& sol, double rel_perturbation = 1e-7, double tol = 1e-4) {
  if (!sol.optimal()) return false;
  GridCase bumped = gc;
  for (std::size_t g = 0; g < bumped.generators.size(); ++g) {
    const double f = 1.0 + rel_perturbation * (g % 2 == 0 ? 1.0 : -1.0) * static_cast<double>(1 + g % 3);
    bumped.generators[g].cost *= f;
    for (auto& s : bumped.generators[g].segments) s.marginal_cost *= f;
  }
  const auto again = solve_dcopf(bumped, true);
  if (!again.optimal()) return false;
  const double scale = std::max(1.0, sol.lmp.cwiseAbs().maxCoeff());
  return (again.lmp - sol.lmp).cwiseAbs().maxCoeff() <= tol * scale;
}

inline nlohmann::json to_json(const GridCase& gc, const OpfSolution& sol) {
  using nlohmann::json;
  json j;
  j["status"] = sol.optimal() ? "optimal" : "infeasible";
  j["formulation"] = sol.formulation == Formulation::nodal ? "nodal" : "shift_factor";
  if (!sol.optimal()) return j;
  j["objective"] = sol.objective;
  j["reference_bus"] = gc.buses[sol.reference_index].id;
  j["dispatch"] = json::array();
  for (std::size_t g = 0; g < gc.generators.size(); ++g)
    j["dispatch"].push_back({{"generator", gc.generators[g].id}, {"mw", sol.dispatch(static_cast<Eigen::Index>(g))}});
  j["lines"] = json::array();
  for (std::size_t k = 0; k < gc.lines.size(); ++k)
    j["lines"].push_back({{"line", gc.lines[k].id},
                          {"flow", sol.flows(static_cast<Eigen::Index>(k))},
                          {"mu", sol.mu(static_cast<Eigen::Index>(k))}});
  j["buses"] = json::array();
  for (std::size_t i = 0; i < gc.buses.size(); ++i)
    j["buses"].push_back({{"bus", gc.buses[i].id}, {"lmp", sol.lmp(static_cast<Eigen::Index>(i))}});
  return j;
}

}  // namespace vcsgrid
