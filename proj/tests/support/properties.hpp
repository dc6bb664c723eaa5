#pragma once

// Property checkers shared by the unit tests and the acceptance runner. Each
// draws one random instance and reports the quantity the tolerance applies to.

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "support/random_cases.hpp"

namespace testsupport {

using namespace vcsgrid;

// Kron reduction: max difference of terminal angle differences between the
// reduced and the original network for one terminal-supported injection.
inline double kron_equivalence_error(Rng& rng) {
  const int n = uniform_int(rng, 3, 20);
  const GridCase gc = random_connected(rng, n, uniform_int(rng, 0, n));
  const auto b = build_susceptance(gc);
  auto terminals = random_subset(rng, gc.num_buses(), static_cast<std::size_t>(uniform_int(rng, 2, n)));
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  for (auto t : terminals) p(static_cast<Eigen::Index>(t)) = uniform(rng, -2.0, 2.0);
  p(static_cast<Eigen::Index>(terminals.front())) -= p.sum();

  const Eigen::VectorXd theta = reduce_reference(b, 0).solve(p);
  const auto k = kron_reduce(b, terminals);
  Eigen::VectorXd pt(static_cast<Eigen::Index>(terminals.size()));
  for (std::size_t a = 0; a < terminals.size(); ++a) pt(static_cast<Eigen::Index>(a)) = p(static_cast<Eigen::Index>(terminals[a]));
  const Eigen::VectorXd theta_t = reduce_reference(k, 0).solve(pt);

  double err = 0.0;
  const double base = theta(static_cast<Eigen::Index>(terminals[0]));
  for (std::size_t a = 1; a < terminals.size(); ++a)
    err = std::max(err, std::abs((theta(static_cast<Eigen::Index>(terminals[a])) - base) - theta_t(static_cast<Eigen::Index>(a))));
  return err;
}

// Interior-bus shift factor bound: over every (line, bus) pair separated by a
// random vertex cut, the largest excursion of psi(line, bus) outside
// [min, max] of psi(line, cut). Returns nullopt when no cut was found.
inline std::optional<double> cut_bound_excursion(Rng& rng) {
  const int n = uniform_int(rng, 4, 25);
  const GridCase gc = random_connected(rng, n, uniform_int(rng, 0, n));
  const Graph g(gc);
  const auto cut = random_vertex_cut(rng, g);
  if (!cut) return std::nullopt;
  const auto sf = shift_factor_matrix(gc);
  const auto [label, count] = components_without(g, detail::mask_of(gc.num_buses(), *cut));
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < gc.num_lines(); ++k) {
    const int lu = label[gc.bus_index(gc.lines[k].from_bus)], lv = label[gc.bus_index(gc.lines[k].to_bus)];
    const int side = std::max(lu, lv);  // a line touching a component lies on that side
    if (side < 0) continue;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto c : *cut) {
      lo = std::min(lo, sf(k, c));
      hi = std::max(hi, sf(k, c));
    }
    for (std::size_t p = 0; p < gc.num_buses(); ++p) {
      if (label[p] < 0 || label[p] == side) continue;
      worst = std::max(worst, std::max(lo - sf(k, p), sf(k, p) - hi));
    }
  }
  return worst;
}

// Numerical rank of a block: singular values above rel * sigma_max. Shift
// factors are O(1), so a block whose sigma_max is round-off is rank 0.
inline int numerical_rank(const Eigen::MatrixXd& m, double rel = 1e-8, double zero = 1e-10) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= zero) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) > rel * s(0) ? 1 : 0;
  return r;
}

struct RankCheck {
  int cut_size = 0;
  int rank_inside = 0;   // rows: lines on the inside, columns: cut + outside buses
  int rank_outside = 0;  // rows: lines on the outside, columns: inside + cut buses
};

inline std::optional<RankCheck> cross_block_ranks(Rng& rng) {
  const int n = uniform_int(rng, 5, 25);
  const GridCase gc = random_connected(rng, n, uniform_int(rng, 0, n));
  const Graph g(gc);
  const auto cut = random_vertex_cut(rng, g);
  if (!cut) return std::nullopt;
  const auto sf = shift_factor_matrix(gc);
  const auto [label, count] = components_without(g, detail::mask_of(gc.num_buses(), *cut));
  const int inside = uniform_int(rng, 0, count - 1);

  std::vector<std::size_t> in_rows, out_rows, in_cols, out_cols;
  for (std::size_t k = 0; k < gc.num_lines(); ++k) {
    const int lu = label[gc.bus_index(gc.lines[k].from_bus)], lv = label[gc.bus_index(gc.lines[k].to_bus)];
    const bool touches_in = lu == inside || lv == inside;
    const bool touches_out = (lu >= 0 && lu != inside) || (lv >= 0 && lv != inside);
    if (!touches_out) in_rows.push_back(k);
    if (!touches_in) out_rows.push_back(k);
  }
  for (std::size_t v = 0; v < gc.num_buses(); ++v) {
    if (label[v] != inside) out_cols.push_back(v);  // cut + outside
    if (label[v] < 0 || label[v] == inside) in_cols.push_back(v);
  }
  auto block = [&](const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = sf(rows[r], cols[c]);
    return m;
  };
  return RankCheck{static_cast<int>(cut->size()), numerical_rank(block(in_rows, out_cols)),
                   numerical_rank(block(out_rows, in_cols))};
}

struct SignTally {
  int trials = 0;
  int dead_zone = 0;
  int disagreements = 0;
};

// Shift factor difference sign agreement for random line pairs on one graph.
inline void line_pair_signs(Rng& rng, int pairs, SignTally& tally) {
  const int n = uniform_int(rng, 3, 25);
  const GridCase gc = random_connected(rng, n, uniform_int(rng, 1, n));
  const auto sf = shift_factor_matrix(gc);
  const int m = static_cast<int>(gc.num_lines());
  auto pos = [&](BusId id) { return gc.bus_index(id); };
  for (int t = 0; t < pairs; ++t) {
    const auto i = static_cast<std::size_t>(uniform_int(rng, 0, m - 1));
    auto j = static_cast<std::size_t>(uniform_int(rng, 0, m - 1));
    if (i == j) j = (j + 1) % static_cast<std::size_t>(m);
    const auto i1 = pos(gc.lines[i].from_bus), i2 = pos(gc.lines[i].to_bus);
    const auto j1 = pos(gc.lines[j].from_bus), j2 = pos(gc.lines[j].to_bus);
    const double x = sf(i, j2) - sf(i, j1);
    const double y = sf(j, i2) - sf(j, i1);
    ++tally.trials;
    if (std::abs(x) < 1e-10 || std::abs(y) < 1e-10) {
      ++tally.dead_zone;
      continue;
    }
    if ((x > 0) != (y > 0)) ++tally.disagreements;
  }
}

// Largest flow change outside the switched line's block, over every single
// switch of a random composite network.
inline double confinement_leak(Rng& rng) {
  auto [gc, block_of] = composite_case(rng, uniform_int(rng, 3, 5), uniform_int(rng, 3, 6));
  const auto p = random_balanced_injection(rng, gc.num_buses());
  const auto base = solve_dc_flow(gc, p).flows;
  const std::vector<std::size_t> bridge_list = bridges(Graph(gc));
  double leak = 0.0;
  for (std::size_t k = 0; k < gc.num_lines(); ++k) {
    if (std::find(bridge_list.begin(), bridge_list.end(), k) != bridge_list.end()) continue;
    const auto after = solve_dc_flow(with_line_status(gc, gc.lines[k].id, false), p).flows;
    for (std::size_t o = 0; o < gc.num_lines(); ++o)
      if (block_of[o] != block_of[k]) leak = std::max(leak, std::abs(after(static_cast<Eigen::Index>(o)) - base(static_cast<Eigen::Index>(o))));
  }
  return leak;
}

// Relative error between the shift-factor LMP reconstruction and the solver's duals.
inline double lmp_identity_error(const GridCase& gc, const OpfSolution& sol) {
  const auto sf = shift_factor_matrix(gc, sol.reference_index);
  const auto eq = lmp_via_shift_factors(sf, sol.signed_shadow_prices(), sol.lmp(static_cast<Eigen::Index>(sol.reference_index)));
  return (eq - sol.lmp).cwiseAbs().maxCoeff() / std::max(1.0, sol.lmp.cwiseAbs().maxCoeff());
}

// LODF-predicted post-outage flows against full re-solves, relative to the
// largest base flow, over every non-bridge outage.
inline double lodf_prediction_error(const GridCase& gc, const Eigen::VectorXd& injections) {
  const auto sf = shift_factor_matrix(gc);
  const auto lodf = lodf_matrix(gc, sf);
  const auto base = solve_dc_flow(gc, injections).flows;
  const double scale = std::max(1.0, base.cwiseAbs().maxCoeff());
  double err = 0.0;
  for (std::size_t j = 0; j < gc.num_lines(); ++j) {
    if (!lodf.defined[j]) continue;
    const auto after = solve_dc_flow(with_line_status(gc, gc.lines[j].id, false), injections).flows;
    for (std::size_t i = 0; i < gc.num_lines(); ++i) {
      if (i == j) continue;
      const double predicted = base(static_cast<Eigen::Index>(i)) + lodf.zeta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * base(static_cast<Eigen::Index>(j));
      err = std::max(err, std::abs(predicted - after(static_cast<Eigen::Index>(i))) / scale);
    }
    err = std::max(err, std::abs(after(static_cast<Eigen::Index>(j))) / scale);
  }
  return err;
}

struct ConvexCheck {
  int quiet_buses = 0;
  double lmp_error = 0.0;        // max |lambda_p - sum a_k lambda_k|
  double min_weight = 0.0;
  double sum_error = 0.0;        // max |sum a - 1|
  double range_excess = -1.0;    // max quiet range - cut range
};

// One congested random case with a proper LMP decomposition, or nullopt.
inline std::optional<ConvexCheck> convex_combination_check(Rng& rng) {
  const auto gc = congested_market_case(rng, uniform_int(rng, 10, 30), uniform_int(rng, 3, 20));
  if (!gc) return std::nullopt;
  const auto sol = solve_dcopf(*gc, true);
  const auto d = decompose_by_lmp(*gc, sol);
  if (!d.proper()) return std::nullopt;
  const auto congested_interior = d.congested_subgrid().interior;
  ConvexCheck out;
  out.min_weight = std::numeric_limits<double>::infinity();
  for (const auto& q : d.quiet_subgrids()) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, clo = lo, chi = hi;
    for (auto p : q.interior) {
      const auto a = convex_weights(*gc, d.cut, p, congested_interior);
      double combo = 0.0;
      for (std::size_t k = 0; k < d.cut.size(); ++k) combo += a(static_cast<Eigen::Index>(k)) * sol.lmp(static_cast<Eigen::Index>(d.cut[k]));
      out.lmp_error = std::max(out.lmp_error, std::abs(combo - sol.lmp(static_cast<Eigen::Index>(p))));
      out.min_weight = std::min(out.min_weight, a.minCoeff());
      out.sum_error = std::max(out.sum_error, std::abs(a.sum() - 1.0));
      lo = std::min(lo, sol.lmp(static_cast<Eigen::Index>(p)));
      hi = std::max(hi, sol.lmp(static_cast<Eigen::Index>(p)));
      ++out.quiet_buses;
    }
    for (auto c : d.cut) {
      clo = std::min(clo, sol.lmp(static_cast<Eigen::Index>(c)));
      chi = std::max(chi, sol.lmp(static_cast<Eigen::Index>(c)));
    }
    if (!q.interior.empty()) out.range_excess = std::max(out.range_excess, (hi - lo) - (chi - clo));
  }
  if (out.quiet_buses == 0) return std::nullopt;
  return out;
}

// Independent enumeration: the pair with the smallest injection shift, ties
// to the lexicographically smallest (id, id) pair.
inline std::optional<std::pair<BusId, BusId>> brute_force_pair(const ShiftFactorMatrix& sf, std::size_t line, double overload,
                                                               const std::vector<std::size_t>& candidates) {
  std::vector<std::size_t> c = candidates;
  std::sort(c.begin(), c.end(), [&](auto a, auto b) { return sf.bus_ids[a] < sf.bus_ids[b]; });
  double best = std::numeric_limits<double>::infinity();
  std::optional<std::pair<BusId, BusId>> pick;
  for (std::size_t a = 0; a < c.size(); ++a)
    for (std::size_t b = a + 1; b < c.size(); ++b) {
      const double diff = std::abs(sf(line, c[a]) - sf(line, c[b]));
      if (diff <= 1e-10) continue;
      const double shift = overload / diff;
      if (shift < best * (1.0 - 1e-12)) {
        best = shift;
        pick = std::pair{sf.bus_ids[c[a]], sf.bus_ids[c[b]]};
      }
    }
  return pick;
}

// One random bus-pair instance: true when optimal_bus_pair agrees with the
// enumeration (including both reporting an uncontrollable line).
inline bool bus_pair_matches(Rng& rng) {
  const int n = uniform_int(rng, 3, 20);
  const GridCase gc = random_connected(rng, n, uniform_int(rng, 0, n));
  const auto sf = shift_factor_matrix(gc);
  const auto line = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(gc.num_lines()) - 1));
  const auto cands = random_subset(rng, gc.num_buses(), static_cast<std::size_t>(uniform_int(rng, 2, std::min(12, n))));
  const double overload = uniform(rng, 0.1, 50.0);
  const auto expected = brute_force_pair(sf, line, overload, cands);
  try {
    const auto got = optimal_bus_pair(sf, line, overload, cands);
    if (!expected) return false;
    const std::pair<BusId, BusId> ids{sf.bus_ids[got.first], sf.bus_ids[got.second]};
    const double shift = overload / std::abs(sf(line, got.first) - sf(line, got.second));
    return ids == *expected && std::abs(shift - got.injection_shift) <= 1e-9 * shift;
  } catch (const UncontrollableError&) {
    return !expected.has_value();
  }
}

}  // namespace testsupport
