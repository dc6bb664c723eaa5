#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vcsgrid/dcflow.hpp"
#include "vcsgrid/graph.hpp"

namespace vcsgrid {

// Injection shift factors: psi(l, j) is the MW change on line l per MW
// injected at bus j and withdrawn at the reference bus. Rows follow
// GridCase::lines, columns GridCase::buses; flow is signed from -> to.
struct ShiftFactorMatrix {
  Eigen::MatrixXd psi;
  std::size_t reference_index = 0;
  std::vector<LineId> line_ids;
  std::vector<BusId> bus_ids;
  std::vector<std::pair<std::size_t, std::size_t>> orientation;  // (from, to) bus positions per line

  double operator()(std::size_t line, std::size_t bus) const {
    return psi(static_cast<Eigen::Index>(line), static_cast<Eigen::Index>(bus));
  }
};

inline ShiftFactorMatrix shift_factor_matrix(const GridCase& gc, std::size_t ref_index) {
  ReducedSusceptance reduced(build_susceptance(gc), ref_index);
  const Eigen::MatrixXd x = reduced.padded_inverse();
  ShiftFactorMatrix sf;
  sf.reference_index = ref_index;
  sf.psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gc.num_lines()), static_cast<Eigen::Index>(gc.num_buses()));
  for (const auto& b : gc.buses) sf.bus_ids.push_back(b.id);
  for (std::size_t k = 0; k < gc.lines.size(); ++k) {
    const auto& l = gc.lines[k];
    const auto f = gc.bus_index(l.from_bus), t = gc.bus_index(l.to_bus);
    sf.line_ids.push_back(l.id);
    sf.orientation.emplace_back(f, t);
    if (!l.in_service) continue;
    sf.psi.row(static_cast<Eigen::Index>(k)) =
        l.susceptance * (x.row(static_cast<Eigen::Index>(f)) - x.row(static_cast<Eigen::Index>(t)));
  }
  return sf;
}

inline ShiftFactorMatrix shift_factor_matrix(const GridCase& gc) { return shift_factor_matrix(gc, gc.reference_index()); }

struct TransferFactor {
  double signed_value = 0.0;  // psi(line, j1) - psi(line, j2)
  double magnitude = 0.0;
};

// Flow on `line` per MW moved from bus j2 to bus j1 (bus positions).
inline TransferFactor ptdf(const ShiftFactorMatrix& sf, std::size_t line, std::size_t j1, std::size_t j2) {
  const double d = sf(line, j1) - sf(line, j2);
  return {d, std::abs(d)};
}

// zeta(i, j): share of line j's pre-outage flow that moves onto line i when
// j is taken out. Columns of bridges and out-of-service lines are undefined.
struct LodfMatrix {
  Eigen::MatrixXd zeta;
  std::vector<bool> defined;

  bool is_defined(std::size_t outage) const { return defined[outage]; }
  double operator()(std::size_t line, std::size_t outage) const {
    return zeta(static_cast<Eigen::Index>(line), static_cast<Eigen::Index>(outage));
  }
};

inline LodfMatrix lodf_matrix(const GridCase& gc, const ShiftFactorMatrix& sf) {
  const auto nl = static_cast<Eigen::Index>(gc.num_lines());
  LodfMatrix out;
  out.zeta = Eigen::MatrixXd::Constant(nl, nl, std::numeric_limits<double>::quiet_NaN());
  out.defined.assign(gc.num_lines(), false);
  std::vector<bool> is_bridge(gc.num_lines(), false);
  for (auto b : bridges(Graph(gc))) is_bridge[b] = true;
  for (std::size_t j = 0; j < gc.num_lines(); ++j) {
    if (!gc.lines[j].in_service || is_bridge[j]) continue;
    const auto [fj, tj] = sf.orientation[j];
    const auto col = static_cast<Eigen::Index>(j);
    const double self = sf.psi(col, static_cast<Eigen::Index>(fj)) - sf.psi(col, static_cast<Eigen::Index>(tj));
    out.zeta.col(col) = (sf.psi.col(static_cast<Eigen::Index>(fj)) - sf.psi.col(static_cast<Eigen::Index>(tj))) / (1.0 - self);
    out.zeta(col, col) = -1.0;
    out.defined[j] = true;
  }
  return out;
}

inline LodfMatrix lodf_matrix(const GridCase& gc) { return lodf_matrix(gc, shift_factor_matrix(gc)); }

// Shift factors of the network with line `outage` removed, from a rank-one
// update of `sf`. The caller guarantees the outage is not a bridge.
inline ShiftFactorMatrix shift_factors_without(const ShiftFactorMatrix& sf, std::size_t outage) {
  ShiftFactorMatrix out = sf;
  const auto [f, t] = sf.orientation[outage];
  const auto k = static_cast<Eigen::Index>(outage);
  const Eigen::VectorXd transfer = sf.psi.col(static_cast<Eigen::Index>(f)) - sf.psi.col(static_cast<Eigen::Index>(t));
  const double denom = 1.0 - transfer(k);
  if (std::abs(denom) < 1e-10) throw TopologyError("outage of line " + std::to_string(sf.line_ids[outage]) + " islands the network");
  out.psi.noalias() += (transfer / denom) * sf.psi.row(k);
  out.psi.row(k).setZero();
  return out;
}

// Exact shift factors after taking `line` out, recomputed from scratch.
inline ShiftFactorMatrix post_outage_shift_factors(const GridCase& gc, LineId line) {
  const auto pos = gc.line_index(line);
  if (!gc.lines[pos].in_service) return shift_factor_matrix(gc);
  GridCase after = with_line_status(gc, line, false);
  if (!is_connected(Graph(after)))
    throw TopologyError("outage of line " + std::to_string(line) + " disconnects the network");
  return shift_factor_matrix(after, gc.reference_index());
}

class UncontrollableError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct BusPairChoice {
  std::size_t first = 0, second = 0;  // bus positions, first < second by id
  double transfer_factor = 0.0;      // |psi(line, first) - psi(line, second)|
  double injection_shift = 0.0;      // MW to move between the pair
};

// The candidate pair with the largest transfer factor on `line` relieves an
// overload of `overload` MW with the least redispatch.
inline BusPairChoice optimal_bus_pair(const ShiftFactorMatrix& sf, std::size_t line, double overload,
                                      std::span<const std::size_t> candidates) {
  if (candidates.size() < 2) throw std::invalid_argument("optimal_bus_pair needs at least two candidate buses");
  if (overload < 0.0) throw std::invalid_argument("overload must be nonnegative");
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return sf.bus_ids[a] < sf.bus_ids[b]; });
  order.erase(std::unique(order.begin(), order.end()), order.end());

  double scale = 0.0;
  for (auto c : order) scale = std::max(scale, std::abs(sf(line, c)));
  const double tie_tol = 1e-12 * std::max(1.0, scale);

  BusPairChoice best;
  bool found = false;
  for (std::size_t a = 0; a < order.size(); ++a)
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const double d = ptdf(sf, line, order[a], order[b]).magnitude;
      if (!found || d > best.transfer_factor + tie_tol) {
        best = {order[a], order[b], d, 0.0};
        found = true;
      }
    }
  if (best.transfer_factor <= 1e-10)
    throw UncontrollableError("line " + std::to_string(sf.line_ids[line]) + " cannot be relieved from the candidate buses");
  best.injection_shift = overload / best.transfer_factor;
  return best;
}

// CSV exports: `line_id,bus_id,value` and `line_i,line_j,value`.
inline void write_shift_factors_csv(std::ostream& os, const ShiftFactorMatrix& sf) {
  os << "line_id,bus_id,value\n";
  os.precision(17);
  for (Eigen::Index l = 0; l < sf.psi.rows(); ++l)
    for (Eigen::Index b = 0; b < sf.psi.cols(); ++b)
      os << sf.line_ids[static_cast<std::size_t>(l)] << ',' << sf.bus_ids[static_cast<std::size_t>(b)] << ','
         << sf.psi(l, b) << '\n';
}

inline void write_lodf_csv(std::ostream& os, const LodfMatrix& lodf, std::span<const LineId> line_ids) {
  os << "line_i,line_j,value\n";
  os.precision(17);
  for (std::size_t j = 0; j < line_ids.size(); ++j) {
    if (!lodf.is_defined(j)) continue;
    for (std::size_t i = 0; i < line_ids.size(); ++i) os << line_ids[i] << ',' << line_ids[j] << ',' << lodf(i, j) << '\n';
  }
}

}  // namespace vcsgrid
