#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vcsgrid/netmodel.hpp"

namespace vcsgrid {

class TopologyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Weighted Laplacian of in-service line susceptances, indexed by position in
// GridCase::buses. Entries are in per unit.
struct SusceptanceMatrix {
  Eigen::MatrixXd matrix;
  std::vector<BusId> bus_ids;

  Eigen::Index size() const { return matrix.rows(); }
};

// Nodal matrix with the reference row and column deleted, factorized once.
class ReducedSusceptance {
public:
  ReducedSusceptance(const SusceptanceMatrix& full, std::size_t ref_index) : ref_(ref_index), n_(full.size()) {
    const Eigen::Index n = n_;
    if (n < 1) throw TopologyError("empty network");
    reduced_.resize(n - 1, n - 1);
    for (Eigen::Index i = 0, ri = 0; i < n; ++i) {
      if (i == static_cast<Eigen::Index>(ref_)) continue;
      for (Eigen::Index j = 0, rj = 0; j < n; ++j) {
        if (j == static_cast<Eigen::Index>(ref_)) continue;
        reduced_(ri, rj++) = full.matrix(i, j);
      }
      ++ri;
    }
    if (n > 1) {
      llt_.compute(reduced_);
      // A Laplacian block of a disconnected graph is singular; LLT either
      // fails outright or leaves a pivot at rounding level.
      double scale = reduced_.diagonal().cwiseAbs().maxCoeff();
      double min_pivot = llt_.info() == Eigen::Success ? llt_.matrixL().toDenseMatrix().diagonal().minCoeff() : 0.0;
      if (llt_.info() != Eigen::Success || min_pivot * min_pivot <= 1e-12 * scale)
        throw TopologyError("reduced susceptance matrix is not positive definite (network disconnected or degenerate)");
    }
  }

  const Eigen::MatrixXd& matrix() const { return reduced_; }
  std::size_t reference_index() const { return ref_; }
  Eigen::Index full_size() const { return n_; }

  // Full-length angles for full-length injections; the reference entry of
  // `p` is ignored and its angle is 0.
  Eigen::VectorXd solve(const Eigen::VectorXd& p) const {
    Eigen::VectorXd rhs(n_ - 1);
    for (Eigen::Index i = 0, r = 0; i < n_; ++i)
      if (i != static_cast<Eigen::Index>(ref_)) rhs(r++) = p(i);
    Eigen::VectorXd x = n_ > 1 ? Eigen::VectorXd(llt_.solve(rhs)) : Eigen::VectorXd();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_);
    for (Eigen::Index i = 0, r = 0; i < n_; ++i)
      if (i != static_cast<Eigen::Index>(ref_)) theta(i) = x(r++);
    return theta;
  }

  // Inverse of the reduced matrix padded with a zero row/column at the reference.
  Eigen::MatrixXd padded_inverse() const {
    Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(n_, n_);
    if (n_ == 1) return inv;
    Eigen::MatrixXd x = llt_.solve(Eigen::MatrixXd::Identity(n_ - 1, n_ - 1));
    std::vector<Eigen::Index> map;
    for (Eigen::Index i = 0; i < n_; ++i)
      if (i != static_cast<Eigen::Index>(ref_)) map.push_back(i);
    for (Eigen::Index a = 0; a < n_ - 1; ++a)
      for (Eigen::Index b = 0; b < n_ - 1; ++b) inv(map[a], map[b]) = x(a, b);
    return inv;
  }

private:
  std::size_t ref_;
  Eigen::Index n_;
  Eigen::MatrixXd reduced_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

struct DcState {
  Eigen::VectorXd theta;        // radians, reference at 0
  Eigen::VectorXd injections;   // MW, balanced
  Eigen::VectorXd flows;        // MW per line (0 for out-of-service lines)
  double reference_residual = 0.0;  // MW assigned to the reference bus to restore balance
};

inline SusceptanceMatrix build_susceptance(const GridCase& gc) {
  const auto n = static_cast<Eigen::Index>(gc.num_buses());
  SusceptanceMatrix out;
  out.matrix = Eigen::MatrixXd::Zero(n, n);
  for (const auto& b : gc.buses) out.bus_ids.push_back(b.id);
  for (const auto& l : gc.lines) {
    if (!l.in_service) continue;
    const auto i = static_cast<Eigen::Index>(gc.bus_index(l.from_bus));
    const auto j = static_cast<Eigen::Index>(gc.bus_index(l.to_bus));
    out.matrix(i, i) += l.susceptance;
    out.matrix(j, j) += l.susceptance;
    out.matrix(i, j) -= l.susceptance;
    out.matrix(j, i) -= l.susceptance;
  }
  return out;
}

inline ReducedSusceptance reduce_reference(const SusceptanceMatrix& b, std::size_t ref_index) {
  return ReducedSusceptance(b, ref_index);
}

// Line flows in MW for bus angles in radians.
inline Eigen::VectorXd line_flows(const GridCase& gc, const Eigen::VectorXd& theta) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gc.num_lines()));
  for (std::size_t k = 0; k < gc.lines.size(); ++k) {
    const auto& l = gc.lines[k];
    if (!l.in_service) continue;
    f(static_cast<Eigen::Index>(k)) = gc.base_mva * l.susceptance *
                                      (theta(static_cast<Eigen::Index>(gc.bus_index(l.from_bus))) -
                                       theta(static_cast<Eigen::Index>(gc.bus_index(l.to_bus))));
  }
  return f;
}

// Solves P = B theta for injections in MW. Any imbalance is absorbed by the
// reference bus and reported in `reference_residual`.
inline DcState solve_dc_flow(const GridCase& gc, const ReducedSusceptance& reduced, const Eigen::VectorXd& injections_mw) {
  DcState s;
  s.injections = injections_mw;
  const auto ref = static_cast<Eigen::Index>(reduced.reference_index());
  const double residual = injections_mw.sum();
  if (std::abs(residual) > 1e-6 * std::max(1.0, injections_mw.cwiseAbs().sum())) s.reference_residual = -residual;
  s.injections(ref) -= residual;
  s.theta = reduced.solve(s.injections / gc.base_mva);
  s.flows = line_flows(gc, s.theta);
  return s;
}

inline DcState solve_dc_flow(const GridCase& gc, const Eigen::VectorXd& injections_mw) {
  ReducedSusceptance reduced(build_susceptance(gc), gc.reference_index());
  return solve_dc_flow(gc, reduced, injections_mw);
}

// Schur complement of the non-terminal block: the terminal-only network that
// is electrically equivalent to `b` as seen from `terminals` (bus positions).
inline SusceptanceMatrix kron_reduce(const SusceptanceMatrix& b, std::span<const std::size_t> terminals) {
  if (terminals.empty()) throw std::invalid_argument("kron_reduce needs at least one terminal");
  const Eigen::Index n = b.size();
  std::vector<bool> is_terminal(static_cast<std::size_t>(n), false);
  for (auto t : terminals) {
    if (static_cast<Eigen::Index>(t) >= n) throw std::invalid_argument("terminal index out of range");
    is_terminal[t] = true;
  }
  std::vector<Eigen::Index> term(terminals.begin(), terminals.end()), inner;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!is_terminal[static_cast<std::size_t>(i)]) inner.push_back(i);

  const auto nt = static_cast<Eigen::Index>(term.size()), ni = static_cast<Eigen::Index>(inner.size());
  Eigen::MatrixXd tt(nt, nt), ti(nt, ni), ii(ni, ni);
  for (Eigen::Index a = 0; a < nt; ++a) {
    for (Eigen::Index c = 0; c < nt; ++c) tt(a, c) = b.matrix(term[a], term[c]);
    for (Eigen::Index c = 0; c < ni; ++c) ti(a, c) = b.matrix(term[a], inner[c]);
  }
  for (Eigen::Index a = 0; a < ni; ++a)
    for (Eigen::Index c = 0; c < ni; ++c) ii(a, c) = b.matrix(inner[a], inner[c]);

  SusceptanceMatrix out;
  for (auto t : term) out.bus_ids.push_back(b.bus_ids[static_cast<std::size_t>(t)]);
  if (ni == 0) {
    out.matrix = tt;
    return out;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(ii);
  if (llt.info() != Eigen::Success) throw TopologyError("interior block of kron_reduce is singular");
  out.matrix = tt - ti * llt.solve(ti.transpose());
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  return out;
}

}  // namespace vcsgrid
