#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace vcsgrid::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// minimize c'x  subject to  A x = b,  lower <= x <= upper.
// Bounds may be infinite; a variable with both bounds infinite is free.
struct LinearProgram {
  Eigen::SparseMatrix<double> a;  // column major
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration_limit";
  }
  return "unknown";
}

struct Result {
  Status status = Status::infeasible;
  Eigen::VectorXd x;
  Eigen::VectorXd row_duals;      // d objective / d b
  Eigen::VectorXd reduced_costs;  // c - A'y
  double objective = 0.0;
  int iterations = 0;
};

struct Options {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  int refactor_interval = 64;
  int max_iterations = 0;  // 0: 50 * (rows + columns)
};

// Bounded-variable revised primal simplex with a dense basis inverse.
// Phase one drives a full set of artificials to zero; phase two keeps them
// fixed at zero so the final basis carries valid row duals.
class Simplex {
public:
  Simplex(const LinearProgram& lp, Options opt = {}) : lp_(lp), opt_(opt) {
    m_ = lp.a.rows();
    n_ = lp.a.cols();
  }

  Result solve() {
    init();
    const int cap = opt_.max_iterations > 0 ? opt_.max_iterations : static_cast<int>(50 * (m_ + n_) + 100);

    // Phase one.
    cost_ = Eigen::VectorXd::Zero(n_ + m_);
    cost_.tail(m_).setOnes();
    Status s = iterate(cap);
    if (s == Status::iteration_limit) return finish(s);
    double infeas = x_.tail(m_).sum();
    const double b_scale = 1.0 + (lp_.b.size() ? lp_.b.cwiseAbs().maxCoeff() : 0.0);
    if (infeas > opt_.feasibility_tol * b_scale * 10.0) return finish(Status::infeasible);

    // Phase two: artificials fixed at zero.
    for (Eigen::Index i = 0; i < m_; ++i) {
      lo_(n_ + i) = 0.0;
      up_(n_ + i) = 0.0;
      if (!basic_flag_[static_cast<std::size_t>(n_ + i)]) x_(n_ + i) = 0.0;
    }
    cost_.head(n_) = lp_.c;
    cost_.tail(m_).setZero();
    s = iterate(cap);
    return finish(s);
  }

private:
  enum class At { lower, upper, zero };

  void init() {
    const Eigen::Index total = n_ + m_;
    lo_.resize(total);
    up_.resize(total);
    x_ = Eigen::VectorXd::Zero(total);
    lo_.head(n_) = lp_.lower;
    up_.head(n_) = lp_.upper;
    lo_.tail(m_).setZero();
    up_.tail(m_).setConstant(kInf);
    at_.assign(static_cast<std::size_t>(total), At::zero);
    basic_flag_.assign(static_cast<std::size_t>(total), false);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (std::isfinite(lo_(j))) {
        x_(j) = lo_(j);
        at_[static_cast<std::size_t>(j)] = At::lower;
      } else if (std::isfinite(up_(j))) {
        x_(j) = up_(j);
        at_[static_cast<std::size_t>(j)] = At::upper;
      }
    }
    Eigen::VectorXd r = lp_.b - lp_.a * x_.head(n_);
    art_sign_.resize(m_);
    basis_.resize(static_cast<std::size_t>(m_));
    binv_ = Eigen::MatrixXd::Zero(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      art_sign_(i) = r(i) >= 0 ? 1.0 : -1.0;
      x_(n_ + i) = std::abs(r(i));
      basis_[static_cast<std::size_t>(i)] = n_ + i;
      basic_flag_[static_cast<std::size_t>(n_ + i)] = true;
      binv_(i, i) = art_sign_(i);
    }
    iterations_ = 0;
  }

  // Column j of [A | diag(art_sign)] multiplied into a dense vector.
  Eigen::VectorXd column(Eigen::Index j) const {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(m_);
    if (j < n_) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(lp_.a, j); it; ++it) col(it.row()) = it.value();
    } else {
      col(j - n_) = art_sign_(j - n_);
    }
    return col;
  }

  double dot_column(const Eigen::VectorXd& y, Eigen::Index j) const {
    if (j >= n_) return y(j - n_) * art_sign_(j - n_);
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(lp_.a, j); it; ++it) s += y(it.row()) * it.value();
    return s;
  }

  void refactor() {
    Eigen::MatrixXd bm(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) bm.col(i) = column(basis_[static_cast<std::size_t>(i)]);
    binv_ = bm.partialPivLu().inverse();
    // Recompute basic values from the nonbasic ones.
    Eigen::VectorXd rhs = lp_.b;
    for (Eigen::Index j = 0; j < n_ + m_; ++j) {
      if (basic_flag_[static_cast<std::size_t>(j)] || x_(j) == 0.0) continue;
      rhs -= column(j) * x_(j);
    }
    Eigen::VectorXd xb = binv_ * rhs;
    for (Eigen::Index i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) = xb(i);
  }

  Status iterate(int cap) {
    const double cost_scale = 1.0 + cost_.cwiseAbs().maxCoeff();
    int since_refactor = 0;
    int degenerate_streak = 0;
    while (true) {
      if (iterations_ >= cap) return Status::iteration_limit;
      if (since_refactor >= opt_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }
      Eigen::VectorXd cb(m_);
      for (Eigen::Index i = 0; i < m_; ++i) cb(i) = cost_(basis_[static_cast<std::size_t>(i)]);
      const Eigen::VectorXd y = binv_.transpose() * cb;

      // Pricing: Dantzig, or Bland while stalling on degenerate pivots.
      const bool bland = degenerate_streak > 50;
      Eigen::Index enter = -1;
      double enter_dir = 0.0, best = 0.0;
      const double dtol = opt_.optimality_tol * cost_scale;
      for (Eigen::Index j = 0; j < n_ + m_; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (basic_flag_[sj] || lo_(j) == up_(j)) continue;
        const double d = cost_(j) - dot_column(y, j);
        double dir = 0.0;
        if (at_[sj] == At::lower && d < -dtol) dir = 1.0;
        else if (at_[sj] == At::upper && d > dtol) dir = -1.0;
        else if (at_[sj] == At::zero && std::abs(d) > dtol) dir = d < 0 ? 1.0 : -1.0;
        if (dir == 0.0) continue;
        if (bland) {
          enter = j;
          enter_dir = dir;
          break;
        }
        const double score = std::abs(d);
        if (score > best) {
          best = score;
          enter = j;
          enter_dir = dir;
        }
      }
      if (enter < 0) return Status::optimal;

      const Eigen::VectorXd alpha = binv_ * column(enter);

      // Two-pass (Harris) ratio test.
      const double ftol = opt_.feasibility_tol;
      double relaxed = kInf;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double rate = enter_dir * alpha(i);  // basic value decreases at this rate
        if (std::abs(rate) <= opt_.pivot_tol) continue;
        const Eigen::Index bj = basis_[static_cast<std::size_t>(i)];
        if (rate > 0 && std::isfinite(lo_(bj))) relaxed = std::min(relaxed, (x_(bj) - lo_(bj) + ftol) / rate);
        if (rate < 0 && std::isfinite(up_(bj))) relaxed = std::min(relaxed, (up_(bj) - x_(bj) + ftol) / -rate);
      }
      Eigen::Index leave = -1;
      double step = kInf, best_pivot = 0.0;
      bool leave_to_upper = false;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double rate = enter_dir * alpha(i);
        if (std::abs(rate) <= opt_.pivot_tol) continue;
        const Eigen::Index bj = basis_[static_cast<std::size_t>(i)];
        double ratio = kInf;
        bool to_upper = false;
        if (rate > 0 && std::isfinite(lo_(bj))) ratio = (x_(bj) - lo_(bj)) / rate;
        else if (rate < 0 && std::isfinite(up_(bj))) {
          ratio = (up_(bj) - x_(bj)) / -rate;
          to_upper = true;
        }
        if (!std::isfinite(ratio)) continue;
        if (ratio <= relaxed && std::abs(alpha(i)) > best_pivot) {
          best_pivot = std::abs(alpha(i));
          leave = i;
          step = std::max(ratio, 0.0);
          leave_to_upper = to_upper;
        }
      }
      const double span = up_(enter) - lo_(enter);
      const bool flip = std::isfinite(span) && span <= step;
      if (!flip && leave < 0) return Status::unbounded;
      if (flip) step = span;

      ++iterations_;
      ++since_refactor;
      degenerate_streak = step <= ftol ? degenerate_streak + 1 : 0;

      for (Eigen::Index i = 0; i < m_; ++i) x_(basis_[static_cast<std::size_t>(i)]) -= enter_dir * step * alpha(i);
      x_(enter) += enter_dir * step;
      const auto se = static_cast<std::size_t>(enter);
      if (flip) {
        at_[se] = enter_dir > 0 ? At::upper : At::lower;
        x_(enter) = enter_dir > 0 ? up_(enter) : lo_(enter);
        continue;
      }

      const Eigen::Index out = basis_[static_cast<std::size_t>(leave)];
      const auto so = static_cast<std::size_t>(out);
      basic_flag_[so] = false;
      at_[so] = leave_to_upper ? At::upper : At::lower;
      x_(out) = leave_to_upper ? up_(out) : lo_(out);
      basic_flag_[se] = true;
      basis_[static_cast<std::size_t>(leave)] = enter;

      const double piv = alpha(leave);
      const Eigen::RowVectorXd pivot_row = binv_.row(leave) / piv;
      binv_.noalias() -= alpha * pivot_row;
      binv_.row(leave) = pivot_row;
    }
  }

  Result finish(Status s) {
    Result r;
    r.status = s;
    r.iterations = iterations_;
    if (s != Status::optimal) return r;
    refactor();
    r.x = x_.head(n_);
    for (Eigen::Index j = 0; j < n_; ++j) r.x(j) = std::clamp(r.x(j), lo_(j), up_(j));
    Eigen::VectorXd cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb(i) = cost_(basis_[static_cast<std::size_t>(i)]);
    r.row_duals = binv_.transpose() * cb;
    r.reduced_costs = lp_.c - lp_.a.transpose() * r.row_duals;
    r.objective = lp_.c.dot(r.x);
    return r;
  }

  const LinearProgram& lp_;
  Options opt_;
  Eigen::Index m_ = 0, n_ = 0;
  Eigen::VectorXd lo_, up_, x_, cost_, art_sign_;
  std::vector<At> at_;
  std::vector<bool> basic_flag_;
  std::vector<Eigen::Index> basis_;
  Eigen::MatrixXd binv_;
  int iterations_ = 0;
};

inline Result solve(const LinearProgram& lp, Options opt = {}) { return Simplex(lp, opt).solve(); }

}  // namespace vcsgrid::lp
