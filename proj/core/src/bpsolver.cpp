#include "dualcs/bpsolver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualcs::solver {

void L1Problem::validate() const {
  if (a.rows() < 1 || a.cols() < 1)
    throw std::invalid_argument("L1Problem: matrix must be at least 1x1");
  if (b.size() != a.rows()) throw std::invalid_argument("L1Problem: rhs length mismatch");
  if (!a.allFinite() || !b.allFinite())
    throw std::invalid_argument("L1Problem: non-finite entries");
  if (weights.size() != 0) {
    if (weights.size() != a.cols())
      throw std::invalid_argument("L1Problem: weight length mismatch");
    if (!weights.allFinite() || (weights.array() < 0.0).any())
      throw std::invalid_argument("L1Problem: weights must be finite and >= 0");
  }
}

Eigen::VectorXd L1Problem::effective_weights() const {
  return weights.size() != 0 ? weights : Eigen::VectorXd::Ones(a.cols());
}

void SolverConfig::validate() const {
  if (feas_tol <= 0 || opt_tol <= 0 || zero_clip <= 0 || max_iters <= 0)
    throw std::invalid_argument("SolverConfig: all fields must be positive");
}

Eigen::VectorXd SolverResult::clipped(double zero_clip) const {
  Eigen::VectorXd out = solution;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (std::abs(out(i)) < zero_clip) out(i) = 0.0;
  return out;
}

std::vector<int> SolverResult::support(double zero_clip) const {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < solution.size(); ++i)
    if (std::abs(solution(i)) >= zero_clip) idx.push_back(static_cast<int>(i));
  return idx;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> to_real_system(const Eigen::MatrixXcd& a,
                                                           const Eigen::VectorXcd& b) {
  if (b.size() != a.rows()) throw std::invalid_argument("to_real_system: shape mismatch");
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  std::vector<Eigen::Index> imag_rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool row_real = (a.row(i).imag().array() == 0.0).all();
    if (!row_real || b(i).imag() != 0.0) imag_rows.push_back(i);
  }
  Eigen::MatrixXd ar(m + static_cast<Eigen::Index>(imag_rows.size()), n);
  Eigen::VectorXd br(ar.rows());
  ar.topRows(m) = a.real();
  br.head(m) = b.real();
  for (size_t k = 0; k < imag_rows.size(); ++k) {
    ar.row(m + static_cast<Eigen::Index>(k)) = a.row(imag_rows[k]).imag();
    br(m + static_cast<Eigen::Index>(k)) = b(imag_rows[k]).imag();
  }
  return {std::move(ar), std::move(br)};
}

namespace {

// Weak-duality certificate for min w'|x| s.t. a x = b: a dual y is optimal
// evidence when |(a'y)_i| <= w_i + tol and b'y >= objective - tol.
bool certifies_optimal(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& w, const Eigen::VectorXd& y, double objective,
                       double opt_tol) {
  const Eigen::VectorXd aty = a.transpose() * y;
  const double scale = 1.0 + std::abs(objective);
  if (((aty.cwiseAbs() - w).array() > opt_tol * scale).any()) return false;
  return b.dot(y) >= objective - opt_tol * scale;
}

SolverResult from_l1(const lp::L1Result& lr, const L1Problem& prob, const SolverConfig& cfg) {
  SolverResult res;
  res.solution = lr.x;
  res.status = lr.status;
  res.objective = lr.objective;
  res.iterations = lr.iterations;
  res.residual_inf = lr.primal_residual_inf;
  if (res.status == SolverStatus::Optimal) {
    // Enforce the contract: Optimal implies feasible within the absolute
    // tolerance and a passing duality certificate.
    if (res.residual_inf > cfg.feas_tol) {
      res.status = SolverStatus::IterLimit;
    } else if (!certifies_optimal(prob.a, prob.b, prob.effective_weights(), lr.y,
                                  res.objective, cfg.opt_tol)) {
      res.status = SolverStatus::NumericalFailure;
    }
  }
  return res;
}

}  // namespace

SolverResult solve_bp(const L1Problem& prob, const SolverConfig& cfg) {
  prob.validate();
  cfg.validate();
  lp::Options opt{cfg.feas_tol, cfg.opt_tol, cfg.max_iters};
  const lp::L1Result lr =
      lp::solve_weighted_l1(lp::Constraints::dense_only(prob.a, prob.b),
                            prob.effective_weights(), opt);
  return from_l1(lr, prob, cfg);
}

SolverResult solve_truncated_bp(const L1Problem& prob, const std::vector<int>& known_idx,
                                const Eigen::VectorXd& known_vals, const SolverConfig& cfg) {
  prob.validate();
  cfg.validate();
  if (known_vals.size() != static_cast<Eigen::Index>(known_idx.size()))
    throw std::invalid_argument("solve_truncated_bp: index/value count mismatch");
  const Eigen::Index q = prob.a.cols();
  std::vector<char> is_known(static_cast<size_t>(q), 0);
  for (int idx : known_idx) {
    if (idx < 0 || idx >= q)
      throw std::invalid_argument("solve_truncated_bp: known index out of range");
    if (is_known[static_cast<size_t>(idx)])
      throw std::invalid_argument("solve_truncated_bp: duplicate known index");
    is_known[static_cast<size_t>(idx)] = 1;
  }
  if (known_idx.empty()) return solve_bp(prob, cfg);

  Eigen::VectorXd b_red = prob.b;
  for (size_t k = 0; k < known_idx.size(); ++k)
    b_red -= prob.a.col(known_idx[k]) * known_vals(static_cast<Eigen::Index>(k));

  std::vector<int> free_idx;
  for (int j = 0; j < q; ++j)
    if (!is_known[static_cast<size_t>(j)]) free_idx.push_back(j);

  SolverResult res;
  const Eigen::VectorXd w_full = prob.effective_weights();
  if (free_idx.empty()) {
    // Everything fixed; nothing to optimize, just check consistency.
    res.solution.resize(q);
    for (size_t k = 0; k < known_idx.size(); ++k)
      res.solution(known_idx[k]) = known_vals(static_cast<Eigen::Index>(k));
    res.residual_inf = b_red.size() ? b_red.cwiseAbs().maxCoeff() : 0.0;
    res.status =
        res.residual_inf <= cfg.feas_tol ? SolverStatus::Optimal : SolverStatus::Infeasible;
    res.objective = 0.0;
    return res;
  }

  L1Problem reduced;
  reduced.a.resize(prob.a.rows(), static_cast<Eigen::Index>(free_idx.size()));
  reduced.weights.resize(static_cast<Eigen::Index>(free_idx.size()));
  for (size_t k = 0; k < free_idx.size(); ++k) {
    reduced.a.col(static_cast<Eigen::Index>(k)) = prob.a.col(free_idx[k]);
    reduced.weights(static_cast<Eigen::Index>(k)) = w_full(free_idx[k]);
  }
  reduced.b = std::move(b_red);

  const SolverResult inner = solve_bp(reduced, cfg);
  res = inner;
  res.solution = Eigen::VectorXd::Zero(q);
  for (size_t k = 0; k < free_idx.size(); ++k)
    res.solution(free_idx[k]) = inner.solution(static_cast<Eigen::Index>(k));
  for (size_t k = 0; k < known_idx.size(); ++k)
    res.solution(known_idx[k]) = known_vals(static_cast<Eigen::Index>(k));
  res.residual_inf = (prob.a * res.solution - prob.b).cwiseAbs().maxCoeff();
  return res;
}

SolverResult solve_bp_relaxed(const L1Problem& prob, double epsilon, const SolverConfig& cfg) {
  prob.validate();
  cfg.validate();
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("solve_bp_relaxed: epsilon must be finite and >= 0");
  const Eigen::Index p = prob.a.rows();
  const Eigen::Index q = prob.a.cols();
  const double delta = epsilon / std::sqrt(static_cast<double>(p));

  // Variables [u; v; s; r] >= 0 with x = u - v:
  //   a(u - v) + s = b + delta          (so  a x - b in [-delta, +delta])
  //   s + r = 2 delta
  Eigen::VectorXd c(2 * q + 2 * p);
  const Eigen::VectorXd w = prob.effective_weights();
  c << w, w, Eigen::VectorXd::Zero(2 * p);

  lp::Constraints con;
  // Sparse block first: s + r = 2 delta.
  con.sparse.resize(p, 2 * q + 2 * p);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(2 * p));
  for (Eigen::Index i = 0; i < p; ++i) {
    trips.emplace_back(i, 2 * q + i, 1.0);
    trips.emplace_back(i, 2 * q + p + i, 1.0);
  }
  con.sparse.setFromTriplets(trips.begin(), trips.end());
  con.dense.resize(p, 2 * q + 2 * p);
  con.dense << prob.a, -prob.a, Eigen::MatrixXd::Identity(p, p),
      Eigen::MatrixXd::Zero(p, p);
  con.rhs.resize(2 * p);
  con.rhs.head(p).setConstant(2.0 * delta);
  con.rhs.tail(p) = prob.b.array() + delta;

  lp::Options opt{cfg.feas_tol, cfg.opt_tol, cfg.max_iters};
  const lp::Result lr =
      lp::solve(c, con, Eigen::VectorXd::Zero(2 * q + 2 * p), opt);

  SolverResult res;
  res.solution = lr.x.head(q) - lr.x.segment(q, q);
  res.status = lr.status;
  res.iterations = lr.iterations;
  res.objective = w.dot(res.solution.cwiseAbs());
  res.residual_inf = (prob.a * res.solution - prob.b).cwiseAbs().maxCoeff();
  if (res.status == SolverStatus::Optimal && res.residual_inf > delta + cfg.feas_tol)
    res.status = SolverStatus::IterLimit;
  return res;
}

L0Result l0_oracle(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int s_max,
                   double feas_tol) {
  if (b.size() != a.rows()) throw std::invalid_argument("l0_oracle: shape mismatch");
  const int q = static_cast<int>(a.cols());
  if (q > 24) throw std::invalid_argument("l0_oracle: enumeration bound is 24 columns");
  if (s_max < 0 || s_max > 4)
    throw std::invalid_argument("l0_oracle: enumeration bound is s_max <= 4");

  L0Result out;
  const double bmax = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
  if (bmax <= feas_tol) {
    out.found = true;
    out.solution = Eigen::VectorXd::Zero(q);
    return out;
  }

  std::vector<int> comb;
  for (int size = 1; size <= std::min(s_max, q); ++size) {
    comb.resize(static_cast<size_t>(size));
    for (int i = 0; i < size; ++i) comb[static_cast<size_t>(i)] = i;
    while (true) {
      Eigen::MatrixXd sub(a.rows(), size);
      for (int i = 0; i < size; ++i) sub.col(i) = a.col(comb[static_cast<size_t>(i)]);
      const Eigen::VectorXd coeffs = sub.colPivHouseholderQr().solve(b);
      if ((sub * coeffs - b).cwiseAbs().maxCoeff() < feas_tol) {
        out.found = true;
        out.solution = Eigen::VectorXd::Zero(q);
        for (int i = 0; i < size; ++i) out.solution(comb[static_cast<size_t>(i)]) = coeffs(i);
        out.support = comb;
        return out;
      }
      // Next combination in lexicographic order.
      int pos = size - 1;
      while (pos >= 0 && comb[static_cast<size_t>(pos)] == q - size + pos) --pos;
      if (pos < 0) break;
      ++comb[static_cast<size_t>(pos)];
      for (int i = pos + 1; i < size; ++i)
        comb[static_cast<size_t>(i)] = comb[static_cast<size_t>(i - 1)] + 1;
    }
  }
  return out;
}

}  // namespace dualcs::solver
