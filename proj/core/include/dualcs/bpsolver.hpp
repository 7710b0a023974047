#pragma once

// Equality-constrained l1 minimization (basis pursuit), its truncated
// variant, and an exhaustive l0 oracle for desk-scale testing. The convex
// programs run on the in-tree interior-point LP engine (lp.hpp).

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "dualcs/lp.hpp"

namespace dualcs::solver {

// Status vocabulary shared with the LP engine.
using SolverStatus = lp::Status;

// min sum_i weights_i |x_i|  subject to  a x = b.
// `a` is real: complex measurement rows are pre-split via to_real_system.
struct L1Problem {
  Eigen::MatrixXd a;        // p x q
  Eigen::VectorXd b;        // length p
  Eigen::VectorXd weights;  // length q, or empty for all-ones

  void validate() const;
  Eigen::VectorXd effective_weights() const;  // ones when `weights` is empty
};

struct SolverConfig {
  double feas_tol = 1e-8;
  double opt_tol = 1e-8;
  int max_iters = 200;
  double zero_clip = 1e-6;  // |x_i| below this counts as zero in support views

  void validate() const;
};

struct SolverResult {
  Eigen::VectorXd solution;
  SolverStatus status = SolverStatus::NumericalFailure;
  double objective = 0.0;
  double residual_inf = 0.0;  // ||a*solution - b||_inf on the caller's system
  int iterations = 0;

  // Support view: solution with |x_i| < zero_clip forced to exact zero.
  Eigen::VectorXd clipped(double zero_clip) const;
  std::vector<int> support(double zero_clip) const;
};

// Splits complex constraint rows into separate real and imaginary rows.
// A row whose matrix entries all have exactly-zero imaginary part is
// emitted as a single real row (its imaginary rhs, if nonzero, still emits
// the corresponding zero-row so inconsistency is not silently dropped).
// Output has at most 2m rows.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> to_real_system(const Eigen::MatrixXcd& a,
                                                           const Eigen::VectorXcd& b);

// Basis pursuit via the split x = u - v, u,v >= 0. A result is reported
// Optimal only when (a) the equality residual is within feas_tol and (b)
// the LP dual certifies optimality by weak duality:
// |(a' y)_i| <= w_i + opt_tol and b' y >= objective - opt_tol.
SolverResult solve_bp(const L1Problem& prob, const SolverConfig& cfg = {});

// Basis pursuit with the pixels in known_idx fixed to known_vals: those
// columns move to the right-hand side, the reduced problem is solved, and
// the fixed values are re-inserted into the returned full-length solution.
// `objective` covers the free coordinates only (the fixed ones are data,
// not optimization variables).
SolverResult solve_truncated_bp(const L1Problem& prob, const std::vector<int>& known_idx,
                                const Eigen::VectorXd& known_vals,
                                const SolverConfig& cfg = {});

// Relaxed-data variant: min sum w_i |x_i| subject to ||a x - b||_2 <= epsilon.
// Implemented as the inner box |(a x - b)_i| <= epsilon / sqrt(p), which
// guarantees every returned solution satisfies the l2 budget while staying
// a pure LP. This mode is an extension beyond the equality-constrained
// program used everywhere else; no duality certificate is asserted.
SolverResult solve_bp_relaxed(const L1Problem& prob, double epsilon,
                              const SolverConfig& cfg = {});

struct L0Result {
  bool found = false;
  Eigen::VectorXd solution;
  std::vector<int> support;  // ascending
};

// Exhaustive smallest-support solve of a x = b: tries supports of size
// 0,1,...,s_max in lexicographic order, accepting the first whose
// least-squares fit has residual_inf below feas_tol. Enumeration bound:
// cols <= 24 and s_max <= 4.
L0Result l0_oracle(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int s_max,
                   double feas_tol = 1e-8);

}  // namespace dualcs::solver
