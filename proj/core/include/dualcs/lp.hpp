#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dualcs::lp {

enum class Status { Optimal, Infeasible, IterLimit, NumericalFailure };

const char* to_string(Status s);

struct Options {
  double feas_tol = 1e-8;   // relative primal feasibility target
  double opt_tol = 1e-8;    // relative dual feasibility and gap target
  int max_iters = 200;
};

// Equality constraints A x = rhs with the rows split into a sparse stack
// (few entries per row: difference stencils, sum rows) and a dense stack
// (transform rows). Either block may have zero rows. The interior-point
// normal equations are then factored as a sparse Cholesky of the sparse
// block plus a dense Schur complement for the dense rows, which is what
// makes grid-sized TV problems tractable.
struct Constraints {
  Eigen::SparseMatrix<double, Eigen::RowMajor> sparse;  // s x n (may be 0 x n)
  Eigen::MatrixXd dense;                                // f x n (may be 0 x n)
  Eigen::VectorXd rhs;                                  // length s + f

  static Constraints dense_only(Eigen::MatrixXd a, Eigen::VectorXd b);

  Eigen::Index rows() const { return sparse.rows() + dense.rows(); }
  Eigen::Index cols() const;
  void validate() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;          // A x
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& y) const;  // A' y
};

struct Result {
  Eigen::VectorXd x;  // primal solution
  Eigen::VectorXd y;  // equality multipliers
  Eigen::VectorXd z;  // reduced costs (zero where unconstrained)
  Status status = Status::NumericalFailure;
  int iterations = 0;
  double objective = 0.0;
  double primal_residual_inf = 0.0;  // ||Ax - rhs||_inf, original row scaling
  double dual_residual_inf = 0.0;
};

// min c'x  s.t.  A x = rhs,  x >= lower_bounds.
//
// Mehrotra predictor-corrector primal-dual interior point. Deterministic:
// no randomized pivoting or threading inside. Equality-inconsistent
// systems are reported Infeasible via a least-norm precheck; a diverging
// iterate (including an unbounded objective, which the status set does
// not name separately) reports NumericalFailure.
Result solve(const Eigen::VectorXd& c, const Constraints& con,
             const Eigen::VectorXd& lower_bounds, const Options& opt);

// Dense-constraint convenience wrapper over solve().
Result lp_solve(const Eigen::VectorXd& c, const Eigen::MatrixXd& a_eq,
                const Eigen::VectorXd& b_eq, const Eigen::VectorXd& lower_bounds,
                const Options& opt = {});

// min sum_i w_i (u_i + v_i)  s.t.  A (u - v) = b,  u, v >= 0,
// i.e. weighted l1 minimization over the signed variable x = u - v.
// The u/v doubling stays implicit: the normal matrix is A (Du + Dv) A', so
// memory and flops match the single-width system. Weights must be >= 0
// (zero-weight entries are legal and simply unpenalized).
struct L1Result {
  Eigen::VectorXd x;  // signed solution u - v
  Eigen::VectorXd y;  // equality multipliers (the l1 dual certificate)
  Status status = Status::NumericalFailure;
  int iterations = 0;
  double objective = 0.0;  // sum_i w_i |x_i|
  double primal_residual_inf = 0.0;
};

L1Result solve_weighted_l1(const Constraints& con, const Eigen::VectorXd& weights,
                           const Options& opt);

}  // namespace dualcs::lp
