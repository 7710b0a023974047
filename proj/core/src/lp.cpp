#include "dualcs/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace dualcs::lp {

namespace {
constexpr double kDiagClipLo = 1e-16;  // bounds on x_i/z_i in the normal matrix
constexpr double kDiagClipHi = 1e16;
constexpr double kStepFraction = 0.995;  // fraction-to-boundary damping
constexpr int kStallWindow = 30;   // iterations without progress before giving up
constexpr int kMaxStepCuts = 4;    // step halvings per safeguard

bool trace_enabled() {
  static const bool on = std::getenv("DUALCS_LP_TRACE") != nullptr;
  return on;
}
}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::IterLimit: return "iter_limit";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

Constraints Constraints::dense_only(Eigen::MatrixXd a, Eigen::VectorXd b) {
  Constraints con;
  con.sparse.resize(0, a.cols());
  con.dense = std::move(a);
  con.rhs = std::move(b);
  con.validate();
  return con;
}

Eigen::Index Constraints::cols() const {
  return sparse.rows() > 0 ? sparse.cols() : dense.cols();
}

void Constraints::validate() const {
  if (sparse.rows() > 0 && dense.rows() > 0 && sparse.cols() != dense.cols())
    throw std::invalid_argument("Constraints: block column counts differ");
  if (rhs.size() != rows())
    throw std::invalid_argument("Constraints: rhs length does not match row count");
  if (!rhs.allFinite()) throw std::invalid_argument("Constraints: non-finite rhs");
  if (dense.rows() > 0 && !dense.allFinite())
    throw std::invalid_argument("Constraints: non-finite dense entry");
}

Eigen::VectorXd Constraints::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(rows());
  if (sparse.rows() > 0) out.head(sparse.rows()) = sparse * x;
  if (dense.rows() > 0) out.tail(dense.rows()).noalias() = dense * x;
  return out;
}

Eigen::VectorXd Constraints::apply_adjoint(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols());
  if (sparse.rows() > 0) out += sparse.transpose() * y.head(sparse.rows());
  if (dense.rows() > 0) out.noalias() += dense.transpose() * y.tail(dense.rows());
  return out;
}

namespace {

// Scales every constraint row to unit 2-norm. Pure conditioning aid: final
// diagnostics are recomputed against the caller's original rows. A zero
// row with a non-zero rhs is flagged so the caller can report Infeasible.
struct ScaledSystem {
  Constraints con;
  Eigen::VectorXd row_norms;  // scaled_row_i = row_i / row_norms(i)
  bool zero_row_infeasible = false;
};

ScaledSystem equilibrate(const Constraints& orig) {
  ScaledSystem out;
  out.con = orig;
  out.row_norms = Eigen::VectorXd::Ones(orig.rows());
  const Eigen::Index s = orig.sparse.rows();
  for (Eigen::Index i = 0; i < s; ++i) {
    double norm2 = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(out.con.sparse, i); it;
         ++it)
      norm2 += it.value() * it.value();
    const double norm = std::sqrt(norm2);
    if (norm < 1e-300) {
      if (std::abs(orig.rhs(i)) > 1e-12) out.zero_row_infeasible = true;
      continue;
    }
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(out.con.sparse, i); it;
         ++it)
      it.valueRef() /= norm;
    out.con.rhs(i) /= norm;
    out.row_norms(i) = norm;
  }
  for (Eigen::Index i = 0; i < orig.dense.rows(); ++i) {
    const double norm = out.con.dense.row(i).norm();
    if (norm < 1e-300) {
      if (std::abs(orig.rhs(s + i)) > 1e-12) out.zero_row_infeasible = true;
      continue;
    }
    out.con.dense.row(i) /= norm;
    out.con.rhs(s + i) /= norm;
    out.row_norms(s + i) = norm;
  }
  return out;
}

// Factorization of the normal matrix M(d) = A diag(d) A' for the block
// row structure A = [S; F]:
//
//   M = [ S d S'   S d F' ]   sparse simplicial LDLT of the corner, then a
//       [ F d S'   F d F' ]   dense Cholesky of the dense rows' Schur
//                             complement.
//
// A small diagonal regularization is always added: sampling plans can
// legitimately contain linearly dependent rows (conjugate-symmetric
// frequency pairs measured on a real image), which makes M singular but
// consistent. Iterative refinement against the true M restores accuracy.
class NormalSolver {
 public:
  explicit NormalSolver(const Constraints& con) : con_(con) {}

  bool factorize(const Eigen::VectorXd& d) {
    d_ = d;
    extra_ = 0.0;
    for (int attempt = 0; attempt < 5; ++attempt) {
      if (try_factorize(d, extra_)) return true;
      extra_ = extra_ == 0.0 ? 1e-10 : extra_ * 1e4;
    }
    return false;
  }

  // Solve M(d) v = r with iterative refinement against the true M. No
  // regularization escalation here: these systems legitimately carry
  // near-null directions (dependent measurement rows), where a stronger
  // regularizer stalls the refinement instead of helping it. Late-iteration
  // direction error is tolerated by the outer loop — each iteration's right
  // side re-absorbs the feasibility error it left behind.
  Eigen::VectorXd solve(const Eigen::VectorXd& r) {
    Eigen::VectorXd v = refine(r);
    if (trace_enabled())
      std::fprintf(stderr, "            solve quality %.3e  extra %.3e\n", quality_,
                   extra_);
    return v;
  }

  // |r - M v|_inf / (1 + |r|_inf) of the last returned solution.
  double quality() const { return quality_; }

 private:

  // Refinement rounds against the true M, stopping when converged or no
  // longer contracting (a sign the factor is too weak for this right side).
  Eigen::VectorXd refine(const Eigen::VectorXd& r) {
    const double rscale = 1.0 + r.cwiseAbs().maxCoeff();
    Eigen::VectorXd v = raw_solve(r);
    Eigen::VectorXd resid = r - apply_normal(v);
    quality_ = resid.cwiseAbs().maxCoeff() / rscale;
    for (int round = 0; round < 6 && quality_ > 1e-14; ++round) {
      const Eigen::VectorXd v2 = v + raw_solve(resid);
      const Eigen::VectorXd resid2 = r - apply_normal(v2);
      const double rel2 = resid2.cwiseAbs().maxCoeff() / rscale;
      if (rel2 >= quality_) break;
      v = std::move(v2);
      resid = std::move(resid2);
      quality_ = rel2;
    }
    return v;
  }
  bool try_factorize(const Eigen::VectorXd& d, double extra) {
    const Eigen::Index s = con_.sparse.rows();
    const Eigen::Index f = con_.dense.rows();
    if (s > 0) {
      const Eigen::SparseMatrix<double, Eigen::RowMajor> sd = con_.sparse * d.asDiagonal();
      Eigen::SparseMatrix<double> mss = sd * con_.sparse.transpose();
      const double scale = std::max(mss.diagonal().cwiseAbs().maxCoeff(), 1e-30);
      Eigen::SparseMatrix<double> eye(s, s);
      eye.setIdentity();
      mss += (1e-12 + extra) * scale * eye;
      if (!pattern_ready_) {
        sparse_ldlt_.analyzePattern(mss);
        pattern_ready_ = true;
      }
      sparse_ldlt_.factorize(mss);
      if (sparse_ldlt_.info() != Eigen::Success) return false;
      if (f > 0) gmat_ = Eigen::MatrixXd(sd * con_.dense.transpose());
    }
    if (f > 0) {
      Eigen::MatrixXd h(f, f);
      h.noalias() = con_.dense * d.asDiagonal() * con_.dense.transpose();
      if (s > 0) h.noalias() -= gmat_.transpose() * sparse_ldlt_.solve(gmat_).eval();
      const double scale = std::max(h.diagonal().cwiseAbs().maxCoeff(), 1e-30);
      h.diagonal().array() += (1e-12 + extra) * scale;
      schur_llt_.compute(h);
      if (schur_llt_.info() != Eigen::Success) return false;
    }
    return true;
  }

  Eigen::VectorXd raw_solve(const Eigen::VectorXd& r) const {
    const Eigen::Index s = con_.sparse.rows();
    const Eigen::Index f = con_.dense.rows();
    Eigen::VectorXd v(s + f);
    if (s > 0 && f > 0) {
      const Eigen::VectorXd ms_rs = sparse_ldlt_.solve(r.head(s));
      const Eigen::VectorXd vf = schur_llt_.solve(r.tail(f) - gmat_.transpose() * ms_rs);
      v.tail(f) = vf;
      v.head(s) = sparse_ldlt_.solve(r.head(s) - gmat_ * vf);
    } else if (s > 0) {
      v = sparse_ldlt_.solve(r);
    } else if (f > 0) {
      v = schur_llt_.solve(r);
    }
    return v;
  }

  Eigen::VectorXd apply_normal(const Eigen::VectorXd& v) const {
    const Eigen::VectorXd w = d_.cwiseProduct(con_.apply_adjoint(v));
    return con_.apply(w);
  }

  const Constraints& con_;
  Eigen::VectorXd d_;
  double extra_ = 0.0;    // current diagonal regularization multiplier
  double quality_ = 0.0;  // relative residual of the last solve
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> sparse_ldlt_;
  Eigen::MatrixXd gmat_;  // S d F'
  Eigen::LLT<Eigen::MatrixXd> schur_llt_;
  bool pattern_ready_ = false;
};

// Largest damped step keeping x + alpha dx strictly positive (capped at 1).
double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double alpha = 1.0 / kStepFraction;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (dx(i) < 0.0) alpha = std::min(alpha, -x(i) / dx(i));
  return std::min(alpha * kStepFraction, 1.0);
}

Eigen::VectorXd clipped_ratio(const Eigen::VectorXd& num, const Eigen::VectorXd& den) {
  Eigen::VectorXd d(num.size());
  for (Eigen::Index i = 0; i < num.size(); ++i)
    d(i) = std::clamp(num(i) / den(i), kDiagClipLo, kDiagClipHi);
  return d;
}

}  // namespace

// ---- generic LP ---------------------------------------------------------------

Result solve(const Eigen::VectorXd& c, const Constraints& con_in,
             const Eigen::VectorXd& lower_bounds, const Options& opt) {
  con_in.validate();
  const Eigen::Index n = con_in.rows() > 0 ? con_in.cols() : c.size();
  if (c.size() != n) throw std::invalid_argument("lp::solve: objective length mismatch");
  if (lower_bounds.size() != n)
    throw std::invalid_argument("lp::solve: lower_bounds length mismatch");
  if (!lower_bounds.allFinite())
    throw std::invalid_argument("lp::solve: lower bounds must be finite");

  Result res;
  res.x = lower_bounds;
  res.y = Eigen::VectorXd::Zero(con_in.rows());
  res.z = Eigen::VectorXd::Zero(n);

  // No constraints: the minimum sits at the bound iff the objective is
  // non-negative; otherwise the problem is unbounded below.
  if (con_in.rows() == 0) {
    if ((c.array() < -1e-15).any()) {
      res.status = Status::NumericalFailure;
      return res;
    }
    res.status = Status::Optimal;
    res.z = c;
    res.objective = c.dot(res.x);
    return res;
  }

  ScaledSystem sys = equilibrate(con_in);
  if (sys.zero_row_infeasible) {
    res.status = Status::Infeasible;
    return res;
  }
  sys.con.rhs -= sys.con.apply(lower_bounds);  // shift to x >= 0
  const Eigen::VectorXd& b = sys.con.rhs;
  const double bnorm = 1.0 + b.cwiseAbs().maxCoeff();
  const double cnorm = 1.0 + c.cwiseAbs().maxCoeff();

  NormalSolver normal(sys.con);
  if (!normal.factorize(Eigen::VectorXd::Ones(n))) {
    res.status = Status::NumericalFailure;
    return res;
  }

  // Least-norm feasibility probe; doubles as the starting point.
  Eigen::VectorXd x = sys.con.apply_adjoint(normal.solve(b));
  if ((sys.con.apply(x) - b).cwiseAbs().maxCoeff() >
      std::max(1e-6, 1e3 * opt.feas_tol) * bnorm) {
    res.status = Status::Infeasible;
    return res;
  }
  Eigen::VectorXd y = normal.solve(sys.con.apply(c));
  Eigen::VectorXd z = c - sys.con.apply_adjoint(y);

  {
    // Shift the probe into the strict interior (Mehrotra's heuristic).
    const double dx = std::max(-1.5 * x.minCoeff(), 0.0);
    const double dz = std::max(-1.5 * z.minCoeff(), 0.0);
    Eigen::VectorXd xh = x.array() + dx;
    Eigen::VectorXd zh = z.array() + dz;
    const double num = xh.dot(zh);
    const double ddx = num > 0 && zh.sum() > 1e-300 ? 0.5 * num / zh.sum() : 1.0;
    const double ddz = num > 0 && xh.sum() > 1e-300 ? 0.5 * num / xh.sum() : 1.0;
    x = xh.array() + ddx;
    z = zh.array() + ddz;
    // When c lies (almost) in the row space of A the dual probe z is
    // non-negative but microscopic, the shift above keeps it microscopic,
    // and every complementarity product starts wedged on the boundary.
    // Floor both factors at a small fraction of their own scale so the
    // start is genuinely interior.
    const double xf = 1e-2 * std::max(1.0, x.cwiseAbs().maxCoeff());
    const double zf = 1e-2 * std::max(1.0, z.cwiseAbs().maxCoeff());
    x = x.cwiseMax(xf);
    z = z.cwiseMax(zf);
  }

  Status status = Status::IterLimit;
  double best_merit = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x, best_y, best_z;
  int last_gain_iter = 0;
  int iter = 0;
  for (; iter < opt.max_iters; ++iter) {
    const Eigen::VectorXd rp = b - sys.con.apply(x);
    const Eigen::VectorXd rd = c - sys.con.apply_adjoint(y) - z;
    const double obj_p = c.dot(x);
    const double obj_d = b.dot(y);
    const double relp = rp.cwiseAbs().maxCoeff() / bnorm;
    const double reld = rd.cwiseAbs().maxCoeff() / cnorm;
    const double gap = std::abs(obj_p - obj_d) / (1.0 + std::abs(obj_p));
    if (trace_enabled())
      std::fprintf(stderr, "lp iter %3d  relp %.3e  reld %.3e  gap %.3e\n", iter, relp,
                   reld, gap);
    if (relp <= opt.feas_tol && reld <= opt.opt_tol && gap <= opt.opt_tol) {
      status = Status::Optimal;
      break;
    }
    if (!x.allFinite() || !z.allFinite() || x.cwiseAbs().maxCoeff() > 1e18) {
      status = Status::NumericalFailure;
      break;
    }
    const double merit = std::max({relp, reld, gap});
    if (merit < 0.99 * best_merit) {
      best_merit = merit;
      best_x = x;
      best_y = y;
      best_z = z;
      last_gain_iter = iter;
    } else if (iter - last_gain_iter >= kStallWindow) {
      break;  // no measurable progress; the best iterate is already saved
    }

    const double mu = x.dot(z) / double(n);
    const Eigen::VectorXd d = clipped_ratio(x, z);
    if (!normal.factorize(d)) {
      status = Status::NumericalFailure;
      break;
    }

    // Predictor:  A D A' dy = rp + A (x + D rd)  ==  b + A D rd.
    const Eigen::VectorXd dy_aff = normal.solve(b + sys.con.apply(d.cwiseProduct(rd)));
    const Eigen::VectorXd dz_aff = rd - sys.con.apply_adjoint(dy_aff);
    const Eigen::VectorXd dx_aff = -x - d.cwiseProduct(dz_aff);

    const double ap_aff = max_step(x, dx_aff);
    const double ad_aff = max_step(z, dz_aff);
    const double mu_aff = (x + ap_aff * dx_aff).dot(z + ad_aff * dz_aff) / double(n);
    double sigma = mu > 0 ? std::pow(std::max(mu_aff, 0.0) / mu, 3.0) : 0.0;
    sigma = std::clamp(sigma, 1e-8, 1.0);

    // Corrector with complementarity rhs  -XZe - dX dZ e + sigma mu e.
    const Eigen::VectorXd comp =
        ((-x.cwiseProduct(z) - dx_aff.cwiseProduct(dz_aff)).array() + sigma * mu).matrix();
    const Eigen::VectorXd zinv_comp = comp.cwiseQuotient(z);
    const Eigen::VectorXd dy =
        normal.solve(rp + sys.con.apply(d.cwiseProduct(rd) - zinv_comp));
    const Eigen::VectorXd dz = rd - sys.con.apply_adjoint(dy);
    const Eigen::VectorXd dx = zinv_comp - d.cwiseProduct(dz);

    double ap = max_step(x, dx);
    double ad = max_step(z, dz);
    if (ap < 1e-12 && ad < 1e-12) {
      status = Status::NumericalFailure;
      break;
    }

    // Balance guard: while infeasibility is unresolved, keep complementarity
    // from collapsing far below it — the Newton systems of a tiny-mu iterate
    // cannot represent the feasibility correction any more, which strands
    // the residual permanently.
    if (relp > opt.feas_tol && mu > 0.0) {
      const double mu_floor = 1e-2 * relp * (1.0 + std::abs(obj_p)) / double(n);
      double cut = 1.0;
      for (int round = 0; round < kMaxStepCuts; ++round) {
        const double mu_try = (x + cut * ap * dx).dot(z + cut * ad * dz) / double(n);
        // Acceptable: stays above the floor, or does not descend at all
        // (below the floor the guard blocks any further collapse).
        if (mu_try >= std::min(mu_floor, mu)) break;
        cut *= 0.5;
      }
      ap *= cut;
      ad *= cut;
    } else if (relp <= opt.feas_tol && reld <= opt.opt_tol && mu > 0.0) {
      // Endgame guard: once both residuals are inside tolerance only the gap
      // is left, and complementarity must shrink monotonically.  On a
      // degenerate optimal face the blocking components differ between the
      // two spaces, the ratio test returns lopsided lengths (one near 1, the
      // other near 0), and the moving side's products grow — mu bounces up
      // an order of magnitude and the endgame oscillates just above
      // tolerance.  If the asymmetric step would raise mu, retreat to the
      // best equal step length instead.
      const double mu_asym = (x + ap * dx).dot(z + ad * dz) / double(n);
      if (mu_asym > mu) {
        double best_p = ap;
        double best_d = ad;
        double best_mu = mu_asym;
        double a = std::min(ap, ad);
        for (int round = 0; round < 2 * kMaxStepCuts; ++round) {
          const double mu_eq = (x + a * dx).dot(z + a * dz) / double(n);
          if (mu_eq < best_mu) {
            best_mu = mu_eq;
            best_p = a;
            best_d = a;
          }
          a *= 0.5;
        }
        ap = best_p;
        ad = best_d;
      }
    }

    if (trace_enabled())
      std::fprintf(stderr, "        mu %.3e  sigma %.3e  ap %.3e  ad %.3e\n", mu, sigma,
                   ap, ad);
    x += ap * dx;
    y += ad * dy;
    z += ad * dz;
  }

  // A later iterate may be worse than the best one seen (stalls, rejected
  // directions); report the best.
  if (status != Status::Optimal && best_x.size() > 0) {
    x = best_x;
    y = best_y;
    z = best_z;
  }

  res.x = x + lower_bounds;
  res.y = y.cwiseQuotient(sys.row_norms);  // dual for the caller's unscaled rows
  res.z = z;
  res.status = status;
  res.iterations = iter;
  res.objective = c.dot(res.x);
  const Eigen::VectorXd resid = con_in.apply(res.x) - con_in.rhs;
  res.primal_residual_inf = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
  res.dual_residual_inf = (c - con_in.apply_adjoint(res.y) - res.z).cwiseAbs().maxCoeff();
  return res;
}

Result lp_solve(const Eigen::VectorXd& c, const Eigen::MatrixXd& a_eq,
                const Eigen::VectorXd& b_eq, const Eigen::VectorXd& lower_bounds,
                const Options& opt) {
  return solve(c, Constraints::dense_only(a_eq, b_eq), lower_bounds, opt);
}

// ---- weighted l1 front-end -----------------------------------------------------

L1Result solve_weighted_l1(const Constraints& con_in, const Eigen::VectorXd& weights,
                           const Options& opt) {
  con_in.validate();
  const Eigen::Index q = con_in.cols();
  if (weights.size() != q)
    throw std::invalid_argument("solve_weighted_l1: weight length mismatch");
  if ((weights.array() < 0.0).any())
    throw std::invalid_argument("solve_weighted_l1: weights must be >= 0");

  L1Result res;
  res.x = Eigen::VectorXd::Zero(q);
  res.y = Eigen::VectorXd::Zero(con_in.rows());
  if (con_in.rows() == 0) {
    res.status = Status::Optimal;  // unconstrained weighted l1 minimum is 0
    return res;
  }

  ScaledSystem sys = equilibrate(con_in);
  if (sys.zero_row_infeasible) {
    res.status = Status::Infeasible;
    return res;
  }
  const Eigen::VectorXd& b = sys.con.rhs;
  const Eigen::VectorXd& w = weights;
  const double bnorm = 1.0 + b.cwiseAbs().maxCoeff();
  const double wnorm = 1.0 + w.cwiseAbs().maxCoeff();

  NormalSolver normal(sys.con);
  if (!normal.factorize(Eigen::VectorXd::Constant(q, 2.0))) {
    res.status = Status::NumericalFailure;
    return res;
  }
  // Least-norm signed solution of A x = b (the u/v pair (x/2, -x/2) shifted
  // positive is the interior start), doubling as the feasibility probe.
  const Eigen::VectorXd xmin = 2.0 * sys.con.apply_adjoint(normal.solve(b));
  if ((sys.con.apply(xmin) - b).cwiseAbs().maxCoeff() >
      std::max(1e-6, 1e3 * opt.feas_tol) * bnorm) {
    res.status = Status::Infeasible;
    return res;
  }

  const double pad = 1.0 + 0.5 * xmin.cwiseAbs().maxCoeff();
  Eigen::VectorXd u = xmin.cwiseMax(0.0).array() + pad;
  Eigen::VectorXd v = (-xmin).cwiseMax(0.0).array() + pad;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(con_in.rows());
  const double zpad = 1.0 + 0.5 * w.maxCoeff();
  Eigen::VectorXd zu = w.array() + zpad;
  Eigen::VectorXd zv = w.array() + zpad;

  Status status = Status::IterLimit;
  double best_merit = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_u, best_v, best_y;
  int last_gain_iter = 0;
  int iter = 0;
  for (; iter < opt.max_iters; ++iter) {
    const Eigen::VectorXd aty = sys.con.apply_adjoint(y);
    const Eigen::VectorXd rp = b - sys.con.apply(u - v);
    const Eigen::VectorXd rdu = w - aty - zu;
    const Eigen::VectorXd rdv = w + aty - zv;
    const double obj_p = w.dot(u + v);
    const double obj_d = b.dot(y);
    const double relp = rp.cwiseAbs().maxCoeff() / bnorm;
    const double reld =
        std::max(rdu.cwiseAbs().maxCoeff(), rdv.cwiseAbs().maxCoeff()) / wnorm;
    const double gap = std::abs(obj_p - obj_d) / (1.0 + std::abs(obj_p));
    if (trace_enabled())
      std::fprintf(stderr, "l1 iter %3d  relp %.3e  reld %.3e  gap %.3e\n", iter, relp,
                   reld, gap);
    if (relp <= opt.feas_tol && reld <= opt.opt_tol && gap <= opt.opt_tol) {
      status = Status::Optimal;
      break;
    }
    if (!u.allFinite() || !v.allFinite() ||
        std::max(u.maxCoeff(), v.maxCoeff()) > 1e18) {
      status = Status::NumericalFailure;
      break;
    }
    const double merit = std::max({relp, reld, gap});
    if (merit < 0.99 * best_merit) {
      best_merit = merit;
      best_u = u;
      best_v = v;
      best_y = y;
      last_gain_iter = iter;
    } else if (iter - last_gain_iter >= kStallWindow) {
      break;  // no measurable progress; the best iterate is already saved
    }

    const double mu = (u.dot(zu) + v.dot(zv)) / double(2 * q);
    const Eigen::VectorXd du_diag = clipped_ratio(u, zu);
    const Eigen::VectorXd dv_diag = clipped_ratio(v, zv);
    if (!normal.factorize(du_diag + dv_diag)) {
      status = Status::NumericalFailure;
      break;
    }

    // Predictor:  A (Du + Dv) A' dy = b + A (Du rdu - Dv rdv).
    const Eigen::VectorXd dy_aff =
        normal.solve(b + sys.con.apply(du_diag.cwiseProduct(rdu) - dv_diag.cwiseProduct(rdv)));
    const Eigen::VectorXd atdy_aff = sys.con.apply_adjoint(dy_aff);
    const Eigen::VectorXd dzu_aff = rdu - atdy_aff;
    const Eigen::VectorXd dzv_aff = rdv + atdy_aff;
    const Eigen::VectorXd du_aff = -u - du_diag.cwiseProduct(dzu_aff);
    const Eigen::VectorXd dv_aff = -v - dv_diag.cwiseProduct(dzv_aff);

    const double ap_aff = std::min(max_step(u, du_aff), max_step(v, dv_aff));
    const double ad_aff = std::min(max_step(zu, dzu_aff), max_step(zv, dzv_aff));
    const double mu_aff = ((u + ap_aff * du_aff).dot(zu + ad_aff * dzu_aff) +
                           (v + ap_aff * dv_aff).dot(zv + ad_aff * dzv_aff)) /
                          double(2 * q);
    double sigma = mu > 0 ? std::pow(std::max(mu_aff, 0.0) / mu, 3.0) : 0.0;
    sigma = std::clamp(sigma, 1e-8, 1.0);

    // Corrector.
    const Eigen::VectorXd zinv_cu =
        ((-u.cwiseProduct(zu) - du_aff.cwiseProduct(dzu_aff)).array() + sigma * mu)
            .matrix()
            .cwiseQuotient(zu);
    const Eigen::VectorXd zinv_cv =
        ((-v.cwiseProduct(zv) - dv_aff.cwiseProduct(dzv_aff)).array() + sigma * mu)
            .matrix()
            .cwiseQuotient(zv);
    const Eigen::VectorXd dy = normal.solve(
        rp + sys.con.apply(du_diag.cwiseProduct(rdu) - dv_diag.cwiseProduct(rdv) - zinv_cu +
                           zinv_cv));
    const Eigen::VectorXd atdy = sys.con.apply_adjoint(dy);
    const Eigen::VectorXd dzu = rdu - atdy;
    const Eigen::VectorXd dzv = rdv + atdy;
    const Eigen::VectorXd du = zinv_cu - du_diag.cwiseProduct(dzu);
    const Eigen::VectorXd dv = zinv_cv - dv_diag.cwiseProduct(dzv);

    double ap = std::min(max_step(u, du), max_step(v, dv));
    double ad = std::min(max_step(zu, dzu), max_step(zv, dzv));
    if (ap < 1e-12 && ad < 1e-12) {
      status = Status::NumericalFailure;
      break;
    }

    // Balance guard: while infeasibility is unresolved, keep complementarity
    // from collapsing far below it — the Newton systems of a tiny-mu iterate
    // cannot represent the feasibility correction any more, which strands
    // the residual permanently.
    if (relp > opt.feas_tol && mu > 0.0) {
      const double mu_floor = 1e-2 * relp * (1.0 + std::abs(obj_p)) / double(2 * q);
      double cut = 1.0;
      for (int round = 0; round < kMaxStepCuts; ++round) {
        const double mu_try = ((u + cut * ap * du).dot(zu + cut * ad * dzu) +
                               (v + cut * ap * dv).dot(zv + cut * ad * dzv)) /
                              double(2 * q);
        // Acceptable: stays above the floor, or does not descend at all
        // (below the floor the guard blocks any further collapse).
        if (mu_try >= std::min(mu_floor, mu)) break;
        cut *= 0.5;
      }
      ap *= cut;
      ad *= cut;
    }

    if (trace_enabled())
      std::fprintf(stderr, "        mu %.3e  sigma %.3e  ap %.3e  ad %.3e\n", mu, sigma,
                   ap, ad);
    u += ap * du;
    v += ap * dv;
    y += ad * dy;
    zu += ad * dzu;
    zv += ad * dzv;
  }

  // A later iterate may be worse than the best one seen (stalls, rejected
  // directions); report the best.
  if (status != Status::Optimal && best_u.size() > 0) {
    u = best_u;
    v = best_v;
    y = best_y;
  }

  res.x = u - v;
  res.y = y.cwiseQuotient(sys.row_norms);  // dual for the caller's unscaled rows
  res.status = status;
  res.iterations = iter;
  res.objective = w.dot(res.x.cwiseAbs());
  const Eigen::VectorXd resid = con_in.apply(res.x) - con_in.rhs;
  res.primal_residual_inf = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
  return res;
}

}  // namespace dualcs::lp
