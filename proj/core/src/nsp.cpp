#include "dualcs/nsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dualcs/bpsolver.hpp"
#include "dualcs/lp.hpp"
#include "dualcs/rng.hpp"

namespace dualcs::analysis {

namespace {

constexpr double kBox = 1e4;  // compactifies objective-neutral rays; gammas of
                              // interest are O(1), so this never binds near 1

Eigen::MatrixXd kernel_basis(const Eigen::MatrixXd& a) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-10);
  return lu.kernel();  // cols() == 1 with a zero column when kernel is trivial
}

bool kernel_is_trivial(const Eigen::MatrixXd& basis) {
  return basis.cols() == 0 || basis.cwiseAbs().maxCoeff() < 1e-12;
}

// True iff some null vector vanishes on every budget index while being
// non-zero somewhere on S — exactly the case where the sup is unbounded
// (scale that vector). Vectors vanishing on the budget AND on S only ride
// objective-neutral rays, which the box rows keep bounded.
bool unbounded_for(const Eigen::MatrixXd& basis, const std::vector<int>& budget,
                   const std::vector<int>& s_set) {
  const Eigen::Index k = basis.cols();
  Eigen::MatrixXd coeffs;  // basis-coefficient directions vanishing on budget
  if (budget.empty()) {
    coeffs = Eigen::MatrixXd::Identity(k, k);
  } else {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(budget.size()), k);
    for (size_t i = 0; i < budget.size(); ++i)
      rows.row(static_cast<Eigen::Index>(i)) = basis.row(budget[i]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(rows);
    lu.setThreshold(1e-10);
    if (lu.rank() == k) return false;
    coeffs = lu.kernel();
  }
  double largest = 0.0;
  for (int idx : s_set)
    largest = std::max(largest, (basis.row(idx) * coeffs).cwiseAbs().maxCoeff());
  return largest > 1e-10;
}

// sup { sign' * eta_S } over eta in N(A) with ||eta_budget||_1 <= 1, as an
// LP over the split eta = p - q, p,q >= 0:
//   rows of A:             A (p - q) = 0
//   budget row:            sum_{i in budget} (p_i + q_i) + slack = 1
//   box rows:              p_i + u_i = kBox, q_i + v_i = kBox  for i not in budget
// The boxes remove rays with constant objective (p_i = q_i growing) that
// would otherwise let the interior-point iterates run away.
double pattern_sup(const Eigen::MatrixXd& a, const std::vector<int>& s_set,
                   const std::vector<int>& budget, const std::vector<double>& signs) {
  const Eigen::Index n = a.cols();
  std::vector<char> in_budget(static_cast<size_t>(n), 0);
  for (int i : budget) in_budget[static_cast<size_t>(i)] = 1;
  std::vector<int> boxed;
  for (int i = 0; i < n; ++i)
    if (!in_budget[static_cast<size_t>(i)]) boxed.push_back(i);

  const Eigen::Index nb = static_cast<Eigen::Index>(boxed.size());
  const Eigen::Index vars = 2 * n + 1 + 2 * nb;  // p, q, budget slack, box slacks
  const Eigen::Index rows = a.rows() + 1 + 2 * nb;

  Eigen::MatrixXd con = Eigen::MatrixXd::Zero(rows, vars);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
  con.block(0, 0, a.rows(), n) = a;
  con.block(0, n, a.rows(), n) = -a;
  Eigen::Index r = a.rows();
  for (int i : budget) {
    con(r, i) = 1.0;
    con(r, n + i) = 1.0;
  }
  con(r, 2 * n) = 1.0;  // slack
  rhs(r) = 1.0;
  ++r;
  for (Eigen::Index k = 0; k < nb; ++k) {
    con(r, boxed[static_cast<size_t>(k)]) = 1.0;
    con(r, 2 * n + 1 + 2 * k) = 1.0;
    rhs(r) = kBox;
    ++r;
    con(r, n + boxed[static_cast<size_t>(k)]) = 1.0;
    con(r, 2 * n + 1 + 2 * k + 1) = 1.0;
    rhs(r) = kBox;
    ++r;
  }

  Eigen::VectorXd c = Eigen::VectorXd::Zero(vars);
  for (size_t i = 0; i < s_set.size(); ++i) {
    c(s_set[i]) = -signs[i];  // maximize sign' eta_S == minimize -sign'(p - q)
    c(n + s_set[i]) = signs[i];
  }

  const lp::Result res =
      lp::lp_solve(c, con, rhs, Eigen::VectorXd::Zero(vars), lp::Options{});
  if (res.status != lp::Status::Optimal) {
    // These enumeration LPs are maximally degenerate (whole faces of the
    // null-space polytope are optimal), and an interior-point endgame can
    // wedge a hair above the solver's 1e-8 gap tolerance with both residuals
    // long converged.  The enumerated suprema feed decisions at the 1e-2
    // scale (sampling-oracle agreement, gamma-versus-1 tests), so accept any
    // returned iterate whose own weak-duality certificate places the value
    // within 1e-6 of optimal.  Anything looser stays a hard error.
    const double obj_p = res.objective;
    const double obj_d = rhs.dot(res.y);  // dual value; lower bounds are zero
    const double relp = res.primal_residual_inf / (1.0 + rhs.cwiseAbs().maxCoeff());
    const double reld = res.dual_residual_inf / (1.0 + c.cwiseAbs().maxCoeff());
    const double gap = std::abs(obj_p - obj_d) / (1.0 + std::abs(obj_p));
    const bool certified = relp <= 1e-6 && reld <= 1e-6 && gap <= 1e-6 &&
                           (res.z.size() == 0 || res.z.minCoeff() >= -1e-9);
    if (!certified)
      throw std::runtime_error(std::string("nsp: pattern LP ended with status ") +
                               lp::to_string(res.status));
  }
  return -res.objective;
}

void check_bounds(const Eigen::MatrixXd& a, int L) {
  if (a.cols() < 1 || a.rows() < 1) throw std::invalid_argument("nsp: empty matrix");
  if (a.cols() > 12) throw std::invalid_argument("nsp: enumeration bound is 12 columns");
  if (L < 1 || L > 3) throw std::invalid_argument("nsp: enumeration bound is 1 <= L <= 3");
  if (!a.allFinite()) throw std::invalid_argument("nsp: non-finite matrix");
}

// All size-k subsets of {0..n-1}, lexicographic.
std::vector<std::vector<int>> combinations(int n, int k) {
  std::vector<std::vector<int>> all;
  if (k > n || k < 0) return all;
  std::vector<int> comb(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) comb[static_cast<size_t>(i)] = i;
  while (true) {
    all.push_back(comb);
    int pos = k - 1;
    while (pos >= 0 && comb[static_cast<size_t>(pos)] == n - k + pos) --pos;
    if (pos < 0) break;
    ++comb[static_cast<size_t>(pos)];
    for (int i = pos + 1; i < k; ++i)
      comb[static_cast<size_t>(i)] = comb[static_cast<size_t>(i - 1)] + 1;
  }
  return all;
}

// gamma for a fixed S and budget set: max over the 2^|S| sign patterns.
double set_gamma(const Eigen::MatrixXd& a, const Eigen::MatrixXd& basis,
                 const std::vector<int>& s_set, const std::vector<int>& budget) {
  if (unbounded_for(basis, budget, s_set))
    return std::numeric_limits<double>::infinity();
  double best = 0.0;
  const size_t patterns = static_cast<size_t>(1) << s_set.size();
  std::vector<double> signs(s_set.size());
  for (size_t mask = 0; mask < patterns; ++mask) {
    for (size_t i = 0; i < s_set.size(); ++i)
      signs[i] = (mask >> i) & 1 ? -1.0 : 1.0;
    best = std::max(best, pattern_sup(a, s_set, budget, signs));
  }
  return best;
}

}  // namespace

double nsp_gamma(const Eigen::MatrixXd& a, int L) {
  check_bounds(a, L);
  const Eigen::MatrixXd basis = kernel_basis(a);
  if (kernel_is_trivial(basis)) return 0.0;
  const int n = static_cast<int>(a.cols());
  double best = 0.0;
  for (const auto& s_set : combinations(n, std::min(L, n))) {
    std::vector<int> budget;
    for (int i = 0; i < n; ++i)
      if (!std::binary_search(s_set.begin(), s_set.end(), i)) budget.push_back(i);
    best = std::max(best, set_gamma(a, basis, s_set, budget));
    if (std::isinf(best)) return best;
  }
  return best;
}

double tnsp_gamma(const Eigen::MatrixXd& a, int t, int L) {
  check_bounds(a, L);
  const int n = static_cast<int>(a.cols());
  if (t < 1 || t > n) throw std::invalid_argument("tnsp_gamma: need 1 <= t <= cols");
  const Eigen::MatrixXd basis = kernel_basis(a);
  if (kernel_is_trivial(basis)) return 0.0;
  double best = 0.0;
  const int sub = std::min(L, t);
  for (const auto& t_set : combinations(n, t)) {
    for (const auto& pick : combinations(t, sub)) {
      std::vector<int> s_set;
      for (int p : pick) s_set.push_back(t_set[static_cast<size_t>(p)]);
      std::vector<int> budget;  // T minus S
      for (int v : t_set)
        if (!std::binary_search(s_set.begin(), s_set.end(), v)) budget.push_back(v);
      best = std::max(best, set_gamma(a, basis, s_set, budget));
      if (std::isinf(best)) return best;
    }
  }
  return best;
}

RecoveryReport verify_exact_recovery_theorem(const Eigen::MatrixXd& a, int t, int L,
                                             int num_signals, std::uint64_t seed) {
  RecoveryReport report;
  report.gamma = tnsp_gamma(a, t, L);
  report.guaranteed = report.gamma < 1.0;
  report.trials = num_signals;

  const int n = static_cast<int>(a.cols());
  rng::Engine eng(seed);
  for (int trial = 0; trial < num_signals; ++trial) {
    // Random unknown set T of size t; sparse part inside T; dense known
    // values outside it.
    const std::vector<int> t_set = rng::sample_without_replacement(eng, n, t);
    std::vector<int> support;
    {
      const std::vector<int> pick =
          rng::sample_without_replacement(eng, t, std::min(L, t));
      for (int p : pick) support.push_back(t_set[static_cast<size_t>(p)]);
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int idx : support) {
      const double amp = eng.uniform_real(0.5, 1.5);
      x(idx) = eng.next_u64() & 1 ? amp : -amp;
    }
    std::vector<char> in_t(static_cast<size_t>(n), 0);
    for (int idx : t_set) in_t[static_cast<size_t>(idx)] = 1;
    std::vector<int> known_idx;
    for (int i = 0; i < n; ++i)
      if (!in_t[static_cast<size_t>(i)]) known_idx.push_back(i);
    Eigen::VectorXd known_vals(static_cast<Eigen::Index>(known_idx.size()));
    for (size_t k = 0; k < known_idx.size(); ++k) {
      const double val = eng.uniform_real(-1.0, 1.0);
      x(known_idx[k]) = val;
      known_vals(static_cast<Eigen::Index>(k)) = val;
    }

    solver::L1Problem prob;
    prob.a = a;
    prob.b = a * x;
    const solver::SolverResult res =
        solver::solve_truncated_bp(prob, known_idx, known_vals, solver::SolverConfig{});

    const bool value_match = (res.solution - x).cwiseAbs().maxCoeff() <= 1e-6;
    bool support_match = true;
    for (int idx : t_set) {
      const bool truth_nz = x(idx) != 0.0;
      const bool recon_nz = std::abs(res.solution(idx)) >= 1e-6;
      if (truth_nz != recon_nz) support_match = false;
    }
    // Exactness is decided by the recovered values and support alone; the
    // solver status is reported for diagnosis but a best iterate that matches
    // the planted signal is a recovery, not a counterexample.
    if (value_match && support_match) {
      ++report.exact;
    } else {
      std::ostringstream msg;
      msg << "trial " << trial << ": status " << lp::to_string(res.status)
          << ", max deviation " << (res.solution - x).cwiseAbs().maxCoeff();
      report.counterexamples.push_back(msg.str());
    }
  }
  return report;
}

}  // namespace dualcs::analysis
