#pragma once

// Brute-force null-space-property verification at desk scale. gamma < 1 for
// the (truncated) null-space condition certifies that (truncated) basis
// pursuit recovers every sufficiently sparse signal exactly; these routines
// compute the tightest gamma by enumerating index sets and sign patterns,
// one small LP per pattern, and then test the recovery guarantee end to end
// on planted signals.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dualcs::analysis {

// Tightest gamma of order L: max over |S| = L and sign patterns of
//   sup { sign' * eta_S : eta in N(A), ||eta_{S^C}||_1 <= 1 }.
// Returns 0 for full-column-rank A (trivial null space) and +infinity when
// some null vector is supported entirely inside an S (the sup is unbounded).
// Enumeration bounds: cols <= 12, 1 <= L <= 3.
double nsp_gamma(const Eigen::MatrixXd& a, int L);

// Truncated variant: max over |T| = t, S subset of T with |S| = min(L, t) of
//   sup { sign' * eta_S : eta in N(A), ||eta_{T intersect S^C}||_1 <= 1 }.
// With t = cols this coincides with nsp_gamma. Bounds: cols <= 12, L <= 3,
// plus t <= cols.
double tnsp_gamma(const Eigen::MatrixXd& a, int t, int L);

struct RecoveryReport {
  double gamma = 0.0;
  bool guaranteed = false;  // gamma < 1: exact recovery is a theorem, not luck
  int trials = 0;
  int exact = 0;
  // One line per failed recovery (empty whenever guaranteed is true, or the
  // run is a solver/enumeration bug).
  std::vector<std::string> counterexamples;
};

// Plants num_signals random signals x with at most L non-zeros inside a
// random size-t unknown set T (dense arbitrary values outside T), measures
// b = A x, and runs truncated basis pursuit with the outside-T values given
// as known. When tnsp_gamma(a, t, L) < 1 every recovery must be exact.
RecoveryReport verify_exact_recovery_theorem(const Eigen::MatrixXd& a, int t, int L,
                                             int num_signals, std::uint64_t seed);

}  // namespace dualcs::analysis
