#pragma once

// Weighted total-variation reconstruction: minimize the weighted l1 norm of
// the image's circular finite differences subject to k-space equalities and
// (optionally) directly measured finite-difference pairs.
//
// The program is solved over the FD values themselves. A finite-difference
// field is the gradient of some image exactly when it satisfies a small set
// of linear consistency rows (circular sums in 1-D; discrete-curl, column
// sums and one row sum in 2-D). k-space rows become dense rows over the FD
// variables through prefix-sum accounting; the image mean is not an LP
// variable at all — it is pinned afterwards by the DC (k=0) measurement,
// which the k-plan is therefore required to contain.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "dualcs/bpsolver.hpp"
#include "dualcs/image.hpp"
#include "dualcs/sampling.hpp"

namespace dualcs::solver {

// Per-pair objective weights, one per flattened pixel (the pair is pixel ->
// circular successor along the axis). Empty vector means all-ones.
struct WtvWeights {
  Eigen::VectorXd axis0;  // differences along axis 0; the only axis in 1-D
  Eigen::VectorXd axis1;  // differences along axis 1; 2-D only
};

// Rows whose kernel is exactly the set of gradient fields:
//   1-D (n variables d):        one row  sum_j d_j = 0
//   2-D (2n variables [d0;d1]): (R-1)*C discrete-curl rows, C column sums
//                               of d0, and the row-0 sum of d1 — n+1 rows
//                               in total, all independent.
// Variable layout: axis-0 differences first (flattened row-major), then
// axis-1 differences (2-D only).
Eigen::SparseMatrix<double, Eigen::RowMajor> gradient_field_constraints(
    const std::vector<int>& shape);

// Path-integrates a gradient field back to an image: along row 0 first,
// then down each column; `anchor` is the value of pixel 0. d1 is ignored
// for 1-D shapes.
Image image_from_gradient(const Eigen::VectorXd& d0, const Eigen::VectorXd& d1,
                          const std::vector<int>& shape, double anchor);

// Weighted-TV solve. k_meas must be a k-space measurement set containing
// the DC index (it anchors the image mean). fd_meas holds at most one
// FD-space measurement set per axis; every measured pair is eliminated
// from the program as a known value. Returned solution is the flattened
// reconstructed image; `objective` is the weighted l1 of the free
// (unmeasured) differences, as minimized; `residual_inf` re-measures the
// reconstruction against every input constraint (k-space rows split into
// real/imaginary parts, FD pairs directly).
SolverResult solve_wtv(const sampling::MeasurementSet& k_meas,
                       const std::vector<sampling::MeasurementSet>& fd_meas,
                       const WtvWeights& weights, const std::vector<int>& shape,
                       const SolverConfig& cfg = {});

}  // namespace dualcs::solver
