#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dualcs/image.hpp"

namespace dualcs::sampling {

// Where a sample is taken: spatial-frequency space (unitary DFT), direct
// pixel space, or the circular finite-difference space of one axis.
enum class Space { KSpace, XSpace, FDSpace };

std::string to_string(Space s);
Space space_from_string(const std::string& s);

// A set of sample locations in one space. Indices address the row-major
// flattened grid (k-space indices enumerate the frequency grid the same
// way). For FDSpace, `axis` says which axis the differences run along.
struct SamplingPlan {
  Space space = Space::KSpace;
  int n = 0;                  // ambient dimension (total pixel count)
  int axis = 0;               // FDSpace only; must be 0 for 1-D signals
  std::vector<int> indices;   // distinct, each in [0, n)

  int count() const { return static_cast<int>(indices.size()); }
  bool contains(int idx) const;
  void validate() const;
};

// Samples plus the plan that produced them. k-space values are genuinely
// complex; X/FD-space values have zero imaginary parts (real_values()
// checks that and hands back the real vector).
struct MeasurementSet {
  SamplingPlan plan;
  Eigen::VectorXcd values;

  void validate() const;
  Eigen::VectorXd real_values() const;
};

// Explicit matrix form of a transform or measurement operator, tagged with
// the spaces its rows and columns live in. All entries must be finite.
struct DenseOperator {
  Eigen::MatrixXcd entries;
  Space row_space = Space::KSpace;
  Space column_space = Space::XSpace;

  void validate() const;
};

// Unitary DFT matrix, entries w^(jk)/sqrt(n) with w = exp(-2*pi*i/n).
Eigen::MatrixXcd dft_matrix(int n);

// m distinct indices uniform over [0, n), sorted. Deterministic in seed.
SamplingPlan random_plan(Space space, int n, int m, std::uint64_t seed, int axis = 0);

// Row-submatrix operator for a plan over a 1-D domain (shape {n}) or an
// explicit 1-/2-D shape. KSpace rows are DFT rows (tensor-product DFT for
// rank 2), XSpace rows are identity rows, FDSpace rows are circular
// differences (-1 at the pixel, +1 at its successor along the axis).
DenseOperator build_operator(const SamplingPlan& plan);
DenseOperator build_operator(const SamplingPlan& plan, const std::vector<int>& shape);

// Sample `img` at the plan's locations. Evaluated implicitly (no operator
// materialization), so large-grid k-space measurement stays cheap. One
// entry of the result == one measurement, in all three spaces.
MeasurementSet measure(const Image& img, const SamplingPlan& plan);

// Mutual coherence sqrt(n) * max |<phi_i, psi_j>| between two orthonormal
// bases given as n x n unitary operators (checked to 1e-9). Ranges over
// [1, sqrt(n)]; symmetric in its arguments.
double coherence(const DenseOperator& phi, const DenseOperator& psi);

// Plan JSON: {"space":"k"|"x"|"fd","n":N,"indices":[...]} with "axis"
// present only for fd plans.
std::string plan_to_json(const SamplingPlan& plan);
SamplingPlan plan_from_json(const std::string& json_text);

}  // namespace dualcs::sampling
