#pragma once

// Edge detection as sparse recovery in finite-difference space. A step-like
// signal or piecewise-constant image has few large circular differences, so
// TV-form basis pursuit from a small k-space plan recovers it — and the
// dual-space variant spends a second budget re-measuring the most promising
// difference pairs directly, pinning them as equality constraints and
// dropping their objective weight to zero once confirmed.

#include <cstdint>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dualcs/bpsolver.hpp"
#include "dualcs/image.hpp"
#include "dualcs/pipeline.hpp"

namespace dualcs::edges {

// Boolean edge grids, one flag per pixel pair (pixel -> circular successor).
// `horizontal` flags differences along the horizontal axis: the only axis of
// a 1-D signal, the column axis (axis 1) of a 2-D image. `vertical` flags
// axis-0 differences of a 2-D image and stays empty for 1-D. Both grids have
// one entry per pixel, row-major, matching the image shape.
struct EdgeMap {
  std::vector<std::uint8_t> horizontal;
  std::vector<std::uint8_t> vertical;
  std::vector<int> shape;
  double gradient_threshold = 0.0;

  int rank() const { return static_cast<int>(shape.size()); }
  // The grid holding differences along `axis` (0-based image axis).
  const std::vector<std::uint8_t>& along_axis(int axis) const;
  std::vector<std::uint8_t>& along_axis(int axis);
  int edge_count() const;  // set flags across both grids
  void validate() const;

  bool operator==(const EdgeMap&) const = default;
};

struct EdgeScores {
  int true_positive = 0;
  int false_positive = 0;
  double correlation = 0.0;  // Pearson over the concatenated boolean grids
};

// Measurement budget for the dual-space edge program: m_k k-space samples
// (the plan always includes the DC index — it anchors the image mean) and
// m_fd directly measured difference pairs.
struct EdgeBudget {
  int m_k = 1;
  int m_fd = 0;

  void validate(int n, int rank) const;  // 1 <= m_k <= n, 0 <= m_fd <= rank*n
};

// Marks every pair with |difference| >= g0, per axis.
EdgeMap extract_edges(const Image& img, double g0);

// 0/1 image of one axis' edge grid, for CSV output.
Image edge_grid_image(const EdgeMap& map, int axis);

// Single-space baseline: random DC-forced k-plan of size m, TV-form basis
// pursuit, threshold the reconstruction's differences. The solve's status is
// returned alongside: a stalled solve still yields its best iterate (with the
// measurement residual re-checked honestly inside the solver), so a hard
// instance produces a scored map plus a non-Optimal status instead of
// aborting a whole batch.
std::tuple<Image, EdgeMap, solver::SolverStatus> run_single_edge(
    const Image& truth, int m, double g0, std::uint64_t seed,
    const solver::SolverConfig& cfg = {});

// Dual-space edge program:
//   I   random DC-forced k-plan of size m_k, measured on the truth;
//   II  TV-form basis pursuit -> preliminary image;
//   III rank pixel pairs jointly across axes by preliminary |difference|
//       (ties: axis 0 before axis 1, then lowest index), measure the top
//       m_fd pairs on the truth via adjacent pixel reads, confirm a pair as
//       an edge iff |measured difference| >= g0;
//   IV  weighted-TV solve with every measured pair fixed as an equality and
//       zero objective weight on confirmed pairs -> final image; threshold
//       its differences.
// With m_fd == 0 this is bit-for-bit run_single_edge(truth, m_k, ...).
//
// Trace fields carry difference-space meanings: selected_idx holds global
// pair ids (axis * n + flat index) in rank order, x_values the measured
// differences, t the confirmed count, s_T the truth edge count minus the
// truth edges among the selected pairs, alpha_x their ratio to m_fd. Solve
// statuses land in the trace (intermediate_status / final_status); like the
// single-space run, a non-Optimal solve still contributes its best iterate.
std::tuple<Image, EdgeMap, pipeline::ProgramTrace> run_dual_edge(
    const Image& truth, const EdgeBudget& budget, double g0, std::uint64_t seed,
    const solver::SolverConfig& cfg = {});

// True/false positives of `detected` against `truth_edges`, plus the Pearson
// correlation of the concatenated flattened grids. A constant pair of maps
// correlates 1 when equal and 0 otherwise; one constant map against a
// non-constant one scores 0.
EdgeScores edge_scores(const EdgeMap& detected, const EdgeMap& truth_edges);

}  // namespace dualcs::edges
