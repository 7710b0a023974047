#pragma once

// The four-step dual-space reconstruction program and its single-space
// baseline:
//   I   measure a random k-space plan of size m_k,
//   II  basis-pursuit reconstruct an intermediate image,
//   III pick the m_x largest-magnitude intermediate pixels and measure them
//       directly in x-space on the target image,
//   IV  re-solve with those pixels fixed (truncated basis pursuit).
// Plus the measurement-budget model that prices the dual program against
// the single-space baseline.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dualcs/bpsolver.hpp"
#include "dualcs/image.hpp"

namespace dualcs::pipeline {

struct DualPlanSpec {
  int m_k = 1;               // k-space samples (step I)
  int m_x = 0;               // direct pixel samples (step III)
  std::uint64_t seed = 0;    // drives the random k-plan
  enum class PeakPolicy { LargestMagnitude } peak_policy = PeakPolicy::LargestMagnitude;
  double accept_threshold = 1e-6;  // |pixel| above this counts as a non-zero

  void validate(int n) const;  // m_k >= 1, m_x >= 0, m_k + m_x <= n
};

struct ProgramTrace {
  Image intermediate;              // step II output
  std::vector<int> selected_idx;   // step III picks, magnitude-rank order
  Eigen::VectorXd x_values;        // direct measurements, aligned with selected_idx
  int t = 0;                       // accepted non-zero count (|value| > threshold)
  int s_T = 0;                     // residual sparsity: s minus true peaks captured
  double alpha_x = 0.0;            // (s - s_T)/m_x, or 0 when m_x == 0
  Image final;                     // step IV output
  solver::SolverStatus intermediate_status = solver::SolverStatus::NumericalFailure;
  solver::SolverStatus final_status = solver::SolverStatus::NumericalFailure;
  int intermediate_iterations = 0;
  int final_iterations = 0;
};

// Conventional single-space CS: random k-plan of size m, measure, basis
// pursuit. The reconstruction keeps the truth's shape.
std::pair<Image, solver::SolverResult> run_single_cs(const Image& truth, int m,
                                                     std::uint64_t seed,
                                                     const solver::SolverConfig& cfg = {});

// Indices of the m_x largest-magnitude pixels, ties broken by lowest index;
// returned in rank order (largest first).
std::vector<int> select_peaks(const Image& intermediate, int m_x);

// The full four-step program. Deterministic given (truth, spec, cfg); with
// m_x == 0 it degenerates to run_single_cs at the same seed, bit for bit.
// Residual sparsity uses the truth's exact non-zero support.
std::pair<Image, ProgramTrace> run_dual_cs(const Image& truth, const DualPlanSpec& spec,
                                           const solver::SolverConfig& cfg = {});

// Measurement-budget model: C * (s - alpha_x * m_x) * ln(n) + m_x, clamped
// to m_x when the effective sparsity would go negative.
double min_measurements_dual(double s, double alpha_x, double m_x, double n, double c);

// True iff direct pixel sampling outperforms k-space sampling per shot:
// alpha_x > alpha_k with alpha_k = s / m_star (strict).
bool advantage_condition(double alpha_x, double s, double m_star);

// JSON rendering of a trace (statuses as strings; no timing fields, so
// identical runs serialize identically).
std::string trace_to_json(const ProgramTrace& trace);

}  // namespace dualcs::pipeline
