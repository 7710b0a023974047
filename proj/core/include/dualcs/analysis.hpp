#pragma once

// Metrics, seeded Monte-Carlo batches, phase-transition extraction, and the
// scaling/bound formulas used to price measurement budgets.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dualcs/image.hpp"

namespace dualcs::analysis {

// Normalized inner product <a,b>/(|a||b|). Both zero -> 1; exactly one
// zero -> 0. Symmetric, invariant under common positive rescaling.
double fidelity(const Image& a, const Image& b);

// Pearson correlation of the flattened images. Throws std::domain_error on
// constant input (undefined normalization).
double correlation(const Image& a, const Image& b);

// The working definition of "exact" recovery behind P[F=1]: fidelity at
// least 1 - fidelity_tol AND identical support after clipping entries with
// |x| < zero_clip.
bool exact_recovery(const Image& truth, const Image& recon, double zero_clip = 1e-6,
                    double fidelity_tol = 1e-6);

struct TrialParams {
  int n = 0;
  int s = 0;
  int m_k = 0;
  int m_x = 0;
  double sigma = 0.0;
};

struct TrialRecord {
  int index = 0;
  std::uint64_t seed = 0;
  TrialParams params;
  double fidelity = 0.0;
  std::optional<double> correlation;  // absent when undefined (constant input)
  bool exact = false;
  double alpha_x = 0.0;
  bool failed = false;
  std::string failure;  // what() of the escaping exception, if any
  // Extra experiment-specific columns: (key, raw JSON value) pairs appended
  // verbatim to the serialized line, e.g. {"arm", "\"dual\""}.
  std::vector<std::pair<std::string, std::string>> extras;
  double wall_ms = 0.0;  // in-memory only; never serialized (reruns stay byte-identical)
};

struct TrialBatch {
  std::string experiment_id;
  std::vector<TrialRecord> trials;
};

// One JSON object (single line, no trailing newline) for a trial. Field
// order is fixed; wall_ms is deliberately excluded.
std::string trial_to_json(const TrialRecord& rec);

// Runs num_trials independent trials with child seeds derived from
// master_seed by trial index. `fn` must be pure given (seed, index); it may
// be called from several threads when workers > 1. Results are slotted by
// index, so the batch is identical for any worker count. Exceptions from
// `fn` are captured per trial (failed/failure), and index/seed fields are
// filled in by the runner.
using TrialFn = std::function<TrialRecord(std::uint64_t seed, int index)>;
TrialBatch run_batch(const std::string& experiment_id, int num_trials,
                     std::uint64_t master_seed, const TrialFn& fn, int workers = 1);

struct PhasePoint {
  int s = 0;
  int m_x = 0;
  double alpha_m_x = 0.0;  // realized alpha_x * m_x for the ensemble
  int m_k_star = -1;       // -1 when the target was never reached on the grid
  double probability_target = 0.8;
};

struct PhaseGridEntry {
  int m_k = 0;
  double p_exact = 0.0;
  double std_err = 0.0;  // binomial, normal approximation
  int trials = 0;        // trials entering p_exact (post-selected when enabled)
  int raw_trials = 0;    // trials drawn to obtain them
};

struct PhaseCurve {
  PhasePoint point;
  bool reached = false;
  std::vector<PhaseGridEntry> curve;  // ascending m_k
};

struct PhaseOptions {
  int trials_per_point = 200;
  double target = 0.8;
  // When >= 0, only trials whose dual trace realized exactly this many true
  // peaks (s - s_T) enter the statistics; raw draws continue until
  // trials_per_point are accepted or the raw cap is hit.
  int post_select_found = -1;
  int max_raw_factor = 20;  // raw cap = factor * trials_per_point
  // Stop scanning the grid after the first crossing (m_k_star is found; the
  // rest of the curve is not needed).
  bool early_stop = false;
  // Stop sampling a grid point once at least 50 accepted trials put the
  // estimate conclusively below target (p + 3*se < target). Saves deep
  // sub-transition points; the recorded std_err stays honest.
  bool futility_stop = true;
  int workers = 1;
};

// Empirical exact-recovery probability versus m_k for the dual program on
// random s-sparse images of size n. m_k_star is the smallest grid value
// whose estimate reaches the target. alpha_m_x in the returned point is the
// post-selection target when enabled, otherwise the mean realized value at
// m_k_star (or at the last grid point when unreached). s == 0 short-circuits
// to m_k_star = 0 with an empty curve.
PhaseCurve phase_transition(int n, int s, int m_x, const std::vector<int>& m_k_grid,
                            std::uint64_t master_seed, const PhaseOptions& opt = {});

struct ScalingFit {
  double c = 0.0;
  double r_squared = 0.0;
};

// Least-squares fit of m_k_star = C * (s - alpha_x m_x) * ln(n) through the
// origin; r_squared is computed about the mean of m_k_star. Requires at
// least 4 points with at least two distinct regressor values.
ScalingFit fit_scaling(const std::vector<PhasePoint>& points, int n);

// Sparsity bound c0*(m_k - m_x)/(1 + ln((n - m_x)/(m_k - m_x))) + alpha_x*m_x.
double s_bound(double m_k, double m_x, double n, double c0, double alpha_x);

// Mean absolute truth intensity over all pixels (or over sampled_idx when
// given) divided by sigma.
double snr_report(const Image& truth, const Image& noisy,
                  const std::optional<std::vector<int>>& sampled_idx, double sigma);

}  // namespace dualcs::analysis
