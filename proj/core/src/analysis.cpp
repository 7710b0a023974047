#include "dualcs/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dualcs/pipeline.hpp"
#include "dualcs/rng.hpp"
#include "dualcs/signals.hpp"

namespace dualcs::analysis {

using json = nlohmann::ordered_json;

double fidelity(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("fidelity: shape mismatch");
  const double na = a.data.norm();
  const double nb = b.data.norm();
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.data.dot(b.data) / (na * nb);
}

double correlation(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("correlation: shape mismatch");
  const Eigen::VectorXd ac = a.data.array() - a.data.mean();
  const Eigen::VectorXd bc = b.data.array() - b.data.mean();
  const double na = ac.norm();
  const double nb = bc.norm();
  if (na == 0.0 || nb == 0.0)
    throw std::domain_error("correlation: undefined for constant input");
  return ac.dot(bc) / (na * nb);
}

bool exact_recovery(const Image& truth, const Image& recon, double zero_clip,
                    double fidelity_tol) {
  if (fidelity(truth, recon) < 1.0 - fidelity_tol) return false;
  if (truth.data.size() != recon.data.size()) return false;
  for (Eigen::Index i = 0; i < truth.data.size(); ++i) {
    const bool in_truth = std::abs(truth.data(i)) >= zero_clip;
    const bool in_recon = std::abs(recon.data(i)) >= zero_clip;
    if (in_truth != in_recon) return false;
  }
  return true;
}

std::string trial_to_json(const TrialRecord& rec) {
  json j;
  j["index"] = rec.index;
  j["seed"] = rec.seed;
  json p;
  p["n"] = rec.params.n;
  p["s"] = rec.params.s;
  p["m_k"] = rec.params.m_k;
  p["m_x"] = rec.params.m_x;
  p["sigma"] = rec.params.sigma;
  j["params"] = p;
  j["fidelity"] = rec.fidelity;
  if (rec.correlation.has_value())
    j["correlation"] = *rec.correlation;
  else
    j["correlation"] = nullptr;
  j["exact"] = rec.exact;
  j["alpha_x"] = rec.alpha_x;
  j["failed"] = rec.failed;
  if (rec.failed) j["failure"] = rec.failure;
  std::string line = j.dump();
  if (!rec.extras.empty()) {
    // Splice extra key/value pairs before the closing brace.
    line.pop_back();
    for (const auto& [key, raw] : rec.extras) line += ",\"" + key + "\":" + raw;
    line += "}";
  }
  return line;
}

TrialBatch run_batch(const std::string& experiment_id, int num_trials,
                     std::uint64_t master_seed, const TrialFn& fn, int workers) {
  if (num_trials < 0) throw std::invalid_argument("run_batch: num_trials must be >= 0");
  if (!fn) throw std::invalid_argument("run_batch: missing trial function");
  TrialBatch batch;
  batch.experiment_id = experiment_id;
  batch.trials.resize(static_cast<size_t>(num_trials));

  const auto work = [&](int i) {
    const std::uint64_t seed = rng::child_seed(master_seed, static_cast<std::uint64_t>(i));
    TrialRecord& rec = batch.trials[static_cast<size_t>(i)];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec = fn(seed, i);
    } catch (const std::exception& e) {
      rec = TrialRecord{};
      rec.failed = true;
      rec.failure = e.what();
    }
    rec.index = i;
    rec.seed = seed;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  };

  const int threads = std::max(1, workers);
  if (threads == 1 || num_trials <= 1) {
    for (int i = 0; i < num_trials; ++i) work(i);
    return batch;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(std::min(threads, num_trials)));
  for (int w = 0; w < std::min(threads, num_trials); ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < num_trials; i = next.fetch_add(1)) work(i);
    });
  }
  for (auto& th : pool) th.join();
  return batch;
}

namespace {

struct PointStats {
  int accepted = 0;
  int exact = 0;
  int raw = 0;
  long long found_sum = 0;  // realized true-peak count over accepted trials
};

struct PointTrialOutcome {
  bool accepted = false;
  bool exact = false;
  int found = 0;
};

PointTrialOutcome run_point_trial(int n, int s, int m_x, int m_k, int post_select_found,
                                  std::uint64_t seed) {
  signals::SparseSpec sig;
  sig.n = n;
  sig.s = s;
  sig.seed = rng::child_seed(seed, 1);
  const Image truth = signals::gen_sparse_image(sig);

  pipeline::DualPlanSpec plan;
  plan.m_k = m_k;
  plan.m_x = m_x;
  plan.seed = rng::child_seed(seed, 2);
  auto [recon, trace] = pipeline::run_dual_cs(truth, plan);

  PointTrialOutcome out;
  out.found = s - trace.s_T;
  out.accepted = post_select_found < 0 || out.found == post_select_found;
  out.exact = out.accepted && exact_recovery(truth, recon);
  return out;
}

}  // namespace

PhaseCurve phase_transition(int n, int s, int m_x, const std::vector<int>& m_k_grid,
                            std::uint64_t master_seed, const PhaseOptions& opt) {
  if (n <= 0) throw std::invalid_argument("phase_transition: n must be positive");
  if (s < 0 || s > n) throw std::invalid_argument("phase_transition: need 0 <= s <= n");
  if (m_x < 0) throw std::invalid_argument("phase_transition: m_x must be >= 0");
  if (opt.target <= 0.0 || opt.target >= 1.0)
    throw std::invalid_argument("phase_transition: target must lie in (0,1)");
  if (opt.trials_per_point < 1)
    throw std::invalid_argument("phase_transition: trials_per_point must be >= 1");
  if (opt.max_raw_factor < 1)
    throw std::invalid_argument("phase_transition: max_raw_factor must be >= 1");
  if (opt.post_select_found > std::min(s, m_x))
    throw std::invalid_argument("phase_transition: post-selection target exceeds min(s, m_x)");

  PhaseCurve result;
  result.point.s = s;
  result.point.m_x = m_x;
  result.point.probability_target = opt.target;
  result.point.alpha_m_x =
      opt.post_select_found >= 0 ? static_cast<double>(opt.post_select_found) : 0.0;

  if (s == 0) {  // the empty image is always recovered exactly
    result.point.m_k_star = 0;
    result.reached = true;
    return result;
  }

  std::vector<int> grid = m_k_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty()) throw std::invalid_argument("phase_transition: empty m_k grid");
  for (int mk : grid)
    if (mk < 1 || mk + m_x > n)
      throw std::invalid_argument("phase_transition: grid m_k out of range");

  const int raw_cap = opt.max_raw_factor * opt.trials_per_point;
  double alpha_at_star = 0.0;
  double alpha_last = 0.0;

  for (size_t gi = 0; gi < grid.size(); ++gi) {
    const int m_k = grid[gi];
    const std::uint64_t point_master =
        rng::child_seed(master_seed, static_cast<std::uint64_t>(gi));
    PointStats stats;
    std::vector<PointTrialOutcome> outcomes;

    while (stats.accepted < opt.trials_per_point && stats.raw < raw_cap) {
      const int chunk = std::min(opt.trials_per_point, raw_cap - stats.raw);
      const int base = stats.raw;
      outcomes.assign(static_cast<size_t>(chunk), PointTrialOutcome{});

      const TrialBatch chunk_batch = run_batch(
          "phase_point", chunk, point_master,
          [&](std::uint64_t seed, int i) {
            // Raw index (base + i) keys the seed so chunking cannot change
            // any trial's randomness.
            (void)seed;
            const std::uint64_t trial_seed =
                rng::child_seed(point_master, static_cast<std::uint64_t>(base + i));
            outcomes[static_cast<size_t>(i)] =
                run_point_trial(n, s, m_x, m_k, opt.post_select_found, trial_seed);
            return TrialRecord{};
          },
          opt.workers);
      for (const auto& rec : chunk_batch.trials)
        if (rec.failed) throw std::runtime_error("phase_transition trial failed: " + rec.failure);

      for (int i = 0; i < chunk && stats.accepted < opt.trials_per_point; ++i) {
        const auto& o = outcomes[static_cast<size_t>(i)];
        ++stats.raw;
        if (!o.accepted) continue;
        ++stats.accepted;
        stats.found_sum += o.found;
        if (o.exact) ++stats.exact;
      }

      if (opt.futility_stop && stats.accepted >= 50) {
        const double p = static_cast<double>(stats.exact) / stats.accepted;
        const double se = std::sqrt(std::max(p * (1.0 - p), 0.0) / stats.accepted);
        if (p + 3.0 * se < opt.target) break;
      }
    }

    PhaseGridEntry entry;
    entry.m_k = m_k;
    entry.trials = stats.accepted;
    entry.raw_trials = stats.raw;
    entry.p_exact = stats.accepted > 0 ? static_cast<double>(stats.exact) / stats.accepted : 0.0;
    entry.std_err = stats.accepted > 0
                        ? std::sqrt(std::max(entry.p_exact * (1.0 - entry.p_exact), 0.0) /
                                    stats.accepted)
                        : 0.0;
    result.curve.push_back(entry);
    const double mean_found =
        stats.accepted > 0 ? static_cast<double>(stats.found_sum) / stats.accepted : 0.0;
    alpha_last = mean_found;

    if (!result.reached && stats.accepted > 0 && entry.p_exact >= opt.target) {
      result.reached = true;
      result.point.m_k_star = m_k;
      alpha_at_star = mean_found;
      if (opt.early_stop) break;
    }
  }

  if (opt.post_select_found < 0)
    result.point.alpha_m_x = result.reached ? alpha_at_star : alpha_last;
  return result;
}

ScalingFit fit_scaling(const std::vector<PhasePoint>& points, int n) {
  if (points.size() < 4)
    throw std::invalid_argument("fit_scaling: need at least 4 phase points");
  if (n < 2) throw std::invalid_argument("fit_scaling: need n >= 2");
  const double logn = std::log(static_cast<double>(n));
  std::vector<double> x, y;
  for (const auto& p : points) {
    if (p.m_k_star < 0)
      throw std::invalid_argument("fit_scaling: unreached phase point in input");
    x.push_back((p.s - p.alpha_m_x) * logn);
    y.push_back(static_cast<double>(p.m_k_star));
  }
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double xspread = *std::max_element(x.begin(), x.end()) -
                         *std::min_element(x.begin(), x.end());
  if (sxx <= 0.0 || xspread <= 1e-12)
    throw std::invalid_argument("fit_scaling: degenerate regressor (no spread)");
  ScalingFit fit;
  fit.c = sxy / sxx;
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    ss_res += (y[i] - fit.c * x[i]) * (y[i] - fit.c * x[i]);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double s_bound(double m_k, double m_x, double n, double c0, double alpha_x) {
  if (!(m_x >= 0.0) || !(m_k > m_x) || !(n > m_x))
    throw std::invalid_argument("s_bound: need m_k > m_x >= 0 and n > m_x");
  return c0 * (m_k - m_x) / (1.0 + std::log((n - m_x) / (m_k - m_x))) + alpha_x * m_x;
}

double snr_report(const Image& truth, const Image& noisy,
                  const std::optional<std::vector<int>>& sampled_idx, double sigma) {
  truth.validate();
  if (!truth.same_shape(noisy)) throw std::invalid_argument("snr_report: shape mismatch");
  if (sigma <= 0.0) throw std::invalid_argument("snr_report: sigma must be positive");
  if (!sampled_idx.has_value())
    return truth.data.cwiseAbs().mean() / sigma;
  const auto& idx = *sampled_idx;
  if (idx.empty()) throw std::invalid_argument("snr_report: empty sampled index set");
  double sum = 0.0;
  for (int i : idx) {
    if (i < 0 || i >= truth.size())
      throw std::invalid_argument("snr_report: sampled index out of range");
    sum += std::abs(truth.data(i));
  }
  return sum / (static_cast<double>(idx.size()) * sigma);
}

}  // namespace dualcs::analysis
