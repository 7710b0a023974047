#include "dualcs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "dualcs/sampling.hpp"

namespace dualcs::pipeline {

using json = nlohmann::ordered_json;

void DualPlanSpec::validate(int n) const {
  if (m_k < 1) throw std::invalid_argument("DualPlanSpec: m_k must be >= 1");
  if (m_x < 0) throw std::invalid_argument("DualPlanSpec: m_x must be >= 0");
  if (m_k + m_x > n)
    throw std::invalid_argument("DualPlanSpec: m_k + m_x exceeds image size");
  if (accept_threshold < 0)
    throw std::invalid_argument("DualPlanSpec: accept_threshold must be >= 0");
}

namespace {

solver::SolverResult reconstruct_from_k(const Image& truth,
                                        const sampling::SamplingPlan& plan,
                                        const solver::SolverConfig& cfg) {
  const sampling::MeasurementSet meas = sampling::measure(truth, plan);
  const sampling::DenseOperator op = sampling::build_operator(plan, truth.shape);
  auto [a_real, b_real] = solver::to_real_system(op.entries, meas.values);
  solver::L1Problem prob;
  prob.a = std::move(a_real);
  prob.b = std::move(b_real);
  return solver::solve_bp(prob, cfg);
}

int exact_support_size(const Image& img) {
  int s = 0;
  for (Eigen::Index i = 0; i < img.data.size(); ++i)
    if (img.data(i) != 0.0) ++s;
  return s;
}

}  // namespace

std::pair<Image, solver::SolverResult> run_single_cs(const Image& truth, int m,
                                                     std::uint64_t seed,
                                                     const solver::SolverConfig& cfg) {
  truth.validate();
  if (m < 1 || m > truth.size())
    throw std::invalid_argument("run_single_cs: need 1 <= m <= n");
  const sampling::SamplingPlan plan =
      sampling::random_plan(sampling::Space::KSpace, truth.size(), m, seed);
  const solver::SolverResult res = reconstruct_from_k(truth, plan, cfg);
  Image out;
  out.shape = truth.shape;
  out.data = res.solution;
  return {std::move(out), res};
}

std::vector<int> select_peaks(const Image& intermediate, int m_x) {
  intermediate.validate();
  if (m_x < 0 || m_x > intermediate.size())
    throw std::invalid_argument("select_peaks: need 0 <= m_x <= n");
  std::vector<int> order(static_cast<size_t>(intermediate.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(intermediate.data(a));
    const double mb = std::abs(intermediate.data(b));
    if (ma != mb) return ma > mb;
    return a < b;
  });
  order.resize(static_cast<size_t>(m_x));
  return order;
}

std::pair<Image, ProgramTrace> run_dual_cs(const Image& truth, const DualPlanSpec& spec,
                                           const solver::SolverConfig& cfg) {
  truth.validate();
  spec.validate(truth.size());

  ProgramTrace trace;
  const int s = exact_support_size(truth);

  // Steps I + II.
  const sampling::SamplingPlan k_plan =
      sampling::random_plan(sampling::Space::KSpace, truth.size(), spec.m_k, spec.seed);
  const solver::SolverResult inter = reconstruct_from_k(truth, k_plan, cfg);
  trace.intermediate.shape = truth.shape;
  trace.intermediate.data = inter.solution;
  trace.intermediate_status = inter.status;
  trace.intermediate_iterations = inter.iterations;

  if (spec.m_x == 0) {
    // Degenerate program: no direct sampling, the intermediate is final.
    trace.final = trace.intermediate;
    trace.final_status = inter.status;
    trace.final_iterations = inter.iterations;
    trace.t = 0;
    trace.s_T = s;
    trace.alpha_x = 0.0;
    return {trace.final, trace};
  }

  // Step III: sample the top peaks directly on the target image.
  trace.selected_idx = select_peaks(trace.intermediate, spec.m_x);
  sampling::SamplingPlan x_plan;
  x_plan.space = sampling::Space::XSpace;
  x_plan.n = truth.size();
  x_plan.indices = trace.selected_idx;
  trace.x_values = sampling::measure(truth, x_plan).real_values();

  int accepted = 0;
  int true_peaks = 0;
  for (size_t i = 0; i < trace.selected_idx.size(); ++i) {
    if (std::abs(trace.x_values(static_cast<Eigen::Index>(i))) > spec.accept_threshold)
      ++accepted;
    if (truth.data(trace.selected_idx[i]) != 0.0) ++true_peaks;
  }
  trace.t = accepted;
  trace.s_T = s - true_peaks;
  trace.alpha_x = static_cast<double>(true_peaks) / spec.m_x;

  // Step IV: re-solve with every sampled pixel fixed to its measured value.
  const sampling::MeasurementSet k_meas = sampling::measure(truth, k_plan);
  const sampling::DenseOperator op = sampling::build_operator(k_plan, truth.shape);
  auto [a_real, b_real] = solver::to_real_system(op.entries, k_meas.values);
  solver::L1Problem prob;
  prob.a = std::move(a_real);
  prob.b = std::move(b_real);
  const solver::SolverResult fin =
      solver::solve_truncated_bp(prob, trace.selected_idx, trace.x_values, cfg);
  trace.final.shape = truth.shape;
  trace.final.data = fin.solution;
  trace.final_status = fin.status;
  trace.final_iterations = fin.iterations;
  return {trace.final, trace};
}

double min_measurements_dual(double s, double alpha_x, double m_x, double n, double c) {
  if (alpha_x < 0.0 || alpha_x > 1.0)
    throw std::invalid_argument("min_measurements_dual: need 0 <= alpha_x <= 1");
  if (m_x < 0.0) throw std::invalid_argument("min_measurements_dual: need m_x >= 0");
  if (n < 1.0) throw std::invalid_argument("min_measurements_dual: need n >= 1");
  const double effective = s - alpha_x * m_x;
  if (effective <= 0.0) return m_x;
  return c * effective * std::log(n) + m_x;
}

bool advantage_condition(double alpha_x, double s, double m_star) {
  if (m_star <= 0.0) throw std::invalid_argument("advantage_condition: need m_star > 0");
  return alpha_x > s / m_star;
}

namespace {

json image_to_json(const Image& img) {
  json j;
  j["shape"] = img.shape;
  j["data"] = std::vector<double>(img.data.begin(), img.data.end());
  return j;
}

}  // namespace

std::string trace_to_json(const ProgramTrace& trace) {
  json j;
  j["intermediate"] = image_to_json(trace.intermediate);
  j["selected_idx"] = trace.selected_idx;
  j["x_values"] = std::vector<double>(trace.x_values.begin(), trace.x_values.end());
  j["t"] = trace.t;
  j["s_T"] = trace.s_T;
  j["alpha_x"] = trace.alpha_x;
  j["final"] = image_to_json(trace.final);
  j["intermediate_status"] = lp::to_string(trace.intermediate_status);
  j["final_status"] = lp::to_string(trace.final_status);
  j["intermediate_iterations"] = trace.intermediate_iterations;
  j["final_iterations"] = trace.final_iterations;
  return j.dump();
}

}  // namespace dualcs::pipeline
