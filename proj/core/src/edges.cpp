#include "dualcs/edges.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "dualcs/sampling.hpp"
#include "dualcs/signals.hpp"
#include "dualcs/wtv.hpp"

namespace dualcs::edges {

namespace {

// Random k-plan of size m that always contains the DC index: when the draw
// misses it, the smallest drawn index is replaced by 0 (indices come back
// sorted, so the plan stays sorted and distinct). Shared by the single- and
// dual-space runs so equal seeds give identical plans.
sampling::SamplingPlan dc_forced_plan(int n, int m, std::uint64_t seed) {
  sampling::SamplingPlan plan = sampling::random_plan(sampling::Space::KSpace, n, m, seed);
  if (!plan.contains(0)) plan.indices.front() = 0;
  return plan;
}

// TV-form basis pursuit from a k-space measurement set (unit weights, no
// fixed pairs). Returns the solver's best iterate with its status; callers
// record the status per arm so one hard instance does not abort a batch.
std::pair<Image, solver::SolverResult> tv_reconstruct(
    const sampling::MeasurementSet& k_meas, const std::vector<int>& shape,
    const solver::SolverConfig& cfg) {
  solver::SolverResult res = solver::solve_wtv(k_meas, {}, solver::WtvWeights{}, shape, cfg);
  Image img;
  img.shape = shape;
  img.data = res.solution;
  return {std::move(img), std::move(res)};
}

}  // namespace

const std::vector<std::uint8_t>& EdgeMap::along_axis(int axis) const {
  return const_cast<EdgeMap*>(this)->along_axis(axis);
}

std::vector<std::uint8_t>& EdgeMap::along_axis(int axis) {
  if (axis < 0 || axis >= rank()) throw std::invalid_argument("EdgeMap: axis out of range");
  if (rank() == 1) return horizontal;      // the single 1-D grid
  return axis == 0 ? vertical : horizontal;  // 2-D: axis 0 is the vertical direction
}

int EdgeMap::edge_count() const {
  const auto ones = [](const std::vector<std::uint8_t>& g) {
    return static_cast<int>(std::count(g.begin(), g.end(), std::uint8_t{1}));
  };
  return ones(horizontal) + ones(vertical);
}

void EdgeMap::validate() const {
  if (rank() != 1 && rank() != 2) throw std::invalid_argument("EdgeMap: rank must be 1 or 2");
  std::size_t n = 1;
  for (int extent : shape) {
    if (extent < 1) throw std::invalid_argument("EdgeMap: non-positive extent");
    n *= static_cast<std::size_t>(extent);
  }
  if (horizontal.size() != n)
    throw std::invalid_argument("EdgeMap: horizontal grid does not match shape");
  if (rank() == 1) {
    if (!vertical.empty())
      throw std::invalid_argument("EdgeMap: 1-D maps use a single grid");
  } else if (vertical.size() != n) {
    throw std::invalid_argument("EdgeMap: vertical grid does not match shape");
  }
  if (!(gradient_threshold > 0.0))
    throw std::invalid_argument("EdgeMap: threshold must be positive");
  const auto boolean = [](const std::vector<std::uint8_t>& g) {
    return std::all_of(g.begin(), g.end(), [](std::uint8_t v) { return v <= 1; });
  };
  if (!boolean(horizontal) || !boolean(vertical))
    throw std::invalid_argument("EdgeMap: grids must be 0/1");
}

void EdgeBudget::validate(int n, int rank) const {
  if (m_k < 1 || m_k > n) throw std::invalid_argument("EdgeBudget: need 1 <= m_k <= n");
  if (m_fd < 0 || m_fd > rank * n)
    throw std::invalid_argument("EdgeBudget: need 0 <= m_fd <= rank*n");
}

EdgeMap extract_edges(const Image& img, double g0) {
  img.validate();
  if (!(g0 > 0.0)) throw std::invalid_argument("extract_edges: threshold must be positive");
  EdgeMap map;
  map.shape = img.shape;
  map.gradient_threshold = g0;
  for (int axis = 0; axis < map.rank(); ++axis) {
    const Image fd = signals::fd_transform(img, axis);
    std::vector<std::uint8_t>& grid = map.along_axis(axis);
    grid.assign(static_cast<std::size_t>(img.size()), 0);
    for (Eigen::Index i = 0; i < fd.data.size(); ++i)
      grid[static_cast<std::size_t>(i)] = std::abs(fd.data(i)) >= g0 ? 1 : 0;
  }
  return map;
}

Image edge_grid_image(const EdgeMap& map, int axis) {
  map.validate();
  const std::vector<std::uint8_t>& grid = map.along_axis(axis);
  Image img = map.shape.size() == 2 ? Image::zeros(map.shape[0], map.shape[1])
                                    : Image::zeros(map.shape[0]);
  for (std::size_t i = 0; i < grid.size(); ++i)
    img.data(static_cast<Eigen::Index>(i)) = grid[i];
  return img;
}

std::tuple<Image, EdgeMap, solver::SolverStatus> run_single_edge(
    const Image& truth, int m, double g0, std::uint64_t seed,
    const solver::SolverConfig& cfg) {
  truth.validate();
  if (m < 1 || m > truth.size())
    throw std::invalid_argument("run_single_edge: need 1 <= m <= n");
  const sampling::SamplingPlan plan = dc_forced_plan(truth.size(), m, seed);
  const sampling::MeasurementSet k_meas = sampling::measure(truth, plan);
  auto [recon, res] = tv_reconstruct(k_meas, truth.shape, cfg);
  EdgeMap map = extract_edges(recon, g0);
  return {std::move(recon), std::move(map), res.status};
}

std::tuple<Image, EdgeMap, pipeline::ProgramTrace> run_dual_edge(
    const Image& truth, const EdgeBudget& budget, double g0, std::uint64_t seed,
    const solver::SolverConfig& cfg) {
  truth.validate();
  const int n = truth.size();
  const int rank = truth.rank();
  budget.validate(n, rank);
  if (!(g0 > 0.0)) throw std::invalid_argument("run_dual_edge: threshold must be positive");

  pipeline::ProgramTrace trace;
  const EdgeMap truth_edges = extract_edges(truth, g0);
  const int truth_edge_total = truth_edges.edge_count();

  // Steps I-II: measure the DC-forced plan, TV-reconstruct a preliminary.
  const sampling::SamplingPlan plan = dc_forced_plan(n, budget.m_k, seed);
  const sampling::MeasurementSet k_meas = sampling::measure(truth, plan);
  {
    auto [prelim, res] = tv_reconstruct(k_meas, truth.shape, cfg);
    trace.intermediate = std::move(prelim);
    trace.intermediate_status = res.status;
    trace.intermediate_iterations = res.iterations;
  }

  if (budget.m_fd == 0) {
    trace.final = trace.intermediate;
    trace.final_status = trace.intermediate_status;
    trace.final_iterations = trace.intermediate_iterations;
    trace.t = 0;
    trace.s_T = truth_edge_total;
    trace.alpha_x = 0.0;
    EdgeMap map = extract_edges(trace.final, g0);
    Image final_img = trace.final;
    return {std::move(final_img), std::move(map), std::move(trace)};
  }

  // Step III: rank pairs jointly across axes by preliminary |difference|.
  // Global pair id = axis * n + flat index; stable sort keeps axis 0 first
  // and lowest index first among ties.
  std::vector<double> magnitude(static_cast<std::size_t>(rank) * static_cast<std::size_t>(n));
  for (int axis = 0; axis < rank; ++axis) {
    const Image fd = signals::fd_transform(trace.intermediate, axis);
    for (Eigen::Index i = 0; i < fd.data.size(); ++i)
      magnitude[static_cast<std::size_t>(axis) * static_cast<std::size_t>(n) +
                static_cast<std::size_t>(i)] = std::abs(fd.data(i));
  }
  std::vector<int> order(magnitude.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return magnitude[static_cast<std::size_t>(a)] > magnitude[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(budget.m_fd));
  trace.selected_idx = order;

  // Measure the selected pairs on the truth, one plan per axis.
  std::vector<std::vector<int>> per_axis(static_cast<std::size_t>(rank));
  for (int id : order) per_axis[static_cast<std::size_t>(id / n)].push_back(id % n);
  std::vector<sampling::MeasurementSet> fd_meas;
  std::unordered_map<int, double> measured;  // global pair id -> value
  for (int axis = 0; axis < rank; ++axis) {
    std::vector<int>& idx = per_axis[static_cast<std::size_t>(axis)];
    if (idx.empty()) continue;
    std::sort(idx.begin(), idx.end());
    sampling::SamplingPlan fd_plan;
    fd_plan.space = sampling::Space::FDSpace;
    fd_plan.n = n;
    fd_plan.axis = axis;
    fd_plan.indices = idx;
    sampling::MeasurementSet meas = sampling::measure(truth, fd_plan);
    const Eigen::VectorXd vals = meas.real_values();
    for (std::size_t k = 0; k < idx.size(); ++k)
      measured[axis * n + idx[k]] = vals(static_cast<Eigen::Index>(k));
    fd_meas.push_back(std::move(meas));
  }
  trace.x_values.resize(budget.m_fd);
  for (std::size_t k = 0; k < order.size(); ++k)
    trace.x_values(static_cast<Eigen::Index>(k)) = measured.at(order[static_cast<std::size_t>(k)]);

  // Confirmed pairs lose their objective weight; every measured pair enters
  // the final solve as an equality.
  solver::WtvWeights weights;
  weights.axis0 = Eigen::VectorXd::Ones(n);
  if (rank == 2) weights.axis1 = Eigen::VectorXd::Ones(n);
  trace.t = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (std::abs(trace.x_values(static_cast<Eigen::Index>(k))) < g0) continue;
    ++trace.t;
    const int id = order[k];
    (id / n == 0 ? weights.axis0 : weights.axis1)(id % n) = 0.0;
  }

  // Residual edge sparsity against the truth's own edge set.
  int truth_edges_selected = 0;
  for (int id : order)
    if (truth_edges.along_axis(id / n)[static_cast<std::size_t>(id % n)]) ++truth_edges_selected;
  trace.s_T = truth_edge_total - truth_edges_selected;
  trace.alpha_x = static_cast<double>(truth_edges_selected) / static_cast<double>(budget.m_fd);

  // Step IV: weighted solve with the measured pairs pinned.
  solver::SolverResult res = solver::solve_wtv(k_meas, fd_meas, weights, truth.shape, cfg);
  if (res.status != solver::SolverStatus::Optimal)
    throw std::runtime_error(std::string("edge reconstruction solve ended with status ") +
                             lp::to_string(res.status));
  trace.final.shape = truth.shape;
  trace.final.data = res.solution;
  trace.final_status = res.status;
  trace.final_iterations = res.iterations;

  EdgeMap map = extract_edges(trace.final, g0);
  Image final_img = trace.final;
  return {std::move(final_img), std::move(map), std::move(trace)};
}

EdgeScores edge_scores(const EdgeMap& detected, const EdgeMap& truth_edges) {
  detected.validate();
  truth_edges.validate();
  if (detected.shape != truth_edges.shape)
    throw std::invalid_argument("edge_scores: shape mismatch");

  std::vector<std::uint8_t> d(detected.horizontal);
  d.insert(d.end(), detected.vertical.begin(), detected.vertical.end());
  std::vector<std::uint8_t> t(truth_edges.horizontal);
  t.insert(t.end(), truth_edges.vertical.begin(), truth_edges.vertical.end());

  EdgeScores scores;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] && t[i]) ++scores.true_positive;
    if (d[i] && !t[i]) ++scores.false_positive;
  }

  const double n = static_cast<double>(d.size());
  double sum_d = 0.0, sum_t = 0.0, sum_dt = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    sum_d += d[i];
    sum_t += t[i];
    sum_dt += static_cast<double>(d[i]) * static_cast<double>(t[i]);
  }
  const double var_d = sum_d - sum_d * sum_d / n;
  const double var_t = sum_t - sum_t * sum_t / n;
  const bool const_d = var_d <= 0.0;
  const bool const_t = var_t <= 0.0;
  if (const_d && const_t) {
    scores.correlation = d == t ? 1.0 : 0.0;
  } else if (const_d || const_t) {
    scores.correlation = 0.0;
  } else {
    scores.correlation = (sum_dt - sum_d * sum_t / n) / std::sqrt(var_d * var_t);
  }
  return scores;
}

}  // namespace dualcs::edges
