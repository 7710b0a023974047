#include "dualcs/wtv.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace dualcs::solver {

namespace {

struct GridShape {
  bool two_d = false;
  int rows = 0;
  int cols = 0;
  int n = 0;
};

GridShape parse_shape(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 2)
    throw std::invalid_argument("solve_wtv: shape rank must be 1 or 2");
  for (int d : shape)
    if (d <= 0) throw std::invalid_argument("solve_wtv: shape dims must be positive");
  GridShape g;
  g.two_d = shape.size() == 2;
  g.rows = shape[0];
  g.cols = g.two_d ? shape[1] : 1;
  g.n = g.rows * g.cols;
  return g;
}

}  // namespace

Eigen::SparseMatrix<double, Eigen::RowMajor> gradient_field_constraints(
    const std::vector<int>& shape) {
  const GridShape g = parse_shape(shape);
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::SparseMatrix<double, Eigen::RowMajor> mat;
  if (!g.two_d) {
    mat.resize(1, g.n);
    for (int j = 0; j < g.n; ++j) trips.emplace_back(0, j, 1.0);
    mat.setFromTriplets(trips.begin(), trips.end());
    return mat;
  }
  const int r = g.rows;
  const int c = g.cols;
  const int n = g.n;
  mat.resize(n + 1, 2 * n);
  int row = 0;
  // Discrete curl: d1(i+1,j) - d1(i,j) = d0(i,j+1) - d0(i,j) (circular in j).
  for (int i = 0; i + 1 < r; ++i) {
    for (int j = 0; j < c; ++j) {
      trips.emplace_back(row, n + (i + 1) * c + j, 1.0);
      trips.emplace_back(row, n + i * c + j, -1.0);
      trips.emplace_back(row, i * c + (j + 1) % c, -1.0);
      trips.emplace_back(row, i * c + j, 1.0);
      ++row;
    }
  }
  // Column sums of the axis-0 differences telescope to zero circularly.
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) trips.emplace_back(row, i * c + j, 1.0);
    ++row;
  }
  // Row-0 sum of the axis-1 differences.
  for (int j = 0; j < c; ++j) trips.emplace_back(row, n + j, 1.0);
  ++row;
  mat.setFromTriplets(trips.begin(), trips.end());
  return mat;
}

Image image_from_gradient(const Eigen::VectorXd& d0, const Eigen::VectorXd& d1,
                          const std::vector<int>& shape, double anchor) {
  const GridShape g = parse_shape(shape);
  if (d0.size() != g.n) throw std::invalid_argument("image_from_gradient: d0 length mismatch");
  Image img;
  img.shape = shape;
  img.data.resize(g.n);
  if (!g.two_d) {
    img.data(0) = anchor;
    for (int j = 1; j < g.n; ++j) img.data(j) = img.data(j - 1) + d0(j - 1);
    return img;
  }
  if (d1.size() != g.n) throw std::invalid_argument("image_from_gradient: d1 length mismatch");
  const int c = g.cols;
  img.data(0) = anchor;
  for (int j = 1; j < c; ++j) img.data(j) = img.data(j - 1) + d1(j - 1);
  for (int i = 1; i < g.rows; ++i)
    for (int j = 0; j < c; ++j)
      img.data(i * c + j) = img.data((i - 1) * c + j) + d0((i - 1) * c + j);
  return img;
}

namespace {

// Dense complex k-space rows rewritten over the FD variables. For a k-row f
// over pixels, substituting the path-integral form of each pixel gives
//   coeff(d0(k,j)) = sum_{i>k} f(i,j)
//   coeff(d1(0,l)) = sum_{j>l} colsum_f(j),
// with the mean term dropping out because non-DC harmonic rows sum to zero.
void append_k_rows(const sampling::MeasurementSet& k_meas, const GridShape& g,
                   const std::vector<int>& shape, Eigen::MatrixXcd& rows_out,
                   Eigen::VectorXcd& rhs_out) {
  std::vector<int> non_dc;
  std::vector<std::complex<double>> vals;
  for (int i = 0; i < k_meas.plan.count(); ++i) {
    if (k_meas.plan.indices[static_cast<size_t>(i)] == 0) continue;
    non_dc.push_back(k_meas.plan.indices[static_cast<size_t>(i)]);
    vals.push_back(k_meas.values(i));
  }
  const int width = g.two_d ? 2 * g.n : g.n;
  rows_out.resize(static_cast<Eigen::Index>(non_dc.size()), width);
  rhs_out.resize(static_cast<Eigen::Index>(non_dc.size()));
  if (non_dc.empty()) return;

  sampling::SamplingPlan sub;
  sub.space = sampling::Space::KSpace;
  sub.n = g.n;
  sub.indices = non_dc;
  const sampling::DenseOperator op = sampling::build_operator(sub, shape);

  for (Eigen::Index r = 0; r < rows_out.rows(); ++r) {
    rhs_out(r) = vals[static_cast<size_t>(r)];
    if (!g.two_d) {
      // Suffix sums over the pixel row.
      std::complex<double> suffix(0.0, 0.0);
      rows_out(r, g.n - 1) = 0.0;
      for (int l = g.n - 2; l >= 0; --l) {
        suffix += op.entries(r, l + 1);
        rows_out(r, l) = suffix;
      }
      continue;
    }
    rows_out.row(r).setZero();
    // Axis-0 differences: suffix sums down each column.
    for (int j = 0; j < g.cols; ++j) {
      std::complex<double> suffix(0.0, 0.0);
      for (int i = g.rows - 2; i >= 0; --i) {
        suffix += op.entries(r, static_cast<Eigen::Index>(i + 1) * g.cols + j);
        rows_out(r, i * g.cols + j) = suffix;
      }
    }
    // Axis-1 differences in pixel row 0: suffix sums of column totals.
    Eigen::VectorXcd colsum = Eigen::VectorXcd::Zero(g.cols);
    for (int i = 0; i < g.rows; ++i)
      for (int j = 0; j < g.cols; ++j)
        colsum(j) += op.entries(r, static_cast<Eigen::Index>(i) * g.cols + j);
    std::complex<double> suffix(0.0, 0.0);
    for (int l = g.cols - 2; l >= 0; --l) {
      suffix += colsum(l + 1);
      rows_out(r, g.n + l) = suffix;
    }
  }
}

}  // namespace

SolverResult solve_wtv(const sampling::MeasurementSet& k_meas,
                       const std::vector<sampling::MeasurementSet>& fd_meas,
                       const WtvWeights& weights, const std::vector<int>& shape,
                       const SolverConfig& cfg) {
  cfg.validate();
  k_meas.validate();
  const GridShape g = parse_shape(shape);
  if (k_meas.plan.space != sampling::Space::KSpace)
    throw std::invalid_argument("solve_wtv: first measurement set must be k-space");
  if (k_meas.plan.n != g.n)
    throw std::invalid_argument("solve_wtv: k-plan size does not match shape");
  if (!k_meas.plan.contains(0))
    throw std::invalid_argument(
        "solve_wtv: k-space plan must include the DC index (image mean is otherwise "
        "under-determined)");

  const int num_vars = g.two_d ? 2 * g.n : g.n;

  // Known FD values from direct pair measurements, keyed by variable index.
  std::vector<double> known_val(static_cast<size_t>(num_vars), 0.0);
  std::vector<char> is_known(static_cast<size_t>(num_vars), 0);
  for (const auto& ms : fd_meas) {
    ms.validate();
    if (ms.plan.space != sampling::Space::FDSpace)
      throw std::invalid_argument("solve_wtv: fd_meas entries must be FD-space sets");
    if (ms.plan.n != g.n)
      throw std::invalid_argument("solve_wtv: fd plan size does not match shape");
    if (ms.plan.axis >= (g.two_d ? 2 : 1))
      throw std::invalid_argument("solve_wtv: fd plan axis exceeds shape rank");
    const int offset = ms.plan.axis == 0 ? 0 : g.n;
    const Eigen::VectorXd vals = ms.real_values();
    for (int i = 0; i < ms.plan.count(); ++i) {
      const int var = offset + ms.plan.indices[static_cast<size_t>(i)];
      if (is_known[static_cast<size_t>(var)])
        throw std::invalid_argument("solve_wtv: duplicate FD measurement for one pair");
      is_known[static_cast<size_t>(var)] = 1;
      known_val[static_cast<size_t>(var)] = vals(i);
    }
  }

  // Objective weights per variable.
  Eigen::VectorXd w_full(num_vars);
  const auto fill_axis = [&](const Eigen::VectorXd& w, int offset, const char* tag) {
    if (w.size() == 0) {
      w_full.segment(offset, g.n).setOnes();
      return;
    }
    if (w.size() != g.n)
      throw std::invalid_argument(std::string("solve_wtv: ") + tag + " weight length mismatch");
    if (!w.allFinite() || (w.array() < 0.0).any())
      throw std::invalid_argument(std::string("solve_wtv: ") + tag +
                                  " weights must be finite and >= 0");
    w_full.segment(offset, g.n) = w;
  };
  fill_axis(weights.axis0, 0, "axis0");
  if (g.two_d) {
    fill_axis(weights.axis1, g.n, "axis1");
  } else if (weights.axis1.size() != 0) {
    throw std::invalid_argument("solve_wtv: axis1 weights given for a 1-D shape");
  }

  // Full constraint system over all FD variables.
  const Eigen::SparseMatrix<double, Eigen::RowMajor> consistency =
      gradient_field_constraints(shape);
  Eigen::MatrixXcd k_rows;
  Eigen::VectorXcd k_rhs;
  append_k_rows(k_meas, g, shape, k_rows, k_rhs);
  auto [k_real, k_real_rhs] = k_rows.rows() > 0
                                  ? to_real_system(k_rows, k_rhs)
                                  : std::pair<Eigen::MatrixXd, Eigen::VectorXd>(
                                        Eigen::MatrixXd(0, num_vars), Eigen::VectorXd(0));

  // Eliminate measured variables: adjust rhs, keep free columns.
  std::vector<int> free_idx;
  free_idx.reserve(static_cast<size_t>(num_vars));
  std::vector<int> remap(static_cast<size_t>(num_vars), -1);
  for (int v = 0; v < num_vars; ++v) {
    if (!is_known[static_cast<size_t>(v)]) {
      remap[static_cast<size_t>(v)] = static_cast<int>(free_idx.size());
      free_idx.push_back(v);
    }
  }
  const Eigen::Index num_free = static_cast<Eigen::Index>(free_idx.size());

  lp::Constraints con;
  con.sparse.resize(consistency.rows(), num_free);
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(consistency.nonZeros()));
    Eigen::VectorXd adj = Eigen::VectorXd::Zero(consistency.rows());
    for (Eigen::Index i = 0; i < consistency.rows(); ++i) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(consistency, i); it;
           ++it) {
        const int v = static_cast<int>(it.col());
        if (is_known[static_cast<size_t>(v)])
          adj(i) += it.value() * known_val[static_cast<size_t>(v)];
        else
          trips.emplace_back(i, remap[static_cast<size_t>(v)], it.value());
      }
    }
    con.sparse.setFromTriplets(trips.begin(), trips.end());
    con.rhs.resize(consistency.rows() + k_real.rows());
    con.rhs.head(consistency.rows()) = -adj;  // consistency rows have rhs 0
  }
  con.dense.resize(k_real.rows(), num_free);
  for (Eigen::Index j = 0; j < num_free; ++j) con.dense.col(j) = k_real.col(free_idx[j]);
  Eigen::VectorXd k_adj = k_real_rhs;
  for (int v = 0; v < num_vars; ++v)
    if (is_known[static_cast<size_t>(v)])
      k_adj -= k_real.col(v) * known_val[static_cast<size_t>(v)];
  con.rhs.tail(k_real.rows()) = k_adj;

  Eigen::VectorXd w_free(num_free);
  for (Eigen::Index j = 0; j < num_free; ++j) w_free(j) = w_full(free_idx[j]);

  // Row equilibration: scale every constraint row to unit max-norm.  The
  // suffix-summed measurement rows otherwise differ from the stencil rows by
  // orders of magnitude, which is what limits the accuracy of the normal
  // equations late in the solve.  The solution is invariant; the duality
  // certificate below runs in the scaled system, which is self-consistent.
  for (Eigen::Index i = 0; i < con.sparse.rows(); ++i) {
    double mx = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(con.sparse, i); it; ++it)
      mx = std::max(mx, std::abs(it.value()));
    if (mx <= 0.0) continue;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(con.sparse, i); it; ++it)
      it.valueRef() /= mx;
    con.rhs(i) /= mx;
  }
  for (Eigen::Index i = 0; i < con.dense.rows(); ++i) {
    const double mx = con.dense.row(i).cwiseAbs().maxCoeff();
    if (mx <= 0.0) continue;
    con.dense.row(i) /= mx;
    con.rhs(con.sparse.rows() + i) /= mx;
  }

  lp::Options opt{cfg.feas_tol, cfg.opt_tol, cfg.max_iters};
  const lp::L1Result lr = lp::solve_weighted_l1(con, w_free, opt);

  SolverResult res;
  res.status = lr.status;
  res.iterations = lr.iterations;
  res.objective = lr.objective;

  // Re-assemble the full FD field and integrate it back to an image.
  Eigen::VectorXd d_full(num_vars);
  for (int v = 0; v < num_vars; ++v)
    d_full(v) = is_known[static_cast<size_t>(v)] ? known_val[static_cast<size_t>(v)]
                                                 : lr.x(remap[static_cast<size_t>(v)]);
  const Eigen::VectorXd d0 = d_full.head(g.n);
  const Eigen::VectorXd d1 = g.two_d ? Eigen::VectorXd(d_full.tail(g.n)) : Eigen::VectorXd();
  Image img0 = image_from_gradient(d0, d1, shape, 0.0);

  // DC anchor: mean pinned by the k=0 measurement (an exactly-real row).
  std::complex<double> dc(0.0, 0.0);
  for (int i = 0; i < k_meas.plan.count(); ++i)
    if (k_meas.plan.indices[static_cast<size_t>(i)] == 0) dc = k_meas.values(i);
  if (std::abs(dc.imag()) > 1e-9 * (1.0 + std::abs(dc.real())))
    throw std::invalid_argument("solve_wtv: DC measurement of a real image must be real");
  const double anchor =
      (std::sqrt(static_cast<double>(g.n)) * dc.real() - img0.data.sum()) / g.n;
  img0.data.array() += anchor;

  // Honest residual: re-measure the reconstruction against every input.
  double resid = 0.0;
  const sampling::MeasurementSet k_check = sampling::measure(img0, k_meas.plan);
  for (Eigen::Index i = 0; i < k_check.values.size(); ++i) {
    const std::complex<double> diff = k_check.values(i) - k_meas.values(i);
    resid = std::max({resid, std::abs(diff.real()), std::abs(diff.imag())});
  }
  for (const auto& ms : fd_meas) {
    const sampling::MeasurementSet fd_check = sampling::measure(img0, ms.plan);
    for (Eigen::Index i = 0; i < fd_check.values.size(); ++i)
      resid = std::max(resid, std::abs((fd_check.values(i) - ms.values(i)).real()));
  }
  res.residual_inf = resid;
  res.solution = img0.data;

  if (res.status == SolverStatus::Optimal) {
    if (res.residual_inf > cfg.feas_tol) {
      res.status = SolverStatus::IterLimit;
    } else {
      // Weak-duality certificate on the reduced program.
      const Eigen::VectorXd aty = con.apply_adjoint(lr.y);
      const double scale = 1.0 + std::abs(res.objective);
      const bool dual_ok =
          ((aty.cwiseAbs() - w_free).array() <= cfg.opt_tol * scale).all() &&
          con.rhs.dot(lr.y) >= res.objective - cfg.opt_tol * scale;
      if (!dual_ok) res.status = SolverStatus::NumericalFailure;
    }
  }
  return res;
}

}  // namespace dualcs::solver
