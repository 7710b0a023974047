#include "dualcs/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "dualcs/rng.hpp"

namespace dualcs::sampling {

using json = nlohmann::ordered_json;

std::string to_string(Space s) {
  switch (s) {
    case Space::KSpace: return "k";
    case Space::XSpace: return "x";
    case Space::FDSpace: return "fd";
  }
  throw std::logic_error("unknown Space");
}

Space space_from_string(const std::string& s) {
  if (s == "k") return Space::KSpace;
  if (s == "x") return Space::XSpace;
  if (s == "fd") return Space::FDSpace;
  throw std::invalid_argument("unknown space tag: " + s);
}

bool SamplingPlan::contains(int idx) const {
  return std::find(indices.begin(), indices.end(), idx) != indices.end();
}

void SamplingPlan::validate() const {
  if (n <= 0) throw std::invalid_argument("SamplingPlan: n must be positive");
  if (axis < 0 || axis > 1) throw std::invalid_argument("SamplingPlan: axis must be 0 or 1");
  std::vector<int> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= n)
      throw std::invalid_argument("SamplingPlan: index out of range");
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw std::invalid_argument("SamplingPlan: duplicate index");
  }
}

void MeasurementSet::validate() const {
  plan.validate();
  if (values.size() != plan.count())
    throw std::invalid_argument("MeasurementSet: value count does not match plan");
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (!std::isfinite(values(i).real()) || !std::isfinite(values(i).imag()))
      throw std::invalid_argument("MeasurementSet: non-finite value");
}

Eigen::VectorXd MeasurementSet::real_values() const {
  validate();
  if (plan.space == Space::KSpace)
    throw std::invalid_argument("MeasurementSet: k-space values are complex");
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values(i).imag() != 0.0)
      throw std::invalid_argument("MeasurementSet: unexpected imaginary part");
  return values.real();
}

void DenseOperator::validate() const {
  for (Eigen::Index i = 0; i < entries.rows(); ++i)
    for (Eigen::Index j = 0; j < entries.cols(); ++j)
      if (!std::isfinite(entries(i, j).real()) || !std::isfinite(entries(i, j).imag()))
        throw std::invalid_argument("DenseOperator: non-finite entry");
}

namespace {

// e^(-2*pi*i * r/den), with exact values on the half-turn lattice: r≡0 → 1,
// 2r≡den → −1. Library sin() at those angles returns ~1e-16 instead of 0,
// which would leave the DC and Nyquist harmonics with spurious imaginary
// parts; snapping keeps those rows exactly real so downstream real/complex
// row splitting can rely on exact zeros.
inline std::complex<double> unit_twiddle(long long r, long long den) {
  r %= den;
  if (r < 0) r += den;
  if (r == 0) return {1.0, 0.0};
  if (2 * r == den) return {-1.0, 0.0};
  const double angle =
      -2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(den);
  return {std::cos(angle), std::sin(angle)};
}

}  // namespace

Eigen::MatrixXcd dft_matrix(int n) {
  if (n <= 0) throw std::invalid_argument("dft_matrix: n must be positive");
  Eigen::MatrixXcd f(n, n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      f(j, k) = unit_twiddle(static_cast<long long>(j) * k, n) * norm;
  return f;
}

SamplingPlan random_plan(Space space, int n, int m, std::uint64_t seed, int axis) {
  if (n <= 0) throw std::invalid_argument("random_plan: n must be positive");
  if (m < 0 || m > n) throw std::invalid_argument("random_plan: need 0 <= m <= n");
  rng::Engine eng(seed);
  SamplingPlan plan;
  plan.space = space;
  plan.n = n;
  plan.axis = axis;
  plan.indices = rng::sample_without_replacement(eng, n, m);
  plan.validate();
  return plan;
}

namespace {

// (row, col) of a flattened index over shape {R, C}.
inline std::pair<int, int> unflatten(int idx, int cols) { return {idx / cols, idx % cols}; }

void check_shape(const SamplingPlan& plan, const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 2)
    throw std::invalid_argument("build_operator: shape rank must be 1 or 2");
  long long prod = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("build_operator: shape dims must be positive");
    prod *= d;
  }
  if (prod != plan.n)
    throw std::invalid_argument("build_operator: shape does not match plan.n");
  if (plan.axis >= static_cast<int>(shape.size()))
    throw std::invalid_argument("build_operator: plan axis exceeds shape rank");
}

}  // namespace

DenseOperator build_operator(const SamplingPlan& plan) {
  return build_operator(plan, {plan.n});
}

DenseOperator build_operator(const SamplingPlan& plan, const std::vector<int>& shape) {
  plan.validate();
  check_shape(plan, shape);
  const int m = plan.count();
  const int n = plan.n;
  DenseOperator op;
  op.row_space = plan.space;
  op.column_space = Space::XSpace;
  op.entries = Eigen::MatrixXcd::Zero(m, n);

  const bool two_d = shape.size() == 2;
  const int rows = shape[0];
  const int cols = two_d ? shape[1] : 1;

  switch (plan.space) {
    case Space::KSpace: {
      for (int r = 0; r < m; ++r) {
        const int k = plan.indices[r];
        const double norm = 1.0 / std::sqrt(static_cast<double>(n));
        if (!two_d) {
          for (int j = 0; j < n; ++j)
            op.entries(r, j) = unit_twiddle(static_cast<long long>(k) * j, n) * norm;
        } else {
          const auto [kr, kc] = unflatten(k, cols);
          for (int i = 0; i < rows; ++i) {
            const std::complex<double> wr = unit_twiddle(static_cast<long long>(kr) * i, rows);
            for (int j = 0; j < cols; ++j)
              op.entries(r, static_cast<Eigen::Index>(i) * cols + j) =
                  wr * unit_twiddle(static_cast<long long>(kc) * j, cols) * norm;
          }
        }
      }
      break;
    }
    case Space::XSpace: {
      for (int r = 0; r < m; ++r) op.entries(r, plan.indices[r]) = 1.0;
      break;
    }
    case Space::FDSpace: {
      for (int r = 0; r < m; ++r) {
        const int idx = plan.indices[r];
        int succ;
        if (!two_d) {
          succ = (idx + 1) % n;
        } else {
          const auto [i, j] = unflatten(idx, cols);
          succ = plan.axis == 0 ? ((i + 1) % rows) * cols + j : i * cols + (j + 1) % cols;
        }
        op.entries(r, idx) = -1.0;
        op.entries(r, succ) += 1.0;
      }
      break;
    }
  }
  return op;
}

MeasurementSet measure(const Image& img, const SamplingPlan& plan) {
  img.validate();
  plan.validate();
  if (img.size() != plan.n)
    throw std::invalid_argument("measure: image size does not match plan.n");
  if (plan.axis >= img.rank())
    throw std::invalid_argument("measure: plan axis exceeds image rank");

  MeasurementSet ms;
  ms.plan = plan;
  ms.values.resize(plan.count());

  const int n = plan.n;
  const bool two_d = img.rank() == 2;
  const int rows = two_d ? img.rows() : n;
  const int cols = two_d ? img.cols() : 1;

  for (int r = 0; r < plan.count(); ++r) {
    const int idx = plan.indices[r];
    switch (plan.space) {
      case Space::KSpace: {
        std::complex<double> acc(0.0, 0.0);
        if (!two_d) {
          for (int j = 0; j < n; ++j)
            acc += img.data(j) * unit_twiddle(static_cast<long long>(idx) * j, n);
        } else {
          const auto [kr, kc] = unflatten(idx, cols);
          // Separable evaluation: sum rows against the row harmonic first.
          Eigen::VectorXcd colsum = Eigen::VectorXcd::Zero(cols);
          for (int i = 0; i < rows; ++i) {
            const std::complex<double> wr = unit_twiddle(static_cast<long long>(kr) * i, rows);
            for (int j = 0; j < cols; ++j) colsum(j) += img.at(i, j) * wr;
          }
          for (int j = 0; j < cols; ++j)
            acc += colsum(j) * unit_twiddle(static_cast<long long>(kc) * j, cols);
        }
        ms.values(r) = acc / std::sqrt(static_cast<double>(n));
        break;
      }
      case Space::XSpace:
        ms.values(r) = img.data(idx);
        break;
      case Space::FDSpace: {
        // One FD measurement is realized as two adjacent pixel reads.
        double succ_val;
        if (!two_d) {
          succ_val = img.data((idx + 1) % n);
        } else {
          const auto [i, j] = unflatten(idx, cols);
          succ_val = plan.axis == 0 ? img.at((i + 1) % rows, j) : img.at(i, (j + 1) % cols);
        }
        ms.values(r) = succ_val - img.data(idx);
        break;
      }
    }
  }
  return ms;
}

double coherence(const DenseOperator& phi, const DenseOperator& psi) {
  phi.validate();
  psi.validate();
  const Eigen::Index n = phi.entries.rows();
  if (phi.entries.cols() != n || psi.entries.rows() != n || psi.entries.cols() != n)
    throw std::invalid_argument("coherence: operators must be square and same size");
  const double unitary_tol = 1e-9;
  for (const auto* m : {&phi.entries, &psi.entries}) {
    const Eigen::MatrixXcd gram = m->adjoint() * (*m);
    const double dev = (gram - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (dev > unitary_tol)
      throw std::invalid_argument("coherence: operator is not unitary within 1e-9");
  }
  const Eigen::MatrixXcd overlaps = phi.entries * psi.entries.adjoint();
  return std::sqrt(static_cast<double>(n)) * overlaps.cwiseAbs().maxCoeff();
}

std::string plan_to_json(const SamplingPlan& plan) {
  plan.validate();
  json j;
  j["space"] = to_string(plan.space);
  j["n"] = plan.n;
  if (plan.space == Space::FDSpace) j["axis"] = plan.axis;
  j["indices"] = plan.indices;
  return j.dump();
}

SamplingPlan plan_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  SamplingPlan plan;
  plan.space = space_from_string(j.at("space").get<std::string>());
  plan.n = j.at("n").get<int>();
  plan.axis = j.value("axis", 0);
  plan.indices = j.at("indices").get<std::vector<int>>();
  plan.validate();
  return plan;
}

}  // namespace dualcs::sampling
