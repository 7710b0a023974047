#include "dualcs/signals.hpp"

#include <cmath>
#include <stdexcept>

#include "dualcs/rng.hpp"

namespace dualcs::signals {

void SparseSpec::validate() const {
  if (n <= 0) throw std::invalid_argument("SparseSpec: n must be positive");
  if (s < 0 || s > n) throw std::invalid_argument("SparseSpec: need 0 <= s <= n");
  if (!(amplitude_lo > 0.0) || !(amplitude_hi >= amplitude_lo))
    throw std::invalid_argument("SparseSpec: need 0 < amplitude_lo <= amplitude_hi");
}

void NoiseSpec::validate() const {
  if (!(sigma >= 0.0)) throw std::invalid_argument("NoiseSpec: sigma must be >= 0");
}

Image gen_sparse_image(const SparseSpec& spec) {
  spec.validate();
  rng::Engine eng(spec.seed);
  const std::vector<int> support = rng::sample_without_replacement(eng, spec.n, spec.s);
  Image img = Image::zeros(spec.n);
  for (int idx : support) {
    double amp = eng.uniform_real(spec.amplitude_lo, spec.amplitude_hi);
    if (spec.signed_amplitudes && (eng.next_u64() & 1ull)) amp = -amp;
    img.data(idx) = amp;
  }
  return img;
}

Image gen_step_signal(int n, int num_steps, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("gen_step_signal: n must be positive");
  if (num_steps < 2 || num_steps >= n)
    throw std::invalid_argument(
        "gen_step_signal: need 2 <= num_steps < n (circular jumps must sum to zero, "
        "so a single step cannot exist)");

  rng::Engine eng(seed);
  const std::vector<int> positions = rng::sample_without_replacement(eng, n, num_steps);

  // Draw signed jumps, then shift them to sum exactly to zero. Rejection
  // keeps every jump's magnitude >= 0.25 so the step count stays exact and
  // edges remain well above typical detection thresholds.
  std::vector<double> jumps(num_steps);
  for (int attempt = 0;; ++attempt) {
    if (attempt >= 1000)
      throw std::runtime_error("gen_step_signal: failed to draw balanced jumps");
    double total = 0.0;
    for (double& j : jumps) {
      const double mag = eng.uniform_real(0.5, 1.5);
      j = (eng.next_u64() & 1ull) ? mag : -mag;
      total += j;
    }
    const double shift = total / num_steps;
    bool ok = true;
    for (double& j : jumps) {
      j -= shift;
      if (std::abs(j) < 0.25) ok = false;
    }
    if (ok) break;
  }

  Image img = Image::zeros(n);
  std::vector<double> jump_at(n, 0.0);
  for (int k = 0; k < num_steps; ++k) jump_at[positions[k]] = jumps[k];
  double level = 0.0;  // baseline; the final wrap jump closes back to it
  for (int x = 1; x < n; ++x) {
    level += jump_at[x - 1];
    img.data(x) = level;
  }
  return img;
}

Image gen_shepp_logan(int size) {
  if (size < 16) throw std::invalid_argument("gen_shepp_logan: size must be >= 16");

  // 1974 head-phantom ellipses: {intensity, semi-axis a, semi-axis b,
  // center x, center y, rotation degrees}. Intensities are halved so the
  // rendered values span [0, 1] instead of the table's [0, 2].
  struct Ellipse {
    double v, a, b, x0, y0, phi_deg;
  };
  static constexpr Ellipse kTable[10] = {
      {2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0},
      {-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0},
      {-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0},
      {-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0},
      {0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0},
      {0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0},
      {0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0},
      {0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0},
      {0.01, 0.0230, 0.0230, 0.00, -0.6060, 0.0},
      {0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0},
  };
  constexpr double kScale = 0.5;

  Image img = Image::zeros(size, size);
  const double half = (size - 1) / 2.0;
  for (const Ellipse& e : kTable) {
    const double phi = e.phi_deg * M_PI / 180.0;
    const double c = std::cos(phi), s = std::sin(phi);
    const double a2 = e.a * e.a, b2 = e.b * e.b;
    for (int i = 0; i < size; ++i) {
      const double y = (half - i) / half;  // row 0 is the top of the image
      for (int j = 0; j < size; ++j) {
        const double x = (j - half) / half;
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = dx * c + dy * s;
        const double w = -dx * s + dy * c;
        if (u * u / a2 + w * w / b2 <= 1.0) img.at(i, j) += kScale * e.v;
      }
    }
  }
  return img;
}

Image add_noise(const Image& img, const NoiseSpec& noise) {
  img.validate();
  noise.validate();
  if (noise.sigma == 0.0) return img;
  rng::Engine eng(noise.seed);
  Image out = img;
  for (Eigen::Index i = 0; i < out.data.size(); ++i)
    out.data(i) += noise.sigma * eng.gaussian();
  return out;
}

Image fd_transform(const Image& img, int axis) {
  img.validate();
  if (axis < 0 || axis >= img.rank())
    throw std::invalid_argument("fd_transform: axis out of range");
  Image out = img;
  if (img.rank() == 1) {
    const int n = img.size();
    for (int x = 0; x < n; ++x) out.data(x) = img.data((x + 1) % n) - img.data(x);
    return out;
  }
  const int r = img.rows(), c = img.cols();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.at(i, j) = (axis == 0 ? img.at((i + 1) % r, j) : img.at(i, (j + 1) % c)) - img.at(i, j);
  return out;
}

Image fd_inverse(const Image& fd_img, double anchor_value) {
  fd_img.validate();
  if (fd_img.rank() != 1)
    throw std::invalid_argument(
        "fd_inverse: only 1-D difference signals are invertible from a single axis");
  const int n = fd_img.size();
  const double total = fd_img.data.sum();
  const double scale = std::max(1.0, fd_img.data.cwiseAbs().maxCoeff());
  if (std::abs(total) > 1e-8 * scale)
    throw std::invalid_argument("fd_inverse: differences do not sum to zero (not integrable)");
  Image out = Image::zeros(n);
  double level = anchor_value;
  out.data(0) = level;
  for (int x = 1; x < n; ++x) {
    level += fd_img.data(x - 1);
    out.data(x) = level;
  }
  return out;
}

double sigma_for_snr(const Image& truth, double snr) {
  if (!(snr > 0.0)) throw std::invalid_argument("sigma_for_snr: snr must be positive");
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < truth.data.size(); ++i) {
    if (truth.data(i) != 0.0) {
      sum += std::abs(truth.data(i));
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("sigma_for_snr: image has no non-zeros");
  return (sum / count) / snr;
}

}  // namespace dualcs::signals
