#pragma once

#include <cstdint>

#include "dualcs/image.hpp"

namespace dualcs::signals {

// Recipe for a random exactly-sparse image. Non-zero magnitudes are drawn
// uniformly from [amplitude_lo, amplitude_hi]; signs are positive unless
// signed_amplitudes is set (then each sign is a fair coin).
struct SparseSpec {
  int n = 0;                    // total pixel count (flat)
  int s = 0;                    // exact number of non-zeros, 0 <= s <= n
  double amplitude_lo = 0.5;    // must be > 0 so the support is unambiguous
  double amplitude_hi = 1.5;
  bool signed_amplitudes = false;
  std::uint64_t seed = 0;

  void validate() const;
};

// Additive i.i.d. Gaussian pixel noise.
struct NoiseSpec {
  double sigma = 0.0;           // >= 0; 0 returns the input unchanged
  std::uint64_t seed = 0;

  void validate() const;
};

// Exactly-s-sparse 1-D image; support indices are distinct and uniform.
// Deterministic in spec.seed.
Image gen_sparse_image(const SparseSpec& spec);

// Circular piecewise-constant 1-D signal on baseline 0 with exactly
// num_steps jumps, i.e. the circular finite-difference transform of the
// result has exactly num_steps non-zeros. Jump magnitudes land in roughly
// [0.25, 1.5] and sum to zero (a circular signal must return to its
// starting level). num_steps must be >= 2: a single non-zero circular
// difference cannot sum to zero, so a 1-step circular signal does not
// exist. Deterministic in seed.
Image gen_step_signal(int n, int num_steps, std::uint64_t seed);

// Classic ten-ellipse head phantom (1974 intensity table, scaled so values
// lie in [0, 1]) rendered on a size x size grid, pixel centers spanning
// [-1, 1] in both axes. size >= 16.
Image gen_shepp_logan(int size);

Image add_noise(const Image& img, const NoiseSpec& noise);

// Circular forward difference along `axis`: out(x) = in(x + 1) - in(x) with
// the index wrapping at the end of the axis. Shape is preserved. axis must
// be a valid axis of img.
Image fd_transform(const Image& img, int axis = 0);

// Inverse of fd_transform for 1-D signals: cumulative sum anchored so that
// out(0) == anchor_value. The input must be integrable (circular
// differences sum to ~0), otherwise std::invalid_argument. Rank-2 input is
// rejected: a single-axis difference image does not determine a 2-D image
// (each grid line would need its own anchor); 2-D reconstruction from both
// difference axes lives in the weighted-TV solver.
Image fd_inverse(const Image& fd_img, double anchor_value);

// sigma such that mean non-zero |amplitude| / sigma == snr; grid point 1
// therefore puts the noise floor at the typical peak height. Used by the
// noise-sweep experiments to translate an SNR grid into noise levels.
double sigma_for_snr(const Image& truth, double snr);

}  // namespace dualcs::signals
