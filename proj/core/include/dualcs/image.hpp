#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace dualcs {

// A real-valued signal on a 1-D or 2-D grid, stored row-major as a flat
// column vector. "Image" covers both genuine images and 1-D signals; most
// of the library is rank-agnostic.
struct Image {
  Eigen::VectorXd data;     // length == product(shape)
  std::vector<int> shape;   // rank 1 or 2, all dims positive

  Image() = default;
  Image(Eigen::VectorXd d, std::vector<int> s);

  static Image zeros(int n);
  static Image zeros(int rows, int cols);

  int rank() const { return static_cast<int>(shape.size()); }
  int size() const { return static_cast<int>(data.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return rank() == 2 ? shape.at(1) : 1; }

  double& at(int i) { return data(i); }
  double at(int i) const { return data(i); }
  double& at(int i, int j) { return data(static_cast<Eigen::Index>(i) * cols() + j); }
  double at(int i, int j) const { return data(static_cast<Eigen::Index>(i) * cols() + j); }

  // Throws std::invalid_argument if shape/data are inconsistent, a dim is
  // non-positive, rank is not 1 or 2, or any entry is non-finite.
  void validate() const;

  bool same_shape(const Image& other) const { return shape == other.shape; }
};

// ---- serialization -----------------------------------------------------------
//
// CSV: one line per image row (a 1-D signal is a single line), values
// printed with "%.17g" so round-trips are exact and reruns byte-identical.
//
// Binary container: magic "DCSI", little-endian u16 version (= 1), u8 rank,
// u32 dims[rank], then float64 samples row-major, all little-endian.

void write_image_csv(const Image& img, std::ostream& out);
void write_image_csv(const Image& img, const std::string& path);
Image read_image_csv(std::istream& in);
Image read_image_csv(const std::string& path);

void write_image_binary(const Image& img, std::ostream& out);
void write_image_binary(const Image& img, const std::string& path);
Image read_image_binary(std::istream& in);
Image read_image_binary(const std::string& path);

// Shared numeric formatting for every text artifact the library emits:
// shortest representation that round-trips a double exactly.
std::string format_double(double v);

}  // namespace dualcs
