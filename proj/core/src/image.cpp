#include "dualcs/image.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dualcs {

Image::Image(Eigen::VectorXd d, std::vector<int> s) : data(std::move(d)), shape(std::move(s)) {
  validate();
}

Image Image::zeros(int n) { return Image(Eigen::VectorXd::Zero(n), {n}); }

Image Image::zeros(int rows, int cols) {
  return Image(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows) * cols), {rows, cols});
}

void Image::validate() const {
  if (shape.empty() || shape.size() > 2)
    throw std::invalid_argument("Image: rank must be 1 or 2");
  long long prod = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("Image: dimensions must be positive");
    prod *= d;
  }
  if (prod != data.size())
    throw std::invalid_argument("Image: data length does not match shape");
  for (Eigen::Index i = 0; i < data.size(); ++i)
    if (!std::isfinite(data(i)))
      throw std::invalid_argument("Image: non-finite sample");
}

std::string format_double(double v) {
  // Shortest text that round-trips the IEEE double (fixed vs scientific by
  // string length, so 10.0 prints as "10", not "1e+01").
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---- CSV ----------------------------------------------------------------------

void write_image_csv(const Image& img, std::ostream& out) {
  img.validate();
  const int r = img.rank() == 2 ? img.rows() : 1;
  const int c = img.rank() == 2 ? img.cols() : img.size();
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      if (j) out << ',';
      out << format_double(img.data(static_cast<Eigen::Index>(i) * c + j));
    }
    out << '\n';
  }
}

void write_image_csv(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  write_image_csv(img, f);
}

Image read_image_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      size_t pos = 0;
      const double v = std::stod(cell, &pos);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("image CSV: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("image CSV: empty input");
  const int r = static_cast<int>(rows.size());
  const int c = static_cast<int>(rows.front().size());
  Eigen::VectorXd data(static_cast<Eigen::Index>(r) * c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) data(static_cast<Eigen::Index>(i) * c + j) = rows[i][j];
  if (r == 1) return Image(std::move(data), {c});
  return Image(std::move(data), {r, c});
}

Image read_image_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return read_image_csv(f);
}

// ---- binary container ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'C', 'S', 'I'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::ostream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void put_f64_le(std::ostream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

}  // namespace

void write_image_binary(const Image& img, std::ostream& out) {
  img.validate();
  out.write(kMagic, 4);
  put_u16(out, kVersion);
  const unsigned char rank = static_cast<unsigned char>(img.rank());
  out.write(reinterpret_cast<const char*>(&rank), 1);
  for (int d : img.shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (Eigen::Index i = 0; i < img.data.size(); ++i) put_f64_le(out, img.data(i));
}

void write_image_binary(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  write_image_binary(img, f);
}

Image read_image_binary(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("image container: bad magic");
  const std::uint16_t version = get_u16(in);
  if (version != kVersion)
    throw std::runtime_error("image container: unsupported version " + std::to_string(version));
  unsigned char rank = 0;
  in.read(reinterpret_cast<char*>(&rank), 1);
  if (rank < 1 || rank > 2) throw std::runtime_error("image container: rank must be 1 or 2");
  std::vector<int> shape(rank);
  long long total = 1;
  for (int d = 0; d < rank; ++d) {
    const std::uint32_t v = get_u32(in);
    if (v == 0 || v > (1u << 24)) throw std::runtime_error("image container: bad dimension");
    shape[d] = static_cast<int>(v);
    total *= v;
  }
  Eigen::VectorXd data(total);
  for (long long i = 0; i < total; ++i) data(i) = get_f64_le(in);
  if (!in) throw std::runtime_error("image container: truncated payload");
  return Image(std::move(data), std::move(shape));
}

Image read_image_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return read_image_binary(f);
}

}  // namespace dualcs
