#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tinydl {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles. Image tensors are laid out [C, H, W].
///
/// Rank is always at least 1 and every extent at least 1, so the number of
/// elements is never zero.
class Tensor {
 public:
  /// A single zero, shape [1].
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, double value) { return Tensor(std::move(shape), value); }
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  void fill(double value);
  bool all_finite() const;

  /// Same data under a new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  /// Elementwise in-place helpers used by optimizers and gradient accumulation.
  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double k);

  /// Bitwise comparison of shape and data.
  bool identical(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// out[i][j] = sum_k a[i][k] * b[k][j].
Tensor matmul(const Tensor& a, const Tensor& b);
/// W x + b with W [m,n], x [n], b [m].
Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b);
Tensor flatten(const Tensor& t);
Tensor reshape(const Tensor& t, Shape shape);
/// [C,H,W] -> [C,H+2p,W+2p] with a zero border.
Tensor zero_pad2d(const Tensor& t, std::size_t pad);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);

double sum(const Tensor& t);
double sum_squares(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

// SGT1 binary format: "SGT1", u32 rank, rank x u32 extents, f64 data (all LE).
void write_sgt1(std::ostream& out, const Tensor& t);
Tensor read_sgt1(std::istream& in);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

/// Stack equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);
/// Slice i of the leading axis.
Tensor unstack_one(const Tensor& t, std::size_t i);

}  // namespace tinydl
