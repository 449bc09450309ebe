#include "tinydl/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "tinydl/errors.hpp"

namespace tinydl {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor rank must be at least 1");
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extent must be positive, got " + to_string(shape));
  }
}

}  // namespace

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor of shape " + to_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  check_shape(shape);
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double k) {
  for (auto& v : data_) v *= k;
  return *this;
}

bool Tensor::identical(const Tensor& other) const {
  return shape_ == other.shape_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw DimensionError("matmul: cannot multiply " + to_string(a.shape()) + " by " +
                         to_string(b.shape()));
  }
  const std::size_t m = a.extent(0), n = a.extent(1), p = b.extent(1);
  Tensor out({m, p});
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.raw() + i * p;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a.at(i, k);
      const double* brow = b.raw() + k * p;
      for (std::size_t j = 0; j < p; ++j) row[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
  if (w.rank() != 2 || x.rank() != 1 || b.rank() != 1 || w.extent(1) != x.extent(0) ||
      w.extent(0) != b.extent(0)) {
    throw DimensionError("affine: W " + to_string(w.shape()) + ", x " + to_string(x.shape()) +
                         ", b " + to_string(b.shape()) + " do not conform");
  }
  const std::size_t m = w.extent(0), n = w.extent(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = w.raw() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    out[i] = acc + b[i];
  }
  return out;
}

Tensor flatten(const Tensor& t) { return t.reshaped({t.size()}); }

Tensor reshape(const Tensor& t, Shape shape) { return t.reshaped(std::move(shape)); }

Tensor zero_pad2d(const Tensor& t, std::size_t pad) {
  if (t.rank() != 3) throw DimensionError("zero_pad2d expects [C,H,W], got " + to_string(t.shape()));
  if (pad == 0) return t;
  const std::size_t c = t.extent(0), h = t.extent(1), w = t.extent(2);
  const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
  Tensor out({c, ph, pw});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < h; ++i) {
      std::copy_n(t.raw() + (k * h + i) * w, w, out.raw() + (k * ph + i + pad) * pw + pad);
    }
  }
  return out;
}

namespace {

template <typename Op>
Tensor zip(const Tensor& a, const Tensor& b, const char* name, Op op) {
  require_same_shape(a, b, name);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor scale(const Tensor& a, double k) {
  Tensor out = a;
  out *= k;
  return out;
}

double sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s;
}

double sum_squares(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw DimensionError("stack: no tensors");
  const Shape& inner = items.front().shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<double> data;
  data.reserve(shape_size(shape));
  for (const auto& t : items) {
    if (t.shape() != inner) {
      throw DimensionError("stack: shape " + to_string(t.shape()) + " differs from " + to_string(inner));
    }
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor unstack_one(const Tensor& t, std::size_t i) {
  if (t.rank() < 2 || i >= t.extent(0)) {
    throw DimensionError("unstack_one: index " + std::to_string(i) + " out of " + to_string(t.shape()));
  }
  Shape inner(t.shape().begin() + 1, t.shape().end());
  const std::size_t n = shape_size(inner);
  std::vector<double> data(t.raw() + i * n, t.raw() + (i + 1) * n);
  return Tensor(std::move(inner), std::move(data));
}

// --- SGT1 ------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'G', 'T', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void get_bytes(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw LoadError(LoadError::Kind::truncated, "SGT1: truncated tensor data");
  }
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_sgt1(std::ostream& out, const Tensor& t) {
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (double v : t.data()) put_f64(out, v);
}

Tensor read_sgt1(std::istream& in) {
  unsigned char magic[4];
  get_bytes(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw LoadError(LoadError::Kind::magic, "SGT1: bad magic bytes");
  }
  const std::uint32_t rank = get_u32(in);
  if (rank == 0 || rank > 16) throw LoadError(LoadError::Kind::shape, "SGT1: invalid rank");
  Shape shape(rank);
  std::size_t n = 1;
  for (auto& e : shape) {
    e = get_u32(in);
    if (e == 0) throw LoadError(LoadError::Kind::shape, "SGT1: zero extent");
    n *= e;
  }
  std::vector<unsigned char> bytes(n * 8);
  get_bytes(in, bytes.data(), bytes.size());
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    data[i] = std::bit_cast<double>(v);
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(LoadError::Kind::io, "cannot open " + path + " for writing");
  write_sgt1(out, t);
  if (!out) throw LoadError(LoadError::Kind::io, "write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open " + path);
  return read_sgt1(in);
}

}  // namespace tinydl
