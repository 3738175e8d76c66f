#include "vcut/numerics/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace vcut {

std::string to_string(DType dtype) { return dtype == DType::kF32 ? "f32" : "f64"; }

DType parse_dtype(const std::string& name) {
  if (name == "f32") return DType::kF32;
  if (name == "f64") return DType::kF64;
  throw ArgumentError("unknown dtype '" + name + "' (expected f32 or f64)");
}

std::string dims_to_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? ", " : "") << dims[i];
  os << ']';
  return os.str();
}

std::int64_t dims_numel(const Dims& dims) {
  std::int64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

namespace {

void check_dims(const Dims& dims) {
  if (dims.empty()) throw ShapeError("tensor rank must be >= 1");
  for (auto d : dims) {
    if (d < 1) throw ShapeError("tensor extents must be >= 1, got " + dims_to_string(dims));
  }
}

}  // namespace

Tensor::Tensor(Dims dims, DType dtype) : dims_(std::move(dims)), dtype_(dtype) {
  check_dims(dims_);
  const auto n = static_cast<std::size_t>(dims_numel(dims_));
  if (dtype_ == DType::kF32) {
    data_ = std::vector<float>(n, 0.0f);
  } else {
    data_ = std::vector<double>(n, 0.0);
  }
}

Tensor::Tensor(Dims dims, std::vector<float> values)
    : dims_(std::move(dims)), dtype_(DType::kF32), data_(std::move(values)) {
  validate();
}

Tensor::Tensor(Dims dims, std::vector<double> values)
    : dims_(std::move(dims)), dtype_(DType::kF64), data_(std::move(values)) {
  validate();
}

void Tensor::validate() const {
  check_dims(dims_);
  const auto n = static_cast<std::size_t>(dims_numel(dims_));
  const auto len = std::visit([](const auto& v) { return v.size(); }, data_);
  if (n != len) {
    throw ShapeError("payload length " + std::to_string(len) + " does not match dims " + dims_to_string(dims_));
  }
}

Tensor Tensor::from_values(Dims dims, const std::vector<double>& values, DType dtype) {
  if (dtype == DType::kF64) return Tensor(std::move(dims), values);
  return Tensor(std::move(dims), std::vector<float>(values.begin(), values.end()));
}

Tensor Tensor::full(Dims dims, double value, DType dtype) {
  Tensor t(std::move(dims), dtype);
  visit_dtype(dtype, [&](auto zero) {
    using T = decltype(zero);
    for (auto& v : t.data<T>()) v = static_cast<T>(value);
  });
  return t;
}

std::int64_t Tensor::dim(int axis) const {
  const int r = static_cast<int>(dims_.size());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(r));
  return dims_[static_cast<std::size_t>(a)];
}

double Tensor::get(std::int64_t flat_index) const {
  return std::visit([&](const auto& v) { return static_cast<double>(v.at(static_cast<std::size_t>(flat_index))); },
                    data_);
}

void Tensor::set(std::int64_t flat_index, double value) {
  std::visit(
      [&](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        v.at(static_cast<std::size_t>(flat_index)) = static_cast<T>(value);
      },
      data_);
}

double Tensor::at(const Dims& index) const {
  if (index.size() != dims_.size()) throw ShapeError("index rank does not match tensor rank");
  std::int64_t flat = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= dims_[i]) throw ShapeError("index out of range");
    flat = flat * dims_[i] + index[i];
  }
  return get(flat);
}

std::vector<double> Tensor::to_doubles() const {
  return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, data_);
}

Tensor Tensor::reshape(Dims dims) const {
  check_dims(dims);
  if (dims_numel(dims) != numel()) {
    throw ShapeError("cannot reshape " + dims_to_string(dims_) + " to " + dims_to_string(dims));
  }
  Tensor out = *this;
  out.dims_ = std::move(dims);
  return out;
}

Tensor Tensor::astype(DType dtype) const {
  if (dtype == dtype_) return *this;
  if (dtype == DType::kF64) {
    const auto& v = std::get<std::vector<float>>(data_);
    return Tensor(dims_, std::vector<double>(v.begin(), v.end()));
  }
  const auto& v = std::get<std::vector<double>>(data_);
  return Tensor(dims_, std::vector<float>(v.begin(), v.end()));
}

std::span<const std::byte> Tensor::bytes() const {
  return std::visit([](const auto& v) { return std::as_bytes(std::span(v)); }, data_);
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  if (dtype_ != other.dtype_ || dims_ != other.dims_) return false;
  const auto a = bytes();
  const auto b = other.bytes();
  return std::memcmp(a.data(), b.data(), a.size()) == 0;
}

std::int64_t count_bitwise_differences(const Tensor& a, const Tensor& b) {
  if (a.dtype() != b.dtype() || !a.same_shape(b)) {
    throw ShapeError("bitwise comparison needs equal dtype and dims: " + dims_to_string(a.dims()) + " vs " +
                     dims_to_string(b.dims()));
  }
  return visit_dtype(a.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto x = a.data<T>();
    const auto y = b.data<T>();
    std::int64_t diff = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::memcmp(&x[i], &y[i], sizeof(T)) != 0) ++diff;
    }
    return diff;
  });
}

double max_abs_difference(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_difference shape mismatch: " + dims_to_string(a.dims()) + " vs " +
                     dims_to_string(b.dims()));
  }
  const auto x = a.to_doubles();
  const auto y = b.to_doubles();
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
  return worst;
}

}  // namespace vcut
