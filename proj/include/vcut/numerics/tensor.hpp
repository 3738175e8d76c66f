#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "vcut/numerics/errors.hpp"

namespace vcut {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

using Dims = std::vector<std::int64_t>;

std::string to_string(DType dtype);
DType parse_dtype(const std::string& name);
std::string dims_to_string(const Dims& dims);
std::int64_t dims_numel(const Dims& dims);

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
}

// Calls fn with a value-initialized float or double matching `dtype`.
template <typename Fn>
decltype(auto) visit_dtype(DType dtype, Fn&& fn) {
  if (dtype == DType::kF32) return std::forward<Fn>(fn)(float{});
  return std::forward<Fn>(fn)(double{});
}

// Dense row-major array with a runtime dtype. Values are plain data: copies
// are deep, and no operation mutates its inputs.
class Tensor {
 public:
  Tensor() : Tensor(Dims{1}, DType::kF32) {}
  Tensor(Dims dims, DType dtype);
  Tensor(Dims dims, std::vector<float> values);
  Tensor(Dims dims, std::vector<double> values);

  // Builds a tensor of `dtype` from double values (narrowed for f32).
  static Tensor from_values(Dims dims, const std::vector<double>& values, DType dtype);
  static Tensor full(Dims dims, double value, DType dtype);

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  // Negative axes count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const { return dims_numel(dims_); }
  DType dtype() const { return dtype_; }

  template <typename T>
  std::span<const T> data() const {
    return std::span<const T>(storage<T>());
  }
  template <typename T>
  std::span<T> data() {
    return std::span<T>(storage<T>());
  }

  // Element read/write through double, for tests and small utilities.
  double get(std::int64_t flat_index) const;
  void set(std::int64_t flat_index, double value);
  double at(const Dims& index) const;
  std::vector<double> to_doubles() const;

  Tensor reshape(Dims dims) const;
  Tensor astype(DType dtype) const;

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
  // Same dtype, shape and payload bytes.
  bool bitwise_equal(const Tensor& other) const;

  std::span<const std::byte> bytes() const;

 private:
  template <typename T>
  const std::vector<T>& storage() const {
    if (dtype_ != dtype_of<T>()) throw ArgumentError("tensor dtype mismatch: tensor is " + to_string(dtype_));
    return std::get<std::vector<T>>(data_);
  }
  template <typename T>
  std::vector<T>& storage() {
    if (dtype_ != dtype_of<T>()) throw ArgumentError("tensor dtype mismatch: tensor is " + to_string(dtype_));
    return std::get<std::vector<T>>(data_);
  }

  void validate() const;

  Dims dims_;
  DType dtype_;
  std::variant<std::vector<float>, std::vector<double>> data_;
};

// Number of elements that differ bitwise (shapes and dtypes must agree).
std::int64_t count_bitwise_differences(const Tensor& a, const Tensor& b);
double max_abs_difference(const Tensor& a, const Tensor& b);

}  // namespace vcut
