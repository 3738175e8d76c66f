#pragma once

#include <cstdint>
#include <vector>

#include "vcut/numerics/tensor.hpp"

// Reference kernels. Every reduction runs in ascending index order with an
// accumulator of the operand dtype, so results are bitwise reproducible for a
// given dtype and operand bytes.
namespace vcut {

inline constexpr double kLayerNormEps = 1e-5;

// [.., m, k] x [.., k, n] -> [.., m, n]; leading extents broadcast NumPy-style.
Tensor matmul(const Tensor& a, const Tensor& b);

// Max-subtracted softmax over the last axis. Throws NumericError on NaN.
Tensor softmax_lastdim(const Tensor& x);

// x [.., k] . w [k, n] + bias [n]. Computed as matmul followed by a bias add,
// so affine(x, w, b) == add(matmul(x, w), b) exactly.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias);

// Normalizes over the last axis: (x - mean) / sqrt(var + eps) * gain + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps);

// Elementwise with NumPy broadcasting. Operands must share a dtype.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// tanh approximation of GELU.
Tensor gelu(const Tensor& x);
Tensor silu(const Tensor& x);

Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor concat(const std::vector<Tensor>& parts, int axis);
// Slice [begin, end) along `axis`.
Tensor slice(const Tensor& x, int axis, std::int64_t begin, std::int64_t end);

// x [n, c_in, h, w], w [c_out, c_in, kh, kw], bias [c_out]; zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding);

// Per-channel 1-D convolution along the L axis of x [n, c, L, s] with
// w [c, k] (k odd) and same zero padding. s is an untouched trailing extent.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias);

// Nearest-neighbour 2x upsampling of x [n, c, h, w].
Tensor upsample_nearest2x(const Tensor& x);

double sum(const Tensor& x);

}  // namespace vcut
