#include "vcut/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vcut {

namespace {

void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    throw ArgumentError(std::string(op) + ": dtype mismatch (" + to_string(a.dtype()) + " vs " +
                        to_string(b.dtype()) + ")");
  }
}

Dims broadcast_dims(const Dims& a, const Dims& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Dims out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + dims_to_string(a) + " with " + dims_to_string(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Row-major strides of `dims` aligned to `rank` trailing axes; broadcast axes get 0.
std::vector<std::int64_t> broadcast_strides(const Dims& dims, const Dims& out) {
  std::vector<std::int64_t> strides(out.size(), 0);
  std::int64_t s = 1;
  const std::size_t offset = out.size() - dims.size();
  for (std::size_t i = dims.size(); i-- > 0;) {
    strides[i + offset] = dims[i] == 1 ? 0 : s;
    s *= dims[i];
  }
  return strides;
}

template <typename T, typename Fn>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, Fn fn, const char* op) {
  const Dims out_dims = broadcast_dims(a.dims(), b.dims(), op);
  Tensor out(out_dims, dtype_of<T>());
  const auto x = a.data<T>();
  const auto y = b.data<T>();
  auto z = out.data<T>();
  if (a.dims() == b.dims()) {
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = fn(x[i], y[i]);
    return out;
  }
  const auto sa = broadcast_strides(a.dims(), out_dims);
  const auto sb = broadcast_strides(b.dims(), out_dims);
  const std::size_t rank = out_dims.size();
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t oa = 0;
  std::int64_t ob = 0;
  for (std::size_t flat = 0; flat < z.size(); ++flat) {
    z[flat] = fn(x[static_cast<std::size_t>(oa)], y[static_cast<std::size_t>(ob)]);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out_dims[d]) break;
      oa -= sa[d] * idx[d];
      ob -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return out;
}

template <typename Fn>
Tensor map_unary(const Tensor& x, Fn fn) {
  Tensor out(x.dims(), x.dtype());
  visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto in = x.data<T>();
    auto o = out.data<T>();
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = static_cast<T>(fn(in[i]));
  });
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_dtype(a, b, "matmul");
  if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul operands need rank >= 2");
  const std::int64_t m = a.dim(-2);
  const std::int64_t k = a.dim(-1);
  const std::int64_t n = b.dim(-1);
  if (b.dim(-2) != k) {
    throw ShapeError("matmul inner extents disagree: " + dims_to_string(a.dims()) + " x " + dims_to_string(b.dims()));
  }
  const Dims batch_a(a.dims().begin(), a.dims().end() - 2);
  const Dims batch_b(b.dims().begin(), b.dims().end() - 2);
  const Dims batch_shape =
      broadcast_dims(batch_a.empty() ? Dims{1} : batch_a, batch_b.empty() ? Dims{1} : batch_b, "matmul");

  Dims out_dims = batch_a.empty() && batch_b.empty() ? Dims{} : batch_shape;
  out_dims.push_back(m);
  out_dims.push_back(n);
  Tensor out(out_dims, a.dtype());

  const auto sa = broadcast_strides(batch_a.empty() ? Dims{1} : batch_a, batch_shape);
  const auto sb = broadcast_strides(batch_b.empty() ? Dims{1} : batch_b, batch_shape);
  const std::int64_t batches = dims_numel(batch_shape);

  visit_dtype(a.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto x = a.data<T>();
    const auto y = b.data<T>();
    auto z = out.data<T>();
    std::vector<std::int64_t> idx(batch_shape.size(), 0);
    for (std::int64_t bi = 0; bi < batches; ++bi) {
      std::int64_t ia = 0;
      std::int64_t ib = 0;
      for (std::size_t d = 0; d < idx.size(); ++d) {
        ia += idx[d] * sa[d];
        ib += idx[d] * sb[d];
      }
      const T* pa = x.data() + ia * m * k;
      const T* pb = y.data() + ib * k * n;
      T* pc = z.data() + bi * m * n;
      // i-p-j order: each output element still accumulates p = 0..k-1 in order.
      for (std::int64_t i = 0; i < m; ++i) {
        T* row = pc + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
          const T aip = pa[i * k + p];
          const T* brow = pb + p * n;
          for (std::int64_t j = 0; j < n; ++j) row[j] += aip * brow[j];
        }
      }
      for (std::size_t d = idx.size(); d-- > 0;) {
        if (++idx[d] < batch_shape[d]) break;
        idx[d] = 0;
      }
    }
  });
  return out;
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::int64_t len = x.dim(-1);
  Tensor out(x.dims(), x.dtype());
  visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto in = x.data<T>();
    auto o = out.data<T>();
    const std::int64_t rows = x.numel() / len;
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* src = in.data() + r * len;
      T* dst = o.data() + r * len;
      T peak = src[0];
      for (std::int64_t i = 0; i < len; ++i) {
        if (std::isnan(src[i])) throw NumericError("softmax input contains NaN");
        peak = std::max(peak, src[i]);
      }
      T total = T(0);
      for (std::int64_t i = 0; i < len; ++i) {
        dst[i] = std::exp(src[i] - peak);
        total += dst[i];
      }
      for (std::int64_t i = 0; i < len; ++i) dst[i] /= total;
    }
  });
  return out;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2) throw ShapeError("affine weight must be [k, n], got " + dims_to_string(w.dims()));
  if (bias.rank() != 1 || bias.dim(0) != w.dim(1)) {
    throw ShapeError("affine bias " + dims_to_string(bias.dims()) + " does not match weight " +
                     dims_to_string(w.dims()));
  }
  if (x.dim(-1) != w.dim(0)) {
    throw ShapeError("affine input " + dims_to_string(x.dims()) + " does not match weight " +
                     dims_to_string(w.dims()));
  }
  const std::int64_t k = w.dim(0);
  const std::int64_t rows = x.numel() / k;
  Dims out_dims = x.dims();
  out_dims.back() = w.dim(1);
  return add(matmul(x.reshape({rows, k}), w), bias).reshape(out_dims);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::int64_t len = x.dim(-1);
  if (gain.dims() != Dims{len} || bias.dims() != Dims{len}) {
    throw ShapeError("layer_norm parameters must be [" + std::to_string(len) + "]");
  }
  require_same_dtype(x, gain, "layer_norm");
  require_same_dtype(x, bias, "layer_norm");
  if (!(eps > 0.0)) throw ArgumentError("layer_norm eps must be positive");
  Tensor out(x.dims(), x.dtype());
  visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto in = x.data<T>();
    const auto g = gain.data<T>();
    const auto b = bias.data<T>();
    auto o = out.data<T>();
    const T n = static_cast<T>(len);
    const T e = static_cast<T>(eps);
    const std::int64_t rows = x.numel() / len;
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* src = in.data() + r * len;
      T* dst = o.data() + r * len;
      T mean = T(0);
      for (std::int64_t i = 0; i < len; ++i) mean += src[i];
      mean /= n;
      T var = T(0);
      for (std::int64_t i = 0; i < len; ++i) var += (src[i] - mean) * (src[i] - mean);
      var /= n;
      const T inv = T(1) / std::sqrt(var + e);
      for (std::int64_t i = 0; i < len; ++i) dst[i] = (src[i] - mean) * inv * g[i] + b[i];
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_dtype(a, b, "add");
  return visit_dtype(a.dtype(), [&](auto zero) {
    using T = decltype(zero);
    return broadcast_binary<T>(a, b, [](T x, T y) { return x + y; }, "add");
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_dtype(a, b, "sub");
  return visit_dtype(a.dtype(), [&](auto zero) {
    using T = decltype(zero);
    return broadcast_binary<T>(a, b, [](T x, T y) { return x - y; }, "sub");
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_dtype(a, b, "mul");
  return visit_dtype(a.dtype(), [&](auto zero) {
    using T = decltype(zero);
    return broadcast_binary<T>(a, b, [](T x, T y) { return x * y; }, "mul");
  });
}

Tensor scale(const Tensor& x, double factor) {
  return visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const T f = static_cast<T>(factor);
    return map_unary(x, [f](T v) { return v * f; });
  });
}

Tensor gelu(const Tensor& x) {
  return visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const T k = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
    return map_unary(x, [k](T v) {
      return T(0.5) * v * (T(1) + std::tanh(k * (v + T(0.044715) * v * v * v)));
    });
  });
}

Tensor silu(const Tensor& x) {
  return visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    return map_unary(x, [](T v) { return v / (T(1) + std::exp(-v)); });
  });
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  const std::size_t rank = x.rank();
  if (axes.size() != rank) throw ShapeError("permute: axes length must equal rank");
  std::vector<bool> seen(rank, false);
  Dims out_dims(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const int a = axes[i];
    if (a < 0 || static_cast<std::size_t>(a) >= rank || seen[static_cast<std::size_t>(a)]) {
      throw ShapeError("permute: axes must be a permutation of 0..rank-1");
    }
    seen[static_cast<std::size_t>(a)] = true;
    out_dims[i] = x.dims()[static_cast<std::size_t>(a)];
  }
  std::vector<std::int64_t> in_strides(rank, 1);
  for (std::size_t i = rank - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * x.dims()[i + 1];
  std::vector<std::int64_t> strides(rank);
  for (std::size_t i = 0; i < rank; ++i) strides[i] = in_strides[static_cast<std::size_t>(axes[i])];

  Tensor out(out_dims, x.dtype());
  visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto in = x.data<T>();
    auto o = out.data<T>();
    std::vector<std::int64_t> idx(rank, 0);
    std::int64_t src = 0;
    for (std::size_t flat = 0; flat < o.size(); ++flat) {
      o[flat] = in[static_cast<std::size_t>(src)];
      for (std::size_t d = rank; d-- > 0;) {
        ++idx[d];
        src += strides[d];
        if (idx[d] < out_dims[d]) break;
        src -= strides[d] * idx[d];
        idx[d] = 0;
      }
    }
  });
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ArgumentError("concat needs at least one tensor");
  const Tensor& first = parts.front();
  const int rank = static_cast<int>(first.rank());
  const int ax = axis < 0 ? axis + rank : axis;
  if (ax < 0 || ax >= rank) throw ShapeError("concat axis out of range");
  Dims out_dims = first.dims();
  out_dims[static_cast<std::size_t>(ax)] = 0;
  for (const auto& p : parts) {
    require_same_dtype(first, p, "concat");
    if (static_cast<int>(p.rank()) != rank) throw ShapeError("concat rank mismatch");
    for (int d = 0; d < rank; ++d) {
      if (d != ax && p.dims()[static_cast<std::size_t>(d)] != first.dims()[static_cast<std::size_t>(d)]) {
        throw ShapeError("concat extents disagree: " + dims_to_string(p.dims()) + " vs " +
                         dims_to_string(first.dims()));
      }
    }
    out_dims[static_cast<std::size_t>(ax)] += p.dims()[static_cast<std::size_t>(ax)];
  }
  std::int64_t outer = 1;
  for (int d = 0; d < ax; ++d) outer *= out_dims[static_cast<std::size_t>(d)];
  std::int64_t inner = 1;
  for (int d = ax + 1; d < rank; ++d) inner *= out_dims[static_cast<std::size_t>(d)];

  Tensor out(out_dims, first.dtype());
  visit_dtype(first.dtype(), [&](auto zero) {
    using T = decltype(zero);
    auto o = out.data<T>();
    std::size_t pos = 0;
    for (std::int64_t r = 0; r < outer; ++r) {
      for (const auto& p : parts) {
        const std::int64_t chunk = p.dims()[static_cast<std::size_t>(ax)] * inner;
        const auto src = p.data<T>();
        std::copy_n(src.data() + r * chunk, chunk, o.data() + pos);
        pos += static_cast<std::size_t>(chunk);
      }
    }
  });
  return out;
}

Tensor slice(const Tensor& x, int axis, std::int64_t begin, std::int64_t end) {
  const int rank = static_cast<int>(x.rank());
  const int ax = axis < 0 ? axis + rank : axis;
  const std::int64_t extent = x.dim(ax);
  if (begin < 0 || end > extent || begin >= end) throw ShapeError("slice range out of bounds");
  Dims out_dims = x.dims();
  out_dims[static_cast<std::size_t>(ax)] = end - begin;
  std::int64_t outer = 1;
  for (int d = 0; d < ax; ++d) outer *= out_dims[static_cast<std::size_t>(d)];
  std::int64_t inner = 1;
  for (int d = ax + 1; d < rank; ++d) inner *= out_dims[static_cast<std::size_t>(d)];
  Tensor out(out_dims, x.dtype());
  visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto src = x.data<T>();
    auto o = out.data<T>();
    const std::int64_t chunk = (end - begin) * inner;
    for (std::int64_t r = 0; r < outer; ++r) {
      std::copy_n(src.data() + (r * extent + begin) * inner, chunk, o.data() + r * chunk);
    }
  });
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
  require_same_dtype(x, w, "conv2d");
  require_same_dtype(x, bias, "conv2d");
  if (x.rank() != 4 || w.rank() != 4) throw ShapeError("conv2d expects x [n,c,h,w] and w [o,c,kh,kw]");
  const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::int64_t oc = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != c) throw ShapeError("conv2d channel mismatch: " + dims_to_string(x.dims()) + " vs " + dims_to_string(w.dims()));
  if (bias.dims() != Dims{oc}) throw ShapeError("conv2d bias must be [c_out]");
  if (stride < 1 || padding < 0) throw ArgumentError("conv2d stride must be >= 1 and padding >= 0");
  const std::int64_t oh = (h + 2 * padding - kh) / stride + 1;
  const std::int64_t ow = (wd + 2 * padding - kw) / stride + 1;
  if (oh < 1 || ow < 1) throw ShapeError("conv2d output would be empty");
  Tensor out({n, oc, oh, ow}, x.dtype());
  visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto in = x.data<T>();
    const auto wt = w.data<T>();
    const auto bs = bias.data<T>();
    auto o = out.data<T>();
    for (std::int64_t b = 0; b < n; ++b) {
      for (std::int64_t co = 0; co < oc; ++co) {
        for (std::int64_t y = 0; y < oh; ++y) {
          for (std::int64_t xo = 0; xo < ow; ++xo) {
            T acc = T(0);
            for (std::int64_t ci = 0; ci < c; ++ci) {
              for (std::int64_t ky = 0; ky < kh; ++ky) {
                const std::int64_t iy = y * stride + ky - padding;
                if (iy < 0 || iy >= h) continue;
                for (std::int64_t kx = 0; kx < kw; ++kx) {
                  const std::int64_t ix = xo * stride + kx - padding;
                  if (ix < 0 || ix >= wd) continue;
                  acc += in[static_cast<std::size_t>(((b * c + ci) * h + iy) * wd + ix)] *
                         wt[static_cast<std::size_t>(((co * c + ci) * kh + ky) * kw + kx)];
                }
              }
            }
            o[static_cast<std::size_t>(((b * oc + co) * oh + y) * ow + xo)] = acc + bs[static_cast<std::size_t>(co)];
          }
        }
      }
    }
  });
  return out;
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_same_dtype(x, w, "depthwise_conv1d");
  require_same_dtype(x, bias, "depthwise_conv1d");
  if (x.rank() != 4 || w.rank() != 2) throw ShapeError("depthwise_conv1d expects x [n,c,L,s] and w [c,k]");
  const std::int64_t n = x.dim(0), c = x.dim(1), len = x.dim(2), s = x.dim(3);
  const std::int64_t k = w.dim(1);
  if (w.dim(0) != c || bias.dims() != Dims{c}) throw ShapeError("depthwise_conv1d channel mismatch");
  if (k % 2 == 0) throw ShapeError("depthwise_conv1d kernel length must be odd");
  const std::int64_t half = k / 2;
  Tensor out(x.dims(), x.dtype());
  visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto in = x.data<T>();
    const auto wt = w.data<T>();
    const auto bs = bias.data<T>();
    auto o = out.data<T>();
    for (std::int64_t b = 0; b < n; ++b) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const T* src = in.data() + (b * c + ch) * len * s;
        T* dst = o.data() + (b * c + ch) * len * s;
        for (std::int64_t l = 0; l < len; ++l) {
          for (std::int64_t p = 0; p < s; ++p) {
            T acc = T(0);
            for (std::int64_t j = 0; j < k; ++j) {
              const std::int64_t src_l = l + j - half;
              if (src_l < 0 || src_l >= len) continue;
              acc += wt[static_cast<std::size_t>(ch * k + j)] * src[src_l * s + p];
            }
            dst[l * s + p] = acc + bs[static_cast<std::size_t>(ch)];
          }
        }
      }
    }
  });
  return out;
}

Tensor upsample_nearest2x(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("upsample_nearest2x expects [n,c,h,w]");
  const std::int64_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out({x.dim(0), x.dim(1), 2 * h, 2 * w}, x.dtype());
  visit_dtype(x.dtype(), [&](auto zero) {
    using T = decltype(zero);
    const auto in = x.data<T>();
    auto o = out.data<T>();
    for (std::int64_t p = 0; p < nc; ++p) {
      for (std::int64_t y = 0; y < 2 * h; ++y) {
        for (std::int64_t xo = 0; xo < 2 * w; ++xo) {
          o[static_cast<std::size_t>((p * 2 * h + y) * 2 * w + xo)] =
              in[static_cast<std::size_t>((p * h + y / 2) * w + xo / 2)];
        }
      }
    }
  });
  return out;
}

double sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.to_doubles()) total += v;
  return total;
}

}  // namespace vcut
