#include "vcut/model/video.hpp"

#include "vcut/numerics/ops.hpp"

namespace vcut {

VideoShape VideoShape::of(const Tensor& t) {
  if (t.rank() != 5) throw ShapeError("video tensor must be [b, c, f, h, w], got " + dims_to_string(t.dims()));
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), t.dim(4)};
}

LatentVideo::LatentVideo(Tensor values) : values_(std::move(values)) { VideoShape::of(values_); }

ImageEmbedding::ImageEmbedding(Tensor values, bool is_null) : values_(std::move(values)), null_(is_null) {
  if (values_.rank() != 3 || values_.dim(1) != 1) {
    throw ShapeError("image embedding must be globally pooled [b, 1, D], got " + dims_to_string(values_.dims()));
  }
}

ImageEmbedding ImageEmbedding::conditional(Tensor values) { return ImageEmbedding(std::move(values), false); }

ImageEmbedding ImageEmbedding::null(std::int64_t batch, std::int64_t dim, DType dtype) {
  return ImageEmbedding(Tensor({batch, 1, dim}, dtype), true);
}

Tensor reshape_temporal(const Tensor& z) {
  const auto s = VideoShape::of(z);
  return permute(z, {0, 3, 4, 2, 1}).reshape({s.b * s.h * s.w, s.f, s.c});
}

Tensor reshape_temporal(const LatentVideo& z) { return reshape_temporal(z.tensor()); }

Tensor from_temporal(const Tensor& seq, const VideoShape& s) {
  if (seq.dims() != Dims{s.b * s.h * s.w, s.f, s.c}) {
    throw ShapeError("temporal sequence " + dims_to_string(seq.dims()) + " does not match video " +
                     dims_to_string(s.dims()));
  }
  return permute(seq.reshape({s.b, s.h, s.w, s.f, s.c}), {0, 4, 3, 1, 2});
}

Tensor reshape_spatial(const Tensor& z) {
  const auto s = VideoShape::of(z);
  return permute(z, {0, 2, 3, 4, 1}).reshape({s.b * s.f, s.h * s.w, s.c});
}

Tensor reshape_spatial(const LatentVideo& z) { return reshape_spatial(z.tensor()); }

Tensor from_spatial(const Tensor& seq, const VideoShape& s) {
  if (seq.dims() != Dims{s.b * s.f, s.h * s.w, s.c}) {
    throw ShapeError("spatial sequence " + dims_to_string(seq.dims()) + " does not match video " +
                     dims_to_string(s.dims()));
  }
  return permute(seq.reshape({s.b, s.f, s.h, s.w, s.c}), {0, 4, 1, 2, 3});
}

Tensor repeat_batch(const Tensor& e, std::int64_t repeats) {
  if (e.rank() != 3) throw ShapeError("repeat_batch expects [b, n, D]");
  const auto b = e.dim(0), n = e.dim(1), d = e.dim(2);
  // broadcast [b, 1, n, D] over [1, repeats, 1, 1]: multiplying by exactly 1 is exact.
  const Tensor tiled = mul(e.reshape({b, 1, n, d}), Tensor::full({1, repeats, 1, 1}, 1.0, e.dtype()));
  return tiled.reshape({b * repeats, n, d});
}

}  // namespace vcut
