#pragma once

#include <cstdint>

#include "vcut/numerics/tensor.hpp"

namespace vcut {

struct VideoShape {
  std::int64_t b = 1, c = 1, f = 1, h = 1, w = 1;

  static VideoShape of(const Tensor& t);
  Dims dims() const { return {b, c, f, h, w}; }
  bool operator==(const VideoShape&) const = default;
};

// Diffusion state z laid out [b, c, f, h, w].
class LatentVideo {
 public:
  explicit LatentVideo(Tensor values);

  const Tensor& tensor() const { return values_; }
  VideoShape shape() const { return VideoShape::of(values_); }
  DType dtype() const { return values_.dtype(); }

 private:
  Tensor values_;
};

// Globally pooled conditioning embedding [b, 1, D]; either the image
// embedding or the unconditional (null) one.
class ImageEmbedding {
 public:
  static ImageEmbedding conditional(Tensor values);
  // The null embedding is the zero tensor.
  static ImageEmbedding null(std::int64_t batch, std::int64_t dim, DType dtype);

  const Tensor& tensor() const { return values_; }
  std::int64_t batch() const { return values_.dim(0); }
  std::int64_t dim() const { return values_.dim(2); }
  bool is_null() const { return null_; }

 private:
  ImageEmbedding(Tensor values, bool is_null);
  Tensor values_;
  bool null_;
};

// [b, c, f, h, w] -> [b*h*w, f, c]: pixels join the batch, frames form the sequence.
Tensor reshape_temporal(const Tensor& z);
Tensor reshape_temporal(const LatentVideo& z);
Tensor from_temporal(const Tensor& seq, const VideoShape& shape);

// [b, c, f, h, w] -> [b*f, h*w, c]: frames join the batch, pixels form the sequence.
Tensor reshape_spatial(const Tensor& z);
Tensor reshape_spatial(const LatentVideo& z);
Tensor from_spatial(const Tensor& seq, const VideoShape& shape);

// e [b, 1, D] -> [b*repeats, 1, D], each batch row repeated consecutively to
// line up with the sequence batches produced by the reshapes above.
Tensor repeat_batch(const Tensor& e, std::int64_t repeats);

}  // namespace vcut
