#pragma once

#include "vcut/model/video.hpp"
#include "vcut/model/weights.hpp"
#include "vcut/surgery/folded_affine.hpp"

namespace vcut {

enum class ForwardMode {
  // Every SCA and TCA evaluated as attention.
  kBaseline,
  // TCA dropped; SCA evaluated by whatever the slot holds (attention before
  // surgery, the folded map after), from the embedding on every call.
  kModified,
  // TCA dropped; SCA replaced by precomputed per-site rows.
  kVcutCached,
};

std::string to_string(ForwardMode mode);

struct ForwardOptions {
  // Modified mode only: add each TCA site's constant output back in, which
  // must reproduce the baseline output.
  bool retain_tca_constant = false;
};

// Sinusoidal embedding [1, dim] of a scalar timestep (cos half first).
Tensor timestep_embedding(double timestep, std::int64_t dim, DType dtype);

// epsilon prediction with the same shape as z. `cached` must hold a row for
// every SCA site when mode == kVcutCached.
LatentVideo forward_unet(const Model& model, const LatentVideo& z, double timestep, const ImageEmbedding& e,
                         ForwardMode mode, const SiteVectors* cached = nullptr, const ForwardOptions& options = {});

}  // namespace vcut
