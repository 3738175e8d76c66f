#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "vcut/numerics/tensor.hpp"

namespace vcut {

// Cosine similarity <a, b> / sqrt(<a, a> <b, b>) over flattened tensors.
// Equal inputs give exactly 1.
double cosine_similarity(const Tensor& a, const Tensor& b);
double cosine_probe(const Tensor& first, const Tensor& last);

// Consistency of a per-frame feature sequence [T, Dm]:
//   1/(T-1) sum_{t=2..T} 1/2 (<d_1, d_t> + <d_{t-1}, d_t>)
// on L2-normalized rows. With `reference` ([Dm] or [1, Dm]) it replaces d_1.
// Subject (DINO-style) and background (CLIP-style) features use the same
// functional; the named wrappers exist for call-site clarity.
double consistency_score(const Tensor& sequence, const Tensor* reference = nullptr);
double subject_consistency(const Tensor& sequence);
double video_image_subject_consistency(const Tensor& sequence, const Tensor& reference);
double background_consistency(const Tensor& sequence);
double video_image_background_consistency(const Tensor& sequence, const Tensor& reference);

// Predicts a held-out frame [H, W, ch] from its two neighbours.
using FrameInterpolator = std::function<Tensor(const Tensor& previous, const Tensor& next)>;
Tensor midpoint_interpolator(const Tensor& previous, const Tensor& next);

// frames [2n + 1, H, W, ch] with values in [lo, hi]. Drops the odd frames,
// predicts them from the even ones and returns 1 - MAE / (hi - lo) with MAE
// averaged over every pixel of every dropped frame, clamped to [0, 1].
double motion_smoothness(const Tensor& frames, double lo = 0.0, double hi = 1.0,
                         const FrameInterpolator& interpolator = midpoint_interpolator);

// Mean of the largest 5% (at least one) per-pixel flow magnitudes pooled over
// every frame pair of one flow field [T-1, H, W, 2].
double pooled_flow_magnitude(const Tensor& flow);
// Fraction of videos whose pooled magnitude exceeds `theta` pixels.
double dynamic_degree(const std::vector<Tensor>& flows, double theta = 1.0);

// Exhaustive block matching between consecutive frames of [T, H, W, ch].
// Each `block` x `block` tile gets the displacement within +-radius that
// minimizes the sum of absolute differences; ties keep the smaller shift.
// Returns [T-1, H, W, 2] with (u, v) = (dx, dy) in pixels.
Tensor block_matching_flow(const Tensor& frames, int block = 4, int radius = 2);

}  // namespace vcut
