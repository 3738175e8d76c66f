#include "vcut/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "vcut/numerics/errors.hpp"

namespace vcut {

namespace {

double dot(const std::vector<double>& a, std::size_t ia, const std::vector<double>& b, std::size_t ib,
           std::int64_t n) {
  double s = 0.0;
  for (std::int64_t k = 0; k < n; ++k) s += a[ia + k] * b[ib + k];
  return s;
}

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + " contains non-finite values");
  }
}

double cosine_flat(const std::vector<double>& a, std::size_t ia, const std::vector<double>& b, std::size_t ib,
                   std::int64_t n) {
  const double aa = dot(a, ia, a, ia, n);
  const double bb = dot(b, ib, b, ib, n);
  if (aa == 0.0 || bb == 0.0) throw ArgumentError("cosine similarity of a zero vector is undefined");
  return dot(a, ia, b, ib, n) / std::sqrt(aa * bb);
}

}  // namespace

double cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw ShapeError("cosine operands differ in size: " + dims_to_string(a.dims()) + " vs " + dims_to_string(b.dims()));
  }
  const auto va = a.to_doubles();
  const auto vb = b.to_doubles();
  require_finite(va, "cosine operand");
  require_finite(vb, "cosine operand");
  return cosine_flat(va, 0, vb, 0, a.numel());
}

double cosine_probe(const Tensor& first, const Tensor& last) { return cosine_similarity(first, last); }

double consistency_score(const Tensor& sequence, const Tensor* reference) {
  if (sequence.rank() != 2) throw ShapeError("feature sequence must be [T, D], got " + dims_to_string(sequence.dims()));
  const auto T = sequence.dim(0);
  const auto D = sequence.dim(1);
  if (T < 2) throw ArgumentError("consistency needs at least two frames, got " + std::to_string(T));
  const auto rows = sequence.to_doubles();
  require_finite(rows, "feature sequence");

  std::vector<double> first(rows.begin(), rows.begin() + D);
  if (reference != nullptr) {
    if (reference->numel() != D) {
      throw ShapeError("reference has " + std::to_string(reference->numel()) + " features, sequence rows have " +
                       std::to_string(D));
    }
    first = reference->to_doubles();
    require_finite(first, "reference feature");
  }

  double total = 0.0;
  for (std::int64_t t = 1; t < T; ++t) {
    const auto cur = static_cast<std::size_t>(t * D);
    const auto prev = static_cast<std::size_t>((t - 1) * D);
    total += 0.5 * (cosine_flat(first, 0, rows, cur, D) + cosine_flat(rows, prev, rows, cur, D));
  }
  return total / static_cast<double>(T - 1);
}

double subject_consistency(const Tensor& sequence) { return consistency_score(sequence); }

double video_image_subject_consistency(const Tensor& sequence, const Tensor& reference) {
  return consistency_score(sequence, &reference);
}

double background_consistency(const Tensor& sequence) { return consistency_score(sequence); }

double video_image_background_consistency(const Tensor& sequence, const Tensor& reference) {
  return consistency_score(sequence, &reference);
}

Tensor midpoint_interpolator(const Tensor& previous, const Tensor& next) {
  if (previous.dims() != next.dims()) throw ShapeError("interpolator frames differ in shape");
  const auto a = previous.to_doubles();
  const auto b = next.to_doubles();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0.5 * (a[i] + b[i]);
  return Tensor(previous.dims(), std::move(out));
}

double motion_smoothness(const Tensor& frames, double lo, double hi, const FrameInterpolator& interpolator) {
  if (frames.rank() != 4) throw ShapeError("frames must be [T, H, W, ch], got " + dims_to_string(frames.dims()));
  if (!(hi > lo)) throw ArgumentError("value range needs hi > lo");
  const auto T = frames.dim(0);
  if (T < 3 || T % 2 == 0) {
    throw ArgumentError("motion smoothness needs an odd frame count >= 3, got " + std::to_string(T));
  }
  const auto all = frames.to_doubles();
  require_finite(all, "frames");
  const Dims frame_dims{frames.dim(1), frames.dim(2), frames.dim(3)};
  const auto per_frame = dims_numel(frame_dims);
  auto frame = [&](std::int64_t t) {
    const auto begin = all.begin() + t * per_frame;
    return Tensor(frame_dims, std::vector<double>(begin, begin + per_frame));
  };

  double abs_sum = 0.0;
  std::int64_t count = 0;
  for (std::int64_t t = 1; t < T; t += 2) {
    const Tensor predicted = interpolator(frame(t - 1), frame(t + 1));
    if (predicted.numel() != per_frame) throw ShapeError("interpolator returned a frame of the wrong size");
    const auto p = predicted.to_doubles();
    for (std::int64_t i = 0; i < per_frame; ++i) abs_sum += std::abs(p[i] - all[t * per_frame + i]);
    count += per_frame;
  }
  const double mae = abs_sum / static_cast<double>(count);
  return std::clamp(1.0 - mae / (hi - lo), 0.0, 1.0);
}

double pooled_flow_magnitude(const Tensor& flow) {
  if (flow.rank() != 4 || flow.dim(3) != 2) {
    throw ShapeError("flow field must be [T-1, H, W, 2], got " + dims_to_string(flow.dims()));
  }
  const auto v = flow.to_doubles();
  require_finite(v, "flow field");
  std::vector<double> mags(v.size() / 2);
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::hypot(v[2 * i], v[2 * i + 1]);
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(mags.size()))));
  std::partial_sort(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += mags[i];
  return sum / static_cast<double>(k);
}

double dynamic_degree(const std::vector<Tensor>& flows, double theta) {
  if (flows.empty()) throw ArgumentError("dynamic degree needs at least one video");
  std::size_t dynamic = 0;
  for (const auto& f : flows) dynamic += pooled_flow_magnitude(f) > theta ? 1 : 0;
  return static_cast<double>(dynamic) / static_cast<double>(flows.size());
}

Tensor block_matching_flow(const Tensor& frames, int block, int radius) {
  if (frames.rank() != 4) throw ShapeError("frames must be [T, H, W, ch], got " + dims_to_string(frames.dims()));
  if (block < 1 || radius < 0) throw ArgumentError("block matching needs block >= 1 and radius >= 0");
  const auto T = frames.dim(0), H = frames.dim(1), W = frames.dim(2), C = frames.dim(3);
  if (T < 2) throw ArgumentError("flow needs at least two frames");
  const auto px = frames.to_doubles();
  require_finite(px, "frames");
  auto at = [&](std::int64_t t, std::int64_t y, std::int64_t x, std::int64_t c) {
    return px[static_cast<std::size_t>(((t * H + y) * W + x) * C + c)];
  };

  std::vector<double> flow(static_cast<std::size_t>((T - 1) * H * W * 2), 0.0);
  for (std::int64_t t = 0; t + 1 < T; ++t) {
    for (std::int64_t by = 0; by < H; by += block) {
      for (std::int64_t bx = 0; bx < W; bx += block) {
        const auto y1 = std::min(by + block, H), x1 = std::min(bx + block, W);
        double best = std::numeric_limits<double>::infinity();
        int best_dx = 0, best_dy = 0, best_norm = 0;
        for (int dy = -radius; dy <= radius; ++dy) {
          for (int dx = -radius; dx <= radius; ++dx) {
            if (by + dy < 0 || y1 + dy > H || bx + dx < 0 || x1 + dx > W) continue;
            double sad = 0.0;
            for (auto y = by; y < y1; ++y) {
              for (auto x = bx; x < x1; ++x) {
                for (std::int64_t c = 0; c < C; ++c) sad += std::abs(at(t + 1, y + dy, x + dx, c) - at(t, y, x, c));
              }
            }
            const int norm = dx * dx + dy * dy;
            if (sad < best || (sad == best && norm < best_norm)) {
              best = sad;
              best_dx = dx;
              best_dy = dy;
              best_norm = norm;
            }
          }
        }
        for (auto y = by; y < y1; ++y) {
          for (auto x = bx; x < x1; ++x) {
            const auto i = static_cast<std::size_t>(((t * H + y) * W + x) * 2);
            flow[i] = best_dx;
            flow[i + 1] = best_dy;
          }
        }
      }
    }
  }
  return Tensor({T - 1, H, W, 2}, std::move(flow));
}

}  // namespace vcut
