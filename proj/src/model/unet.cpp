#include "vcut/model/unet.hpp"

#include <cmath>
#include <vector>

#include "vcut/numerics/ops.hpp"

namespace vcut {

std::string to_string(ForwardMode mode) {
  switch (mode) {
    case ForwardMode::kBaseline: return "baseline";
    case ForwardMode::kModified: return "modified";
    case ForwardMode::kVcutCached: return "vcut-cached";
  }
  return "?";
}

Tensor timestep_embedding(double timestep, std::int64_t dim, DType dtype) {
  const std::int64_t half = dim / 2;
  std::vector<double> values(static_cast<std::size_t>(dim), 0.0);
  for (std::int64_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    values[static_cast<std::size_t>(i)] = std::cos(timestep * freq);
    values[static_cast<std::size_t>(half + i)] = std::sin(timestep * freq);
  }
  return Tensor::from_values({1, dim}, values, dtype);
}

namespace {

struct Context {
  const Model& model;
  const ImageEmbedding& embedding;
  ForwardMode mode;
  const SiteVectors* cached;
  const ForwardOptions& options;
  Tensor temb;  // [b, temb_dim], already passed through SiLU
};

// LayerNorm over the channel axis of [b, c, f, h, w].
Tensor channel_norm(const Tensor& x, const Norm& n) {
  return permute(layer_norm(permute(x, {0, 2, 3, 4, 1}), n.gain, n.bias), {0, 4, 1, 2, 3});
}

Tensor conv_frames(const Tensor& x, const Conv& conv, int stride) {
  const auto s = VideoShape::of(x);
  const auto k = conv.weight.dim(2);
  const Tensor frames = permute(x, {0, 2, 1, 3, 4}).reshape({s.b * s.f, s.c, s.h, s.w});
  const Tensor y = conv2d(frames, conv.weight, conv.bias, stride, static_cast<int>(k / 2));
  return permute(y.reshape({s.b, s.f, y.dim(1), y.dim(2), y.dim(3)}), {0, 2, 1, 3, 4});
}

Tensor conv_time(const Tensor& x, const Conv& conv) {
  const auto s = VideoShape::of(x);
  return depthwise_conv1d(x.reshape({s.b, s.c, s.f, s.h * s.w}), conv.weight, conv.bias).reshape(x.dims());
}

Tensor add_time(const Tensor& x, const Tensor& temb, const Linear& proj) {
  const Tensor t = affine(temb, proj.weight, proj.bias);
  return add(x, t.reshape({t.dim(0), t.dim(1), 1, 1, 1}));
}

Tensor run_res(const Tensor& x, const ResBlock& block, const Context& ctx) {
  const auto& sp = block.spatial;
  Tensor h = conv_frames(silu(channel_norm(x, sp.norm1)), sp.conv1, 1);
  h = add_time(h, ctx.temb, sp.time_proj);
  h = conv_frames(silu(channel_norm(h, sp.norm2)), sp.conv2, 1);
  const Tensor skip = sp.shortcut ? conv_frames(x, *sp.shortcut, 1) : x;
  Tensor y = add(skip, h);

  const auto& tp = block.temporal;
  Tensor t = conv_time(silu(channel_norm(y, tp.norm1)), tp.conv1);
  t = add_time(t, ctx.temb, tp.time_proj);
  t = conv_time(silu(channel_norm(t, tp.norm2)), tp.conv2);
  return add(y, t);
}

Tensor norm_last(const Tensor& x, const Norm& n) { return layer_norm(x, n.gain, n.bias); }

Tensor feed_forward(const Tensor& x, const FeedForward& ff) {
  return affine(gelu(affine(x, ff.up.weight, ff.up.bias)), ff.down.weight, ff.down.bias);
}

// Adds per-batch rows [b, c] to a sequence tensor [b * n, L, c].
Tensor add_rows(const Tensor& seq, const Tensor& rows) {
  const auto b = rows.dim(0);
  const auto c = rows.dim(1);
  if (seq.dim(2) != c || seq.dim(0) % b != 0) {
    throw StateError("conditioning rows " + dims_to_string(rows.dims()) + " do not match sequence " +
                     dims_to_string(seq.dims()));
  }
  return add(seq.reshape({b, seq.numel() / (b * c), c}), rows.reshape({b, 1, c})).reshape(seq.dims());
}

const Tensor& cached_row(const Context& ctx, const std::string& id) {
  if (ctx.cached == nullptr) throw StateError("vcut-cached forward needs a conditioner cache");
  const auto it = ctx.cached->find(id);
  if (it == ctx.cached->end()) throw StateError("conditioner cache has no entry for site " + id);
  return it->second;
}

Tensor run_spatial(const Tensor& x, const SpatialTransformer& tr, const Context& ctx) {
  const auto shape = VideoShape::of(x);
  Tensor s = reshape_spatial(x);
  s = add(s, self_attention(tr.self_attn, norm_last(s, tr.norm_self)));

  if (const auto* site = std::get_if<AttentionSite>(&tr.cross)) {
    if (ctx.mode == ForwardMode::kVcutCached) {
      s = add_rows(s, cached_row(ctx, site->id));
    } else {
      const Tensor e = repeat_batch(ctx.embedding.tensor(), shape.f);
      s = add(s, cross_attention(*site, norm_last(s, *tr.norm_cross), e));
    }
  } else {
    const auto& fold = std::get<FoldedAffine>(tr.cross);
    if (ctx.mode == ForwardMode::kBaseline) {
      throw StateError("baseline forward needs the original SCA site, found fold for " + fold.site_id);
    }
    if (ctx.mode == ForwardMode::kVcutCached) {
      s = add_rows(s, cached_row(ctx, fold.site_id));
    } else {
      s = add_rows(s, apply_folded(fold, ctx.embedding.tensor()));
    }
  }

  s = add(s, feed_forward(norm_last(s, tr.norm_ff), tr.ff));
  return from_spatial(s, shape);
}

Tensor run_temporal(const Tensor& x, const TemporalTransformer& tr, const Context& ctx) {
  const auto shape = VideoShape::of(x);
  Tensor t = reshape_temporal(x);
  t = add(t, self_attention(tr.self_attn, norm_last(t, tr.norm_self)));
  if (ctx.mode == ForwardMode::kBaseline) {
    if (!tr.cross) throw StateError("baseline forward needs TCA sites; the model has been transformed");
    const Tensor e = repeat_batch(ctx.embedding.tensor(), shape.h * shape.w);
    t = add(t, cross_attention(*tr.cross, norm_last(t, *tr.norm_cross), e));
  } else if (ctx.options.retain_tca_constant && tr.cross) {
    t = add_rows(t, apply_folded(compose_value_output(*tr.cross), ctx.embedding.tensor()));
  }
  t = add(t, feed_forward(norm_last(t, tr.norm_ff), tr.ff));
  return from_temporal(t, shape);
}

Tensor run_pair(const Tensor& x, const TransformerPair& pair, const Context& ctx) {
  return run_temporal(run_spatial(x, pair.spatial, ctx), pair.temporal, ctx);
}

Tensor run_layer(const Tensor& x, const UnetLayer& layer, const Context& ctx) {
  Tensor h = run_res(x, layer.res, ctx);
  if (layer.attn) h = run_pair(h, *layer.attn, ctx);
  return h;
}

Tensor upsample_frames(const Tensor& x) {
  const auto s = VideoShape::of(x);
  const Tensor frames = permute(x, {0, 2, 1, 3, 4}).reshape({s.b * s.f, s.c, s.h, s.w});
  const Tensor up = upsample_nearest2x(frames);
  return permute(up.reshape({s.b, s.f, s.c, 2 * s.h, 2 * s.w}), {0, 2, 1, 3, 4});
}

}  // namespace

LatentVideo forward_unet(const Model& model, const LatentVideo& z, double timestep, const ImageEmbedding& e,
                         ForwardMode mode, const SiteVectors* cached, const ForwardOptions& options) {
  const auto& spec = model.spec;
  const auto& w = model.weights;
  const auto shape = z.shape();
  if (z.dtype() != w.dtype || e.tensor().dtype() != w.dtype) {
    throw ArgumentError("forward_unet: latent, embedding and weights must share a dtype");
  }
  if (shape.c != spec.latent_channels) {
    throw ShapeError("latent has " + std::to_string(shape.c) + " channels, model expects " +
                     std::to_string(spec.latent_channels));
  }
  if (e.batch() != shape.b || e.dim() != spec.embed_dim) {
    throw ShapeError("embedding " + dims_to_string(e.tensor().dims()) + " does not match batch " +
                     std::to_string(shape.b) + " and embed_dim " + std::to_string(spec.embed_dim));
  }
  spec.check_resolution(shape.h, shape.w);
  if (mode == ForwardMode::kBaseline && spec.vcut_applied) {
    throw StateError("baseline forward is unavailable on a VCUT-transformed model");
  }
  if (mode == ForwardMode::kVcutCached && cached == nullptr) {
    throw StateError("vcut-cached forward needs a conditioner cache");
  }

  Tensor temb = timestep_embedding(timestep, spec.time_embed_dim, w.dtype);
  temb = affine(silu(affine(temb, w.time_mlp1.weight, w.time_mlp1.bias)), w.time_mlp2.weight, w.time_mlp2.bias);
  temb = silu(mul(temb, Tensor::full({shape.b, 1}, 1.0, w.dtype)));

  const Context ctx{model, e, mode, cached, options, std::move(temb)};

  Tensor h = conv_frames(z.tensor(), w.conv_in, 1);
  std::vector<Tensor> skips{h};
  for (std::size_t i = 0; i < w.encoder.size(); ++i) {
    for (const auto& layer : w.encoder[i]) {
      h = run_layer(h, layer, ctx);
      skips.push_back(h);
    }
    if (i < w.downsamplers.size()) {
      h = conv_frames(h, w.downsamplers[i], 2);
      skips.push_back(h);
    }
  }

  h = run_res(h, w.mid_res1, ctx);
  if (w.mid_attn) h = run_pair(h, *w.mid_attn, ctx);
  h = run_res(h, w.mid_res2, ctx);

  for (std::size_t r = 0; r < w.decoder.size(); ++r) {
    for (const auto& layer : w.decoder[r]) {
      if (skips.empty()) throw StateError("skip stack exhausted in decoder level " + std::to_string(r));
      const Tensor skip = std::move(skips.back());
      skips.pop_back();
      const auto hs = VideoShape::of(h);
      const auto ss = VideoShape::of(skip);
      if (hs.b != ss.b || hs.f != ss.f || hs.h != ss.h || hs.w != ss.w) {
        throw StateError("decoder shape drift: " + dims_to_string(hs.dims()) + " vs skip " + dims_to_string(ss.dims()));
      }
      h = run_layer(concat({h, skip}, 1), layer, ctx);
    }
    if (r < w.upsamplers.size()) h = conv_frames(upsample_frames(h), w.upsamplers[r], 1);
  }
  if (!skips.empty()) throw StateError("unconsumed skip connections after decoder");

  Tensor out = conv_frames(silu(channel_norm(h, w.norm_out)), w.conv_out, 1);
  if (VideoShape::of(out) != shape) {
    throw StateError("forward output " + dims_to_string(out.dims()) + " does not match input " +
                     dims_to_string(shape.dims()));
  }
  return LatentVideo(std::move(out));
}

}  // namespace vcut
