#pragma once

// Implementation of visit_parameters(); included from weights.hpp.

namespace vcut::detail {

template <typename L, typename Fn>
void visit_linear(L& layer, const std::string& name, Fn& fn) {
  const auto fan_in = layer.weight.dim(0);
  fn(ParamInfo{name + ".weight", ParamRole::kWeight, fan_in}, layer.weight);
  fn(ParamInfo{name + ".bias", ParamRole::kBias, fan_in}, layer.bias);
}

template <typename C, typename Fn>
void visit_conv(C& conv, const std::string& name, Fn& fn) {
  const auto fan_in = conv.weight.numel() / conv.weight.dim(0);
  fn(ParamInfo{name + ".weight", ParamRole::kWeight, fan_in}, conv.weight);
  fn(ParamInfo{name + ".bias", ParamRole::kBias, fan_in}, conv.bias);
}

template <typename N, typename Fn>
void visit_norm(N& norm, const std::string& name, Fn& fn) {
  const auto width = norm.gain.dim(0);
  fn(ParamInfo{name + ".gain", ParamRole::kNormGain, width}, norm.gain);
  fn(ParamInfo{name + ".bias", ParamRole::kNormBias, width}, norm.bias);
}

template <typename S, typename Fn>
void visit_site(S& site, const std::string& name, Fn& fn) {
  const auto c = site.channels;
  const auto src = site.key_input_dim();
  fn(ParamInfo{name + ".wq", ParamRole::kWeight, c}, site.wq);
  fn(ParamInfo{name + ".bq", ParamRole::kBias, c}, site.bq);
  fn(ParamInfo{name + ".wk", ParamRole::kWeight, src}, site.wk);
  fn(ParamInfo{name + ".bk", ParamRole::kBias, src}, site.bk);
  fn(ParamInfo{name + ".wv", ParamRole::kWeight, src}, site.wv);
  fn(ParamInfo{name + ".bv", ParamRole::kBias, src}, site.bv);
  fn(ParamInfo{name + ".wo", ParamRole::kWeight, c}, site.wo);
  fn(ParamInfo{name + ".bo", ParamRole::kBias, c}, site.bo);
}

template <typename F, typename Fn>
void visit_fold(F& fold, const std::string& name, Fn& fn) {
  const auto fan_in = fold.weight.dim(0);
  fn(ParamInfo{name + ".fold.weight", ParamRole::kWeight, fan_in}, fold.weight);
  fn(ParamInfo{name + ".fold.bias", ParamRole::kBias, fan_in}, fold.bias);
}

template <typename FF, typename Fn>
void visit_ff(FF& ff, const std::string& name, Fn& fn) {
  visit_linear(ff.up, name + ".up", fn);
  visit_linear(ff.down, name + ".down", fn);
}

template <typename R, typename Fn>
void visit_res(R& res, const std::string& name, Fn& fn) {
  const std::string s = name + ".spatial";
  visit_norm(res.spatial.norm1, s + ".norm1", fn);
  visit_conv(res.spatial.conv1, s + ".conv1", fn);
  visit_linear(res.spatial.time_proj, s + ".time_proj", fn);
  visit_norm(res.spatial.norm2, s + ".norm2", fn);
  visit_conv(res.spatial.conv2, s + ".conv2", fn);
  if (res.spatial.shortcut) visit_conv(*res.spatial.shortcut, s + ".shortcut", fn);
  const std::string t = name + ".temporal";
  visit_norm(res.temporal.norm1, t + ".norm1", fn);
  visit_conv(res.temporal.conv1, t + ".conv1", fn);
  visit_linear(res.temporal.time_proj, t + ".time_proj", fn);
  visit_norm(res.temporal.norm2, t + ".norm2", fn);
  visit_conv(res.temporal.conv2, t + ".conv2", fn);
}

template <typename P, typename Fn>
void visit_pair(P& pair, Fn& fn) {
  const std::string s = pair.id + ".spatial";
  visit_norm(pair.spatial.norm_self, s + ".norm_self", fn);
  visit_site(pair.spatial.self_attn, pair.spatial.self_attn.id, fn);
  if (pair.spatial.norm_cross) visit_norm(*pair.spatial.norm_cross, s + ".norm_cross", fn);
  std::visit(
      [&](auto& slot) {
        using Slot = std::decay_t<decltype(slot)>;
        if constexpr (std::is_same_v<Slot, AttentionSite>) {
          visit_site(slot, slot.id, fn);
        } else {
          visit_fold(slot, slot.site_id, fn);
        }
      },
      pair.spatial.cross);
  visit_norm(pair.spatial.norm_ff, s + ".norm_ff", fn);
  visit_ff(pair.spatial.ff, s + ".ff", fn);

  const std::string t = pair.id + ".temporal";
  visit_norm(pair.temporal.norm_self, t + ".norm_self", fn);
  visit_site(pair.temporal.self_attn, pair.temporal.self_attn.id, fn);
  if (pair.temporal.norm_cross) visit_norm(*pair.temporal.norm_cross, t + ".norm_cross", fn);
  if (pair.temporal.cross) visit_site(*pair.temporal.cross, pair.temporal.cross->id, fn);
  visit_norm(pair.temporal.norm_ff, t + ".norm_ff", fn);
  visit_ff(pair.temporal.ff, t + ".ff", fn);
}

template <typename Layers, typename Fn>
void visit_layers(Layers& levels, const std::string& prefix, Fn& fn) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    for (std::size_t j = 0; j < levels[i].size(); ++j) {
      auto& layer = levels[i][j];
      visit_res(layer.res, prefix + std::to_string(i) + "." + std::to_string(j) + ".res", fn);
      if (layer.attn) visit_pair(*layer.attn, fn);
    }
  }
}

}  // namespace vcut::detail

namespace vcut {

template <typename Weights, typename Fn>
void visit_parameters(Weights& w, Fn&& fn) {
  detail::visit_conv(w.conv_in, "conv_in", fn);
  detail::visit_linear(w.time_mlp1, "time_mlp1", fn);
  detail::visit_linear(w.time_mlp2, "time_mlp2", fn);
  detail::visit_layers(w.encoder, "enc", fn);
  for (std::size_t i = 0; i < w.downsamplers.size(); ++i) {
    detail::visit_conv(w.downsamplers[i], "down" + std::to_string(i), fn);
  }
  detail::visit_res(w.mid_res1, "mid.res1", fn);
  if (w.mid_attn) detail::visit_pair(*w.mid_attn, fn);
  detail::visit_res(w.mid_res2, "mid.res2", fn);
  detail::visit_layers(w.decoder, "dec", fn);
  for (std::size_t i = 0; i < w.upsamplers.size(); ++i) {
    detail::visit_conv(w.upsamplers[i], "up" + std::to_string(i), fn);
  }
  detail::visit_norm(w.norm_out, "norm_out", fn);
  detail::visit_conv(w.conv_out, "conv_out", fn);
}

}  // namespace vcut
