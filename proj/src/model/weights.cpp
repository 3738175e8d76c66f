#include "vcut/model/weights.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "vcut/numerics/rng.hpp"
#include "vcut/numerics/vten.hpp"

namespace vcut {

namespace {

struct Allocator {
  const ModelSpec& spec;
  DType dtype;

  Tensor zeros(Dims dims) const { return Tensor(std::move(dims), dtype); }
  Linear linear(std::int64_t in, std::int64_t out) const { return {zeros({in, out}), zeros({out})}; }
  Norm norm(std::int64_t c) const { return {zeros({c}), zeros({c})}; }
  Conv conv(std::int64_t out, std::int64_t in, std::int64_t k) const { return {zeros({out, in, k, k}), zeros({out})}; }
  Conv depthwise(std::int64_t c) const { return {zeros({c, 3}), zeros({c})}; }

  AttentionSite site(std::string id, AttentionKind kind, std::int64_t c, std::int64_t heads) const {
    AttentionSite s;
    s.id = std::move(id);
    s.kind = kind;
    s.channels = c;
    s.heads = heads;
    s.source_dim = is_cross(kind) ? spec.embed_dim : c;
    const auto src = s.key_input_dim();
    s.wq = zeros({c, c});
    s.bq = zeros({c});
    s.wk = zeros({src, c});
    s.bk = zeros({c});
    s.wv = zeros({src, c});
    s.bv = zeros({c});
    s.wo = zeros({c, c});
    s.bo = zeros({c});
    return s;
  }

  ResBlock res(std::int64_t in, std::int64_t out) const {
    const auto temb = spec.time_hidden_dim();
    ResBlock r;
    r.spatial.norm1 = norm(in);
    r.spatial.conv1 = conv(out, in, 3);
    r.spatial.time_proj = linear(temb, out);
    r.spatial.norm2 = norm(out);
    r.spatial.conv2 = conv(out, out, 3);
    if (in != out) r.spatial.shortcut = conv(out, in, 1);
    r.temporal.norm1 = norm(out);
    r.temporal.conv1 = depthwise(out);
    r.temporal.time_proj = linear(temb, out);
    r.temporal.norm2 = norm(out);
    r.temporal.conv2 = depthwise(out);
    return r;
  }

  FeedForward ff(std::int64_t c) const { return {linear(c, spec.ff_mult * c), linear(spec.ff_mult * c, c)}; }

  TransformerPair pair(const std::string& id, std::int64_t c, std::int64_t heads) const {
    TransformerPair p{id, {}, {}};
    p.spatial.norm_self = norm(c);
    p.spatial.self_attn = site(id + ".ssa", AttentionKind::kSSA, c, heads);
    if (spec.vcut_applied) {
      p.spatial.cross = FoldedAffine{id + ".sca", zeros({spec.embed_dim, c}), zeros({c})};
    } else {
      p.spatial.norm_cross = norm(c);
      p.spatial.cross = site(id + ".sca", AttentionKind::kSCA, c, heads);
    }
    p.spatial.norm_ff = norm(c);
    p.spatial.ff = ff(c);
    p.temporal.norm_self = norm(c);
    p.temporal.self_attn = site(id + ".tsa", AttentionKind::kTSA, c, heads);
    if (!spec.vcut_applied) {
      p.temporal.norm_cross = norm(c);
      p.temporal.cross = site(id + ".tca", AttentionKind::kTCA, c, heads);
    }
    p.temporal.norm_ff = norm(c);
    p.temporal.ff = ff(c);
    return p;
  }
};

}  // namespace

ModelWeights allocate_weights(const ModelSpec& spec, DType dtype) {
  spec.validate();
  const Allocator alloc{spec, dtype};
  const auto n_levels = spec.levels.size();
  const auto c0 = spec.levels.front().channels;

  ModelWeights w;
  w.dtype = dtype;
  w.conv_in = alloc.conv(c0, spec.latent_channels, 3);
  w.time_mlp1 = alloc.linear(spec.time_embed_dim, spec.time_hidden_dim());
  w.time_mlp2 = alloc.linear(spec.time_hidden_dim(), spec.time_hidden_dim());

  std::vector<std::int64_t> skips{c0};
  std::int64_t ch = c0;
  for (std::size_t i = 0; i < n_levels; ++i) {
    const auto& lv = spec.levels[i];
    auto& level = w.encoder.emplace_back();
    for (int j = 0; j < lv.blocks; ++j) {
      UnetLayer layer{alloc.res(ch, lv.channels), std::nullopt};
      if (lv.attention) {
        layer.attn = alloc.pair("enc" + std::to_string(i) + "." + std::to_string(j), lv.channels, spec.heads_for(i));
      }
      level.push_back(std::move(layer));
      ch = lv.channels;
      skips.push_back(ch);
    }
    if (i + 1 < n_levels) {
      w.downsamplers.push_back(alloc.conv(ch, ch, 3));
      skips.push_back(ch);
    }
  }

  w.mid_res1 = alloc.res(ch, ch);
  if (spec.mid_attention) w.mid_attn = alloc.pair("mid", ch, spec.heads_for(n_levels - 1));
  w.mid_res2 = alloc.res(ch, ch);

  for (std::size_t r = 0; r < n_levels; ++r) {
    const std::size_t i = n_levels - 1 - r;
    const auto& lv = spec.levels[i];
    auto& level = w.decoder.emplace_back();
    for (int j = 0; j <= lv.blocks; ++j) {
      const auto skip = skips.back();
      skips.pop_back();
      UnetLayer layer{alloc.res(ch + skip, lv.channels), std::nullopt};
      if (lv.attention) {
        layer.attn = alloc.pair("dec" + std::to_string(r) + "." + std::to_string(j), lv.channels, spec.heads_for(i));
      }
      level.push_back(std::move(layer));
      ch = lv.channels;
    }
    if (i > 0) w.upsamplers.push_back(alloc.conv(ch, ch, 3));
  }
  w.norm_out = alloc.norm(ch);
  w.conv_out = alloc.conv(spec.latent_channels, ch, 3);
  return w;
}

Model init_model(const ModelSpec& spec, std::uint64_t seed, DType dtype) {
  Model model{spec, allocate_weights(spec, dtype)};
  Rng rng(seed);
  visit_parameters(model.weights, [&](const ParamInfo& info, Tensor& t) {
    switch (info.role) {
      case ParamRole::kWeight:
      case ParamRole::kBias: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(info.fan_in));
        t = rng_uniform(rng, -bound, bound, t.dims(), dtype);
        break;
      }
      case ParamRole::kNormGain: t = Tensor::full(t.dims(), 1.0, dtype); break;
      case ParamRole::kNormBias: t = Tensor(t.dims(), dtype); break;
    }
  });
  return model;
}

std::int64_t count_parameters(const ModelWeights& weights) {
  std::int64_t total = 0;
  visit_parameters(weights, [&](const ParamInfo&, const Tensor& t) { total += t.numel(); });
  return total;
}

std::vector<const TransformerPair*> transformer_sites(const ModelWeights& weights) {
  std::vector<const TransformerPair*> out;
  for (const auto& level : weights.encoder) {
    for (const auto& layer : level) {
      if (layer.attn) out.push_back(&*layer.attn);
    }
  }
  if (weights.mid_attn) out.push_back(&*weights.mid_attn);
  for (const auto& level : weights.decoder) {
    for (const auto& layer : level) {
      if (layer.attn) out.push_back(&*layer.attn);
    }
  }
  return out;
}

void save_model(const std::filesystem::path& dir, const Model& model) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json tensors = nlohmann::json::array();
  visit_parameters(model.weights, [&](const ParamInfo& info, const Tensor& t) {
    const std::string file = info.name + ".vten";
    write_vten(dir / file, t);
    tensors.push_back({{"name", info.name}, {"file", file}, {"dims", t.dims()}});
  });
  const nlohmann::json manifest = {{"format", "vcut-weights"},
                                   {"version", 1},
                                   {"dtype", to_string(model.weights.dtype)},
                                   {"parameter_count", count_parameters(model.weights)},
                                   {"spec", to_json(model.spec)},
                                   {"tensors", tensors}};
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
}

Model load_model(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("no manifest.json in " + dir.string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "vcut-weights") throw IoError(dir.string() + " is not a vcut weight directory");

  const ModelSpec spec = model_spec_from_json(manifest.at("spec"));
  const DType dtype = parse_dtype(manifest.at("dtype").get<std::string>());
  Model model{spec, allocate_weights(spec, dtype)};

  std::map<std::string, std::string> files;
  for (const auto& entry : manifest.at("tensors")) {
    files[entry.at("name").get<std::string>()] = entry.at("file").get<std::string>();
  }
  std::set<std::string> used;
  visit_parameters(model.weights, [&](const ParamInfo& info, Tensor& t) {
    const auto it = files.find(info.name);
    if (it == files.end()) throw IoError("manifest is missing tensor " + info.name);
    Tensor loaded = read_vten(dir / it->second);
    if (loaded.dims() != t.dims() || loaded.dtype() != dtype) {
      throw IoError("tensor " + info.name + " has dims " + dims_to_string(loaded.dims()) + " (" +
                    to_string(loaded.dtype()) + "), expected " + dims_to_string(t.dims()) + " (" + to_string(dtype) +
                    ")");
    }
    t = std::move(loaded);
    used.insert(info.name);
  });
  if (used.size() != files.size()) throw IoError("manifest lists tensors the spec does not use");
  return model;
}

}  // namespace vcut
