#include "vcut/costmodel/arch.hpp"

#include <fstream>

#include "vcut/numerics/errors.hpp"

namespace vcut {

std::string to_string(LayerType type) {
  switch (type) {
    case LayerType::kAttention: return "attention";
    case LayerType::kFolded: return "folded";
    case LayerType::kAffine: return "affine";
    case LayerType::kConv: return "conv";
    case LayerType::kNorm: return "norm";
    case LayerType::kScalar: return "scalar";
  }
  return "?";
}

LayerType parse_layer_type(const std::string& name) {
  for (auto t : {LayerType::kAttention, LayerType::kFolded, LayerType::kAffine, LayerType::kConv, LayerType::kNorm,
                 LayerType::kScalar}) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown layer type '" + name + "'");
}

std::string to_string(MacConvention convention) {
  return convention == MacConvention::kFull ? "full" : "module-hook";
}

MacConvention parse_mac_convention(const std::string& name) {
  if (name == "full") return MacConvention::kFull;
  if (name == "module-hook") return MacConvention::kModuleHook;
  throw ArgumentError("unknown MAC convention '" + name + "' (expected full or module-hook)");
}

void ArchSpec::validate() const {
  if (batch < 1 || frames < 1) throw ConfigError("arch '" + name + "': batch and frames must be >= 1");
  for (const auto& l : layers) {
    const auto where = "arch '" + name + "', layer '" + l.name + "': ";
    if (l.positions < 1) throw ConfigError(where + "positions must be >= 1");
    switch (l.type) {
      case LayerType::kAttention:
      case LayerType::kFolded:
        if (l.channels < 1 || l.source_dim < 1 || l.heads < 1) throw ConfigError(where + "extents must be positive");
        if (l.channels % l.heads != 0) throw ConfigError(where + "channels not divisible by heads");
        if (!is_cross(l.kind) && l.source_dim != l.channels) {
          throw ConfigError(where + "self-attention source width must equal channels");
        }
        if (l.type == LayerType::kFolded && !is_cross(l.kind)) throw ConfigError(where + "only cross sites fold");
        break;
      case LayerType::kAffine:
      case LayerType::kConv:
        if (l.in < 1 || l.out < 1 || l.kernel < 1 || l.groups < 1) throw ConfigError(where + "extents must be positive");
        if (l.in % l.groups != 0) throw ConfigError(where + "input channels not divisible by groups");
        break;
      case LayerType::kNorm:
        if (l.in < 1) throw ConfigError(where + "norm width must be positive");
        break;
      case LayerType::kScalar:
        if (l.count < 0) throw ConfigError(where + "negative parameter count");
        break;
    }
  }
}

namespace {

std::int64_t tokens(const ArchLayer& l, std::int64_t batch, std::int64_t frames) {
  return l.positions * (l.per_frame ? frames : 1) * (l.batched ? batch : 1);
}

}  // namespace

AttentionGeometry attention_geometry(const ArchLayer& l, std::int64_t batch, std::int64_t frames) {
  AttentionGeometry g;
  if (is_temporal(l.kind)) {
    g.sequences = batch * l.positions;
    g.query_length = frames;
  } else {
    g.sequences = batch * frames;
    g.query_length = l.positions;
  }
  g.key_length = is_cross(l.kind) ? 1 : g.query_length;
  return g;
}

std::int64_t layer_macs(const ArchLayer& l, std::int64_t batch, std::int64_t frames, MacConvention convention) {
  switch (l.type) {
    case LayerType::kAttention: {
      const auto g = attention_geometry(l, batch, frames);
      const auto c = l.channels;
      std::int64_t per_seq = 2 * g.query_length * c * c + 2 * g.key_length * l.source_dim * c;
      if (convention == MacConvention::kFull) {
        const auto dk = c / l.heads;
        per_seq += 2 * l.heads * g.query_length * g.key_length * dk;
      }
      return g.sequences * per_seq;
    }
    case LayerType::kFolded: return 0;  // cached row, added per token
    case LayerType::kAffine: return tokens(l, batch, frames) * l.in * l.out;
    case LayerType::kConv: return tokens(l, batch, frames) * (l.in / l.groups) * l.out * l.kernel;
    case LayerType::kNorm:
    case LayerType::kScalar: return 0;
  }
  return 0;
}

std::int64_t layer_params(const ArchLayer& l) {
  switch (l.type) {
    case LayerType::kAttention: {
      const auto c = l.channels;
      std::int64_t p = c * c + 2 * l.source_dim * c + c * c;
      if (l.qkv_bias) p += 3 * c;
      if (l.out_bias) p += c;
      if (l.has_norm) p += 2 * c;
      return p;
    }
    case LayerType::kFolded: return l.source_dim * l.channels + l.channels;
    case LayerType::kAffine:
    case LayerType::kConv: return (l.in / l.groups) * l.out * l.kernel + (l.bias ? l.out : 0);
    case LayerType::kNorm: return 2 * l.in;
    case LayerType::kScalar: return l.count;
  }
  return 0;
}

std::int64_t count_macs(const ArchSpec& arch, MacConvention convention, std::int64_t frames) {
  const auto f = frames > 0 ? frames : arch.frames;
  std::int64_t total = 0;
  for (const auto& l : arch.layers) total += layer_macs(l, arch.batch, f, convention);
  return total;
}

std::int64_t count_params(const ArchSpec& arch) {
  std::int64_t total = 0;
  for (const auto& l : arch.layers) total += layer_params(l);
  return total;
}

namespace {

std::string group_of(const ArchLayer& l) {
  switch (l.type) {
    case LayerType::kAttention: {
      auto s = to_string(l.kind);
      for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      return s;
    }
    case LayerType::kFolded: return "folded";
    case LayerType::kConv: return "conv";
    default: return "affine";
  }
}

}  // namespace

std::map<std::string, std::int64_t> macs_by_group(const ArchSpec& arch, MacConvention convention,
                                                  std::int64_t frames) {
  const auto f = frames > 0 ? frames : arch.frames;
  std::map<std::string, std::int64_t> out;
  for (const auto& l : arch.layers) out[group_of(l)] += layer_macs(l, arch.batch, f, convention);
  return out;
}

std::map<std::string, std::int64_t> params_by_group(const ArchSpec& arch) {
  std::map<std::string, std::int64_t> out;
  for (const auto& l : arch.layers) out[group_of(l)] += layer_params(l);
  return out;
}

ArchSpec remove_attention(const ArchSpec& arch, AttentionKind kind) {
  ArchSpec out = arch;
  out.layers.clear();
  for (const auto& l : arch.layers) {
    if (l.type == LayerType::kAttention && l.kind == kind) continue;
    out.layers.push_back(l);
  }
  return out;
}

ArchSpec vcut_arch(const ArchSpec& arch) {
  if (count_folded(arch) > 0) throw TransformError("arch '" + arch.name + "' already has folded sites");
  ArchSpec out = remove_attention(arch, AttentionKind::kTCA);
  out.name = arch.name + "+vcut";
  for (auto& l : out.layers) {
    if (l.type == LayerType::kAttention && l.kind == AttentionKind::kSCA) {
      l.type = LayerType::kFolded;
      l.has_norm = false;
    }
  }
  return out;
}

std::int64_t count_sites(const ArchSpec& arch, AttentionKind kind) {
  std::int64_t n = 0;
  for (const auto& l : arch.layers) n += (l.type == LayerType::kAttention && l.kind == kind) ? 1 : 0;
  return n;
}

std::int64_t count_folded(const ArchSpec& arch) {
  std::int64_t n = 0;
  for (const auto& l : arch.layers) n += l.type == LayerType::kFolded ? 1 : 0;
  return n;
}

std::int64_t conditioner_macs(const ArchSpec& arch) {
  std::int64_t total = 0;
  for (const auto& l : arch.layers) {
    if (l.type == LayerType::kFolded) total += arch.batch * l.source_dim * l.channels;
  }
  return total;
}

namespace {

struct Builder {
  ArchSpec& arch;

  ArchLayer& push(LayerType type, std::string name) {
    auto& l = arch.layers.emplace_back();
    l.type = type;
    l.name = std::move(name);
    return l;
  }
  void affine(const std::string& name, std::int64_t in, std::int64_t out, std::int64_t positions, bool per_frame,
              bool batched = true) {
    auto& l = push(LayerType::kAffine, name);
    l.in = in;
    l.out = out;
    l.positions = positions;
    l.per_frame = per_frame;
    l.batched = batched;
  }
  void conv(const std::string& name, std::int64_t in, std::int64_t out, std::int64_t kernel, std::int64_t positions,
            std::int64_t groups = 1) {
    auto& l = push(LayerType::kConv, name);
    l.in = in;
    l.out = out;
    l.kernel = kernel;
    l.groups = groups;
    l.positions = positions;
  }
  void norm(const std::string& name, std::int64_t width) { push(LayerType::kNorm, name).in = width; }
  void scalar(const std::string& name, std::int64_t count) { push(LayerType::kScalar, name).count = count; }
  void attention(const std::string& name, AttentionKind kind, std::int64_t c, std::int64_t heads, std::int64_t source,
                 std::int64_t positions, bool qkv_bias) {
    auto& l = push(LayerType::kAttention, name);
    l.kind = kind;
    l.channels = c;
    l.heads = heads;
    l.source_dim = is_cross(kind) ? source : c;
    l.qkv_bias = qkv_bias;
    l.positions = positions;
  }
};

}  // namespace

ArchSpec arch_from_model_spec(const ModelSpec& spec) {
  spec.validate();
  ArchSpec arch;
  arch.name = spec.name;
  arch.batch = spec.batch;
  arch.frames = spec.frames;
  Builder b{arch};

  const auto n_levels = spec.levels.size();
  const auto temb = spec.time_hidden_dim();
  auto positions = [&](std::size_t level) { return (spec.height >> level) * (spec.width >> level); };

  auto res = [&](const std::string& name, std::int64_t in, std::int64_t out, std::int64_t pos) {
    b.norm(name + ".spatial.norm1", in);
    b.conv(name + ".spatial.conv1", in, out, 9, pos);
    b.affine(name + ".spatial.time_proj", temb, out, 1, false);
    b.norm(name + ".spatial.norm2", out);
    b.conv(name + ".spatial.conv2", out, out, 9, pos);
    if (in != out) b.conv(name + ".spatial.shortcut", in, out, 1, pos);
    b.norm(name + ".temporal.norm1", out);
    b.conv(name + ".temporal.conv1", out, out, 3, pos, out);
    b.affine(name + ".temporal.time_proj", temb, out, 1, false);
    b.norm(name + ".temporal.norm2", out);
    b.conv(name + ".temporal.conv2", out, out, 3, pos, out);
  };
  auto pair = [&](const std::string& id, std::int64_t c, std::int64_t heads, std::int64_t pos) {
    const auto hidden = spec.ff_mult * c;
    if (spec.vcut_applied) {
      b.attention(id + ".ssa", AttentionKind::kSSA, c, heads, c, pos, true);
      auto& fold = b.push(LayerType::kFolded, id + ".sca");
      fold.kind = AttentionKind::kSCA;
      fold.channels = c;
      fold.heads = heads;
      fold.source_dim = spec.embed_dim;
      fold.has_norm = false;
      fold.positions = pos;
    } else {
      b.attention(id + ".ssa", AttentionKind::kSSA, c, heads, c, pos, true);
      b.attention(id + ".sca", AttentionKind::kSCA, c, heads, spec.embed_dim, pos, true);
    }
    b.norm(id + ".spatial.norm_ff", c);
    b.affine(id + ".spatial.ff.up", c, hidden, pos, true);
    b.affine(id + ".spatial.ff.down", hidden, c, pos, true);
    b.attention(id + ".tsa", AttentionKind::kTSA, c, heads, c, pos, true);
    if (!spec.vcut_applied) b.attention(id + ".tca", AttentionKind::kTCA, c, heads, spec.embed_dim, pos, true);
    b.norm(id + ".temporal.norm_ff", c);
    b.affine(id + ".temporal.ff.up", c, hidden, pos, true);
    b.affine(id + ".temporal.ff.down", hidden, c, pos, true);
  };

  const auto c0 = spec.levels.front().channels;
  b.conv("conv_in", spec.latent_channels, c0, 9, positions(0));
  b.affine("time_mlp1", spec.time_embed_dim, temb, 1, false, false);
  b.affine("time_mlp2", temb, temb, 1, false, false);

  std::vector<std::int64_t> skips{c0};
  std::int64_t ch = c0;
  for (std::size_t i = 0; i < n_levels; ++i) {
    const auto& lv = spec.levels[i];
    for (int j = 0; j < lv.blocks; ++j) {
      const auto id = "enc" + std::to_string(i) + "." + std::to_string(j);
      res(id + ".res", ch, lv.channels, positions(i));
      if (lv.attention) pair(id, lv.channels, spec.heads_for(i), positions(i));
      ch = lv.channels;
      skips.push_back(ch);
    }
    if (i + 1 < n_levels) {
      b.conv("down" + std::to_string(i), ch, ch, 9, positions(i + 1));
      skips.push_back(ch);
    }
  }
  const auto deepest = positions(n_levels - 1);
  res("mid.res1", ch, ch, deepest);
  if (spec.mid_attention) pair("mid", ch, spec.heads_for(n_levels - 1), deepest);
  res("mid.res2", ch, ch, deepest);

  for (std::size_t r = 0; r < n_levels; ++r) {
    const std::size_t i = n_levels - 1 - r;
    const auto& lv = spec.levels[i];
    for (int j = 0; j <= lv.blocks; ++j) {
      const auto skip = skips.back();
      skips.pop_back();
      const auto id = "dec" + std::to_string(r) + "." + std::to_string(j);
      res(id + ".res", ch + skip, lv.channels, positions(i));
      if (lv.attention) pair(id, lv.channels, spec.heads_for(i), positions(i));
      ch = lv.channels;
    }
    if (i > 0) b.conv("up" + std::to_string(r), ch, ch, 9, positions(i - 1));
  }
  b.norm("norm_out", ch);
  b.conv("conv_out", ch, spec.latent_channels, 9, positions(0));
  arch.validate();
  return arch;
}

ArchSpec generate_unet_arch(const UnetArchConfig& cfg) {
  const auto n_levels = cfg.block_out_channels.size();
  if (n_levels == 0 || cfg.attention_heads.size() != n_levels || cfg.down_attention.size() != n_levels) {
    throw ConfigError("unet arch: block_out_channels, attention_heads and down_attention must have equal length");
  }
  if (cfg.height % cfg.downscale != 0 || cfg.width % cfg.downscale != 0) {
    throw ConfigError("unet arch: resolution not divisible by the latent downscale");
  }
  ArchSpec arch;
  arch.name = cfg.name;
  arch.batch = cfg.batch;
  arch.frames = cfg.frames;
  Builder b{arch};
  const auto temb = cfg.time_embed_dim;
  const auto D = cfg.cross_attention_dim;
  std::int64_t h = cfg.height / cfg.downscale;
  std::int64_t w = cfg.width / cfg.downscale;

  auto ff = [&](const std::string& name, std::int64_t c, std::int64_t pos) {
    const auto inner = cfg.ff_mult * c;
    b.affine(name + ".proj", c, cfg.ff_gated ? 2 * inner : inner, pos, true);
    b.affine(name + ".out", inner, c, pos, true);
  };
  auto res = [&](const std::string& name, std::int64_t in, std::int64_t out, std::int64_t pos) {
    b.norm(name + ".spatial.norm1", in);
    b.conv(name + ".spatial.conv1", in, out, 9, pos);
    b.affine(name + ".spatial.time_emb_proj", temb, out, 1, true);
    b.norm(name + ".spatial.norm2", out);
    b.conv(name + ".spatial.conv2", out, out, 9, pos);
    if (in != out) b.conv(name + ".spatial.conv_shortcut", in, out, 1, pos);
    b.norm(name + ".temporal.norm1", out);
    b.conv(name + ".temporal.conv1", out, out, 3, pos);
    b.affine(name + ".temporal.time_emb_proj", temb, out, 1, true);
    b.norm(name + ".temporal.norm2", out);
    b.conv(name + ".temporal.conv2", out, out, 3, pos);
    b.scalar(name + ".time_mixer", 1);
  };
  auto transformer = [&](const std::string& name, std::int64_t c, std::int64_t heads, std::int64_t pos) {
    b.norm(name + ".norm", c);
    b.affine(name + ".proj_in", c, c, pos, true);
    b.attention(name + ".ssa", AttentionKind::kSSA, c, heads, c, pos, false);
    b.attention(name + ".sca", AttentionKind::kSCA, c, heads, D, pos, false);
    b.norm(name + ".spatial.norm3", c);
    ff(name + ".spatial.ff", c, pos);
    b.affine(name + ".time_pos_embed.linear_1", c, 4 * c, 1, true);
    b.affine(name + ".time_pos_embed.linear_2", 4 * c, c, 1, true);
    b.norm(name + ".temporal.norm_in", c);
    ff(name + ".temporal.ff_in", c, pos);
    b.attention(name + ".tsa", AttentionKind::kTSA, c, heads, c, pos, false);
    b.attention(name + ".tca", AttentionKind::kTCA, c, heads, D, pos, false);
    b.norm(name + ".temporal.norm3", c);
    ff(name + ".temporal.ff", c, pos);
    b.scalar(name + ".time_mixer", 1);
    b.affine(name + ".proj_out", c, c, pos, true);
  };

  const auto c0 = cfg.block_out_channels.front();
  b.affine("time_embedding.linear_1", cfg.time_proj_dim, temb, 1, false);
  b.affine("time_embedding.linear_2", temb, temb, 1, false);
  b.affine("add_embedding.linear_1", cfg.addition_embed_dim, temb, 1, false);
  b.affine("add_embedding.linear_2", temb, temb, 1, false);
  b.conv("conv_in", cfg.in_channels, c0, 9, h * w);

  std::int64_t prev = c0;
  for (std::size_t i = 0; i < n_levels; ++i) {
    const auto c = cfg.block_out_channels[i];
    for (std::int64_t j = 0; j < cfg.layers_per_block; ++j) {
      const auto id = "down" + std::to_string(i) + "." + std::to_string(j);
      res(id + ".res", j == 0 ? prev : c, c, h * w);
      if (cfg.down_attention[i]) transformer(id + ".attn", c, cfg.attention_heads[i], h * w);
    }
    prev = c;
    if (i + 1 < n_levels) {
      h /= 2;
      w /= 2;
      b.conv("down" + std::to_string(i) + ".downsample", c, c, 9, h * w);
    }
  }
  const auto deep = cfg.block_out_channels.back();
  res("mid.res0", deep, deep, h * w);
  transformer("mid.attn", deep, cfg.attention_heads.back(), h * w);
  res("mid.res1", deep, deep, h * w);

  std::int64_t prev_out = deep;
  for (std::size_t r = 0; r < n_levels; ++r) {
    const std::size_t i = n_levels - 1 - r;
    const auto out = cfg.block_out_channels[i];
    const auto in = cfg.block_out_channels[i == 0 ? 0 : i - 1];
    for (std::int64_t j = 0; j <= cfg.layers_per_block; ++j) {
      const auto skip = j == cfg.layers_per_block ? in : out;
      const auto res_in = (j == 0 ? prev_out : out) + skip;
      const auto id = "up" + std::to_string(r) + "." + std::to_string(j);
      res(id + ".res", res_in, out, h * w);
      if (cfg.down_attention[i]) transformer(id + ".attn", out, cfg.attention_heads[i], h * w);
    }
    prev_out = out;
    if (r + 1 < n_levels) {
      h *= 2;
      w *= 2;
      b.conv("up" + std::to_string(r) + ".upsample", out, out, 9, h * w);
    }
  }
  b.norm("conv_norm_out", c0);
  b.conv("conv_out", c0, cfg.out_channels, 9, h * w);
  arch.validate();
  return arch;
}

UnetArchConfig unet_config_from_json(const nlohmann::json& j) {
  UnetArchConfig c;
  try {
    c.name = j.value("name", c.name);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_channels = j.value("out_channels", c.out_channels);
    c.block_out_channels = j.value("block_out_channels", c.block_out_channels);
    c.attention_heads = j.value("attention_heads", c.attention_heads);
    c.down_attention = j.value("down_attention", c.down_attention);
    c.layers_per_block = j.value("layers_per_block", c.layers_per_block);
    c.cross_attention_dim = j.value("cross_attention_dim", c.cross_attention_dim);
    c.time_proj_dim = j.value("time_proj_dim", c.time_proj_dim);
    c.time_embed_dim = j.value("time_embed_dim", c.time_embed_dim);
    c.addition_embed_dim = j.value("addition_embed_dim", c.addition_embed_dim);
    c.ff_mult = j.value("ff_mult", c.ff_mult);
    c.ff_gated = j.value("ff_gated", c.ff_gated);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.downscale = j.value("downscale", c.downscale);
    c.frames = j.value("frames", c.frames);
    c.batch = j.value("batch", c.batch);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad unet arch description: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const UnetArchConfig& c) {
  return {{"generator", "spatio-temporal-unet"},
          {"name", c.name},
          {"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"block_out_channels", c.block_out_channels},
          {"attention_heads", c.attention_heads},
          {"down_attention", c.down_attention},
          {"layers_per_block", c.layers_per_block},
          {"cross_attention_dim", c.cross_attention_dim},
          {"time_proj_dim", c.time_proj_dim},
          {"time_embed_dim", c.time_embed_dim},
          {"addition_embed_dim", c.addition_embed_dim},
          {"ff_mult", c.ff_mult},
          {"ff_gated", c.ff_gated},
          {"height", c.height},
          {"width", c.width},
          {"downscale", c.downscale},
          {"frames", c.frames},
          {"batch", c.batch}};
}

namespace {

ArchLayer layer_from_json(const nlohmann::json& j) {
  ArchLayer l;
  l.type = parse_layer_type(j.at("type").get<std::string>());
  l.name = j.value("name", "");
  if (j.contains("kind")) l.kind = parse_attention_kind(j.at("kind").get<std::string>());
  l.channels = j.value("channels", l.channels);
  l.heads = j.value("heads", l.heads);
  l.source_dim = j.value("source_dim", l.type == LayerType::kAttention && !is_cross(l.kind) ? l.channels : 0);
  l.qkv_bias = j.value("qkv_bias", l.qkv_bias);
  l.out_bias = j.value("out_bias", l.out_bias);
  l.has_norm = j.value("has_norm", l.type == LayerType::kAttention);
  l.in = j.value("in", l.in);
  l.out = j.value("out", l.out);
  l.kernel = j.value("kernel", l.kernel);
  l.groups = j.value("groups", l.groups);
  l.bias = j.value("bias", l.bias);
  l.positions = j.value("positions", l.positions);
  l.per_frame = j.value("per_frame", l.per_frame);
  l.batched = j.value("batched", l.batched);
  l.count = j.value("count", l.count);
  return l;
}

nlohmann::json layer_to_json(const ArchLayer& l) {
  nlohmann::json j = {{"type", to_string(l.type)}, {"name", l.name}, {"positions", l.positions},
                      {"per_frame", l.per_frame},  {"batched", l.batched}};
  switch (l.type) {
    case LayerType::kAttention:
    case LayerType::kFolded:
      j["kind"] = to_string(l.kind);
      j["channels"] = l.channels;
      j["heads"] = l.heads;
      j["source_dim"] = l.source_dim;
      j["qkv_bias"] = l.qkv_bias;
      j["out_bias"] = l.out_bias;
      j["has_norm"] = l.has_norm;
      break;
    case LayerType::kAffine:
    case LayerType::kConv:
      j["in"] = l.in;
      j["out"] = l.out;
      j["kernel"] = l.kernel;
      j["groups"] = l.groups;
      j["bias"] = l.bias;
      break;
    case LayerType::kNorm: j["in"] = l.in; break;
    case LayerType::kScalar: j["count"] = l.count; break;
  }
  return j;
}

}  // namespace

ArchSpec arch_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("generator")) {
      const auto gen = j.at("generator").get<std::string>();
      if (gen != "spatio-temporal-unet") throw ConfigError("unknown arch generator '" + gen + "'");
      return generate_unet_arch(unet_config_from_json(j));
    }
    ArchSpec arch;
    arch.name = j.value("name", "arch");
    arch.batch = j.value("batch", arch.batch);
    arch.frames = j.value("frames", arch.frames);
    for (const auto& l : j.at("layers")) arch.layers.push_back(layer_from_json(l));
    arch.validate();
    return arch;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad arch description: ") + e.what());
  }
}

nlohmann::json to_json(const ArchSpec& arch) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : arch.layers) layers.push_back(layer_to_json(l));
  return {{"name", arch.name}, {"batch", arch.batch}, {"frames", arch.frames}, {"layers", layers}};
}

ArchSpec load_arch(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open arch file " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed arch file " + path.string() + ": " + e.what());
  }
  return arch_from_json(j);
}

}  // namespace vcut
