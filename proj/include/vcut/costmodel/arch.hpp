#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcut/model/attention.hpp"
#include "vcut/model/spec.hpp"

namespace vcut {

enum class LayerType { kAttention, kFolded, kAffine, kConv, kNorm, kScalar };

std::string to_string(LayerType type);
LayerType parse_layer_type(const std::string& name);

// One entry of an architecture inventory. Token counts are derived from
// `positions` (spatial positions per frame), the frame count and the batch.
struct ArchLayer {
  LayerType type = LayerType::kAffine;
  std::string name;

  // kAttention / kFolded
  AttentionKind kind = AttentionKind::kSSA;
  std::int64_t channels = 0;
  std::int64_t heads = 1;
  std::int64_t source_dim = 0;  // key/value input width; equals channels for self-attention
  bool qkv_bias = false;
  bool out_bias = true;
  bool has_norm = true;  // pre-norm (gain + bias) owned by the site

  // kAffine / kConv (in, out) and kNorm (in = width)
  std::int64_t in = 0;
  std::int64_t out = 0;
  std::int64_t kernel = 1;  // taps per output (e.g. 9 for 3x3)
  std::int64_t groups = 1;
  bool bias = true;

  std::int64_t positions = 1;
  bool per_frame = true;  // tokens scale with frames
  bool batched = true;    // tokens scale with batch

  std::int64_t count = 0;  // kScalar parameter count
};

struct ArchSpec {
  std::string name;
  std::int64_t batch = 1;
  std::int64_t frames = 14;
  std::vector<ArchLayer> layers;

  void validate() const;
};

// MAC conventions. kFull counts every multiply-accumulate of the attention
// formula, including the score and weighted-sum products. kModuleHook counts
// only parameterized layers (projections, linears, convolutions), which is
// what a per-module hook counter reports when attention products run as
// functional calls.
enum class MacConvention { kFull, kModuleHook };

std::string to_string(MacConvention convention);
MacConvention parse_mac_convention(const std::string& name);

struct AttentionGeometry {
  std::int64_t sequences = 0;
  std::int64_t query_length = 0;
  std::int64_t key_length = 0;
};

AttentionGeometry attention_geometry(const ArchLayer& layer, std::int64_t batch, std::int64_t frames);

std::int64_t layer_macs(const ArchLayer& layer, std::int64_t batch, std::int64_t frames, MacConvention convention);
std::int64_t layer_params(const ArchLayer& layer);

// frames <= 0 uses arch.frames.
std::int64_t count_macs(const ArchSpec& arch, MacConvention convention, std::int64_t frames = 0);
std::int64_t count_params(const ArchSpec& arch);

// MACs per forward grouped by attention kind ("ssa", "sca", "tsa", "tca"),
// "folded", "affine" and "conv".
std::map<std::string, std::int64_t> macs_by_group(const ArchSpec& arch, MacConvention convention,
                                                  std::int64_t frames = 0);
std::map<std::string, std::int64_t> params_by_group(const ArchSpec& arch);

// Drops every attention site of `kind` (with its norm).
ArchSpec remove_attention(const ArchSpec& arch, AttentionKind kind);
// TCA removed, each SCA replaced by a folded D x c affine map.
ArchSpec vcut_arch(const ArchSpec& arch);
std::int64_t count_sites(const ArchSpec& arch, AttentionKind kind);
std::int64_t count_folded(const ArchSpec& arch);

// MACs to evaluate every folded map once for one embedding row per batch
// element. A run evaluates it for the conditional and the null embedding.
std::int64_t conditioner_macs(const ArchSpec& arch);

// Inventory of the toy UNet a ModelSpec describes; count_params agrees with
// count_parameters() of the allocated weights.
ArchSpec arch_from_model_spec(const ModelSpec& spec);

// Generator for spatio-temporal UNets described by block widths (the public
// SVD layout is bundled as data).
struct UnetArchConfig {
  std::string name = "svd";
  std::int64_t in_channels = 8;
  std::int64_t out_channels = 4;
  std::vector<std::int64_t> block_out_channels{320, 640, 1280, 1280};
  std::vector<std::int64_t> attention_heads{5, 10, 20, 20};
  std::vector<bool> down_attention{true, true, true, false};
  std::int64_t layers_per_block = 2;
  std::int64_t cross_attention_dim = 1024;
  std::int64_t time_proj_dim = 320;
  std::int64_t time_embed_dim = 1280;
  std::int64_t addition_embed_dim = 768;
  std::int64_t ff_mult = 4;
  bool ff_gated = true;
  std::int64_t height = 576;
  std::int64_t width = 1024;
  std::int64_t downscale = 8;
  std::int64_t frames = 14;
  std::int64_t batch = 1;
};

ArchSpec generate_unet_arch(const UnetArchConfig& config);

UnetArchConfig unet_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const UnetArchConfig& config);

// Accepts either {"layers": [...]} inventories or {"generator": "spatio-temporal-unet", ...}.
ArchSpec arch_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ArchSpec& arch);
ArchSpec load_arch(const std::filesystem::path& path);

}  // namespace vcut
