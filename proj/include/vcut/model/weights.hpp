#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vcut/model/attention.hpp"
#include "vcut/model/spec.hpp"
#include "vcut/surgery/folded_affine.hpp"

namespace vcut {

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct Norm {
  Tensor gain;
  Tensor bias;
};

struct Conv {
  Tensor weight;  // [out, in, kh, kw] or [c, k] for depthwise temporal convs
  Tensor bias;
};

struct FeedForward {
  Linear up;    // c -> ff_mult * c
  Linear down;  // ff_mult * c -> c
};

// 2-D convolutional residual block applied frame by frame.
struct SpatialResBlock {
  Norm norm1;
  Conv conv1;
  Linear time_proj;
  Norm norm2;
  Conv conv2;
  std::optional<Conv> shortcut;  // 1x1, present when channels change
};

// Depthwise temporal convolutions (kernel 3, same padding) along frames.
struct TemporalResBlock {
  Norm norm1;
  Conv conv1;
  Linear time_proj;
  Norm norm2;
  Conv conv2;
};

struct ResBlock {
  SpatialResBlock spatial;
  TemporalResBlock temporal;
};

// The SCA slot holds the attention site before surgery and its fold after.
using CrossSlot = std::variant<AttentionSite, FoldedAffine>;

struct SpatialTransformer {
  Norm norm_self;
  AttentionSite self_attn;  // SSA
  std::optional<Norm> norm_cross;
  CrossSlot cross;  // SCA or its fold
  Norm norm_ff;
  FeedForward ff;
};

struct TemporalTransformer {
  Norm norm_self;
  AttentionSite self_attn;  // TSA
  std::optional<Norm> norm_cross;
  std::optional<AttentionSite> cross;  // TCA; removed by surgery
  Norm norm_ff;
  FeedForward ff;
};

struct TransformerPair {
  std::string id;
  SpatialTransformer spatial;
  TemporalTransformer temporal;
};

struct UnetLayer {
  ResBlock res;
  std::optional<TransformerPair> attn;
};

struct ModelWeights {
  DType dtype = DType::kF32;
  Conv conv_in;
  Linear time_mlp1;
  Linear time_mlp2;
  std::vector<std::vector<UnetLayer>> encoder;
  std::vector<Conv> downsamplers;
  ResBlock mid_res1;
  std::optional<TransformerPair> mid_attn;
  ResBlock mid_res2;
  std::vector<std::vector<UnetLayer>> decoder;  // deepest level first
  std::vector<Conv> upsamplers;
  Norm norm_out;
  Conv conv_out;
};

struct Model {
  ModelSpec spec;
  ModelWeights weights;
};

enum class ParamRole { kWeight, kBias, kNormGain, kNormBias };

struct ParamInfo {
  std::string name;
  ParamRole role;
  std::int64_t fan_in;  // of the owning layer
};

// Visits every parameter tensor in a fixed order. `fn(const ParamInfo&, T&)`
// where T is Tensor or const Tensor depending on the weights' constness.
template <typename Weights, typename Fn>
void visit_parameters(Weights& weights, Fn&& fn);

// Zero-filled weights with the shapes `spec` implies.
ModelWeights allocate_weights(const ModelSpec& spec, DType dtype);
// Seeded U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; unit norms.
Model init_model(const ModelSpec& spec, std::uint64_t seed, DType dtype);

std::int64_t count_parameters(const ModelWeights& weights);

// All transformer sites in forward order (encoder, mid, decoder).
std::vector<const TransformerPair*> transformer_sites(const ModelWeights& weights);

// Directory of VTEN files plus manifest.json (spec, dtype, tensor table).
void save_model(const std::filesystem::path& dir, const Model& model);
Model load_model(const std::filesystem::path& dir);

}  // namespace vcut

#include "vcut/model/weights_visit.inl"
