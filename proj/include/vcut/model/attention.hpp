#pragma once

#include <cstdint>
#include <string>

#include "vcut/numerics/rng.hpp"
#include "vcut/numerics/tensor.hpp"

namespace vcut {

enum class AttentionKind { kSSA, kSCA, kTSA, kTCA };

std::string to_string(AttentionKind kind);
AttentionKind parse_attention_kind(const std::string& name);
inline bool is_cross(AttentionKind kind) { return kind == AttentionKind::kSCA || kind == AttentionKind::kTCA; }
inline bool is_temporal(AttentionKind kind) { return kind == AttentionKind::kTSA || kind == AttentionKind::kTCA; }

// One multi-head attention layer. Weights are stored [in, out] so a
// projection is affine(x, w, b). Cross sites project keys and values from the
// embedding width `source_dim`; self sites from `channels`.
struct AttentionSite {
  std::string id;
  AttentionKind kind = AttentionKind::kSSA;
  std::int64_t channels = 0;
  std::int64_t heads = 1;
  std::int64_t source_dim = 0;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;

  std::int64_t head_dim() const { return channels / heads; }
  std::int64_t key_input_dim() const { return is_cross(kind) ? source_dim : channels; }
  DType dtype() const { return wq.dtype(); }
  // Throws ConfigError when heads do not divide channels or extents disagree.
  void validate() const;
};

// Random site with PyTorch-style U(-1/sqrt(fan_in), 1/sqrt(fan_in)) init.
AttentionSite make_attention_site(std::string id, AttentionKind kind, std::int64_t channels, std::int64_t heads,
                                  std::int64_t source_dim, Rng& rng, DType dtype);

struct AttentionResult {
  Tensor output;         // [B, L, c]
  Tensor probabilities;  // [B, H, L, L_k], post-softmax
};

// softmax(Q K^T / sqrt(d_k)) V per head, heads concatenated, then W_O.
AttentionResult attend(const AttentionSite& site, const Tensor& x, const Tensor& source);

// x [B, L, c]; requires an SSA or TSA site.
Tensor self_attention(const AttentionSite& site, const Tensor& x);

// x [B, L, c], e [B, 1, D]; requires an SCA or TCA site. With a single key
// per query every probability is exactly 1 and the output is the same row
// W_O(W_V e + b_V) + b_O at every position. Multi-token conditioning is
// rejected.
AttentionResult cross_attention_with_scores(const AttentionSite& site, const Tensor& x, const Tensor& e);
Tensor cross_attention(const AttentionSite& site, const Tensor& x, const Tensor& e);

}  // namespace vcut
