#include "vcut/model/attention.hpp"

#include <cmath>

#include "vcut/numerics/ops.hpp"

namespace vcut {

std::string to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::kSSA: return "SSA";
    case AttentionKind::kSCA: return "SCA";
    case AttentionKind::kTSA: return "TSA";
    case AttentionKind::kTCA: return "TCA";
  }
  return "?";
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "SSA") return AttentionKind::kSSA;
  if (name == "SCA") return AttentionKind::kSCA;
  if (name == "TSA") return AttentionKind::kTSA;
  if (name == "TCA") return AttentionKind::kTCA;
  throw ConfigError("unknown attention kind '" + name + "'");
}

void AttentionSite::validate() const {
  auto fail = [&](const std::string& msg) { throw ConfigError("attention site '" + id + "': " + msg); };
  if (channels < 1 || heads < 1) fail("channels and heads must be >= 1");
  if (channels % heads != 0) {
    fail("channels " + std::to_string(channels) + " not divisible by heads " + std::to_string(heads));
  }
  if (is_cross(kind) && source_dim < 1) fail("cross attention needs source_dim >= 1");
  const auto src = key_input_dim();
  if (wq.dims() != Dims{channels, channels} || bq.dims() != Dims{channels}) fail("W_Q must be [c, c]");
  if (wk.dims() != Dims{src, channels} || bk.dims() != Dims{channels}) fail("W_K input extent mismatch");
  if (wv.dims() != Dims{src, channels} || bv.dims() != Dims{channels}) fail("W_V input extent mismatch");
  if (wo.dims() != Dims{channels, channels} || bo.dims() != Dims{channels}) fail("W_O must be [c, c]");
}

AttentionSite make_attention_site(std::string id, AttentionKind kind, std::int64_t channels, std::int64_t heads,
                                  std::int64_t source_dim, Rng& rng, DType dtype) {
  AttentionSite site;
  site.id = std::move(id);
  site.kind = kind;
  site.channels = channels;
  site.heads = heads;
  site.source_dim = is_cross(kind) ? source_dim : channels;
  const auto src = site.key_input_dim();
  auto draw = [&](Dims dims, std::int64_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return rng_uniform(rng, -bound, bound, dims, dtype);
  };
  site.wq = draw({channels, channels}, channels);
  site.bq = draw({channels}, channels);
  site.wk = draw({src, channels}, src);
  site.bk = draw({channels}, src);
  site.wv = draw({src, channels}, src);
  site.bv = draw({channels}, src);
  site.wo = draw({channels, channels}, channels);
  site.bo = draw({channels}, channels);
  site.validate();
  return site;
}

namespace {

// [B, L, H*dk] -> [B, H, L, dk]
Tensor split_heads(const Tensor& x, std::int64_t heads) {
  const auto b = x.dim(0), l = x.dim(1), c = x.dim(2);
  return permute(x.reshape({b, l, heads, c / heads}), {0, 2, 1, 3});
}

// [B, H, L, dk] -> [B, L, H*dk]
Tensor merge_heads(const Tensor& x) {
  const auto b = x.dim(0), h = x.dim(1), l = x.dim(2), dk = x.dim(3);
  return permute(x, {0, 2, 1, 3}).reshape({b, l, h * dk});
}

}  // namespace

AttentionResult attend(const AttentionSite& site, const Tensor& x, const Tensor& source) {
  site.validate();
  if (x.rank() != 3 || x.dim(2) != site.channels) {
    throw ShapeError("attention '" + site.id + "' expects x [B, L, " + std::to_string(site.channels) + "], got " +
                     dims_to_string(x.dims()));
  }
  if (source.rank() != 3 || source.dim(0) != x.dim(0) || source.dim(2) != site.key_input_dim()) {
    throw ShapeError("attention '" + site.id + "' source " + dims_to_string(source.dims()) +
                     " does not match queries " + dims_to_string(x.dims()));
  }
  const Tensor q = split_heads(affine(x, site.wq, site.bq), site.heads);
  const Tensor k = split_heads(affine(source, site.wk, site.bk), site.heads);
  const Tensor v = split_heads(affine(source, site.wv, site.bv), site.heads);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(site.head_dim()));
  const Tensor scores = scale(matmul(q, permute(k, {0, 1, 3, 2})), inv_sqrt_dk);
  Tensor probs = softmax_lastdim(scores);
  const Tensor mixed = merge_heads(matmul(probs, v));
  return {affine(mixed, site.wo, site.bo), std::move(probs)};
}

Tensor self_attention(const AttentionSite& site, const Tensor& x) {
  if (is_cross(site.kind)) throw ConfigError("self_attention called on " + to_string(site.kind) + " site " + site.id);
  return attend(site, x, x).output;
}

AttentionResult cross_attention_with_scores(const AttentionSite& site, const Tensor& x, const Tensor& e) {
  if (!is_cross(site.kind)) {
    throw ConfigError("cross_attention called on " + to_string(site.kind) + " site " + site.id);
  }
  if (e.rank() != 3 || e.dim(1) != 1) {
    throw ShapeError("cross attention needs a pooled embedding [B, 1, D]; multi-token conditioning " +
                     dims_to_string(e.dims()) + " is not supported");
  }
  return attend(site, x, e);
}

Tensor cross_attention(const AttentionSite& site, const Tensor& x, const Tensor& e) {
  return cross_attention_with_scores(site, x, e).output;
}

}  // namespace vcut
