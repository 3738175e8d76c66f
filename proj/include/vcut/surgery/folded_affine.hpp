#pragma once

#include <map>
#include <string>

#include "vcut/model/attention.hpp"
#include "vcut/numerics/tensor.hpp"

namespace vcut {

// Single affine map e -> e.weight + bias that replaces a degenerate cross
// attention: weight = W_V W_O [D, c], bias = b_V W_O + b_O [c].
struct FoldedAffine {
  std::string site_id;
  Tensor weight;
  Tensor bias;

  std::int64_t source_dim() const { return weight.dim(0); }
  std::int64_t channels() const { return weight.dim(1); }
};

// Folds the value and output projections of any cross-attention site.
// Callers that implement the VCUT transform should use fold_site().
FoldedAffine compose_value_output(const AttentionSite& site);

// e [b, 1, D] or [b, D] -> [b, c].
Tensor apply_folded(const FoldedAffine& fold, const Tensor& e);

// Per-site conditioning rows [b, c] keyed by site id.
using SiteVectors = std::map<std::string, Tensor>;

}  // namespace vcut
