#include "vcut/surgery/folded_affine.hpp"

#include "vcut/numerics/ops.hpp"

namespace vcut {

FoldedAffine compose_value_output(const AttentionSite& site) {
  if (!is_cross(site.kind)) {
    throw TransformError("only cross-attention sites can be folded; " + site.id + " is " + to_string(site.kind));
  }
  site.validate();
  // (e W_V + b_V) W_O + b_O == e (W_V W_O) + (b_V W_O + b_O)
  FoldedAffine fold;
  fold.site_id = site.id;
  fold.weight = matmul(site.wv, site.wo);
  fold.bias = affine(site.bv.reshape({1, site.channels}), site.wo, site.bo).reshape({site.channels});
  return fold;
}

Tensor apply_folded(const FoldedAffine& fold, const Tensor& e) {
  if (e.rank() == 3) {
    if (e.dim(1) != 1) throw ShapeError("folded map expects a pooled embedding [b, 1, D]");
    return affine(e.reshape({e.dim(0), e.dim(2)}), fold.weight, fold.bias);
  }
  if (e.rank() != 2) throw ShapeError("folded map expects [b, 1, D] or [b, D], got " + dims_to_string(e.dims()));
  return affine(e, fold.weight, fold.bias);
}

}  // namespace vcut
