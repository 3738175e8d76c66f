#include "vcut/surgery/surgery.hpp"

#include "vcut/numerics/ops.hpp"

namespace vcut {

FoldedAffine fold_site(const AttentionSite& site) {
  if (site.kind != AttentionKind::kSCA) {
    throw TransformError("fold_site expects an SCA site; " + site.id + " is " + to_string(site.kind));
  }
  return compose_value_output(site);
}

nlohmann::json SurgeryReport::to_json() const {
  return {{"sites_removed", removed_tca.size()},
          {"sites_folded", folded_sca.size()},
          {"removed_tca", removed_tca},
          {"folded_sca", folded_sca},
          {"params_before", params_before},
          {"params_after", params_after},
          {"param_delta", param_delta()}};
}

namespace {

template <typename Fn>
void for_each_pair(ModelWeights& w, Fn&& fn) {
  for (auto& level : w.encoder) {
    for (auto& layer : level) {
      if (layer.attn) fn(*layer.attn);
    }
  }
  if (w.mid_attn) fn(*w.mid_attn);
  for (auto& level : w.decoder) {
    for (auto& layer : level) {
      if (layer.attn) fn(*layer.attn);
    }
  }
}

}  // namespace

SurgeryResult apply_vcut(const Model& model) {
  if (model.spec.vcut_applied) {
    throw TransformError("model '" + model.spec.name + "' has already been VCUT-transformed");
  }
  SurgeryResult result{model, {}};
  result.report.params_before = count_parameters(model.weights);
  for_each_pair(result.model.weights, [&](TransformerPair& pair) {
    const auto* sca = std::get_if<AttentionSite>(&pair.spatial.cross);
    if (sca == nullptr) throw TransformError("site " + pair.id + " is already folded");
    FoldedAffine fold = fold_site(*sca);
    result.report.folded_sca.push_back(fold.site_id);
    pair.spatial.cross = std::move(fold);
    pair.spatial.norm_cross.reset();
    if (pair.temporal.cross) {
      result.report.removed_tca.push_back(pair.temporal.cross->id);
      pair.temporal.cross.reset();
      pair.temporal.norm_cross.reset();
    }
  });
  result.model.spec.vcut_applied = true;
  result.report.params_after = count_parameters(result.model.weights);
  return result;
}

std::vector<FoldedAffine> folded_sites(const Model& model) {
  std::vector<FoldedAffine> out;
  for (const auto* pair : transformer_sites(model.weights)) {
    const auto* fold = std::get_if<FoldedAffine>(&pair->spatial.cross);
    if (fold == nullptr) throw StateError("site " + pair->id + " is not folded; apply the VCUT transform first");
    out.push_back(*fold);
  }
  return out;
}

FoldedConditioner build_cache(const std::vector<FoldedAffine>& folded, const ImageEmbedding& e_cond,
                              const ImageEmbedding& e_null) {
  if (e_cond.batch() != e_null.batch() || e_cond.dim() != e_null.dim()) {
    throw ShapeError("conditional and null embeddings disagree: " + dims_to_string(e_cond.tensor().dims()) + " vs " +
                     dims_to_string(e_null.tensor().dims()));
  }
  FoldedConditioner cache;
  for (const auto& fold : folded) {
    if (fold.source_dim() != e_cond.dim()) {
      throw ShapeError("site " + fold.site_id + " expects embedding width " + std::to_string(fold.source_dim()) +
                       ", got " + std::to_string(e_cond.dim()));
    }
    Tensor cond = apply_folded(fold, e_cond.tensor());
    Tensor null = apply_folded(fold, e_null.tensor());
    Tensor mean = scale(add(cond, null), 0.5);
    cache.site_ids.push_back(fold.site_id);
    cache.cond.emplace(fold.site_id, std::move(cond));
    cache.null.emplace(fold.site_id, std::move(null));
    cache.mean.emplace(fold.site_id, std::move(mean));
  }
  return cache;
}

bool FoldedConditioner::bitwise_equal(const FoldedConditioner& other) const {
  if (site_ids != other.site_ids) return false;
  for (const auto& id : site_ids) {
    if (!cond.at(id).bitwise_equal(other.cond.at(id)) || !null.at(id).bitwise_equal(other.null.at(id)) ||
        !mean.at(id).bitwise_equal(other.mean.at(id))) {
      return false;
    }
  }
  return true;
}

}  // namespace vcut
