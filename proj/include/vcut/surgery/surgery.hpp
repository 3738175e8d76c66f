#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcut/model/video.hpp"
#include "vcut/model/weights.hpp"
#include "vcut/surgery/folded_affine.hpp"

namespace vcut {

// Folds an SCA site into one affine map of the embedding. TCA sites are
// deleted by the transform, never folded; passing one is a TransformError.
FoldedAffine fold_site(const AttentionSite& site);

struct SurgeryReport {
  std::vector<std::string> removed_tca;
  std::vector<std::string> folded_sca;
  std::int64_t params_before = 0;
  std::int64_t params_after = 0;

  std::int64_t param_delta() const { return params_before - params_after; }
  nlohmann::json to_json() const;
};

struct SurgeryResult {
  Model model;
  SurgeryReport report;
};

// VCUT: drop every TCA site (with its pre-norm), replace every SCA site (and
// its query-path norm) by its fold. All other tensors are copied unchanged.
// Refuses a model that was already transformed.
SurgeryResult apply_vcut(const Model& model);

// Folds of a transformed model, in forward order.
std::vector<FoldedAffine> folded_sites(const Model& model);

// Per-site rows computed once per (weights, embeddings): L_cond, L_null and
// their plain average, each [b, c].
struct FoldedConditioner {
  std::vector<std::string> site_ids;
  SiteVectors cond;
  SiteVectors null;
  SiteVectors mean;

  std::size_t size() const { return site_ids.size(); }
  bool bitwise_equal(const FoldedConditioner& other) const;
};

FoldedConditioner build_cache(const std::vector<FoldedAffine>& folded, const ImageEmbedding& e_cond,
                              const ImageEmbedding& e_null);

}  // namespace vcut
