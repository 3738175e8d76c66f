#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcut/model/weights.hpp"

namespace vcut {

struct EquivalenceConfig {
  int seeds = 200;       // random (c, D, H, L, B) attention configurations
  int cache_seeds = 5;   // sampler runs for the cache and prefix checks
  int steps = 25;
  int cut_step = 17;
  DType dtype = DType::kF32;
  std::uint64_t base_seed = 0;
  // Negative control: corrupt the fold of this SCA site after surgery.
  std::optional<std::string> poison_fold;
};

struct PropertyResult {
  std::string name;
  bool passed = true;
  std::int64_t cases = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;  // first failure
};

struct EquivalenceReport {
  std::string dtype;
  std::vector<PropertyResult> properties;
  double seconds = 0.0;

  bool passed() const;
  const PropertyResult* first_failure() const;
  nlohmann::json to_json() const;
};

// Fold tolerance: 1e-5 for f32, 1e-12 for f64.
double fold_tolerance(DType dtype);

// Adds `delta` to every bias entry of the named fold. Throws ArgumentError if
// the model has no such folded site.
void poison_fold(Model& model, const std::string& site_id, double delta);

// Singleton-softmax exactness, query constancy and fold equivalence over
// random configurations; fold and forward checks on the toy UNet; cache
// bitwise identity and prefix equality of sampler trajectories.
EquivalenceReport run_equivalence_suite(const EquivalenceConfig& config);

// Individual properties, exposed for tests.
PropertyResult check_random_sites(int seeds, std::uint64_t base_seed, DType dtype);
PropertyResult check_model_folds(const Model& original, const Model& transformed);
PropertyResult check_forward_decomposition(const Model& original, std::uint64_t seed);
PropertyResult check_forward_fold(const Model& original, const Model& transformed, std::uint64_t seed);
PropertyResult check_cache_identity(const Model& transformed, int seeds, int steps, int cut_step,
                                    std::uint64_t base_seed);
PropertyResult check_prefix_equality(const Model& transformed, int seeds, int steps, int cut_step,
                                     std::uint64_t base_seed);

}  // namespace vcut
