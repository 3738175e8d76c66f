#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace vcut {

struct LevelSpec {
  std::int64_t channels = 0;
  int blocks = 2;
  bool attention = true;
  // 0 means "use ModelSpec::heads".
  std::int64_t heads = 0;
};

// Counts of transformer sites (one SSA+SCA+TSA+TCA group each) per UNet part.
struct SiteLayout {
  int encoder = 0;
  int mid = 0;
  int decoder = 0;
  int total() const { return encoder + mid + decoder; }
};

// Declarative description of the toy spatio-temporal denoiser. Each encoder
// level runs `blocks` layers, each decoder level `blocks + 1`, like the
// SVD UNet; levels 0..n-2 carry attention there, giving 6/1/9 sites.
struct ModelSpec {
  std::string name = "toy";
  std::int64_t latent_channels = 4;
  std::vector<LevelSpec> levels;
  bool mid_attention = true;
  std::int64_t heads = 1;
  std::int64_t embed_dim = 1024;
  std::int64_t time_embed_dim = 32;
  std::int64_t ff_mult = 4;
  // Default sample geometry for runs.
  std::int64_t batch = 1;
  std::int64_t frames = 14;
  std::int64_t height = 8;
  std::int64_t width = 8;
  // Set once the VCUT transform has been applied: no TCA sites, SCA folded.
  bool vcut_applied = false;

  std::int64_t heads_for(std::size_t level) const;
  std::int64_t time_hidden_dim() const { return 4 * levels.front().channels; }
  SiteLayout site_layout() const;
  // Throws ConfigError on an inconsistent description.
  void validate() const;
  // Throws ShapeError if (h, w) cannot pass through every down/up sample.
  void check_resolution(std::int64_t height, std::int64_t width) const;
};

ModelSpec model_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec load_model_spec(const std::filesystem::path& path);
void save_model_spec(const std::filesystem::path& path, const ModelSpec& spec);

// Four levels, two blocks, attention on the first three: 16 sites per kind.
ModelSpec svd_layout_toy_spec();
// A single mid-block transformer: exactly one site per attention kind.
ModelSpec single_site_toy_spec();

}  // namespace vcut
