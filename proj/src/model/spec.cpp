#include "vcut/model/spec.hpp"

#include <fstream>

#include "vcut/numerics/errors.hpp"

namespace vcut {

std::int64_t ModelSpec::heads_for(std::size_t level) const {
  const auto& lv = levels.at(level);
  return lv.heads > 0 ? lv.heads : heads;
}

SiteLayout ModelSpec::site_layout() const {
  SiteLayout layout;
  for (const auto& lv : levels) {
    if (!lv.attention) continue;
    layout.encoder += lv.blocks;
    layout.decoder += lv.blocks + 1;
  }
  layout.mid = mid_attention ? 1 : 0;
  return layout;
}

void ModelSpec::validate() const {
  auto fail = [&](const std::string& msg) { throw ConfigError("model spec '" + name + "': " + msg); };
  if (levels.empty()) fail("at least one level is required");
  if (latent_channels < 1) fail("latent_channels must be >= 1");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) fail("time_embed_dim must be even and >= 2");
  if (ff_mult < 1) fail("ff_mult must be >= 1");
  if (heads < 1) fail("heads must be >= 1");
  if (batch < 1 || frames < 1 || height < 1 || width < 1) fail("sample geometry extents must be >= 1");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& lv = levels[i];
    if (lv.channels < 1) fail("level " + std::to_string(i) + " channels must be >= 1");
    if (lv.blocks < 1) fail("level " + std::to_string(i) + " blocks must be >= 1");
    if (lv.heads < 0) fail("level " + std::to_string(i) + " heads must be >= 0");
    const bool has_attention = lv.attention || (mid_attention && i + 1 == levels.size());
    if (has_attention && lv.channels % heads_for(i) != 0) {
      fail("level " + std::to_string(i) + ": channels " + std::to_string(lv.channels) + " not divisible by heads " +
           std::to_string(heads_for(i)));
    }
  }
}

void ModelSpec::check_resolution(std::int64_t h, std::int64_t w) const {
  const std::int64_t factor = std::int64_t{1} << (levels.size() - 1);
  if (h % factor != 0 || w % factor != 0) {
    throw ShapeError("spatial extents " + std::to_string(h) + "x" + std::to_string(w) + " must be divisible by " +
                     std::to_string(factor) + " for " + std::to_string(levels.size()) + " levels");
  }
}

ModelSpec model_spec_from_json(const nlohmann::json& doc) {
  try {
    ModelSpec spec;
    spec.name = doc.value("name", spec.name);
    spec.latent_channels = doc.value("latent_channels", spec.latent_channels);
    for (const auto& lv : doc.at("levels")) {
      LevelSpec level;
      level.channels = lv.at("channels").get<std::int64_t>();
      level.blocks = lv.value("blocks", level.blocks);
      level.attention = lv.value("attention", level.attention);
      level.heads = lv.value("heads", level.heads);
      spec.levels.push_back(level);
    }
    spec.mid_attention = doc.value("mid_attention", spec.mid_attention);
    spec.heads = doc.value("heads", spec.heads);
    spec.embed_dim = doc.value("embed_dim", spec.embed_dim);
    spec.time_embed_dim = doc.value("time_embed_dim", spec.time_embed_dim);
    spec.ff_mult = doc.value("ff_mult", spec.ff_mult);
    spec.batch = doc.value("batch", spec.batch);
    spec.frames = doc.value("frames", spec.frames);
    spec.height = doc.value("height", spec.height);
    spec.width = doc.value("width", spec.width);
    spec.vcut_applied = doc.value("vcut_applied", spec.vcut_applied);
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model spec JSON: ") + e.what());
  }
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& lv : spec.levels) {
    nlohmann::json j = {{"channels", lv.channels}, {"blocks", lv.blocks}, {"attention", lv.attention}};
    if (lv.heads > 0) j["heads"] = lv.heads;
    levels.push_back(j);
  }
  return {{"name", spec.name},
          {"latent_channels", spec.latent_channels},
          {"levels", levels},
          {"mid_attention", spec.mid_attention},
          {"heads", spec.heads},
          {"embed_dim", spec.embed_dim},
          {"time_embed_dim", spec.time_embed_dim},
          {"ff_mult", spec.ff_mult},
          {"batch", spec.batch},
          {"frames", spec.frames},
          {"height", spec.height},
          {"width", spec.width},
          {"vcut_applied", spec.vcut_applied}};
}

ModelSpec load_model_spec(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open model spec " + path.string());
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return model_spec_from_json(doc);
}

void save_model_spec(const std::filesystem::path& path, const ModelSpec& spec) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << to_json(spec).dump(2) << '\n';
}

ModelSpec svd_layout_toy_spec() {
  ModelSpec spec;
  spec.name = "toy-svd-layout";
  spec.latent_channels = 4;
  spec.levels = {{8, 2, true, 0}, {16, 2, true, 0}, {32, 2, true, 0}, {32, 2, false, 0}};
  spec.mid_attention = true;
  spec.heads = 2;
  spec.embed_dim = 32;
  spec.time_embed_dim = 16;
  spec.frames = 3;
  spec.height = 8;
  spec.width = 8;
  spec.validate();
  return spec;
}

ModelSpec single_site_toy_spec() {
  ModelSpec spec;
  spec.name = "toy-single-site";
  spec.latent_channels = 4;
  spec.levels = {{8, 1, false, 0}};
  spec.mid_attention = true;
  spec.heads = 2;
  spec.embed_dim = 16;
  spec.time_embed_dim = 8;
  spec.frames = 3;
  spec.height = 4;
  spec.width = 4;
  spec.validate();
  return spec;
}

}  // namespace vcut
