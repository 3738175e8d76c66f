#include "vcut/app/equivalence.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <sstream>

#include "vcut/model/unet.hpp"
#include "vcut/numerics/ops.hpp"
#include "vcut/numerics/rng.hpp"
#include "vcut/sampler/sampler.hpp"
#include "vcut/surgery/surgery.hpp"

namespace vcut {

bool EquivalenceReport::passed() const { return first_failure() == nullptr; }

const PropertyResult* EquivalenceReport::first_failure() const {
  for (const auto& p : properties) {
    if (!p.passed) return &p;
  }
  return nullptr;
}

nlohmann::json EquivalenceReport::to_json() const {
  nlohmann::json props = nlohmann::json::array();
  for (const auto& p : properties) {
    props.push_back({{"name", p.name},
                     {"passed", p.passed},
                     {"cases", p.cases},
                     {"max_error", p.max_error},
                     {"tolerance", p.tolerance},
                     {"detail", p.detail}});
  }
  nlohmann::json j = {{"passed", passed()}, {"dtype", dtype}, {"seconds", seconds}, {"properties", props}};
  if (const auto* f = first_failure()) {
    j["first_failure"] = {{"property", f->name}, {"detail", f->detail}};
  } else {
    j["first_failure"] = nullptr;
  }
  return j;
}

double fold_tolerance(DType dtype) { return dtype == DType::kF64 ? 1e-12 : 1e-5; }

void poison_fold(Model& model, const std::string& site_id, double delta) {
  auto try_pair = [&](std::optional<TransformerPair>& pair) {
    if (!pair) return false;
    auto* fold = std::get_if<FoldedAffine>(&pair->spatial.cross);
    if (fold == nullptr || fold->site_id != site_id) return false;
    const auto values = fold->bias.to_doubles();
    std::vector<double> shifted(values.size());
    std::transform(values.begin(), values.end(), shifted.begin(), [&](double v) { return v + delta; });
    fold->bias = Tensor::from_values(fold->bias.dims(), shifted, fold->bias.dtype());
    return true;
  };
  auto& w = model.weights;
  for (auto* levels : {&w.encoder, &w.decoder}) {
    for (auto& level : *levels) {
      for (auto& layer : level) {
        if (try_pair(layer.attn)) return;
      }
    }
  }
  if (try_pair(w.mid_attn)) return;
  throw ArgumentError("no folded site named '" + site_id + "' (folds exist only after surgery)");
}

namespace {

void fail(PropertyResult& r, const std::string& detail) {
  if (r.passed) r.detail = detail;
  r.passed = false;
}

bool all_exactly_one(const Tensor& t) {
  const auto v = t.to_doubles();
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 1.0; });
}

// True when every row [b, l, :] of [B, L, c] equals row [b, 0, :] bitwise.
bool constant_over_queries(const Tensor& y) {
  const auto B = y.dim(0), L = y.dim(1), c = y.dim(2);
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t l = 1; l < L; ++l) {
      for (std::int64_t k = 0; k < c; ++k) {
        const auto i0 = (b * L) * c + k;
        const auto il = (b * L + l) * c + k;
        if (std::bit_cast<std::uint64_t>(y.get(i0)) != std::bit_cast<std::uint64_t>(y.get(il))) return false;
      }
    }
  }
  return true;
}

// [B, c] rows broadcast to [B, L, c].
Tensor broadcast_rows(const Tensor& rows, std::int64_t L) {
  const auto B = rows.dim(0), c = rows.dim(1);
  return add(Tensor(Dims{B, L, c}, rows.dtype()), rows.reshape({B, 1, c}));
}

std::string describe(const AttentionSite& s, std::int64_t L, std::int64_t B) {
  std::ostringstream os;
  os << s.id << " (" << to_string(s.kind) << ", c=" << s.channels << ", D=" << s.source_dim << ", H=" << s.heads
     << ", L=" << L << ", B=" << B << ")";
  return os.str();
}

}  // namespace

PropertyResult check_random_sites(int seeds, std::uint64_t base_seed, DType dtype) {
  PropertyResult r{"degenerate_cross_attention", true, 0, 0.0, fold_tolerance(dtype), ""};
  static constexpr std::int64_t kHeads[] = {1, 2, 4, 8};
  for (int i = 0; i < seeds; ++i) {
    Rng rng(base_seed + static_cast<std::uint64_t>(i));
    const auto heads = kHeads[rng.next_u64() % 4];
    const auto head_dim = static_cast<std::int64_t>(1 + rng.next_u64() % 16);
    const auto c = heads * head_dim;
    const auto D = static_cast<std::int64_t>(16 + rng.next_u64() % (1024 - 16 + 1));
    const auto L = static_cast<std::int64_t>(1 + rng.next_u64() % 32);
    const auto B = static_cast<std::int64_t>(1 + rng.next_u64() % 3);
    const auto kind = i % 2 == 0 ? AttentionKind::kSCA : AttentionKind::kTCA;
    const auto site = make_attention_site("rand" + std::to_string(i), kind, c, heads, D, rng, dtype);
    const Tensor x = rng_normal(rng, {B, L, c}, dtype);
    const Tensor e = rng_normal(rng, {B, 1, D}, dtype);

    const auto res = cross_attention_with_scores(site, x, e);
    if (!all_exactly_one(res.probabilities)) fail(r, "softmax scores not exactly 1 at " + describe(site, L, B));
    if (!constant_over_queries(res.output)) fail(r, "output varies over queries at " + describe(site, L, B));
    const FoldedAffine fold = kind == AttentionKind::kSCA ? fold_site(site) : compose_value_output(site);
    const double err = max_abs_difference(res.output, broadcast_rows(apply_folded(fold, e), L));
    r.max_error = std::max(r.max_error, err);
    if (!(err <= r.tolerance)) {
      std::ostringstream os;
      os << "fold differs by " << err << " at " << describe(site, L, B);
      fail(r, os.str());
    }
    ++r.cases;
  }
  return r;
}

PropertyResult check_model_folds(const Model& original, const Model& transformed) {
  const DType dtype = original.weights.dtype;
  PropertyResult r{"model_fold_equivalence", true, 0, 0.0, fold_tolerance(dtype), ""};
  const auto before = transformer_sites(original.weights);
  const auto folds = folded_sites(transformed);
  if (before.size() != folds.size()) {
    fail(r, "site count changed across surgery");
    return r;
  }
  Rng rng(0x51735eedULL);
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& site = std::get<AttentionSite>(before[i]->spatial.cross);
    const auto& fold = folds[i];
    const auto L = static_cast<std::int64_t>(1 + rng.next_u64() % 16);
    const Tensor x = rng_normal(rng, {1, L, site.channels}, dtype);
    const Tensor e = rng_normal(rng, {1, 1, site.source_dim}, dtype);
    const double err = max_abs_difference(cross_attention(site, x, e), broadcast_rows(apply_folded(fold, e), L));
    r.max_error = std::max(r.max_error, err);
    if (fold.site_id != site.id || !(err <= r.tolerance)) {
      std::ostringstream os;
      os << "site " << site.id << ": folded map differs from attention by " << err;
      fail(r, os.str());
    }
    ++r.cases;
  }
  return r;
}

namespace {

double output_scale(const Tensor& t) {
  double m = 1.0;
  for (double v : t.to_doubles()) m = std::max(m, std::abs(v));
  return m;
}

struct ForwardInputs {
  LatentVideo z;
  ImageEmbedding e;
  double timestep;
};

ForwardInputs forward_inputs(const Model& model, std::uint64_t seed) {
  const auto& s = model.spec;
  const DType dtype = model.weights.dtype;
  Rng rng(seed);
  return {LatentVideo(rng_normal(rng, {s.batch, s.latent_channels, s.frames, s.height, s.width}, dtype)),
          seeded_embedding(s.batch, s.embed_dim, seed, dtype), 0.25 * std::log(1.0 + static_cast<double>(seed % 7))};
}

}  // namespace

PropertyResult check_forward_decomposition(const Model& original, std::uint64_t seed) {
  const DType dtype = original.weights.dtype;
  PropertyResult r{"forward_tca_decomposition", true, 1, 0.0, fold_tolerance(dtype), ""};
  const auto in = forward_inputs(original, seed);
  const auto base = forward_unet(original, in.z, in.timestep, in.e, ForwardMode::kBaseline);
  ForwardOptions opts;
  opts.retain_tca_constant = true;
  const auto rebuilt = forward_unet(original, in.z, in.timestep, in.e, ForwardMode::kModified, nullptr, opts);
  // Relative to the output magnitude: the deep residual stack grows activations.
  r.max_error = max_abs_difference(base.tensor(), rebuilt.tensor()) / output_scale(base.tensor());
  if (!(r.max_error <= r.tolerance)) {
    std::ostringstream os;
    os << "re-adding TCA constants misses baseline by " << r.max_error << " (relative)";
    fail(r, os.str());
  }
  return r;
}

PropertyResult check_forward_fold(const Model& original, const Model& transformed, std::uint64_t seed) {
  const DType dtype = original.weights.dtype;
  PropertyResult r{"forward_fold_equivalence", true, 2, 0.0, fold_tolerance(dtype), ""};
  const auto in = forward_inputs(original, seed);
  const auto attn = forward_unet(original, in.z, in.timestep, in.e, ForwardMode::kModified);
  const auto folded = forward_unet(transformed, in.z, in.timestep, in.e, ForwardMode::kModified);
  r.max_error = max_abs_difference(attn.tensor(), folded.tensor()) / output_scale(attn.tensor());
  if (!(r.max_error <= r.tolerance)) {
    std::ostringstream os;
    os << "folded model misses attention model by " << r.max_error << " (relative)";
    fail(r, os.str());
  }
  const auto e_null = ImageEmbedding::null(transformed.spec.batch, transformed.spec.embed_dim, dtype);
  const auto cache = build_cache(folded_sites(transformed), in.e, e_null);
  const auto cached = forward_unet(transformed, in.z, in.timestep, in.e, ForwardMode::kVcutCached, &cache.cond);
  if (!folded.tensor().bitwise_equal(cached.tensor())) fail(r, "cached conditioner differs from on-the-fly fold");
  return r;
}

PropertyResult check_cache_identity(const Model& transformed, int seeds, int steps, int cut_step,
                                    std::uint64_t base_seed) {
  PropertyResult r{"cache_bitwise_identity", true, 0, 0.0, 0.0, ""};
  SamplerConfig cfg;
  cfg.steps = steps;
  cfg.cut_step = cut_step;
  std::vector<std::uint64_t> list;
  for (int i = 0; i < seeds; ++i) list.push_back(base_seed + static_cast<std::uint64_t>(i));
  const auto report = cache_policy_check(transformed, cfg, list);
  for (const auto& e : report.entries) {
    ++r.cases;
    r.max_error = std::max(r.max_error, static_cast<double>(e.diff.differing_elements));
    if (e.diff.differing_elements != 0 || e.diff.first_differing_step) {
      fail(r, "seed " + std::to_string(e.seed) + ": " + std::to_string(e.diff.differing_elements) +
                  " elements differ, first at step " + std::to_string(e.diff.first_differing_step.value_or(-1)));
    }
  }
  return r;
}

PropertyResult check_prefix_equality(const Model& transformed, int seeds, int steps, int cut_step,
                                     std::uint64_t base_seed) {
  PropertyResult r{"prefix_equality", true, 0, 0.0, 0.0, ""};
  const auto& spec = transformed.spec;
  const DType dtype = transformed.weights.dtype;
  for (int i = 0; i < seeds; ++i) {
    const auto seed = base_seed + static_cast<std::uint64_t>(i);
    SamplerConfig vcut;
    vcut.steps = steps;
    vcut.cut_step = cut_step;
    vcut.seed = seed;
    SamplerConfig modified = vcut;
    modified.mode = SamplerMode::kModified;
    const auto z0 = initial_latent(spec, seed, dtype, vcut.sigma_max);
    const auto e = seeded_embedding(spec.batch, spec.embed_dim, seed, dtype);
    const auto n = ImageEmbedding::null(spec.batch, spec.embed_dim, dtype);
    const auto a = run(transformed, vcut, e, n, z0);
    const auto b = run(transformed, modified, e, n, z0);
    const auto diff = compare_trajectories(a.trajectory, b.trajectory, cut_step - 1);
    ++r.cases;
    r.max_error = std::max(r.max_error, static_cast<double>(diff.differing_elements));
    if (diff.differing_elements != 0) {
      fail(r, "seed " + std::to_string(seed) + ": prefix differs first at step " +
                  std::to_string(diff.first_differing_step.value_or(-1)));
    }
  }
  return r;
}

EquivalenceReport run_equivalence_suite(const EquivalenceConfig& config) {
  if (config.seeds < 1) throw ArgumentError("equivalence suite needs at least one seed");
  if (config.cache_seeds < 0) throw ArgumentError("cache seed count must be non-negative");
  const auto started = std::chrono::steady_clock::now();
  EquivalenceReport report;
  report.dtype = to_string(config.dtype);

  report.properties.push_back(check_random_sites(config.seeds, config.base_seed, config.dtype));

  const Model original = init_model(svd_layout_toy_spec(), config.base_seed, config.dtype);
  Model transformed = apply_vcut(original).model;
  if (config.poison_fold) poison_fold(transformed, *config.poison_fold, 1e-2);

  report.properties.push_back(check_model_folds(original, transformed));
  report.properties.push_back(check_forward_decomposition(original, config.base_seed + 1));
  report.properties.push_back(check_forward_fold(original, transformed, config.base_seed + 2));
  if (config.cache_seeds > 0) {
    report.properties.push_back(
        check_cache_identity(transformed, config.cache_seeds, config.steps, config.cut_step, config.base_seed));
    report.properties.push_back(
        check_prefix_equality(transformed, config.cache_seeds, config.steps, config.cut_step, config.base_seed));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace vcut
