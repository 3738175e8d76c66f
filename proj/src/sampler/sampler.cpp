#include "vcut/sampler/sampler.hpp"

#include <chrono>
#include <cmath>

#include "vcut/numerics/ops.hpp"
#include "vcut/numerics/rng.hpp"

namespace vcut {

GuidanceSchedule GuidanceSchedule::linear(std::int64_t frames, double first, double last) {
  if (frames < 1) throw ArgumentError("guidance schedule needs at least one frame");
  GuidanceSchedule s;
  s.lambdas.resize(static_cast<std::size_t>(frames), first);
  for (std::int64_t k = 1; k < frames; ++k) {
    s.lambdas[static_cast<std::size_t>(k)] =
        first + (last - first) * static_cast<double>(k) / static_cast<double>(frames - 1);
  }
  return s;
}

std::string to_string(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::kBaseline: return "baseline";
    case SamplerMode::kModified: return "modified";
    case SamplerMode::kVcut: return "vcut";
  }
  return "?";
}

SamplerMode parse_sampler_mode(const std::string& name) {
  if (name == "baseline") return SamplerMode::kBaseline;
  if (name == "modified") return SamplerMode::kModified;
  if (name == "vcut") return SamplerMode::kVcut;
  throw ArgumentError("unknown sampler mode '" + name + "' (expected baseline, modified or vcut)");
}

int SamplerConfig::effective_cut() const {
  if (mode != SamplerMode::kVcut || cut_step == 0) return steps + 1;
  return cut_step;
}

void SamplerConfig::validate() const {
  if (steps < 1) throw ArgumentError("steps must be >= 1");
  if (cut_step != 0 && (cut_step < 1 || cut_step > steps + 1)) {
    throw ArgumentError("cut step " + std::to_string(cut_step) + " outside [1, " + std::to_string(steps + 1) + "]");
  }
  if (!(sigma_max > sigma_min) || !(sigma_min > 0.0)) throw ArgumentError("need sigma_max > sigma_min > 0");
}

nlohmann::json SamplerConfig::to_json() const {
  return {{"mode", to_string(mode)},   {"steps", steps},         {"cut_step", effective_cut()},
          {"sigma_max", sigma_max},    {"sigma_min", sigma_min}, {"seed", seed}};
}

std::vector<double> sigma_schedule(const SamplerConfig& config) {
  config.validate();
  std::vector<double> sigmas(static_cast<std::size_t>(config.steps) + 1, 0.0);
  const double lo = std::log(config.sigma_min);
  const double hi = std::log(config.sigma_max);
  for (int i = 0; i < config.steps; ++i) {
    const double frac = config.steps == 1 ? 0.0 : static_cast<double>(i) / (config.steps - 1);
    sigmas[static_cast<std::size_t>(i)] = std::exp(hi + (lo - hi) * frac);
  }
  return sigmas;
}

int expected_forward_passes(int steps, int cut_step) {
  if (steps < 1) throw ArgumentError("steps must be positive");
  if (cut_step < 1 || cut_step > steps + 1) {
    throw ArgumentError("cut step " + std::to_string(cut_step) + " outside [1, " + std::to_string(steps + 1) + "]");
  }
  return 2 * (cut_step - 1) + (steps - cut_step + 1);
}

LatentVideo cfg_combine(const LatentVideo& eps_null, const LatentVideo& eps_cond, const GuidanceSchedule& schedule) {
  const auto shape = eps_null.shape();
  if (eps_cond.shape() != shape || eps_cond.dtype() != eps_null.dtype()) {
    throw ShapeError("cfg_combine operands disagree: " + dims_to_string(shape.dims()) + " vs " +
                     dims_to_string(eps_cond.shape().dims()));
  }
  if (schedule.frames() != shape.f) {
    throw ShapeError("guidance schedule has " + std::to_string(schedule.frames()) + " frames, video has " +
                     std::to_string(shape.f));
  }
  const Tensor lambda = Tensor::from_values({1, 1, shape.f, 1, 1}, schedule.lambdas, eps_null.dtype());
  const Tensor& n = eps_null.tensor();
  return LatentVideo(add(n, mul(lambda, sub(eps_cond.tensor(), n))));
}

nlohmann::json RunStats::to_json() const {
  double total = 0.0;
  for (double s : step_seconds) total += s;
  return {{"forward_passes", forward_passes}, {"dual_pass_steps", dual_pass_steps},
          {"single_pass_steps", single_pass_steps}, {"cache_builds", cache_builds},
          {"cut_step", cut_step}, {"step_seconds", step_seconds}, {"total_seconds", total}};
}

RunResult run(const Model& model, const SamplerConfig& config, const ImageEmbedding& e_cond,
              const ImageEmbedding& e_null, const LatentVideo& z_init, const RunOptions& options) {
  config.validate();
  const bool baseline = config.mode == SamplerMode::kBaseline;
  if (baseline && model.spec.vcut_applied) {
    throw StateError("baseline sampling needs the original model, got a VCUT-transformed one");
  }
  if (!baseline && !model.spec.vcut_applied) {
    throw StateError(to_string(config.mode) + " sampling needs a VCUT-transformed model (no conditioner cache)");
  }
  if (options.cache != nullptr && options.cache_policy != CachePolicy::kComputeOnce) {
    throw ArgumentError("a prebuilt cache only applies to the compute-once policy");
  }

  const auto sigmas = sigma_schedule(config);
  const int cut = config.effective_cut();
  const auto schedule = GuidanceSchedule::linear(z_init.shape().f);

  RunResult result;
  result.stats.cut_step = cut;
  auto& traj = result.trajectory;
  traj.states.push_back(z_init);

  std::vector<FoldedAffine> folds;
  FoldedConditioner once;
  const FoldedConditioner* cache = nullptr;
  if (!baseline) {
    folds = folded_sites(model);
    if (options.cache_policy == CachePolicy::kComputeOnce) {
      if (options.cache != nullptr) {
        cache = options.cache;
      } else {
        once = build_cache(folds, e_cond, e_null);
        cache = &once;
      }
      result.stats.cache_builds = 1;
    }
  }

  for (int step = 1; step <= config.steps; ++step) {
    const auto started = std::chrono::steady_clock::now();
    const double sigma = sigmas[static_cast<std::size_t>(step - 1)];
    const double next = sigmas[static_cast<std::size_t>(step)];
    const LatentVideo& z = traj.states.back();
    const LatentVideo x_in(scale(z.tensor(), 1.0 / std::sqrt(sigma * sigma + 1.0)));
    const double timestep = 0.25 * std::log(sigma);

    FoldedConditioner rebuilt;
    const FoldedConditioner* step_cache = cache;
    if (!baseline && options.cache_policy == CachePolicy::kRecomputeEveryStep) {
      const ImageEmbedding e = options.embedding_override ? options.embedding_override(step, e_cond) : e_cond;
      rebuilt = build_cache(folds, e, e_null);
      step_cache = &rebuilt;
      ++result.stats.cache_builds;
    }

    std::optional<LatentVideo> eps;
    if (step < cut) {
      LatentVideo eps_cond = baseline ? forward_unet(model, x_in, timestep, e_cond, ForwardMode::kBaseline)
                                      : forward_unet(model, x_in, timestep, e_cond, ForwardMode::kVcutCached,
                                                     &step_cache->cond);
      LatentVideo eps_null = baseline ? forward_unet(model, x_in, timestep, e_null, ForwardMode::kBaseline)
                                      : forward_unet(model, x_in, timestep, e_null, ForwardMode::kVcutCached,
                                                     &step_cache->null);
      eps = cfg_combine(eps_null, eps_cond, schedule);
      result.stats.forward_passes += 2;
      ++result.stats.dual_pass_steps;
    } else {
      eps = forward_unet(model, x_in, timestep, e_cond, ForwardMode::kVcutCached, &step_cache->mean);
      result.stats.forward_passes += 1;
      ++result.stats.single_pass_steps;
    }

    traj.states.emplace_back(add(z.tensor(), scale(eps->tensor(), next - sigma)));
    traj.eps.push_back(std::move(*eps));
    result.stats.step_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  }
  return result;
}

LatentVideo initial_latent(const ModelSpec& spec, std::uint64_t seed, DType dtype, double sigma_max) {
  Rng rng(seed);
  return LatentVideo(rng_normal(rng, {spec.batch, spec.latent_channels, spec.frames, spec.height, spec.width}, dtype,
                                0.0, sigma_max));
}

ImageEmbedding seeded_embedding(std::int64_t batch, std::int64_t dim, std::uint64_t seed, DType dtype) {
  Rng rng(~seed);
  return ImageEmbedding::conditional(rng_normal(rng, {batch, 1, dim}, dtype));
}

TrajectoryDiff compare_trajectories(const Trajectory& a, const Trajectory& b, int max_steps) {
  TrajectoryDiff diff;
  std::size_t n = std::min(a.states.size(), b.states.size());
  if (max_steps >= 0) n = std::min(n, static_cast<std::size_t>(max_steps) + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto d = count_bitwise_differences(a.states[i].tensor(), b.states[i].tensor());
    if (d > 0 && !diff.first_differing_step) diff.first_differing_step = static_cast<int>(i);
    diff.differing_elements += d;
  }
  if (max_steps < 0 && a.states.size() != b.states.size() && !diff.first_differing_step) {
    diff.first_differing_step = static_cast<int>(n);
  }
  return diff;
}

bool CacheCheckReport::identical() const {
  for (const auto& e : entries) {
    if (e.diff.differing_elements != 0 || e.diff.first_differing_step) return false;
  }
  return true;
}

nlohmann::json CacheCheckReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json row = {{"seed", e.seed}, {"differing_elements", e.diff.differing_elements}};
    row["first_differing_step"] =
        e.diff.first_differing_step ? nlohmann::json(*e.diff.first_differing_step) : nlohmann::json(nullptr);
    rows.push_back(row);
  }
  return {{"identical", identical()}, {"seeds", rows}};
}

CacheCheckReport cache_policy_check(const Model& model, const SamplerConfig& config,
                                    const std::vector<std::uint64_t>& seeds, const RunOptions& recompute_options) {
  if (config.mode == SamplerMode::kBaseline) throw ArgumentError("cache check applies to modified or vcut runs");
  if (seeds.empty()) throw ArgumentError("cache check needs at least one seed");
  CacheCheckReport report;
  const auto& spec = model.spec;
  const DType dtype = model.weights.dtype;
  for (const auto seed : seeds) {
    SamplerConfig cfg = config;
    cfg.seed = seed;
    const auto z0 = initial_latent(spec, seed, dtype, cfg.sigma_max);
    const auto e_cond = seeded_embedding(spec.batch, spec.embed_dim, seed, dtype);
    const auto e_null = ImageEmbedding::null(spec.batch, spec.embed_dim, dtype);

    RunOptions once;
    RunOptions every = recompute_options;
    every.cache_policy = CachePolicy::kRecomputeEveryStep;
    every.cache = nullptr;
    const auto a = run(model, cfg, e_cond, e_null, z0, once);
    const auto b = run(model, cfg, e_cond, e_null, z0, every);
    report.entries.push_back({seed, compare_trajectories(a.trajectory, b.trajectory)});
  }
  return report;
}

}  // namespace vcut
