#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcut/model/unet.hpp"
#include "vcut/surgery/surgery.hpp"

namespace vcut {

// Per-frame guidance scale: lambda_k = 1 + 2k / (f - 1), rising linearly from
// 1 on the first frame to 3 on the last (a single frame gets 1).
struct GuidanceSchedule {
  std::vector<double> lambdas;

  static GuidanceSchedule linear(std::int64_t frames, double first = 1.0, double last = 3.0);
  std::int64_t frames() const { return static_cast<std::int64_t>(lambdas.size()); }
};

enum class SamplerMode {
  kBaseline,  // original model, attention everywhere, guidance on every step
  kModified,  // transformed model, cached conditioner, guidance on every step
  kVcut,      // transformed model, guidance before the cut, averaged rows after
};

std::string to_string(SamplerMode mode);
SamplerMode parse_sampler_mode(const std::string& name);

struct SamplerConfig {
  SamplerMode mode = SamplerMode::kVcut;
  int steps = 25;
  // 1-indexed. Steps [1, cut) run two passes with guidance, steps [cut, T]
  // one pass. 0 selects T + 1 (never cut). Baseline and modified always run
  // with T + 1.
  int cut_step = 0;
  double sigma_max = 700.0;
  double sigma_min = 0.002;
  std::uint64_t seed = 0;

  int effective_cut() const;
  void validate() const;
  nlohmann::json to_json() const;
};

// Log-linear sigma_max -> sigma_min over `steps` values, followed by 0.
std::vector<double> sigma_schedule(const SamplerConfig& config);

// Forward passes for T steps cut at c: 2(c - 1) + (T - c + 1).
int expected_forward_passes(int steps, int cut_step);

// eps_null + lambda_k (eps_cond - eps_null), lambda_k applied on frame k.
LatentVideo cfg_combine(const LatentVideo& eps_null, const LatentVideo& eps_cond, const GuidanceSchedule& schedule);

struct Trajectory {
  std::vector<LatentVideo> states;  // z_T .. z_0, steps + 1 entries
  std::vector<LatentVideo> eps;     // guided prediction used at each step
};

struct RunStats {
  int forward_passes = 0;
  int dual_pass_steps = 0;
  int single_pass_steps = 0;
  int cache_builds = 0;
  int cut_step = 0;
  std::vector<double> step_seconds;

  nlohmann::json to_json() const;
};

enum class CachePolicy { kComputeOnce, kRecomputeEveryStep };

struct RunOptions {
  CachePolicy cache_policy = CachePolicy::kComputeOnce;
  // Prebuilt conditioner for kComputeOnce; built at step 1 when absent.
  const FoldedConditioner* cache = nullptr;
  // kRecomputeEveryStep only: replaces the conditional embedding used at a
  // given 1-indexed step. Used as a negative control for the cache checker.
  std::function<ImageEmbedding(int step, const ImageEmbedding& e_cond)> embedding_override;
};

struct RunResult {
  Trajectory trajectory;
  RunStats stats;
};

RunResult run(const Model& model, const SamplerConfig& config, const ImageEmbedding& e_cond,
              const ImageEmbedding& e_null, const LatentVideo& z_init, const RunOptions& options = {});

// Seeded inputs shared by every mode so comparisons see the same noise.
LatentVideo initial_latent(const ModelSpec& spec, std::uint64_t seed, DType dtype, double sigma_max);
ImageEmbedding seeded_embedding(std::int64_t batch, std::int64_t dim, std::uint64_t seed, DType dtype);

struct TrajectoryDiff {
  std::int64_t differing_elements = 0;
  // First 1-indexed step whose resulting state differs; nullopt if identical.
  std::optional<int> first_differing_step;
};

// Compares states pairwise bitwise; `max_steps` limits the comparison to
// states 0..max_steps.
TrajectoryDiff compare_trajectories(const Trajectory& a, const Trajectory& b, int max_steps = -1);

struct CacheCheckReport {
  struct Entry {
    std::uint64_t seed = 0;
    TrajectoryDiff diff;
  };
  std::vector<Entry> entries;

  bool identical() const;
  nlohmann::json to_json() const;
};

// Runs each seed twice, once with the conditioner computed once and once
// recomputed every step, and diffs the trajectories bitwise.
CacheCheckReport cache_policy_check(const Model& model, const SamplerConfig& config,
                                    const std::vector<std::uint64_t>& seeds,
                                    const RunOptions& recompute_options = {});

}  // namespace vcut
