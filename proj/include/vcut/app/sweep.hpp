#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcut/costmodel/arch.hpp"
#include "vcut/model/weights.hpp"
#include "vcut/sampler/sampler.hpp"

namespace vcut {

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::string hex_digest(std::uint64_t value);
std::uint64_t tensor_digest(const Tensor& t);
std::uint64_t trajectory_digest(const Trajectory& trajectory);

struct ExperimentPlan {
  std::vector<SamplerMode> modes{SamplerMode::kBaseline, SamplerMode::kVcut};
  std::vector<int> cut_steps{17};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int steps = 25;
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentPlan from_json(const nlohmann::json& j);
};

struct SweepRow {
  std::string run_id;
  SamplerMode mode = SamplerMode::kBaseline;
  int cut_step = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  int forward_passes = 0;
  int expected_passes = 0;
  int dual_pass_steps = 0;
  int single_pass_steps = 0;
  // Modeled cost relative to the baseline run: total MACs of this
  // configuration on the toy arch divided by the baseline total.
  double modeled_latency_ratio = 0.0;
  std::string final_digest;
  std::string trajectory_digest;
  double seconds = 0.0;  // JSON only; the CSV stays deterministic
};

struct SweepReport {
  ExperimentPlan plan;
  std::string model_name;
  std::vector<SweepRow> rows;

  nlohmann::json to_json() const;
  std::string csv() const;
};

// Runs every (mode, cut, seed) configuration. Baseline rows use `original`;
// modified and vcut rows use `transformed`. Either may be absent, in which
// case the affected rows record an error. Modes other than vcut run once per
// seed with the cut fixed at T + 1.
SweepReport run_sweep(const ExperimentPlan& plan, const Model* original, const Model* transformed);

}  // namespace vcut
