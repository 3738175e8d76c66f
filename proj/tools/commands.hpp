#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vcut/numerics/tensor.hpp"

namespace vcut::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kArgument = 2;
inline constexpr int kViolation = 3;
inline constexpr int kIo = 4;

struct Globals {
  DType dtype = DType::kF32;
  bool dtype_given = false;
  int threads = 1;
  std::optional<std::filesystem::path> out;
};

struct ModelSource {
  std::optional<std::filesystem::path> weights;
  std::optional<std::filesystem::path> spec;
  std::string preset;
  std::uint64_t weight_seed = 0;
};

struct InitArgs {
  ModelSource source;
};

struct SurgeryArgs {
  ModelSource source;
};

struct RunArgs {
  ModelSource source;
  std::string mode = "vcut";
  int steps = 25;
  int cut_step = 0;
  std::uint64_t seed = 0;
  bool no_states = false;
};

struct CostArgs {
  std::filesystem::path arch;
  std::int64_t frames = 0;
  int steps = 25;
  int cut_step = 0;
  std::optional<double> baseline_latency;
  std::string convention = "module-hook";
  bool measure = false;
};

struct MetricsArgs {
  std::string metric;
  std::vector<std::filesystem::path> inputs;
  std::optional<std::filesystem::path> ref;
  double theta = 1.0;
  double lo = 0.0;
  double hi = 1.0;
  int block = 4;
  int radius = 2;
  std::optional<std::filesystem::path> csv;
};

struct EquivArgs {
  int seeds = 200;
  int cache_seeds = 5;
  int steps = 25;
  int cut_step = 17;
  std::uint64_t base_seed = 0;
  std::optional<std::string> poison_fold;
};

struct SweepArgs {
  ModelSource source;
  std::optional<std::filesystem::path> plan;
  std::vector<std::string> modes;
  std::vector<int> cut_steps;
  std::vector<std::uint64_t> seeds;
  bool seeds_given = false;
  std::optional<int> steps;
};

struct CostTablesArgs {
  std::filesystem::path arch;
  std::string convention = "module-hook";
};

int cmd_init_weights(const Globals& g, const InitArgs& a);
int cmd_surgery(const Globals& g, const SurgeryArgs& a);
int cmd_run(const Globals& g, const RunArgs& a);
int cmd_cost(const Globals& g, const CostArgs& a);
int cmd_metrics(const Globals& g, const MetricsArgs& a);
int cmd_equiv_check(const Globals& g, const EquivArgs& a);
int cmd_sweep(const Globals& g, const SweepArgs& a);
int cmd_cost_tables(const Globals& g, const CostTablesArgs& a);

}  // namespace vcut::cli
