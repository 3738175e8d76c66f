#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcut/costmodel/arch.hpp"

namespace vcut {

// Total MACs over T steps when steps [1, c) run two passes and steps [c, T]
// one: (c - 1) p + (T - c + 1) p / 2, with p the dual-pass per-step cost.
double vcut_totals(double per_step, int steps, int cut_step);

// Latency proportional to total MACs, calibrated by one baseline point.
double latency_model(double total_macs, double baseline_total_macs, double baseline_latency);

struct CostReport {
  std::string method;
  std::string convention;
  std::int64_t frames = 0;
  int steps = 0;
  int cut_step = 0;

  std::int64_t baseline_macs_per_forward = 0;
  std::int64_t macs_per_forward = 0;
  std::int64_t baseline_macs_per_step = 0;  // two passes (guidance)
  std::int64_t macs_per_step = 0;           // two passes
  double baseline_total_macs = 0.0;
  double total_macs = 0.0;  // includes the one-time conditioner cost
  std::int64_t conditioner_macs = 0;
  std::int64_t baseline_params = 0;
  std::int64_t params = 0;
  std::optional<double> baseline_latency;
  std::optional<double> latency;

  double macs_delta() const { return baseline_total_macs - total_macs; }
  std::int64_t params_delta() const { return baseline_params - params; }

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

// Costs `arch` as baseline and its VCUT transform cut at `cut_step` (0 means
// T + 1). `baseline_latency` calibrates the latency model when given.
CostReport build_cost_report(const ArchSpec& arch, int steps, int cut_step, MacConvention convention,
                             std::optional<double> baseline_latency = std::nullopt, std::int64_t frames = 0);

// Published reference values for the bundled SVD-family comparison tables.
struct PerStepReference {
  std::string model;
  std::int64_t frames;
  double baseline_tmacs;
  double modified_tmacs;
  double baseline_params_b;
  double modified_params_b;
  double params_delta_m;
};

struct TotalReference {
  std::string model;
  int cut_step;  // 26 = baseline row
  double total_tmacs;
  double latency_s;
  double latency_reduction_pct;  // 0 for baseline rows
};

const std::vector<PerStepReference>& per_step_references();
const std::vector<TotalReference>& total_references();

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render() const;
};

// Per-step table: computed MACs/params for the baseline, the TCA-removed
// arch and the full VCUT arch next to the reference values.
CsvTable per_step_table(const ArchSpec& svd_arch, MacConvention convention);
// Whole-video table: vcut_totals from the reference per-step values and from
// the computed ones, plus modeled latency.
CsvTable totals_table(const ArchSpec& svd_arch, MacConvention convention);

std::string format_number(double value, int precision = 4);
double relative_error(double value, double reference);

}  // namespace vcut
