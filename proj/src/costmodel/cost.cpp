#include "vcut/costmodel/cost.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "vcut/numerics/errors.hpp"

namespace vcut {

double vcut_totals(double per_step, int steps, int cut_step) {
  if (steps < 1) throw ArgumentError("steps must be >= 1");
  if (cut_step < 1 || cut_step > steps + 1) {
    throw ArgumentError("cut step " + std::to_string(cut_step) + " outside [1, " + std::to_string(steps + 1) + "]");
  }
  return (cut_step - 1) * per_step + (steps - cut_step + 1) * per_step / 2.0;
}

double latency_model(double total_macs, double baseline_total_macs, double baseline_latency) {
  if (!(baseline_total_macs > 0.0)) throw ArgumentError("baseline MACs must be positive");
  if (baseline_latency < 0.0) throw ArgumentError("baseline latency must be non-negative");
  return baseline_latency * (total_macs / baseline_total_macs);
}

nlohmann::json CostReport::to_json() const {
  nlohmann::json j = {{"method", method},
                      {"convention", convention},
                      {"frames", frames},
                      {"steps", steps},
                      {"cut_step", cut_step},
                      {"baseline", {{"macs_per_forward", baseline_macs_per_forward},
                                    {"macs_per_step", baseline_macs_per_step},
                                    {"total_macs", baseline_total_macs},
                                    {"params", baseline_params}}},
                      {"vcut", {{"macs_per_forward", macs_per_forward},
                                {"macs_per_step", macs_per_step},
                                {"total_macs", total_macs},
                                {"conditioner_macs", conditioner_macs},
                                {"params", params}}},
                      {"deltas", {{"total_macs", macs_delta()}, {"params", params_delta()}}}};
  if (baseline_latency) j["baseline"]["latency_s"] = *baseline_latency;
  if (latency) {
    j["vcut"]["latency_s"] = *latency;
    j["deltas"]["latency_s"] = *baseline_latency - *latency;
  }
  return j;
}

std::string CostReport::csv_header() {
  return "method,frames,steps,cut_step,macs_T,params_B,latency_s,macs_delta_T,params_delta_M,latency_delta_s";
}

std::string CostReport::csv_row() const {
  std::ostringstream os;
  os << method << ',' << frames << ',' << steps << ',' << cut_step << ',' << format_number(total_macs / 1e12) << ','
     << format_number(static_cast<double>(params) / 1e9) << ',' << (latency ? format_number(*latency) : "") << ','
     << format_number(macs_delta() / 1e12) << ',' << format_number(static_cast<double>(params_delta()) / 1e6) << ','
     << (latency ? format_number(*baseline_latency - *latency) : "");
  return os.str();
}

CostReport build_cost_report(const ArchSpec& arch, int steps, int cut_step, MacConvention convention,
                             std::optional<double> baseline_latency, std::int64_t frames) {
  arch.validate();
  const int cut = cut_step == 0 ? steps + 1 : cut_step;
  const ArchSpec modified = vcut_arch(arch);
  CostReport r;
  r.method = arch.name + "+vcut(c=" + std::to_string(cut) + ")";
  r.convention = to_string(convention);
  r.frames = frames > 0 ? frames : arch.frames;
  r.steps = steps;
  r.cut_step = cut;
  r.baseline_macs_per_forward = count_macs(arch, convention, r.frames);
  r.macs_per_forward = count_macs(modified, convention, r.frames);
  r.baseline_macs_per_step = 2 * r.baseline_macs_per_forward;
  r.macs_per_step = 2 * r.macs_per_forward;
  r.baseline_total_macs = vcut_totals(static_cast<double>(r.baseline_macs_per_step), steps, steps + 1);
  r.conditioner_macs = 2 * conditioner_macs(modified);
  r.total_macs = vcut_totals(static_cast<double>(r.macs_per_step), steps, cut) + static_cast<double>(r.conditioner_macs);
  r.baseline_params = count_params(arch);
  r.params = count_params(modified);
  if (baseline_latency) {
    r.baseline_latency = *baseline_latency;
    r.latency = latency_model(r.total_macs, r.baseline_total_macs, *baseline_latency);
  }
  return r;
}

const std::vector<PerStepReference>& per_step_references() {
  static const std::vector<PerStepReference> refs = {
      {"SVD", 14, 36.11, 35.1, 1.521, 1.474, 47.0},
      {"SVD-XT", 25, 64.41, 62.86, 1.524, 1.474, 50.0},
      {"SVD-XT.1", 25, 64.41, 62.86, 1.524, 1.474, 50.0},
  };
  return refs;
}

const std::vector<TotalReference>& total_references() {
  static const std::vector<TotalReference> refs = {
      {"SVD", 26, 903, 68.4, 0},       {"SVD", 17, 719, 54.7, 20},       {"SVD", 20, 772, 58.2, 15},
      {"SVD-XT", 26, 1610, 120.6, 0},  {"SVD-XT", 17, 1288, 97.3, 19},   {"SVD-XT", 20, 1382, 103.2, 14},
      {"SVD-XT.1", 26, 1610, 119.8, 0}, {"SVD-XT.1", 17, 1288, 97.1, 19}, {"SVD-XT.1", 20, 1382, 102.8, 14},
  };
  return refs;
}

std::string CsvTable::render() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return os.str();
}

std::string format_number(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, value);
  return buf;
}

double relative_error(double value, double reference) { return std::abs(value - reference) / std::abs(reference); }

namespace {

const PerStepReference& per_step_reference(const std::string& model) {
  for (const auto& r : per_step_references()) {
    if (r.model == model) return r;
  }
  throw ArgumentError("no reference row for " + model);
}

const TotalReference& baseline_total(const std::string& model) {
  for (const auto& r : total_references()) {
    if (r.model == model && r.cut_step == 26) return r;
  }
  throw ArgumentError("no baseline total for " + model);
}

}  // namespace

CsvTable per_step_table(const ArchSpec& svd_arch, MacConvention convention) {
  CsvTable t;
  t.header = {"model",          "frames",           "variant",        "macs_T",         "published_macs_T",
              "macs_rel_err",   "params_B",         "published_params_B", "params_rel_err", "macs_delta_T",
              "published_macs_delta_T", "params_delta_M", "published_params_delta_M", "convention"};
  const ArchSpec tca_removed = remove_attention(svd_arch, AttentionKind::kTCA);
  const ArchSpec full = vcut_arch(svd_arch);
  for (const auto& ref : per_step_references()) {
    const double base_macs = 2.0 * static_cast<double>(count_macs(svd_arch, convention, ref.frames)) / 1e12;
    const double base_params = static_cast<double>(count_params(svd_arch));
    const std::vector<std::pair<std::string, const ArchSpec*>> variants = {
        {"baseline", &svd_arch}, {"tca_removed", &tca_removed}, {"vcut", &full}};
    for (const auto& [name, arch] : variants) {
      const bool is_base = name == "baseline";
      const double macs = 2.0 * static_cast<double>(count_macs(*arch, convention, ref.frames)) / 1e12;
      const double params = static_cast<double>(count_params(*arch));
      const double published_macs = is_base ? ref.baseline_tmacs : ref.modified_tmacs;
      const double published_params = is_base ? ref.baseline_params_b : ref.modified_params_b;
      const double published_macs_delta = is_base ? 0.0 : ref.baseline_tmacs - ref.modified_tmacs;
      const double published_params_delta = is_base ? 0.0 : ref.params_delta_m;
      t.rows.push_back({ref.model, std::to_string(ref.frames), name, format_number(macs), format_number(published_macs, 2),
                        format_number(relative_error(macs, published_macs)), format_number(params / 1e9),
                        format_number(published_params, 3), format_number(relative_error(params / 1e9, published_params)),
                        format_number(base_macs - macs), format_number(published_macs_delta, 2),
                        format_number((base_params - params) / 1e6), format_number(published_params_delta, 0),
                        to_string(convention)});
    }
  }
  return t;
}

CsvTable totals_table(const ArchSpec& svd_arch, MacConvention convention) {
  CsvTable t;
  t.header = {"model",
              "cut_step",
              "published_total_T",
              "total_from_published_step_T",
              "abs_err_T",
              "computed_total_T",
              "computed_rel_err",
              "published_latency_s",
              "modeled_latency_s",
              "published_reduction_pct",
              "modeled_reduction_pct",
              "computed_reduction_pct"};
  const ArchSpec full = vcut_arch(svd_arch);
  for (const auto& ref : total_references()) {
    const auto& step_ref = per_step_reference(ref.model);
    const auto& base_ref = baseline_total(ref.model);
    const bool is_base = ref.cut_step == 26;
    const double from_published =
        vcut_totals(is_base ? step_ref.baseline_tmacs : step_ref.modified_tmacs, 25, ref.cut_step);
    const double base_from_published = vcut_totals(step_ref.baseline_tmacs, 25, 26);

    const double computed_base = 2.0 * static_cast<double>(count_macs(svd_arch, convention, step_ref.frames)) / 1e12;
    double computed = vcut_totals(computed_base, 25, 26);
    if (!is_base) {
      const double step = 2.0 * static_cast<double>(count_macs(full, convention, step_ref.frames)) / 1e12;
      computed = vcut_totals(step, 25, ref.cut_step) + 2.0 * static_cast<double>(conditioner_macs(full)) / 1e12;
    }
    const double computed_base_total = vcut_totals(computed_base, 25, 26);
    const double modeled = latency_model(from_published, base_from_published, base_ref.latency_s);
    t.rows.push_back({ref.model, std::to_string(ref.cut_step), format_number(ref.total_tmacs, 0),
                      format_number(from_published, 2), format_number(std::abs(from_published - ref.total_tmacs), 2),
                      format_number(computed, 2), format_number(relative_error(computed, ref.total_tmacs)),
                      format_number(ref.latency_s, 1), format_number(modeled, 2),
                      format_number(ref.latency_reduction_pct, 0),
                      format_number(100.0 * (1.0 - from_published / base_from_published), 2),
                      format_number(100.0 * (1.0 - computed / computed_base_total), 2)});
  }
  return t;
}

}  // namespace vcut
