#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "vcut/app/equivalence.hpp"
#include "vcut/app/sweep.hpp"
#include "vcut/costmodel/cost.hpp"
#include "vcut/metrics/metrics.hpp"
#include "vcut/numerics/vten.hpp"
#include "vcut/sampler/sampler.hpp"
#include "vcut/surgery/surgery.hpp"

namespace vcut::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path require_out(const Globals& g, const std::string& command) {
  if (!g.out) throw ArgumentError(command + " needs --out DIR");
  std::error_code ec;
  fs::create_directories(*g.out, ec);
  if (ec) throw IoError("cannot create " + g.out->string() + ": " + ec.message());
  return *g.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

void append_text(const fs::path& path, const std::string& header, const std::string& row) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot append to " + path.string());
  if (fresh) os << header << '\n';
  os << row << '\n';
}

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

ModelSpec preset_spec(const std::string& name) {
  if (name == "svd-layout") return svd_layout_toy_spec();
  if (name == "single-site") return single_site_toy_spec();
  throw ArgumentError("unknown preset '" + name + "' (expected svd-layout or single-site)");
}

// Loads weights from a directory, or initializes them from a spec file or
// preset with the weight seed.
Model obtain_model(const Globals& g, const ModelSource& src) {
  if (src.weights) {
    Model m = load_model(*src.weights);
    if (g.dtype_given && m.weights.dtype != g.dtype) {
      throw ArgumentError("weights in " + src.weights->string() + " are " + to_string(m.weights.dtype) +
                          ", --dtype asked for " + to_string(g.dtype));
    }
    if (src.spec) {
      const auto spec = load_model_spec(*src.spec);
      if (to_json(spec) != to_json(m.spec)) {
        throw ArgumentError("--spec does not match the spec stored with the weights");
      }
    }
    return m;
  }
  const ModelSpec spec = src.spec ? load_model_spec(*src.spec) : preset_spec(src.preset);
  return init_model(spec, src.weight_seed, g.dtype);
}

}  // namespace

int cmd_init_weights(const Globals& g, const InitArgs& a) {
  const auto out = require_out(g, "init-weights");
  const Model m = obtain_model(g, a.source);
  save_model(out, m);
  save_model_spec(out / "spec.json", m.spec);
  emit({{"spec", to_json(m.spec)}, {"dtype", to_string(m.weights.dtype)},
        {"parameter_count", count_parameters(m.weights)}, {"weights", out.string()}});
  return kOk;
}

int cmd_surgery(const Globals& g, const SurgeryArgs& a) {
  const auto out = require_out(g, "surgery");
  const Model m = obtain_model(g, a.source);
  const auto result = apply_vcut(m);
  save_model(out, result.model);
  save_model_spec(out / "spec.json", result.model.spec);

  json report = result.report.to_json();
  const auto before = count_params(arch_from_model_spec(m.spec));
  const auto after = count_params(arch_from_model_spec(result.model.spec));
  report["costmodel_param_delta"] = before - after;
  report["counters_agree"] = (before - after) == result.report.param_delta();
  write_text(out / "surgery_report.json", report.dump(2) + "\n");
  emit(report);
  return kOk;
}

int cmd_run(const Globals& g, const RunArgs& a) {
  const auto out = require_out(g, "run");
  Model model = obtain_model(g, a.source);
  SamplerConfig cfg;
  cfg.mode = parse_sampler_mode(a.mode);
  cfg.steps = a.steps;
  cfg.cut_step = a.cut_step;
  cfg.seed = a.seed;
  cfg.validate();

  bool surgery_applied = false;
  if (cfg.mode != SamplerMode::kBaseline && !model.spec.vcut_applied) {
    model = apply_vcut(model).model;
    surgery_applied = true;
  }
  const auto& spec = model.spec;
  const DType dtype = model.weights.dtype;
  const auto z0 = initial_latent(spec, cfg.seed, dtype, cfg.sigma_max);
  const auto e = seeded_embedding(spec.batch, spec.embed_dim, cfg.seed, dtype);
  const auto n = ImageEmbedding::null(spec.batch, spec.embed_dim, dtype);
  const auto result = run(model, cfg, e, n, z0);

  if (!a.no_states) {
    char name[32];
    const auto& traj = result.trajectory;
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
      std::snprintf(name, sizeof name, "state_%03zu.vten", i);
      write_vten(out / name, traj.states[i].tensor());
    }
    for (std::size_t i = 0; i < traj.eps.size(); ++i) {
      std::snprintf(name, sizeof name, "eps_%03zu.vten", i + 1);
      write_vten(out / name, traj.eps[i].tensor());
    }
  }
  const json report = {{"config", cfg.to_json()},
                       {"model", spec.name},
                       {"dtype", to_string(dtype)},
                       {"surgery_applied", surgery_applied},
                       {"expected_forward_passes", expected_forward_passes(cfg.steps, cfg.effective_cut())},
                       {"stats", result.stats.to_json()},
                       {"final_digest", hex_digest(tensor_digest(result.trajectory.states.back().tensor()))},
                       {"trajectory_digest", hex_digest(trajectory_digest(result.trajectory))}};
  write_text(out / "run_stats.json", report.dump(2) + "\n");
  emit(report);
  return kOk;
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    json j;
    is >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

ArchSpec load_any_arch(const json& j) {
  if (j.contains("levels")) return arch_from_model_spec(model_spec_from_json(j));
  return arch_from_json(j);
}

// Wall-clock seconds of one baseline and one VCUT sampling run on the toy
// model. Sanity data only; the modeled figures stay the reported ones.
json measure_toy(const ModelSpec& spec, DType dtype, int steps, int cut_step) {
  const Model original = init_model(spec, 0, dtype);
  const Model transformed = apply_vcut(original).model;
  const auto e_cond = seeded_embedding(spec.batch, spec.embed_dim, 0, dtype);
  const auto e_null = ImageEmbedding::null(spec.batch, spec.embed_dim, dtype);
  auto timed = [&](const Model& model, SamplerMode mode) {
    SamplerConfig cfg;
    cfg.mode = mode;
    cfg.steps = steps;
    cfg.cut_step = cut_step;
    const auto z = initial_latent(spec, 0, dtype, cfg.sigma_max);
    const auto start = std::chrono::steady_clock::now();
    run(model, cfg, e_cond, e_null, z);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const double base = timed(original, SamplerMode::kBaseline);
  const double cut = timed(transformed, SamplerMode::kVcut);
  return {{"baseline_s", base}, {"vcut_s", cut}, {"ratio", cut / base}};
}

}  // namespace

int cmd_cost(const Globals& g, const CostArgs& a) {
  const json doc = read_json(a.arch);
  const ArchSpec arch = load_any_arch(doc);
  const auto report = build_cost_report(arch, a.steps, a.cut_step, parse_mac_convention(a.convention),
                                        a.baseline_latency, a.frames);
  json j = report.to_json();
  if (a.measure) {
    if (!doc.contains("levels")) throw ArgumentError("--measure needs a toy model spec, not an arch inventory");
    auto spec = model_spec_from_json(doc);
    if (a.frames > 0) spec.frames = a.frames;
    j["measured"] = measure_toy(spec, g.dtype, a.steps, a.cut_step);
    j["measured"]["modeled_ratio"] = report.total_macs / report.baseline_total_macs;
  }
  j["csv_header"] = CostReport::csv_header();
  j["csv_row"] = report.csv_row();
  if (g.out) {
    const auto out = require_out(g, "cost");
    write_text(out / "cost.json", j.dump(2) + "\n");
    append_text(out / "cost.csv", CostReport::csv_header(), report.csv_row());
  }
  emit(j);
  return kOk;
}

int cmd_metrics(const Globals& g, const MetricsArgs& a) {
  if (a.inputs.empty()) throw ArgumentError("metrics needs at least one --in file");
  const std::string& m = a.metric;
  json rows = json::array();
  std::optional<Tensor> ref;
  if (a.ref) ref = read_vten(*a.ref);
  auto needs_ref = [&] {
    if (!ref) throw ArgumentError(m + " needs --ref");
    return &*ref;
  };

  double score = 0.0;
  if (m == "dynamic-degree") {
    std::vector<Tensor> flows;
    for (const auto& p : a.inputs) {
      flows.push_back(read_vten(p));
      rows.push_back({{"input", p.string()}, {"pooled_magnitude", pooled_flow_magnitude(flows.back())}});
    }
    score = dynamic_degree(flows, a.theta);
  } else if (m == "flow") {
    if (a.inputs.size() != 1) throw ArgumentError("flow takes exactly one --in frames file");
    const auto out = require_out(g, "metrics flow");
    const Tensor flow = block_matching_flow(read_vten(a.inputs.front()), a.block, a.radius);
    write_vten(out / "flow.vten", flow);
    score = pooled_flow_magnitude(flow);
    rows.push_back({{"input", a.inputs.front().string()}, {"flow", (out / "flow.vten").string()}});
  } else {
    double sum = 0.0;
    for (const auto& p : a.inputs) {
      const Tensor t = read_vten(p);
      double s = 0.0;
      if (m == "subject-consistency") {
        s = subject_consistency(t);
      } else if (m == "vi-subject") {
        s = video_image_subject_consistency(t, *needs_ref());
      } else if (m == "bg-consistency") {
        s = background_consistency(t);
      } else if (m == "vi-bg") {
        s = video_image_background_consistency(t, *needs_ref());
      } else if (m == "motion-smoothness") {
        s = motion_smoothness(t, a.lo, a.hi);
      } else if (m == "cosine") {
        if (ref) {
          s = cosine_probe(t, *ref);
        } else {
          if (t.rank() != 2 || t.dim(0) < 2) throw ShapeError("cosine without --ref needs a [T, D] sequence, T >= 2");
          const auto D = t.dim(1);
          const auto v = t.to_doubles();
          const Tensor first({D}, std::vector<double>(v.begin(), v.begin() + D));
          const Tensor last({D}, std::vector<double>(v.end() - D, v.end()));
          s = cosine_probe(first, last);
        }
      } else {
        throw ArgumentError("unknown metric '" + m + "'");
      }
      rows.push_back({{"input", p.string()}, {"score", s}});
      sum += s;
    }
    score = sum / static_cast<double>(a.inputs.size());
  }

  json params = {{"theta", a.theta}, {"lo", a.lo}, {"hi", a.hi}};
  const json report = {{"metric", m},
                       {"score", score},
                       {"inputs", rows},
                       {"ref", a.ref ? json(a.ref->string()) : json(nullptr)},
                       {"parameters", params}};
  if (a.csv) {
    for (const auto& r : rows) {
      const double s = r.contains("score") ? r["score"].get<double>() : score;
      append_text(*a.csv, "metric,input,ref,score", m + "," + r["input"].get<std::string>() + "," +
                                                         (a.ref ? a.ref->string() : "") + "," + format_number(s, 9));
    }
  }
  if (g.out && m != "flow") write_text(require_out(g, "metrics") / ("metric_" + m + ".json"), report.dump(2) + "\n");
  emit(report);
  return kOk;
}

int cmd_equiv_check(const Globals& g, const EquivArgs& a) {
  EquivalenceConfig cfg;
  cfg.seeds = a.seeds;
  cfg.cache_seeds = a.cache_seeds;
  cfg.steps = a.steps;
  cfg.cut_step = a.cut_step;
  cfg.dtype = g.dtype;
  cfg.base_seed = a.base_seed;
  cfg.poison_fold = a.poison_fold;
  const auto report = run_equivalence_suite(cfg);
  const json j = report.to_json();
  if (g.out) write_text(require_out(g, "equiv-check") / "equiv_report.json", j.dump(2) + "\n");
  emit(j);
  if (const auto* f = report.first_failure()) {
    std::cerr << "equiv-check: " << f->name << " failed: " << f->detail << '\n';
    return kViolation;
  }
  return kOk;
}

int cmd_sweep(const Globals& g, const SweepArgs& a) {
  const auto out = require_out(g, "sweep");
  ExperimentPlan plan;
  if (a.plan) {
    std::ifstream is(*a.plan);
    if (!is) throw IoError("cannot open plan " + a.plan->string());
    json j;
    try {
      is >> j;
    } catch (const json::exception& e) {
      throw ConfigError("malformed plan " + a.plan->string() + ": " + e.what());
    }
    plan = ExperimentPlan::from_json(j);
  }
  if (!a.modes.empty()) {
    plan.modes.clear();
    for (const auto& m : a.modes) plan.modes.push_back(parse_sampler_mode(m));
  }
  if (!a.cut_steps.empty()) plan.cut_steps = a.cut_steps;
  if (a.seeds_given) plan.seeds = a.seeds;
  if (a.steps) plan.steps = *a.steps;
  plan.threads = g.threads;
  plan.validate();

  const Model loaded = obtain_model(g, a.source);
  std::optional<Model> original;
  std::optional<Model> transformed;
  if (loaded.spec.vcut_applied) {
    transformed = loaded;
  } else {
    original = loaded;
    transformed = apply_vcut(loaded).model;
  }
  const auto report = run_sweep(plan, original ? &*original : nullptr, transformed ? &*transformed : nullptr);
  write_text(out / "sweep.csv", report.csv());
  const json j = report.to_json();
  write_text(out / "sweep.json", j.dump(2) + "\n");
  emit(j);
  return kOk;
}

int cmd_cost_tables(const Globals& g, const CostTablesArgs& a) {
  const ArchSpec svd = load_any_arch(read_json(a.arch));
  const auto convention = parse_mac_convention(a.convention);
  const auto per_step = per_step_table(svd, convention);
  const auto totals = totals_table(svd, convention);
  auto to_rows = [](const CsvTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
      json row;
      for (std::size_t i = 0; i < t.header.size(); ++i) {
        // Numeric cells become JSON numbers; labels stay strings.
        const json parsed = json::parse(r[i], nullptr, false);
        row[t.header[i]] = parsed.is_number() ? parsed : json(r[i]);
      }
      rows.push_back(row);
    }
    return rows;
  };
  const json j = {{"arch", svd.name},
                  {"convention", to_string(convention)},
                  {"per_step", to_rows(per_step)},
                  {"totals", to_rows(totals)}};
  if (g.out) {
    const auto out = require_out(g, "cost-tables");
    write_text(out / "per_step_costs.csv", per_step.render());
    write_text(out / "total_costs.csv", totals.render());
    write_text(out / "cost_tables.json", j.dump(2) + "\n");
  }
  emit(j);
  return kOk;
}

}  // namespace vcut::cli
