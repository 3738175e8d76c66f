// vcut: command-line front end for surgery, sampling, cost accounting,
// metrics and the equivalence checks.

#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "vcut/numerics/errors.hpp"

namespace {

using namespace vcut::cli;

void add_model_source(CLI::App* cmd, ModelSource& src) {
  cmd->add_option("--weights", src.weights, "weight directory (manifest.json + VTEN files)");
  cmd->add_option("--spec", src.spec, "model spec JSON; weights are initialized from --weight-seed");
  cmd->add_option("--preset", src.preset, "built-in spec when neither --weights nor --spec is given")
      ->check(CLI::IsMember({"svd-layout", "single-site"}));
  cmd->add_option("--weight-seed", src.weight_seed, "seed for freshly initialized weights");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-attention degeneracy lab: VCUT surgery, sampling, cost model and metrics"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::string dtype = "f32";
  auto* dtype_opt = app.add_option("--dtype", dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--threads", g.threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory");

  InitArgs init;
  init.source.preset = "svd-layout";
  auto* c_init = app.add_subcommand("init-weights", "write seeded weights for a spec");
  add_model_source(c_init, init.source);

  SurgeryArgs surgery;
  surgery.source.preset = "svd-layout";
  auto* c_surgery = app.add_subcommand("surgery", "remove TCA, fold SCA, write the transformed model");
  add_model_source(c_surgery, surgery.source);

  RunArgs run;
  run.source.preset = "svd-layout";
  auto* c_run = app.add_subcommand("run", "sample one trajectory");
  add_model_source(c_run, run.source);
  c_run->add_option("--mode", run.mode)->check(CLI::IsMember({"baseline", "modified", "vcut"}));
  c_run->add_option("--steps", run.steps)->check(CLI::PositiveNumber);
  c_run->add_option("--cut-step", run.cut_step, "1-indexed cut step (0 = never cut)");
  c_run->add_option("--seed", run.seed);
  c_run->add_flag("--no-states", run.no_states, "skip writing trajectory VTEN files");

  CostArgs cost;
  auto* c_cost = app.add_subcommand("cost", "MACs, params and modeled latency of an architecture");
  c_cost->add_option("--arch", cost.arch, "arch JSON (inventory, generator or model spec)")->required();
  c_cost->add_option("--frames", cost.frames, "frame count (default: from the arch)");
  c_cost->add_option("--steps", cost.steps)->check(CLI::PositiveNumber);
  c_cost->add_option("--cut-step", cost.cut_step, "1-indexed cut step (0 = never cut)");
  c_cost->add_option("--baseline-latency", cost.baseline_latency, "seconds per baseline video");
  c_cost->add_option("--convention", cost.convention)->check(CLI::IsMember({"module-hook", "full"}));
  c_cost->add_flag("--measure", cost.measure, "also time baseline and VCUT runs of a toy model spec");

  MetricsArgs metrics;
  auto* c_metrics = app.add_subcommand("metrics", "video metrics over VTEN inputs");
  c_metrics->add_option("metric", metrics.metric)
      ->required()
      ->check(CLI::IsMember({"subject-consistency", "vi-subject", "bg-consistency", "vi-bg", "motion-smoothness",
                             "dynamic-degree", "cosine", "flow"}));
  c_metrics->add_option("--in", metrics.inputs, "input VTEN file (repeatable)")->required();
  c_metrics->add_option("--ref", metrics.ref, "reference feature VTEN");
  c_metrics->add_option("--theta", metrics.theta, "dynamic-degree threshold in pixels");
  c_metrics->add_option("--lo", metrics.lo, "frame value range low end");
  c_metrics->add_option("--hi", metrics.hi, "frame value range high end");
  c_metrics->add_option("--block", metrics.block, "block size for the flow estimator")->check(CLI::PositiveNumber);
  c_metrics->add_option("--radius", metrics.radius, "search radius for the flow estimator")
      ->check(CLI::NonNegativeNumber);
  c_metrics->add_option("--csv", metrics.csv, "append one CSV row per input");

  EquivArgs equiv;
  auto* c_equiv = app.add_subcommand("equiv-check", "run the equivalence property suite");
  c_equiv->add_option("--seeds", equiv.seeds, "random attention configurations")->check(CLI::PositiveNumber);
  c_equiv->add_option("--cache-seeds", equiv.cache_seeds, "sampler seeds for cache/prefix checks")
      ->check(CLI::NonNegativeNumber);
  c_equiv->add_option("--steps", equiv.steps)->check(CLI::PositiveNumber);
  c_equiv->add_option("--cut-step", equiv.cut_step);
  c_equiv->add_option("--base-seed", equiv.base_seed);
  c_equiv->add_option("--poison-fold", equiv.poison_fold, "corrupt this folded site (negative control)");

  SweepArgs sweep;
  sweep.source.preset = "svd-layout";
  auto* c_sweep = app.add_subcommand("sweep", "run modes x cut steps x seeds");
  add_model_source(c_sweep, sweep.source);
  c_sweep->add_option("--plan", sweep.plan, "experiment plan JSON");
  c_sweep->add_option("--modes", sweep.modes)->delimiter(',')->check(CLI::IsMember({"baseline", "modified", "vcut"}));
  c_sweep->add_option("--cut-steps", sweep.cut_steps)->delimiter(',');
  std::vector<std::string> seed_strings;
  auto* seeds_opt = c_sweep->add_option("--seeds", seed_strings, "comma-separated seeds")->delimiter(',')->expected(0, -1);
  c_sweep->add_option("--steps", sweep.steps);

  CostTablesArgs tables;
  tables.arch = std::string(VCUT_DATA_DIR) + "/svd_img2vid.json";
  auto* c_tables = app.add_subcommand("cost-tables", "per-step and whole-video cost tables vs published values");
  c_tables->add_option("--arch", tables.arch, "SVD-scale arch JSON");
  c_tables->add_option("--convention", tables.convention)->check(CLI::IsMember({"module-hook", "full"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kArgument;
  }

  g.dtype = vcut::parse_dtype(dtype);
  g.dtype_given = dtype_opt->count() > 0;
  sweep.seeds_given = seeds_opt->count() > 0;
  for (const auto& r : seeds_opt->results()) {
    if (r.empty()) continue;
    try {
      std::size_t used = 0;
      sweep.seeds.push_back(std::stoull(r, &used));
      if (used != r.size()) throw std::invalid_argument(r);
    } catch (const std::exception&) {
      std::cerr << "vcut: bad seed '" << r << "'\n";
      return kArgument;
    }
  }

  try {
    if (*c_init) return cmd_init_weights(g, init);
    if (*c_surgery) return cmd_surgery(g, surgery);
    if (*c_run) return cmd_run(g, run);
    if (*c_cost) return cmd_cost(g, cost);
    if (*c_metrics) return cmd_metrics(g, metrics);
    if (*c_equiv) return cmd_equiv_check(g, equiv);
    if (*c_sweep) return cmd_sweep(g, sweep);
    if (*c_tables) return cmd_cost_tables(g, tables);
  } catch (const vcut::IoError& e) {
    std::cerr << "vcut: I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const vcut::NumericError& e) {
    std::cerr << "vcut: numeric error: " << e.what() << '\n';
    return kViolation;
  } catch (const vcut::Error& e) {
    std::cerr << "vcut: " << e.what() << '\n';
    return kArgument;
  } catch (const std::exception& e) {
    std::cerr << "vcut: internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kArgument;
}
