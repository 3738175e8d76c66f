#include "vcut/app/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>

#include "vcut/costmodel/cost.hpp"

namespace vcut {

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t hash) {
  for (const auto b : bytes) {
    hash ^= static_cast<std::uint8_t>(b);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex_digest(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t tensor_digest(const Tensor& t) {
  const auto bytes = t.bytes();
  return fnv1a64(bytes);
}

std::uint64_t trajectory_digest(const Trajectory& trajectory) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : trajectory.states) {
    const auto bytes = s.tensor().bytes();
    h = fnv1a64(bytes, h);
  }
  return h;
}

void ExperimentPlan::validate() const {
  if (modes.empty()) throw ArgumentError("plan needs at least one mode");
  if (seeds.empty()) throw ArgumentError("plan needs at least one seed");
  if (steps < 1) throw ArgumentError("plan steps must be >= 1");
  if (threads < 1) throw ArgumentError("plan threads must be >= 1");
  for (const auto m : modes) {
    if (m == SamplerMode::kVcut && cut_steps.empty()) throw ArgumentError("vcut mode needs at least one cut step");
  }
  for (const auto c : cut_steps) {
    if (c < 1 || c > steps + 1) {
      throw ArgumentError("cut step " + std::to_string(c) + " outside [1, " + std::to_string(steps + 1) + "]");
    }
  }
}

nlohmann::json ExperimentPlan::to_json() const {
  std::vector<std::string> mode_names;
  for (const auto m : modes) mode_names.push_back(to_string(m));
  return {{"modes", mode_names}, {"cut_steps", cut_steps}, {"seeds", seeds}, {"steps", steps}, {"threads", threads}};
}

ExperimentPlan ExperimentPlan::from_json(const nlohmann::json& j) {
  ExperimentPlan p;
  try {
    if (j.contains("modes")) {
      p.modes.clear();
      for (const auto& m : j.at("modes")) p.modes.push_back(parse_sampler_mode(m.get<std::string>()));
    }
    p.cut_steps = j.value("cut_steps", p.cut_steps);
    p.seeds = j.value("seeds", p.seeds);
    p.steps = j.value("steps", p.steps);
    p.threads = j.value("threads", p.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad experiment plan: ") + e.what());
  }
  return p;
}

nlohmann::json SweepReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"run_id", r.run_id},
                         {"mode", to_string(r.mode)},
                         {"cut_step", r.cut_step},
                         {"seed", r.seed},
                         {"status", r.ok ? "ok" : "error"},
                         {"error", r.error},
                         {"forward_passes", r.forward_passes},
                         {"expected_passes", r.expected_passes},
                         {"dual_pass_steps", r.dual_pass_steps},
                         {"single_pass_steps", r.single_pass_steps},
                         {"modeled_latency_ratio", r.modeled_latency_ratio},
                         {"final_digest", r.final_digest},
                         {"trajectory_digest", r.trajectory_digest},
                         {"seconds", r.seconds}});
  }
  return {{"model", model_name}, {"plan", plan.to_json()}, {"rows", rows_json}};
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string SweepReport::csv() const {
  std::ostringstream os;
  os << "run_id,mode,cut_step,seed,status,forward_passes,expected_passes,dual_pass_steps,single_pass_steps,"
        "modeled_latency_ratio,final_digest,trajectory_digest,error\n";
  for (const auto& r : rows) {
    os << r.run_id << ',' << to_string(r.mode) << ',' << r.cut_step << ',' << r.seed << ','
       << (r.ok ? "ok" : "error") << ',' << r.forward_passes << ',' << r.expected_passes << ',' << r.dual_pass_steps
       << ',' << r.single_pass_steps << ',' << format_number(r.modeled_latency_ratio, 6) << ',' << r.final_digest
       << ',' << r.trajectory_digest << ',' << csv_escape(r.error) << '\n';
  }
  return os.str();
}

SweepReport run_sweep(const ExperimentPlan& plan, const Model* original, const Model* transformed) {
  plan.validate();
  const Model* any = original != nullptr ? original : transformed;
  if (any == nullptr) throw ArgumentError("sweep needs a model");

  SweepReport report;
  report.plan = plan;
  report.model_name = any->spec.name;

  // Costs per forward pass on the toy arch, for the modeled latency ratio.
  ModelSpec base_spec = any->spec;
  base_spec.vcut_applied = false;
  ModelSpec vcut_spec = base_spec;
  vcut_spec.vcut_applied = true;
  const auto base_fwd = static_cast<double>(count_macs(arch_from_model_spec(base_spec), MacConvention::kFull));
  const auto vcut_fwd = static_cast<double>(count_macs(arch_from_model_spec(vcut_spec), MacConvention::kFull));
  const double base_total = vcut_totals(2.0 * base_fwd, plan.steps, plan.steps + 1);

  for (const auto mode : plan.modes) {
    const std::vector<int> cuts = mode == SamplerMode::kVcut ? plan.cut_steps : std::vector<int>{plan.steps + 1};
    for (const auto c : cuts) {
      for (const auto seed : plan.seeds) {
        SweepRow row;
        row.mode = mode;
        row.cut_step = c;
        row.seed = seed;
        row.run_id = to_string(mode) + "-c" + std::to_string(c) + "-s" + std::to_string(seed);
        row.expected_passes = expected_forward_passes(plan.steps, c);
        const double per_fwd = mode == SamplerMode::kBaseline ? base_fwd : vcut_fwd;
        row.modeled_latency_ratio = vcut_totals(2.0 * per_fwd, plan.steps, c) / base_total;
        report.rows.push_back(row);
      }
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < report.rows.size(); i = next++) {
      auto& row = report.rows[i];
      const auto started = std::chrono::steady_clock::now();
      try {
        const Model* model = row.mode == SamplerMode::kBaseline ? original : transformed;
        if (model == nullptr) {
          throw StateError(row.mode == SamplerMode::kBaseline ? "no original model available for baseline rows"
                                                              : "no transformed model available");
        }
        SamplerConfig cfg;
        cfg.mode = row.mode;
        cfg.steps = plan.steps;
        cfg.cut_step = row.mode == SamplerMode::kVcut ? row.cut_step : 0;
        cfg.seed = row.seed;
        const auto& spec = model->spec;
        const DType dtype = model->weights.dtype;
        const auto z0 = initial_latent(spec, row.seed, dtype, cfg.sigma_max);
        const auto e = seeded_embedding(spec.batch, spec.embed_dim, row.seed, dtype);
        const auto n = ImageEmbedding::null(spec.batch, spec.embed_dim, dtype);
        const auto result = run(*model, cfg, e, n, z0);
        row.forward_passes = result.stats.forward_passes;
        row.dual_pass_steps = result.stats.dual_pass_steps;
        row.single_pass_steps = result.stats.single_pass_steps;
        row.final_digest = hex_digest(tensor_digest(result.trajectory.states.back().tensor()));
        row.trajectory_digest = hex_digest(trajectory_digest(result.trajectory));
        row.ok = true;
      } catch (const std::exception& ex) {
        row.ok = false;
        row.error = ex.what();
      }
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(plan.threads), report.rows.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return report;
}

}  // namespace vcut
