#include <doctest.h>

#include <cstring>

#include "vcut/app/equivalence.hpp"
#include "vcut/app/sweep.hpp"
#include "vcut/surgery/surgery.hpp"

using namespace vcut;

namespace {

std::uint64_t fnv_of(const char* text) {
  const auto* p = reinterpret_cast<const std::byte*>(text);
  return fnv1a64(std::span<const std::byte>(p, std::strlen(text)));
}

struct Models {
  Model original = init_model(single_site_toy_spec(), 3, DType::kF32);
  Model transformed = apply_vcut(original).model;
};

}  // namespace

TEST_CASE("fnv1a64 reference vectors") {
  CHECK(fnv_of("") == 0xcbf29ce484222325ULL);
  CHECK(fnv_of("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv_of("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex_digest(0xabcULL) == "0000000000000abc");
}

TEST_CASE("tensor digest follows the bytes") {
  const Tensor a({2}, std::vector<double>{1.0, 2.0});
  const Tensor b({2}, std::vector<double>{1.0, 2.0});
  const Tensor c({2}, std::vector<double>{1.0, -2.0});
  CHECK(tensor_digest(a) == tensor_digest(b));
  CHECK(tensor_digest(a) != tensor_digest(c));
}

TEST_CASE("random site properties hold in both precisions") {
  for (auto dtype : {DType::kF32, DType::kF64}) {
    const auto r = check_random_sites(40, 0, dtype);
    CHECK(r.passed);
    CHECK(r.cases == 40);
    CHECK(r.tolerance == fold_tolerance(dtype));
    CHECK(r.max_error <= r.tolerance);
  }
  CHECK(fold_tolerance(DType::kF32) == 1e-5);
  CHECK(fold_tolerance(DType::kF64) == 1e-12);
}

TEST_CASE("model-level properties on the single-site toy") {
  Models m;
  CHECK(check_model_folds(m.original, m.transformed).passed);
  CHECK(check_forward_decomposition(m.original, 1).passed);
  CHECK(check_forward_fold(m.original, m.transformed, 2).passed);
  CHECK(check_cache_identity(m.transformed, 2, 4, 3, 0).passed);
  CHECK(check_prefix_equality(m.transformed, 2, 4, 3, 0).passed);
}

TEST_CASE("a poisoned fold is caught and named") {
  Models m;
  poison_fold(m.transformed, "mid.sca", 0.01);
  const auto r = check_model_folds(m.original, m.transformed);
  CHECK_FALSE(r.passed);
  CHECK(r.detail.find("mid.sca") != std::string::npos);
  CHECK_FALSE(check_forward_fold(m.original, m.transformed, 2).passed);
  CHECK_THROWS_AS(poison_fold(m.transformed, "nowhere.sca", 0.01), ArgumentError);
}

TEST_CASE("equivalence report bookkeeping") {
  EquivalenceReport report;
  report.dtype = "f32";
  report.properties.push_back({"a", true, 1, 0.0, 1.0, ""});
  CHECK(report.passed());
  CHECK(report.first_failure() == nullptr);
  report.properties.push_back({"b", false, 1, 2.0, 1.0, "broken"});
  CHECK_FALSE(report.passed());
  REQUIRE(report.first_failure() != nullptr);
  CHECK(report.first_failure()->name == "b");
  const auto j = report.to_json();
  CHECK(j.at("passed") == false);
  CHECK(j.at("properties").size() == 2);
}

TEST_CASE("sweep rows follow the pass-count law") {
  Models m;
  ExperimentPlan plan;
  plan.steps = 4;
  plan.cut_steps = {3};
  plan.seeds = {0, 1, 2};
  const auto report = run_sweep(plan, &m.original, &m.transformed);
  REQUIRE(report.rows.size() == 6);
  for (const auto& row : report.rows) {
    CHECK(row.ok);
    CHECK(row.forward_passes == row.expected_passes);
    if (row.mode == SamplerMode::kVcut) {
      CHECK(row.forward_passes == 6);
      CHECK(row.cut_step == 3);
      CHECK(row.modeled_latency_ratio < 1.0);
    } else {
      CHECK(row.forward_passes == 8);
      CHECK(row.cut_step == 5);
      CHECK(row.modeled_latency_ratio == 1.0);
    }
  }
  CHECK(report.rows.front().run_id == "baseline-c5-s0");
}

TEST_CASE("sweep output is deterministic across thread counts") {
  Models m;
  ExperimentPlan plan;
  plan.modes = {SamplerMode::kBaseline, SamplerMode::kModified, SamplerMode::kVcut};
  plan.steps = 3;
  plan.cut_steps = {1, 2, 4};
  plan.seeds = {5, 6};
  const auto one = run_sweep(plan, &m.original, &m.transformed).csv();
  plan.threads = 3;
  const auto three = run_sweep(plan, &m.original, &m.transformed).csv();
  CHECK(one == three);
  CHECK(one == run_sweep(plan, &m.original, &m.transformed).csv());
}

TEST_CASE("sweep records per-row errors") {
  Models m;
  ExperimentPlan plan;
  plan.steps = 2;
  plan.cut_steps = {2};
  plan.seeds = {0};
  const auto report = run_sweep(plan, nullptr, &m.transformed);
  REQUIRE(report.rows.size() == 2);
  CHECK_FALSE(report.rows[0].ok);
  CHECK_FALSE(report.rows[0].error.empty());
  CHECK(report.rows[1].ok);
}

TEST_CASE("plan validation and json") {
  ExperimentPlan plan;
  plan.seeds.clear();
  CHECK_THROWS_AS(plan.validate(), ArgumentError);
  plan.seeds = {1};
  plan.cut_steps = {30};
  CHECK_THROWS_AS(plan.validate(), ArgumentError);
  plan.cut_steps = {17};
  const auto back = ExperimentPlan::from_json(plan.to_json());
  CHECK(back.to_json() == plan.to_json());
  CHECK_THROWS_AS(ExperimentPlan::from_json(nlohmann::json{{"modes", {"warp"}}, {"seeds", {1}}}), ArgumentError);
}

TEST_CASE("default plan at T=25: vcut rows use 41 passes against 50") {
  Models m;
  const ExperimentPlan plan;
  const auto report = run_sweep(plan, &m.original, &m.transformed);
  REQUIRE(report.rows.size() == 6);
  for (const auto& row : report.rows) {
    CHECK(row.ok);
    CHECK(row.forward_passes == (row.mode == SamplerMode::kVcut ? 41 : 50));
  }
}
