#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "vcut/costmodel/arch.hpp"
#include "vcut/costmodel/cost.hpp"
#include "vcut/model/attention.hpp"
#include "vcut/model/weights.hpp"
#include "vcut/surgery/surgery.hpp"

using namespace vcut;

namespace {

ArchSpec single(ArchLayer layer, std::int64_t frames = 1) {
  ArchSpec arch;
  arch.name = "single";
  arch.frames = frames;
  arch.layers.push_back(std::move(layer));
  return arch;
}

ArchLayer affine_layer(std::int64_t in, std::int64_t out) {
  ArchLayer l;
  l.type = LayerType::kAffine;
  l.name = "fc";
  l.in = in;
  l.out = out;
  return l;
}

ArchLayer attention_layer(AttentionKind kind, std::int64_t c, std::int64_t heads, std::int64_t src,
                          std::int64_t positions) {
  ArchLayer l;
  l.type = LayerType::kAttention;
  l.name = "attn";
  l.kind = kind;
  l.channels = c;
  l.heads = heads;
  l.source_dim = src;
  l.positions = positions;
  return l;
}

const ArchSpec& svd() {
  static const ArchSpec arch = load_arch(VCUT_DATA_DIR "/svd_img2vid.json");
  return arch;
}

const ArchSpec& svd_xt() {
  static const ArchSpec arch = load_arch(VCUT_DATA_DIR "/svd_xt.json");
  return arch;
}

}  // namespace

TEST_CASE("single affine layer") {
  const auto arch = single(affine_layer(3, 2));
  CHECK(count_macs(arch, MacConvention::kFull) == 6);
  CHECK(count_macs(arch, MacConvention::kModuleHook) == 6);
  CHECK(count_params(arch) == 8);
  auto no_bias = affine_layer(3, 2);
  no_bias.bias = false;
  CHECK(count_params(single(no_bias)) == 6);
}

TEST_CASE("toy attention MACs equal the scalar oracle's multiply count") {
  // Temporal self-attention over 2 frames at one position: L_q = L_k = 2.
  const auto layer = attention_layer(AttentionKind::kTSA, 4, 1, 4, 1);
  const auto arch = single(layer, 2);
  Rng rng(1);
  const auto site = make_attention_site("a", AttentionKind::kTSA, 4, 1, 4, rng, DType::kF64);
  const oracle::Weights w{site.wq.to_doubles(), site.bq.to_doubles(), site.wk.to_doubles(), site.bk.to_doubles(),
                          site.wv.to_doubles(), site.bv.to_doubles(), site.wo.to_doubles(), site.bo.to_doubles()};
  const auto x = rng_normal(rng, {2, 4}, DType::kF64).to_doubles();
  std::int64_t macs = 0;
  oracle::attention(w, x, x, 2, 2, 4, 4, 1, &macs);
  CHECK(count_macs(arch, MacConvention::kFull) == macs);
  // The hook convention drops the score and weighted-sum products.
  CHECK(count_macs(arch, MacConvention::kModuleHook) == macs - 2 * 2 * 2 * 4);
}

TEST_CASE("attention MACs match the oracle across geometries") {
  for (const auto& [kind, heads, c, src, pos, frames] :
       {std::tuple{AttentionKind::kSSA, 2, 8, 8, 3, 2}, std::tuple{AttentionKind::kSCA, 2, 8, 6, 3, 2},
        std::tuple{AttentionKind::kTSA, 4, 8, 8, 2, 3}, std::tuple{AttentionKind::kTCA, 1, 4, 5, 2, 3}}) {
    auto layer = attention_layer(kind, c, heads, src, pos);
    const auto g = attention_geometry(layer, 1, frames);
    const int L = static_cast<int>(g.query_length), Lk = static_cast<int>(g.key_length);
    CHECK(g.sequences * g.query_length == pos * frames);
    Rng rng(2);
    const auto site = make_attention_site("a", kind, c, heads, src, rng, DType::kF64);
    const oracle::Weights w{site.wq.to_doubles(), site.bq.to_doubles(), site.wk.to_doubles(), site.bk.to_doubles(),
                            site.wv.to_doubles(), site.bv.to_doubles(), site.wo.to_doubles(), site.bo.to_doubles()};
    const auto x = rng_normal(rng, {L, c}, DType::kF64).to_doubles();
    const auto s = rng_normal(rng, {Lk, is_cross(kind) ? src : c}, DType::kF64).to_doubles();
    std::int64_t macs = 0;
    oracle::attention(w, x, is_cross(kind) ? s : x, L, Lk, c, is_cross(kind) ? src : c, heads, &macs);
    CHECK(layer_macs(layer, 1, frames, MacConvention::kFull) == g.sequences * macs);
  }
}

TEST_CASE("conv and norm counts") {
  ArchLayer conv;
  conv.type = LayerType::kConv;
  conv.name = "conv";
  conv.in = 4;
  conv.out = 6;
  conv.kernel = 9;
  conv.positions = 10;
  CHECK(count_macs(single(conv, 3), MacConvention::kFull) == 3 * 10 * 4 * 6 * 9);
  CHECK(count_params(single(conv)) == 4 * 6 * 9 + 6);
  conv.groups = 2;
  CHECK(count_params(single(conv)) == 2 * 6 * 9 + 6);
  ArchLayer norm;
  norm.type = LayerType::kNorm;
  norm.name = "norm";
  norm.in = 5;
  CHECK(count_params(single(norm)) == 10);
  CHECK(count_macs(single(norm), MacConvention::kFull) == 0);
}

TEST_CASE("frozen SVD-scale counts") {
  CHECK(count_macs(svd(), MacConvention::kModuleHook) == 18048373964800LL);
  CHECK(count_macs(svd_xt(), MacConvention::kModuleHook) == 32187415347200LL);
  CHECK(count_params(svd()) == 1524623082LL);
  CHECK(count_params(svd_xt()) == 1524623082LL);
  CHECK(count_sites(svd(), AttentionKind::kSCA) == 16);
  CHECK(count_sites(svd(), AttentionKind::kTCA) == 16);
  CHECK(count_sites(svd(), AttentionKind::kSSA) == 16);
  CHECK(count_sites(svd(), AttentionKind::kTSA) == 16);
}

TEST_CASE("SVD-scale absolutes against published per-step values") {
  const double f14 = 2.0 * count_macs(svd(), MacConvention::kModuleHook) / 1e12;
  const double f25 = 2.0 * count_macs(svd_xt(), MacConvention::kModuleHook) / 1e12;
  CHECK(std::abs(f14 - 36.11) / 36.11 <= 0.15);
  CHECK(std::abs(f25 - 64.41) / 64.41 <= 0.15);
  CHECK(std::abs(count_params(svd()) / 1e9 - 1.521) / 1.521 <= 0.15);
}

TEST_CASE("vcut transform of an arch") {
  const auto v = vcut_arch(svd());
  CHECK(count_sites(v, AttentionKind::kTCA) == 0);
  CHECK(count_sites(v, AttentionKind::kSCA) == 0);
  CHECK(count_folded(v) == 16);
  CHECK(v.name == "svd+vcut");
  CHECK_THROWS_AS(vcut_arch(v), TransformError);
  CHECK(count_macs(v, MacConvention::kModuleHook) < count_macs(svd(), MacConvention::kModuleHook));
  CHECK(count_params(v) < count_params(svd()));
  CHECK(conditioner_macs(v) > 0);
  const auto tca = remove_attention(svd(), AttentionKind::kTCA);
  // Per TCA site of width c: 2c^2 + 2*1024*c weights, c output bias, 2c norm.
  const auto site = [](std::int64_t c) { return 2 * c * c + 2 * 1024 * c + c + 2 * c; };
  CHECK(count_params(svd()) - count_params(tca) == 5 * site(320) + 5 * site(640) + 6 * site(1280));
}

TEST_CASE("removing any layer never increases MACs or params") {
  for (const auto* arch : {&svd(), &svd_xt()}) {
    const auto macs = count_macs(*arch, MacConvention::kFull);
    const auto params = count_params(*arch);
    for (std::size_t i = 0; i < arch->layers.size(); i += 7) {
      auto smaller = *arch;
      smaller.layers.erase(smaller.layers.begin() + static_cast<std::ptrdiff_t>(i));
      CHECK(count_macs(smaller, MacConvention::kFull) <= macs);
      CHECK(count_params(smaller) <= params);
    }
  }
}

TEST_CASE("MACs grow with frames") {
  CHECK(count_macs(svd(), MacConvention::kFull, 25) > count_macs(svd(), MacConvention::kFull, 14));
  CHECK(count_macs(svd(), MacConvention::kModuleHook, 25) == count_macs(svd_xt(), MacConvention::kModuleHook));
}

TEST_CASE("grouped counts sum to the total") {
  for (auto conv : {MacConvention::kFull, MacConvention::kModuleHook}) {
    std::int64_t sum = 0;
    for (const auto& [group, v] : macs_by_group(svd(), conv)) sum += v;
    CHECK(sum == count_macs(svd(), conv));
  }
  std::int64_t sum = 0;
  for (const auto& [group, v] : params_by_group(svd())) sum += v;
  CHECK(sum == count_params(svd()));
}

TEST_CASE("arch json round trip") {
  const auto back = arch_from_json(to_json(svd()));
  CHECK(count_macs(back, MacConvention::kFull) == count_macs(svd(), MacConvention::kFull));
  CHECK(count_params(back) == count_params(svd()));
  CHECK_THROWS_AS(arch_from_json(nlohmann::json{{"layers", {{{"type", "warp"}}}}}), ConfigError);
  CHECK_THROWS_AS(load_arch("/nonexistent/arch.json"), IoError);
}

TEST_CASE("toy model specs and their arch agree with the real weights") {
  for (const auto& spec : {svd_layout_toy_spec(), single_site_toy_spec()}) {
    const auto arch = arch_from_model_spec(spec);
    CHECK(count_params(arch) == count_parameters(allocate_weights(spec, DType::kF32)));
    auto transformed = spec;
    transformed.vcut_applied = true;
    CHECK(count_params(vcut_arch(arch)) == count_parameters(allocate_weights(transformed, DType::kF32)));
  }
}

TEST_CASE("vcut_totals") {
  CHECK(std::abs(vcut_totals(35.1, 25, 17) - 719.55) <= 1e-9);
  CHECK(std::abs(vcut_totals(35.1, 25, 17) - 719.0) <= 1.0);
  CHECK(std::abs(vcut_totals(62.86, 25, 20) - 1382.0) <= 1.0);
  CHECK(vcut_totals(36.11, 25, 26) == 25 * 36.11);
  CHECK(vcut_totals(10.0, 4, 1) == 20.0);
  CHECK_THROWS_AS(vcut_totals(1.0, 25, 0), ArgumentError);
  CHECK_THROWS_AS(vcut_totals(1.0, 25, 27), ArgumentError);
}

TEST_CASE("published totals close from published per-step values") {
  for (const auto& ref : total_references()) {
    const PerStepReference* step = nullptr;
    for (const auto& s : per_step_references()) {
      if (s.model == ref.model) step = &s;
    }
    REQUIRE(step != nullptr);
    const double per_step = ref.cut_step == 26 ? step->baseline_tmacs : step->modified_tmacs;
    CHECK(std::abs(vcut_totals(per_step, 25, ref.cut_step) - ref.total_tmacs) <= 1.0);
  }
}

TEST_CASE("latency model") {
  CHECK(latency_model(903, 903, 68.4) == 68.4);
  CHECK(std::abs(latency_model(719, 903, 68.4) - 54.5) <= 0.05);
  CHECK(std::abs(latency_model(719, 903, 68.4) - 54.7) / 54.7 <= 0.02);
  CHECK(std::abs(latency_model(1288, 1610, 120.6) - 97.3) / 97.3 <= 0.02);
  CHECK_THROWS_AS(latency_model(1, 0, 1), ArgumentError);
}

TEST_CASE("cost report") {
  const auto report = build_cost_report(svd(), 25, 17, MacConvention::kModuleHook, 68.4);
  CHECK(report.frames == 14);
  CHECK(report.baseline_macs_per_step == 2 * count_macs(svd(), MacConvention::kModuleHook));
  CHECK(report.baseline_total_macs == 25.0 * report.baseline_macs_per_step);
  CHECK(report.total_macs ==
        vcut_totals(static_cast<double>(report.macs_per_step), 25, 17) + static_cast<double>(report.conditioner_macs));
  CHECK(report.params_delta() == count_params(svd()) - count_params(vcut_arch(svd())));
  REQUIRE(report.latency.has_value());
  CHECK(*report.latency < 68.4);
  const auto never = build_cost_report(svd(), 25, 26, MacConvention::kModuleHook);
  CHECK(never.total_macs == never.baseline_total_macs * never.macs_per_step / never.baseline_macs_per_step +
                                static_cast<double>(never.conditioner_macs));
  CHECK(CostReport::csv_header().rfind("method,", 0) == 0);
  const auto row = report.csv_row();
  const auto header = CostReport::csv_header();
  CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
}

TEST_CASE("cost tables") {
  const auto per_step = per_step_table(svd(), MacConvention::kModuleHook);
  CHECK(per_step.rows.size() >= 3);
  const auto totals = totals_table(svd(), MacConvention::kModuleHook);
  CHECK(totals.rows.size() == total_references().size());
  for (const auto& r : totals.rows) CHECK(r.size() == totals.header.size());
  const auto csv = totals.render();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(totals.rows.size() + 1));
}
