#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "vcut/model/attention.hpp"
#include "vcut/model/unet.hpp"
#include "vcut/numerics/ops.hpp"
#include "vcut/surgery/surgery.hpp"

using namespace vcut;

namespace {

oracle::Weights oracle_weights(const AttentionSite& s) {
  return {s.wq.to_doubles(), s.bq.to_doubles(), s.wk.to_doubles(), s.bk.to_doubles(),
          s.wv.to_doubles(), s.bv.to_doubles(), s.wo.to_doubles(), s.bo.to_doubles()};
}

LatentVideo random_latent(const ModelSpec& spec, std::uint64_t seed, DType dtype) {
  Rng rng(seed);
  return LatentVideo(rng_normal(rng, {spec.batch, spec.latent_channels, spec.frames, spec.height, spec.width}, dtype));
}

ImageEmbedding random_embedding(const ModelSpec& spec, std::uint64_t seed, DType dtype) {
  Rng rng(seed);
  return ImageEmbedding::conditional(rng_normal(rng, {spec.batch, 1, spec.embed_dim}, dtype));
}

}  // namespace

TEST_CASE("reshape extents") {
  const Tensor one({1, 1, 1, 1, 1}, std::vector<double>{3.25});
  CHECK(reshape_temporal(one).dims() == Dims{1, 1, 1});
  CHECK(reshape_spatial(one).dims() == Dims{1, 1, 1});
  CHECK(reshape_temporal(one).get(0) == 3.25);

  Rng rng(1);
  const Tensor z = rng_normal(rng, {2, 3, 4, 5, 6}, DType::kF32);
  const Tensor t = reshape_temporal(z);
  const Tensor s = reshape_spatial(z);
  CHECK(t.dims() == Dims{60, 4, 3});
  CHECK(s.dims() == Dims{8, 30, 3});
  // Element mapping: batch b, pixel (y, x), frame f, channel c.
  CHECK(t.at({1 * 30 + 2 * 6 + 3, 1, 2}) == z.at({1, 2, 1, 2, 3}));
  CHECK(s.at({1 * 4 + 3, 4 * 6 + 5, 0}) == z.at({1, 0, 3, 4, 5}));
}

TEST_CASE("reshape regimes are bitwise inverses") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Dims dims{1 + static_cast<std::int64_t>(seed % 2), 1 + static_cast<std::int64_t>(seed % 4),
                    1 + static_cast<std::int64_t>(seed % 5), 1 + static_cast<std::int64_t>(seed % 3), 2};
    const Tensor z = rng_normal(rng, dims, seed % 2 ? DType::kF64 : DType::kF32);
    const auto shape = VideoShape::of(z);
    CHECK(from_temporal(reshape_temporal(z), shape).bitwise_equal(z));
    CHECK(from_spatial(reshape_spatial(z), shape).bitwise_equal(z));
  }
}

TEST_CASE("repeat_batch lines embeddings up with reshaped batches") {
  const Tensor e({2, 1, 2}, std::vector<double>{1, 2, 3, 4});
  const Tensor r = repeat_batch(e, 3);
  CHECK(r.dims() == Dims{6, 1, 2});
  CHECK(r.to_doubles() == std::vector<double>{1, 2, 1, 2, 1, 2, 3, 4, 3, 4, 3, 4});
}

TEST_CASE("self attention on a singleton sequence is the value path") {
  Rng rng(2);
  const auto site = make_attention_site("s", AttentionKind::kSSA, 4, 2, 4, rng, DType::kF64);
  const Tensor x = rng_normal(rng, {1, 1, 4}, DType::kF64);
  const auto result = attend(site, x, x);
  for (double p : result.probabilities.to_doubles()) CHECK(p == 1.0);
  const Tensor want = affine(affine(x, site.wv, site.bv), site.wo, site.bo);
  const auto got = result.output.to_doubles();
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want.get(i)) <= 1e-12);
}

TEST_CASE("self attention matches the scalar oracle") {
  for (const auto& [heads, L, c] : {std::tuple{1, 2, 2}, std::tuple{2, 5, 4}, std::tuple{4, 3, 8}}) {
    Rng rng(static_cast<std::uint64_t>(heads * 100 + L));
    const auto site = make_attention_site("s", AttentionKind::kTSA, c, heads, c, rng, DType::kF64);
    const Tensor x = rng_normal(rng, {2, L, c}, DType::kF64);
    const auto got = self_attention(site, x).to_doubles();
    const auto w = oracle_weights(site);
    const auto xv = x.to_doubles();
    for (int b = 0; b < 2; ++b) {
      const oracle::Vec xb(xv.begin() + b * L * c, xv.begin() + (b + 1) * L * c);
      const auto want = oracle::attention(w, xb, xb, L, L, c, c, heads);
      for (int i = 0; i < L * c; ++i) CHECK(std::abs(got[b * L * c + i] - want[i]) <= 1e-12);
    }
  }
}

TEST_CASE("self attention is batch equivariant") {
  Rng rng(3);
  const auto site = make_attention_site("s", AttentionKind::kSSA, 6, 3, 6, rng, DType::kF32);
  const Tensor x = rng_normal(rng, {3, 4, 6}, DType::kF32);
  const Tensor full = self_attention(site, x);
  for (std::int64_t b = 0; b < 3; ++b) {
    CHECK(self_attention(site, slice(x, 0, b, b + 1)).bitwise_equal(slice(full, 0, b, b + 1)));
  }
}

TEST_CASE("attention rejects bad configurations") {
  Rng rng(4);
  CHECK_THROWS_AS(make_attention_site("s", AttentionKind::kSSA, 6, 4, 6, rng, DType::kF32), ConfigError);
  const auto cross = make_attention_site("x", AttentionKind::kSCA, 4, 2, 8, rng, DType::kF32);
  const Tensor x = rng_normal(rng, {1, 3, 4}, DType::kF32);
  CHECK_THROWS_AS(cross_attention(cross, x, rng_normal(rng, {1, 2, 8}, DType::kF32)), ShapeError);
  CHECK_THROWS_AS(cross_attention(cross, x, rng_normal(rng, {1, 1, 7}, DType::kF32)), ShapeError);
  CHECK_THROWS_AS(self_attention(cross, x), ConfigError);
  const auto self = make_attention_site("s", AttentionKind::kSSA, 4, 2, 4, rng, DType::kF32);
  CHECK_THROWS_AS(cross_attention(self, x, rng_normal(rng, {1, 1, 4}, DType::kF32)), ConfigError);
}

TEST_CASE("cross attention scores are exactly one and output is constant over queries") {
  for (auto kind : {AttentionKind::kSCA, AttentionKind::kTCA}) {
    for (auto dtype : {DType::kF32, DType::kF64}) {
      Rng rng(5);
      const auto site = make_attention_site("x", kind, 8, 2, 12, rng, dtype);
      const Tensor x = scale(rng_normal(rng, {3, 7, 8}, dtype), 50.0);
      const Tensor e = rng_normal(rng, {3, 1, 12}, dtype);
      const auto result = cross_attention_with_scores(site, x, e);
      CHECK(result.probabilities.dims() == Dims{3, 2, 7, 1});
      for (double p : result.probabilities.to_doubles()) REQUIRE(p == 1.0);
      const auto out = result.output.to_doubles();
      for (int b = 0; b < 3; ++b) {
        for (int l = 1; l < 7; ++l) {
          for (int j = 0; j < 8; ++j) REQUIRE(out[(b * 7 + l) * 8 + j] == out[b * 7 * 8 + j]);
        }
      }
    }
  }
}

TEST_CASE("cross attention equals the value-output path and ignores the query input") {
  Rng rng(6);
  const auto site = make_attention_site("x", AttentionKind::kSCA, 8, 4, 16, rng, DType::kF64);
  const Tensor e = rng_normal(rng, {2, 1, 16}, DType::kF64);
  const Tensor x1 = rng_normal(rng, {2, 5, 8}, DType::kF64);
  const Tensor x2 = rng_normal(rng, {2, 5, 8}, DType::kF64);
  const Tensor y1 = cross_attention(site, x1, e);
  CHECK(y1.bitwise_equal(cross_attention(site, x2, e)));
  const auto w = oracle_weights(site);
  const auto ev = e.to_doubles();
  const auto yv = y1.to_doubles();
  for (int b = 0; b < 2; ++b) {
    const oracle::Vec eb(ev.begin() + b * 16, ev.begin() + (b + 1) * 16);
    const auto v = oracle::affine(eb, w.wv, w.bv, 1, 16, 8);
    const auto want = oracle::affine(v, w.wo, w.bo, 1, 8, 8);
    for (int l = 0; l < 5; ++l) {
      for (int j = 0; j < 8; ++j) CHECK(std::abs(yv[(b * 5 + l) * 8 + j] - want[j]) <= 1e-12);
    }
  }
}

TEST_CASE("forward_unet preserves shape and is deterministic") {
  const auto spec = svd_layout_toy_spec();
  const auto model = init_model(spec, 7, DType::kF32);
  const auto z = random_latent(spec, 8, DType::kF32);
  const auto e = random_embedding(spec, 9, DType::kF32);
  const auto y1 = forward_unet(model, z, 1.5, e, ForwardMode::kBaseline);
  const auto y2 = forward_unet(model, z, 1.5, e, ForwardMode::kBaseline);
  CHECK(y1.shape() == z.shape());
  CHECK(y1.tensor().dims() == Dims{1, 4, 3, 8, 8});
  CHECK(y1.tensor().bitwise_equal(y2.tensor()));
  for (double v : y1.tensor().to_doubles()) REQUIRE(std::isfinite(v));
}

TEST_CASE("removing TCA is the only difference between baseline and modified") {
  for (auto dtype : {DType::kF32, DType::kF64}) {
    const auto spec = single_site_toy_spec();
    const auto model = init_model(spec, 10, dtype);
    const auto z = random_latent(spec, 11, dtype);
    const auto e = random_embedding(spec, 12, dtype);
    const auto base = forward_unet(model, z, 0.3, e, ForwardMode::kBaseline).tensor().to_doubles();
    const auto restored =
        forward_unet(model, z, 0.3, e, ForwardMode::kModified, nullptr, {.retain_tca_constant = true}).tensor();
    const auto modified = forward_unet(model, z, 0.3, e, ForwardMode::kModified).tensor().to_doubles();
    const double tol = dtype == DType::kF32 ? 1e-5 : 1e-12;
    double max_err = 0.0, max_gap = 0.0;
    const auto rv = restored.to_doubles();
    for (std::size_t i = 0; i < base.size(); ++i) {
      max_err = std::max(max_err, std::abs(base[i] - rv[i]));
      max_gap = std::max(max_gap, std::abs(base[i] - modified[i]));
    }
    CHECK(max_err <= tol);
    CHECK(max_gap > 1e-3);
  }
}

TEST_CASE("forward_unet input validation") {
  const auto spec = single_site_toy_spec();
  const auto model = init_model(spec, 13, DType::kF32);
  const auto e = random_embedding(spec, 14, DType::kF32);
  Rng rng(15);
  const LatentVideo wrong_channels(rng_normal(rng, {1, 3, 3, 4, 4}, DType::kF32));
  CHECK_THROWS_AS(forward_unet(model, wrong_channels, 0.0, e, ForwardMode::kBaseline), ShapeError);
  const auto z = random_latent(spec, 16, DType::kF32);
  CHECK_THROWS_AS(forward_unet(model, z, 0.0, e, ForwardMode::kVcutCached), StateError);
  CHECK_THROWS_AS(forward_unet(model, z, 0.0, random_embedding(spec, 1, DType::kF64), ForwardMode::kBaseline),
                  ArgumentError);
}

TEST_CASE("site layout of the svd-shaped toy") {
  const auto layout = svd_layout_toy_spec().site_layout();
  CHECK(layout.encoder == 6);
  CHECK(layout.mid == 1);
  CHECK(layout.decoder == 9);
  CHECK(single_site_toy_spec().site_layout().total() == 1);
  const auto model = init_model(svd_layout_toy_spec(), 0, DType::kF32);
  CHECK(transformer_sites(model.weights).size() == 16);
}

TEST_CASE("model spec json round trip and validation") {
  const auto spec = svd_layout_toy_spec();
  const auto back = model_spec_from_json(to_json(spec));
  CHECK(to_json(back) == to_json(spec));
  auto bad = to_json(spec);
  bad["heads"] = 3;
  CHECK_THROWS_AS(model_spec_from_json(bad), ConfigError);
  CHECK_THROWS_AS(spec.check_resolution(6, 8), ShapeError);
}

TEST_CASE("weights save and load bitwise") {
  const auto dir = std::filesystem::temp_directory_path() / "vcut_model_test";
  std::filesystem::remove_all(dir);
  const auto model = init_model(single_site_toy_spec(), 17, DType::kF64);
  save_model(dir, model);
  const auto loaded = load_model(dir);
  CHECK(count_parameters(loaded.weights) == count_parameters(model.weights));
  std::vector<const Tensor*> a, b;
  visit_parameters(model.weights, [&](const ParamInfo&, const Tensor& t) { a.push_back(&t); });
  visit_parameters(loaded.weights, [&](const ParamInfo&, const Tensor& t) { b.push_back(&t); });
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->bitwise_equal(*b[i]));
  CHECK_THROWS_AS(load_model(dir / "nope"), IoError);
  std::filesystem::remove_all(dir);
}
