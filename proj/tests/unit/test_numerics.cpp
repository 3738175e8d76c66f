#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <limits>

#include "support/oracles.hpp"
#include "vcut/numerics/ops.hpp"
#include "vcut/numerics/rng.hpp"
#include "vcut/numerics/vten.hpp"

using namespace vcut;

namespace {

Tensor random_tensor(std::uint64_t seed, const Dims& dims, DType dtype = DType::kF64) {
  Rng rng(seed);
  return rng_normal(rng, dims, dtype);
}

}  // namespace

TEST_CASE("tensor construction enforces extents and payload size") {
  CHECK_THROWS_AS(Tensor(Dims{2, 0}, DType::kF32), ShapeError);
  CHECK_THROWS_AS(Tensor(Dims{}, DType::kF32), ShapeError);
  CHECK_THROWS_AS(Tensor(Dims{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  const Tensor t(Dims{2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.dtype() == DType::kF32);
  CHECK(t.at({1, 2}) == 6.0);
  CHECK(t.dim(-1) == 3);
  CHECK_THROWS_AS(t.data<double>(), ArgumentError);
  CHECK_THROWS_AS(t.reshape({4, 2}).reshape({5}), ShapeError);
}

TEST_CASE("matmul identity and dot product") {
  const Tensor eye({2, 2}, std::vector<double>{1, 0, 0, 1});
  const Tensor b({2, 2}, std::vector<double>{5, 6, 7, 8});
  CHECK(matmul(eye, b).to_doubles() == std::vector<double>{5, 6, 7, 8});
  const Tensor row({1, 2}, std::vector<double>{1, 2});
  const Tensor col({2, 1}, std::vector<double>{3, 4});
  CHECK(matmul(row, col).to_doubles() == std::vector<double>{11});
}

TEST_CASE("matmul matches the triple-loop oracle") {
  const Tensor a = random_tensor(1, {3, 4});
  const Tensor b = random_tensor(2, {4, 2});
  const auto want = oracle::matmul(a.to_doubles(), b.to_doubles(), 3, 4, 2);
  const auto got = matmul(a, b).to_doubles();
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12);
}

TEST_CASE("matmul broadcasts batch extents") {
  const Tensor a = random_tensor(3, {2, 1, 3, 4});
  const Tensor b = random_tensor(4, {5, 4, 2});
  const Tensor c = matmul(a, b);
  CHECK(c.dims() == Dims{2, 5, 3, 2});
  const auto av = a.to_doubles(), bv = b.to_doubles(), cv = c.to_doubles();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 5; ++j) {
      const oracle::Vec ai(av.begin() + i * 12, av.begin() + (i + 1) * 12);
      const oracle::Vec bj(bv.begin() + j * 8, bv.begin() + (j + 1) * 8);
      const auto want = oracle::matmul(ai, bj, 3, 4, 2);
      for (int k = 0; k < 6; ++k) CHECK(std::abs(cv[(i * 5 + j) * 6 + k] - want[k]) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(matmul(random_tensor(1, {3, 4}), random_tensor(1, {3, 4})), ShapeError);
  CHECK_THROWS_AS(matmul(random_tensor(1, {2, 3, 4}), random_tensor(1, {3, 4, 2})), ShapeError);
}

TEST_CASE("matmul is bitwise deterministic and preserves dtype") {
  const Tensor a = random_tensor(5, {7, 9}, DType::kF32);
  const Tensor b = random_tensor(6, {9, 4}, DType::kF32);
  const Tensor c1 = matmul(a, b);
  CHECK(c1.dtype() == DType::kF32);
  CHECK(c1.bitwise_equal(matmul(a, b)));
  CHECK_THROWS_AS(matmul(a, random_tensor(6, {9, 4}, DType::kF64)), ArgumentError);
}

TEST_CASE("softmax of a singleton is exactly one") {
  for (double v : {42.0, -1e30, 0.0, 3.5e-300, 88.0, -7.25}) {
    const Tensor s = softmax_lastdim(Tensor({1, 1}, std::vector<double>{v}));
    CHECK(s.get(0) == 1.0);
    const Tensor f = softmax_lastdim(Tensor({1}, std::vector<float>{static_cast<float>(v)}));
    CHECK(f.get(0) == 1.0);
  }
  // Property: any finite values along a length-1 last axis.
  Rng rng(11);
  const Tensor x = scale(rng_normal(rng, {17, 5, 1}, DType::kF32), 1e3);
  for (double p : softmax_lastdim(x).to_doubles()) CHECK(p == 1.0);
}

TEST_CASE("softmax symmetric pair and exp-normalize oracle") {
  const auto half = softmax_lastdim(Tensor({2}, std::vector<double>{0, 0})).to_doubles();
  CHECK(half == std::vector<double>{0.5, 0.5});
  const auto got = softmax_lastdim(Tensor({3}, std::vector<double>{1, 2, 3})).to_doubles();
  const auto want = oracle::softmax({1, 2, 3});
  for (int i = 0; i < 3; ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-9);
}

TEST_CASE("softmax rows sum to one and reject NaN") {
  const Tensor x = scale(random_tensor(8, {6, 13}, DType::kF32), 20.0);
  const auto p = softmax_lastdim(x).to_doubles();
  for (int r = 0; r < 6; ++r) {
    double s = 0.0;
    for (int j = 0; j < 13; ++j) s += p[r * 13 + j];
    CHECK(std::abs(s - 1.0) <= 1e-6);
  }
  CHECK_THROWS_AS(softmax_lastdim(Tensor({2}, std::vector<double>{1.0, std::nan("")})), NumericError);
}

TEST_CASE("affine zero input, identity weight and loop oracle") {
  const Tensor bias({3}, std::vector<double>{1, -2, 3});
  CHECK(affine(Tensor({1, 2}, DType::kF64), Tensor({2, 3}, DType::kF64), bias).to_doubles() ==
        std::vector<double>{1, -2, 3});
  const Tensor x = random_tensor(9, {4, 3});
  const Tensor eye({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(affine(x, eye, Tensor({3}, DType::kF64)).bitwise_equal(x));

  const Tensor x2 = random_tensor(10, {2, 3});
  const Tensor w = random_tensor(11, {3, 4});
  const Tensor b = random_tensor(12, {4});
  const auto want = oracle::affine(x2.to_doubles(), w.to_doubles(), b.to_doubles(), 2, 3, 4);
  const auto got = affine(x2, w, b).to_doubles();
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-12);
  CHECK_THROWS_AS(affine(x2, random_tensor(1, {4, 4}), b), ShapeError);
}

TEST_CASE("affine equals matmul plus broadcast bias bitwise") {
  for (auto dtype : {DType::kF32, DType::kF64}) {
    const Tensor x = random_tensor(13, {2, 5, 6}, dtype);
    const Tensor w = random_tensor(14, {6, 3}, dtype);
    const Tensor b = random_tensor(15, {3}, dtype);
    CHECK(affine(x, w, b).bitwise_equal(add(matmul(x, w), b)));
    CHECK(affine(x, w, b).dtype() == dtype);
  }
}

TEST_CASE("layer norm edge cases and moments") {
  const Tensor ones({3}, std::vector<double>{1, 1, 1});
  const Tensor zeros({3}, DType::kF64);
  for (double v : layer_norm(Tensor({3}, std::vector<double>{5, 5, 5}), ones, zeros).to_doubles()) CHECK(v == 0.0);
  const auto pm = layer_norm(Tensor({2}, std::vector<double>{1, -1}), Tensor({2}, std::vector<double>{1, 1}),
                             Tensor({2}, DType::kF64))
                      .to_doubles();
  CHECK(pm[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(pm[1] == doctest::Approx(-1.0).epsilon(1e-4));

  const int n = 32;
  const Tensor x = scale(random_tensor(16, {4, n}), 7.0);
  const auto y = layer_norm(x, Tensor::full({n}, 1.0, DType::kF64), Tensor({n}, DType::kF64)).to_doubles();
  for (int r = 0; r < 4; ++r) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += y[r * n + j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (y[r * n + j] - mean) * (y[r * n + j] - mean);
    var /= n;
    CHECK(std::abs(mean) <= 1e-5);
    CHECK(std::abs(var - 1.0) <= 1e-4);
  }
}

TEST_CASE("rng determinism and reference stream") {
  std::uint64_t state = 0;
  CHECK(splitmix64(state) == 0xe220a8397b1dcdafULL);
  Rng a(0), b(0);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r1(0), r2(0);
  CHECK(rng_uniform(r1, -1, 1, {64}).bitwise_equal(rng_uniform(r2, -1, 1, {64})));
  Rng c(1);
  CHECK(Rng(0).next_u64() != c.next_u64());
}

TEST_CASE("rng uniform range and mean") {
  Rng rng(3);
  const double lo = 1.0, hi = std::nextafter(1.0, 2.0) + 1e-12;
  for (double v : rng_uniform(rng, lo, hi, {1000}, DType::kF64).to_doubles()) {
    CHECK(v >= lo);
    CHECK(v < hi);
  }
  Rng rng2(4);
  const auto u = rng_uniform(rng2, 0.0, 1.0, {100000}, DType::kF64).to_doubles();
  double mean = 0.0;
  for (double v : u) {
    mean += v;
    REQUIRE(v < 1.0);
  }
  CHECK(std::abs(mean / u.size() - 0.5) <= 0.01);
  CHECK_THROWS_AS(rng_uniform(rng2, 1.0, 1.0, {2}), ArgumentError);
  Rng rng3(5);
  for (double v : rng_uniform(rng3, 0.0, 1e-7, {4096}, DType::kF32).to_doubles()) {
    CHECK(v >= 0.0);
    CHECK(v < 1e-7);
  }
}

TEST_CASE("rng normal moments") {
  Rng rng(6);
  const auto v = rng_normal(rng, {50000}, DType::kF64).to_doubles();
  double mean = 0.0, sq = 0.0;
  for (double x : v) {
    mean += x;
    sq += x * x;
  }
  mean /= v.size();
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sq / v.size() - 1.0) < 0.03);
}

TEST_CASE("elementwise ops broadcast and keep dtype") {
  const Tensor a({2, 1}, std::vector<float>{1, 2});
  const Tensor b({3}, std::vector<float>{10, 20, 30});
  const Tensor s = add(a, b);
  CHECK(s.dims() == Dims{2, 3});
  CHECK(s.dtype() == DType::kF32);
  CHECK(s.to_doubles() == std::vector<double>{11, 21, 31, 12, 22, 32});
  CHECK(sub(b, b).to_doubles() == std::vector<double>{0, 0, 0});
  CHECK(mul(a, b).to_doubles() == std::vector<double>{10, 20, 30, 20, 40, 60});
  CHECK_THROWS_AS(add(Tensor({2}, DType::kF32), Tensor({3}, DType::kF32)), ShapeError);
}

TEST_CASE("permute, concat and slice") {
  const Tensor x = random_tensor(17, {2, 3, 4});
  const Tensor p = permute(x, {2, 0, 1});
  CHECK(p.dims() == Dims{4, 2, 3});
  CHECK(p.at({3, 1, 2}) == x.at({1, 2, 3}));
  CHECK(permute(p, {1, 2, 0}).bitwise_equal(x));
  const Tensor c = concat({slice(x, 1, 0, 1), slice(x, 1, 1, 3)}, 1);
  CHECK(c.bitwise_equal(x));
  CHECK_THROWS_AS(permute(x, {0, 0, 1}), ShapeError);
}

TEST_CASE("conv2d against a direct loop") {
  const Tensor x = random_tensor(18, {1, 2, 5, 4});
  const Tensor w = random_tensor(19, {3, 2, 3, 3});
  const Tensor b = random_tensor(20, {3});
  for (int stride : {1, 2}) {
    const Tensor y = conv2d(x, w, b, stride, 1);
    const auto oh = (5 + 2 - 3) / stride + 1, ow = (4 + 2 - 3) / stride + 1;
    REQUIRE(y.dims() == Dims{1, 3, oh, ow});
    for (int o = 0; o < 3; ++o) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          double acc = b.get(o);
          for (int c = 0; c < 2; ++c) {
            for (int ki = 0; ki < 3; ++ki) {
              for (int kj = 0; kj < 3; ++kj) {
                const int yi = i * stride + ki - 1, xj = j * stride + kj - 1;
                if (yi < 0 || yi >= 5 || xj < 0 || xj >= 4) continue;
                acc += x.at({0, c, yi, xj}) * w.at({o, c, ki, kj});
              }
            }
          }
          CHECK(std::abs(y.at({0, o, i, j}) - acc) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("depthwise temporal conv against a direct loop") {
  const Tensor x = random_tensor(21, {1, 2, 4, 3});
  const Tensor w = random_tensor(22, {2, 3});
  const Tensor b = random_tensor(23, {2});
  const Tensor y = depthwise_conv1d(x, w, b);
  REQUIRE(y.dims() == x.dims());
  for (int c = 0; c < 2; ++c) {
    for (int l = 0; l < 4; ++l) {
      for (int s = 0; s < 3; ++s) {
        double acc = b.get(c);
        for (int k = 0; k < 3; ++k) {
          const int src = l + k - 1;
          if (src >= 0 && src < 4) acc += w.at({c, k}) * x.at({0, c, src, s});
        }
        CHECK(std::abs(y.at({0, c, l, s}) - acc) <= 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(depthwise_conv1d(x, random_tensor(1, {2, 2}), b), ShapeError);
}

TEST_CASE("vten header layout is bit exact") {
  const Tensor t({2, 1}, std::vector<float>{1.0f, -2.5f});
  const auto bytes = encode_vten(t);
  const std::vector<std::uint8_t> header{0x56, 0x54, 0x45, 0x4E, 1, 0, 2, 0};
  REQUIRE(bytes.size() == 8 + 16 + 8);
  CHECK(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 8) == header);
  CHECK(bytes[8] == 2);
  CHECK(bytes[16] == 1);
  const auto one = std::bit_cast<std::uint32_t>(1.0f);
  CHECK(bytes[24] == (one & 0xff));
  CHECK(bytes[27] == (one >> 24));
  CHECK(decode_vten(bytes).bitwise_equal(t));
}

TEST_CASE("vten round trips both dtypes through files and rejects corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "vcut_vten_test";
  std::filesystem::create_directories(dir);
  for (auto dtype : {DType::kF32, DType::kF64}) {
    const Tensor t = random_tensor(24, {2, 3, 1, 5}, dtype);
    write_vten(dir / "t.vten", t);
    CHECK(read_vten(dir / "t.vten").bitwise_equal(t));
  }
  auto bytes = encode_vten(random_tensor(25, {3}));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_vten(bad_magic), IoError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_vten(bad_version), IoError);
  bytes.pop_back();
  CHECK_THROWS_AS(decode_vten(bytes), IoError);
  CHECK_THROWS_AS(read_vten(dir / "missing.vten"), IoError);
  std::filesystem::remove_all(dir);
}
