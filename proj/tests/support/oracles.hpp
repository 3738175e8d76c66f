#pragma once

// Scalar reference implementations used as independent oracles. They work on
// plain row-major double vectors and share no code with the library.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// a [m, k] x b [k, n]
inline Vec matmul(const Vec& a, const Vec& b, int m, int k, int n) {
  Vec c(static_cast<std::size_t>(m * n), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
  return c;
}

inline Vec affine(const Vec& x, const Vec& w, const Vec& bias, int m, int k, int n) {
  Vec y = matmul(x, w, m, k, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) y[i * n + j] += bias[j];
  }
  return y;
}

inline Vec softmax(const Vec& x) {
  double total = 0.0;
  Vec e(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) total += (e[i] = std::exp(x[i]));
  for (auto& v : e) v /= total;
  return e;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vec unit(const Vec& a) {
  const double n = std::sqrt(dot(a, a));
  Vec u(a);
  for (auto& v : u) v /= n;
  return u;
}

inline Vec row(const Vec& m, int r, int width) {
  return Vec(m.begin() + r * width, m.begin() + (r + 1) * width);
}

// Multi-head attention for one sequence: x [L, c], src [Lk, s]. Weights
// [in, out] row-major. Counts multiplies into `macs` when given.
struct Weights {
  Vec wq, bq, wk, bk, wv, bv, wo, bo;
};

inline Vec attention(const Weights& w, const Vec& x, const Vec& src, int L, int Lk, int c, int s, int heads,
                     std::int64_t* macs = nullptr) {
  const int dk = c / heads;
  auto count = [&](std::int64_t n) {
    if (macs != nullptr) *macs += n;
  };
  Vec q(L * c), k(Lk * c), v(Lk * c);
  for (int l = 0; l < L; ++l) {
    for (int j = 0; j < c; ++j) {
      double acc = w.bq[j];
      for (int p = 0; p < c; ++p) acc += x[l * c + p] * w.wq[p * c + j];
      q[l * c + j] = acc;
    }
  }
  count(static_cast<std::int64_t>(L) * c * c);
  for (int l = 0; l < Lk; ++l) {
    for (int j = 0; j < c; ++j) {
      double ak = w.bk[j], av = w.bv[j];
      for (int p = 0; p < s; ++p) {
        ak += src[l * s + p] * w.wk[p * c + j];
        av += src[l * s + p] * w.wv[p * c + j];
      }
      k[l * c + j] = ak;
      v[l * c + j] = av;
    }
  }
  count(2LL * Lk * s * c);
  Vec merged(L * c, 0.0);
  for (int h = 0; h < heads; ++h) {
    for (int l = 0; l < L; ++l) {
      Vec scores(Lk);
      for (int m = 0; m < Lk; ++m) {
        double acc = 0.0;
        for (int d = 0; d < dk; ++d) acc += q[l * c + h * dk + d] * k[m * c + h * dk + d];
        scores[m] = acc / std::sqrt(static_cast<double>(dk));
      }
      count(static_cast<std::int64_t>(Lk) * dk);
      const Vec p = softmax(scores);
      for (int d = 0; d < dk; ++d) {
        double acc = 0.0;
        for (int m = 0; m < Lk; ++m) acc += p[m] * v[m * c + h * dk + d];
        merged[l * c + h * dk + d] = acc;
      }
      count(static_cast<std::int64_t>(Lk) * dk);
    }
  }
  Vec out(L * c);
  for (int l = 0; l < L; ++l) {
    for (int j = 0; j < c; ++j) {
      double acc = w.bo[j];
      for (int p = 0; p < c; ++p) acc += merged[l * c + p] * w.wo[p * c + j];
      out[l * c + j] = acc;
    }
  }
  count(static_cast<std::int64_t>(L) * c * c);
  return out;
}

// Consistency score on explicitly normalized rows; `ref` replaces row 0
// in the first term when non-empty.
inline double consistency(const Vec& rows, int T, int D, const Vec& ref = {}) {
  const Vec first = unit(ref.empty() ? row(rows, 0, D) : ref);
  double total = 0.0;
  for (int t = 1; t < T; ++t) {
    const Vec cur = unit(row(rows, t, D));
    const Vec prev = unit(row(rows, t - 1, D));
    total += 0.5 * (dot(first, cur) + dot(prev, cur));
  }
  return total / (T - 1);
}

}  // namespace oracle
