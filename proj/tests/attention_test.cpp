// Copyright 2026 The ver-engine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ver/attention.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace ver {
namespace {

using testing::Rng;

AttentionParams<double> random_params(Rng& rng, std::size_t d) {
  return {rng.matrix<double>(d, d, 0.5), rng.matrix<double>(d, d, 0.5),
          rng.matrix<double>(d, d, 0.5), rng.matrix<double>(d, d, 0.5)};
}

// Head-by-head reference written with scalar loops only.
Matrix<double> reference_mha(const Matrix<double>& xq, const Matrix<double>& xkv,
                             const AttentionParams<double>& p, std::size_t heads,
                             std::size_t valid) {
  const std::size_t d = xq.cols(), dh = d / heads;
  auto project = [&](const Matrix<double>& x, const Matrix<double>& w) {
    Matrix<double> y(x.rows(), d);
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) y(i, j) += x(i, k) * w(k, j);
    return y;
  };
  const auto q = project(xq, p.wq), k = project(xkv, p.wk), v = project(xkv, p.wv);
  Matrix<double> ctx(xq.rows(), d);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < xq.rows(); ++i) {
      std::vector<double> s(valid);
      double mx = -1e300;
      for (std::size_t j = 0; j < valid; ++j) {
        double dotp = 0;
        for (std::size_t c = 0; c < dh; ++c) dotp += q(i, h * dh + c) * k(j, h * dh + c);
        s[j] = dotp / std::sqrt(double(dh));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (double& x : s) z += (x = std::exp(x - mx));
      for (std::size_t j = 0; j < valid; ++j)
        for (std::size_t c = 0; c < dh; ++c) ctx(i, h * dh + c) += s[j] / z * v(j, h * dh + c);
    }
  }
  return project(ctx, p.wo);
}

TEST(Mha, MatchesPerHeadReference) {
  Rng rng(21);
  for (std::size_t heads : {1, 2, 4}) {
    const auto p = random_params(rng, 8);
    const auto xq = rng.matrix<double>(5, 8);
    const auto xkv = rng.matrix<double>(7, 8);
    const auto got = mha_forward(xq, xkv, xkv, p, heads, 7);
    EXPECT_LT(testing::max_abs_diff(got, reference_mha(xq, xkv, p, heads, 7)), 1e-12);
    const auto masked = mha_forward(xq, xkv, xkv, p, heads, 4);
    EXPECT_LT(testing::max_abs_diff(masked, reference_mha(xq, xkv, p, heads, 4)), 1e-12);
  }
}

TEST(Mha, PaddedKeysHaveNoEffect) {
  Rng rng(22);
  const auto p = random_params(rng, 8);
  const auto xq = rng.matrix<double>(3, 8);
  auto xkv = rng.matrix<double>(6, 8);
  MhaCache<double> cache;
  const auto a = mha_forward(xq, xkv, xkv, p, 2, 4, &cache);
  for (std::size_t c = 0; c < 8; ++c) xkv(5, c) = 1e3 * rng.normal();
  EXPECT_EQ(mha_forward(xq, xkv, xkv, p, 2, 4), a);
  for (const auto& probs : cache.probs)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(probs(i, 4) + probs(i, 5), 0.0);
}

TEST(Mha, RejectsIndivisibleHeads) {
  Rng rng(23);
  const auto p = random_params(rng, 6);
  const auto x = rng.matrix<double>(2, 6);
  EXPECT_THROW(mha_forward(x, x, x, p, 4, 2), ConfigError);
}

TEST(Mha, BackwardMatchesFiniteDifferences) {
  Rng rng(24);
  const std::size_t d = 6, heads = 2, valid = 3;
  auto p = random_params(rng, d);
  auto xq = rng.matrix<double>(4, d);
  auto xk = rng.matrix<double>(5, d);
  auto xv = rng.matrix<double>(5, d);
  const auto w = rng.matrix<double>(4, d);
  auto loss = [&]() {
    const auto y = mha_forward(xq, xk, xv, p, heads, valid);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * w.values()[i];
    return s;
  };
  MhaCache<double> cache;
  mha_forward(xq, xk, xv, p, heads, valid, &cache);
  AttentionParams<double> g{Matrix<double>(d, d), Matrix<double>(d, d), Matrix<double>(d, d),
                            Matrix<double>(d, d)};
  Matrix<double> dq(4, d), dk(5, d), dv(5, d);
  mha_backward(cache, p, w, g, dq, dk, dv);

  auto check = [&](Matrix<double>& x, const Matrix<double>& analytic, const char* name) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x.values()[i];
      x.values()[i] = orig + 1e-6;
      const double up = loss();
      x.values()[i] = orig - 1e-6;
      const double down = loss();
      x.values()[i] = orig;
      EXPECT_NEAR(analytic.values()[i], (up - down) / 2e-6, 1e-6) << name << "[" << i << "]";
    }
  };
  check(p.wq, g.wq, "wq");
  check(p.wk, g.wk, "wk");
  check(p.wv, g.wv, "wv");
  check(p.wo, g.wo, "wo");
  check(xq, dq, "q_in");
  check(xk, dk, "k_in");
  check(xv, dv, "v_in");
  // Padded key/value rows get exactly zero gradient.
  for (std::size_t c = 0; c < d; ++c) {
    EXPECT_EQ(dk(4, c), 0.0);
    EXPECT_EQ(dv(4, c), 0.0);
  }
}

}  // namespace
}  // namespace ver
