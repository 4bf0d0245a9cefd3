// Copyright 2026 The hypermem Authors
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

#include "hypermem/fusion.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "hypermem/errors.hpp"
#include "hypermem/store.hpp"
#include "hypermem/synth.hpp"
#include "test_support.hpp"

namespace hypermem {
namespace {

LorentzPoint planar(double theta, double r) {
  return testing::radial_point({std::cos(theta), std::sin(theta)}, r);
}

TEST(ShortTermBufferTest, EvictsOldest) {
  EXPECT_THROW(ShortTermBuffer(0), DomainError);
  ShortTermBuffer b(2);
  b.push(planar(0.0, 1.0));
  b.push(planar(1.0, 1.0));
  b.push(planar(2.0, 1.0));
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.points()[0], planar(1.0, 1.0));
  EXPECT_EQ(b.points()[1], planar(2.0, 1.0));
}

TEST(PoolShortTermTest, Examples) {
  const auto a = planar(0.3, 1.5);
  EXPECT_EQ(pool_short_term(std::vector<LorentzPoint>{a}), a);
  const auto m = pool_short_term(std::vector<LorentzPoint>{planar(0.4, 2.0),
                                                           planar(-0.4, 2.0)});
  EXPECT_NEAR(m.coords()[2], 0.0, 1e-14);
  EXPECT_GT(m.coords()[1], 0.0);
  const auto same = pool_short_term(std::vector<LorentzPoint>{a, a, a});
  EXPECT_LE(testing::max_abs_diff(same.coords(), a.coords()), 1e-10);
  EXPECT_THROW(pool_short_term(std::vector<LorentzPoint>{}), DomainError);
  ShortTermBuffer b(4);
  EXPECT_THROW(pool_short_term(b), DomainError);
}

TEST(PoolShortTermTest, IsTheOriginChartMean) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<LorentzPoint> pts;
    std::vector<double> mean(4, 0.0);
    for (int i = 0; i < 5; ++i) {
      pts.push_back(testing::random_point(rng, 4, 1.0));
      // Origin chart by hand: r = acosh(x0), direction = space / |space|.
      const auto x = pts.back().coords();
      const double sn = pts.back().space_norm();
      const double r = std::acosh(x[0]);
      for (int j = 0; j < 4; ++j) mean[j] += r * x[j + 1] / sn / 5.0;
    }
    const auto m = pool_short_term(pts);
    EXPECT_LE(testing::max_abs_diff(log_origin(m), mean), 1e-9);
    EXPECT_LE(m.manifold_residual(), kManifoldTolerance);
  }
}

TEST(GateFuseTest, EndpointsAndRange) {
  const auto s = planar(0.2, 1.0);
  const auto m = planar(2.0, 2.0);
  EXPECT_EQ(gate_fuse(s, m, 1.0), s);
  EXPECT_EQ(gate_fuse(s, m, 0.0), m);
  EXPECT_LE(testing::max_abs_diff(gate_fuse(s, s, 0.5).coords(), s.coords()),
            1e-12);
  EXPECT_THROW(gate_fuse(s, m, -0.1), DomainError);
  EXPECT_THROW(gate_fuse(s, m, 1.1), DomainError);
}

TEST(GateFuseTest, MonotoneAlongTangentSegment) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto s = testing::random_point(rng, 3, 1.0);
    const auto m = testing::random_point(rng, 3, 1.0);
    const auto vs = log_origin(s);
    const auto vm = log_origin(m);
    double prev = -1e300;
    for (double beta = 0.0; beta <= 1.0; beta += 0.1) {
      const auto z = gate_fuse(s, m, beta);
      EXPECT_LE(z.manifold_residual(), kManifoldTolerance);
      const auto v = log_origin(z);
      double proj = 0.0;
      for (int j = 0; j < 3; ++j) proj += (v[j] - vm[j]) * (vs[j] - vm[j]);
      EXPECT_GT(proj, prev);
      prev = proj;
    }
  }
}

TEST(GateFuseTest, EuclideanVariantIsLiteral) {
  const auto s = planar(0.2, 1.0);
  const auto m = planar(2.0, 2.0);
  const auto e = gate_fuse_euclidean(s, m, 0.25);
  for (int j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(e[j], 0.25 * s.coords()[j] + 0.75 * m.coords()[j]);
  }
}

TEST(SynthesizeMemoryTest, Examples) {
  const auto a = planar(0.1, 1.0);
  const auto b = planar(1.7, 2.5);
  const auto s0 = synthesize_memory(a, b, 0.8, 0.0);
  EXPECT_EQ(s0.rho, 0.0);
  EXPECT_EQ(s0.z, a);
  EXPECT_TRUE(s0.ephemeral);
  const auto s1 = synthesize_memory(a, b, 0.0, 0.8);
  EXPECT_EQ(s1.rho, 1.0);
  EXPECT_LE(testing::max_abs_diff(s1.z.coords(), b.coords()), 1e-9);
  const auto mid = synthesize_memory(a, b, 0.5, 0.5);
  EXPECT_EQ(mid.rho, 0.5);
  const double d = testing::ref_distance(a, b);
  EXPECT_NEAR(testing::ref_distance(a, mid.z), d / 2, 1e-9);
  EXPECT_NEAR(testing::ref_distance(mid.z, b), d / 2, 1e-9);
  EXPECT_THROW(synthesize_memory(a, b, 0.0, 0.0), DomainError);
  EXPECT_THROW(synthesize_memory(a, b, -1.0, 0.5), DomainError);
}

TEST(SynthesizeMemoryTest, NeverTouchesTheTree) {
  const auto bank = make_planted_bank(PlantedBankSpec{{2, 2}, 4, 3}).entries;
  MemoryTree t(3, Curvature(1.0));
  UnconsolidatedPool pool;
  for (const auto& [id, e] : bank) pool.append(e);
  consolidate(t, pool);
  const auto path = std::filesystem::temp_directory_path() / "hm_fusion.snap";
  const std::string before = save_snapshot(t, "bank", path);
  for (EntryId i = 0; i + 1 < 10; ++i) {
    synthesize_memory(t.entry(i).z, t.entry(i + 1).z, 0.3, 0.7);
  }
  EXPECT_EQ(save_snapshot(t, "bank", path), before);
  std::filesystem::remove(path);
}

TEST(ResidualInjectTest, Examples) {
  const std::vector<double> e{1.0, 2.0, 3.0};
  const std::vector<double> h{0.5, 0.5, 0.5};
  const std::vector<double> v{0.5, 1.5, 0.5};  // v - h = unit e_2
  InjectionConfig cfg;
  cfg.gate = [](double) { return 0.0; };
  EXPECT_EQ(residual_inject(e, h, v, 0.9, cfg), e);
  EXPECT_EQ(residual_inject(e, h, h, 0.9), e);
  cfg.gate = [](double) { return 1.0; };
  const auto out = residual_inject(e, h, v, 0.4, cfg);
  double norm = 0.0;
  for (int j = 0; j < 3; ++j) norm += (out[j] - e[j]) * (out[j] - e[j]);
  EXPECT_NEAR(std::sqrt(norm), 0.03, 1e-12);
  EXPECT_NEAR(out[1] - e[1], 0.03, 1e-12);
}

TEST(ResidualInjectTest, DefaultGateIsSimilarity) {
  EXPECT_DOUBLE_EQ(injection_strength(0.5, InjectionConfig{}), 0.015);
  EXPECT_THROW(injection_strength(1.5, InjectionConfig{}), DomainError);
  InjectionConfig bad;
  bad.alpha0 = 2.0;
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(ResidualInjectTest, AffineInAlpha) {
  std::mt19937_64 rng(4);
  AffineHead proj;
  proj.in_dim = 4;
  proj.out_dim = 3;
  proj.W = testing::gaussian_vector(rng, 12, 1.0);
  proj.b = testing::gaussian_vector(rng, 3, 1.0);
  const auto e = testing::gaussian_vector(rng, 3, 1.0);
  const auto h = testing::gaussian_vector(rng, 4, 1.0);
  const auto v = testing::gaussian_vector(rng, 4, 1.0);
  const auto at0 = residual_inject_alpha(e, h, v, 0.0, proj);
  const auto half = residual_inject_alpha(e, h, v, 0.015, proj);
  const auto full = residual_inject_alpha(e, h, v, 0.03, proj);
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(at0[j], e[j]);
    EXPECT_NEAR(full[j] - e[j], 2.0 * (half[j] - e[j]), 1e-15);
    double lin = 0.0;
    for (int k = 0; k < 4; ++k) lin += proj.W[j * 4 + k] * (v[k] - h[k]);
    EXPECT_NEAR(full[j] - e[j], 0.03 * lin, 1e-14);
  }
  EXPECT_THROW(residual_inject_alpha(e, h, v, 1.5, proj), DomainError);
  const std::vector<double> short_e{1.0};
  EXPECT_THROW(residual_inject_alpha(short_e, h, v, 0.03, proj), ShapeError);
  EXPECT_THROW(residual_inject_alpha(e, h, short_e, 0.03, std::nullopt), ShapeError);
}

TEST(DecodePriorTest, IsOriginLogMap) {
  const auto z = planar(0.5, 2.0);
  const auto v = decode_prior(z);
  EXPECT_NEAR(v[0], 2.0 * std::cos(0.5), 1e-12);
  EXPECT_NEAR(v[1], 2.0 * std::sin(0.5), 1e-12);
}

}  // namespace
}  // namespace hypermem
