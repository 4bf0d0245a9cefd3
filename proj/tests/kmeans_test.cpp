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

#include "hypermem/kmeans.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "hypermem/errors.hpp"
#include "test_support.hpp"

namespace hypermem {
namespace {

std::vector<LorentzPoint> blob(std::mt19937_64& rng, std::vector<double> centre,
                               std::size_t count, double noise) {
  std::vector<LorentzPoint> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto v = centre;
    for (double& x : v) x += testing::gaussian_vector(rng, 1, noise)[0];
    out.push_back(exp_origin(v, Curvature(1.0)));
  }
  return out;
}

// Objective of a labelling with centroids recomputed from it; written
// independently of the library loop.
double partition_cost(const std::vector<LorentzPoint>& pts,
                      const std::vector<std::size_t>& label, std::size_t k) {
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> sum(pts[0].coords().size(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (label[i] != j) continue;
      any = true;
      for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += pts[i].coords()[d];
    }
    if (!any) continue;
    const double s = std::sqrt(-testing::ref_inner(sum, sum));
    for (double& x : sum) x /= s;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (label[i] != j) continue;
      total += -2.0 - 2.0 * testing::ref_inner(testing::to_vec(pts[i].coords()), sum);
    }
  }
  return total;
}

TEST(SquaredLorentzianTest, MatchesCoshOfDistance) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto x = testing::random_point(rng, 3, 1.0);
    const auto y = testing::random_point(rng, 3, 1.0);
    const double d = testing::ref_distance(x, y);
    EXPECT_NEAR(squared_lorentzian_distance(x, y), 2.0 * std::cosh(d) - 2.0,
                1e-9 * std::cosh(d));
  }
}

TEST(KMeansTest, RejectsBadK) {
  const std::vector<LorentzPoint> pts{origin(2), origin(2)};
  EXPECT_THROW(lorentzian_kmeans(pts, 0), DomainError);
  EXPECT_THROW(lorentzian_kmeans(pts, 3), DomainError);
  const std::vector<LorentzPoint> mixed{origin(2), origin(3)};
  EXPECT_THROW(lorentzian_kmeans(mixed, 1), ShapeError);
}

TEST(KMeansTest, SeparatedBlobsAreRecovered) {
  std::mt19937_64 rng(2);
  auto a = blob(rng, {1.5, 0.0, 0.0}, 20, 0.05);
  auto b = blob(rng, {-1.5, 0.5, 0.0}, 30, 0.05);
  std::vector<LorentzPoint> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  const auto r = lorentzian_kmeans(pts, 2, 7);
  EXPECT_TRUE(r.converged);
  for (std::size_t i = 1; i < 20; ++i) EXPECT_EQ(r.assignments[i], r.assignments[0]);
  for (std::size_t i = 21; i < 50; ++i) EXPECT_EQ(r.assignments[i], r.assignments[20]);
  EXPECT_NE(r.assignments[0], r.assignments[20]);
}

TEST(KMeansTest, ObjectiveNeverIncreases) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LorentzPoint> pts;
    for (int i = 0; i < 60; ++i) pts.push_back(testing::random_point(rng, 4, 1.2));
    const auto r = lorentzian_kmeans(pts, 2 + trial % 4, trial);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
      EXPECT_LE(r.objective_history[i],
                r.objective_history[i - 1] * (1.0 + 1e-12) + 1e-12);
    }
    // The reported objective is the cost of the final labelling.
    EXPECT_NEAR(r.objective_history.back(),
                partition_cost(pts, r.assignments, r.centroids.size()),
                1e-8 * std::max(1.0, r.objective_history.back()));
  }
}

TEST(KMeansTest, ConvergedAssignmentsAreNearest) {
  std::mt19937_64 rng(4);
  std::vector<LorentzPoint> pts;
  for (int i = 0; i < 80; ++i) pts.push_back(testing::random_point(rng, 3, 1.0));
  const auto r = lorentzian_kmeans(pts, 3, 1, 200);
  ASSERT_TRUE(r.converged);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double mine = distance(pts[i], r.centroids[r.assignments[i]]);
    for (const auto& c : r.centroids) EXPECT_LE(mine, distance(pts[i], c) + 1e-12);
  }
}

double exhaustive_two_means(const std::vector<LorentzPoint>& pts) {
  const std::size_t n = pts.size();
  double best = 1e300;
  for (unsigned mask = 1; mask < (1u << n) - 1; ++mask) {
    std::vector<std::size_t> label(n);
    for (std::size_t i = 0; i < n; ++i) label[i] = (mask >> i) & 1u;
    best = std::min(best, partition_cost(pts, label, 2));
  }
  return best;
}

TEST(KMeansTest, TwoMeansNeverBeatsExhaustiveOptimum) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    std::vector<LorentzPoint> pts;
    for (int i = 0; i < 9; ++i) pts.push_back(testing::random_point(rng, 2, 1.0));
    const auto r = lorentzian_kmeans(pts, 2, t);
    EXPECT_GE(partition_cost(pts, r.assignments, 2),
              exhaustive_two_means(pts) - 1e-9);
  }
}

TEST(KMeansTest, TwoMeansFindsOptimumOnClusteredSets) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> ang(0.0, 6.283185307179586);
  for (int t = 0; t < 30; ++t) {
    const double a = ang(rng);
    auto pts = blob(rng, {std::cos(a), std::sin(a)}, 4, 0.1);
    auto other = blob(rng, {-std::cos(a), -std::sin(a)}, 5, 0.1);
    pts.insert(pts.end(), other.begin(), other.end());
    const auto r = lorentzian_kmeans(pts, 2, t);
    EXPECT_NEAR(partition_cost(pts, r.assignments, 2), exhaustive_two_means(pts),
                1e-9);
  }
}

TEST(KMeansTest, SingleClusterIsCentroid) {
  std::mt19937_64 rng(6);
  std::vector<LorentzPoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(testing::random_point(rng, 3, 1.0));
  const auto r = lorentzian_kmeans(pts, 1);
  EXPECT_LE(testing::max_abs_diff(r.centroids[0].coords(),
                                  lorentz_centroid(pts).coords()),
            1e-12);
}

TEST(KMeansTest, KEqualsNKeepsEveryPoint) {
  std::mt19937_64 rng(7);
  std::vector<LorentzPoint> pts;
  for (int i = 0; i < 5; ++i) pts.push_back(testing::random_point(rng, 3, 1.0));
  const auto r = lorentzian_kmeans(pts, 5);
  std::set<std::size_t> used(r.assignments.begin(), r.assignments.end());
  EXPECT_EQ(used.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.centroids[r.assignments[i]], pts[i]);
}

TEST(KMeansTest, DeterministicForSeed) {
  std::mt19937_64 rng(8);
  std::vector<LorentzPoint> pts;
  for (int i = 0; i < 3000; ++i) pts.push_back(testing::random_point(rng, 4, 1.0));
  const auto a = lorentzian_kmeans(pts, 2, 3);
  const auto b = lorentzian_kmeans(pts, 2, 3);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.objective_history, b.objective_history);
}

}  // namespace
}  // namespace hypermem
