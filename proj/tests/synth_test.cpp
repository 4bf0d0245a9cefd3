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

#include "hypermem/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hypermem/errors.hpp"

namespace hypermem {
namespace {

TEST(TaxonomyTest, ShapeOfDefaultSpec) {
  const auto tax = make_taxonomy(TaxonomySpec{});
  // root + 2 + 8 + 64
  EXPECT_EQ(tax.problem.items.size(), 75u);
  EXPECT_EQ(tax.problem.parent_child_edges.size(), 74u);
  EXPECT_EQ(tax.leaf_groups.size(), 64u);
  for (const auto& leaf : tax.leaf_groups) EXPECT_EQ(tax.depth(leaf), 3u);
  EXPECT_EQ(tax.depth(tax.root), 0u);
}

TEST(TaxonomyTest, EntriesHangUnderLeaves) {
  const auto tax = make_taxonomy(TaxonomySpec{{2, 2}, 3, 0.05, 4, 0, 1});
  EXPECT_EQ(tax.problem.items.size(), 1u + 2 + 4 + 12);
  for (const auto& item : tax.problem.items) {
    ASSERT_TRUE(item.feat.has_value());
    EXPECT_EQ(item.feat->size(), 4u);
  }
}

TEST(TaxonomyTest, TreeDistanceIsAMetricOnTheTree) {
  const auto tax = make_taxonomy(TaxonomySpec{{2, 3}, 0, 0.05, 0, 0, 3});
  const auto& items = tax.problem.items;
  for (const auto& a : items) {
    EXPECT_EQ(tax.tree_distance(a.id, a.id), 0u);
    for (const auto& b : items) {
      EXPECT_EQ(tax.tree_distance(a.id, b.id), tax.tree_distance(b.id, a.id));
    }
  }
  for (const auto& [child, parent] : tax.parent) {
    EXPECT_EQ(tax.tree_distance(child, parent), 1u);
    EXPECT_EQ(tax.tree_distance(child, tax.root), tax.depth(child));
  }
  EXPECT_THROW(tax.path("nope"), LookupError);
}

TEST(TaxonomyTest, NegativesAreNeverRelatives) {
  const auto tax = make_taxonomy(TaxonomySpec{{2, 4}, 0, 0.05, 0, 3, 11});
  EXPECT_FALSE(tax.problem.negatives.empty());
  for (const auto& [a, b] : tax.problem.negatives) {
    const auto pa = tax.path(a);
    const auto pb = tax.path(b);
    EXPECT_EQ(std::count(pa.begin(), pa.end(), b), 0);
    EXPECT_EQ(std::count(pb.begin(), pb.end(), a), 0);
  }
}

TEST(TaxonomyTest, DeterministicAndValidated) {
  TaxonomySpec s{{3, 2}, 2, 0.1, 5, 1, 42};
  std::ostringstream a, b;
  write_ground_truth(make_taxonomy(s), a);
  write_ground_truth(make_taxonomy(s), b);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream in(a.str());
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_TRUE(j.contains("id"));
  EXPECT_TRUE(j.contains("path"));
  EXPECT_THROW(make_taxonomy(TaxonomySpec{{}, 0, 0.1, 0, 0, 0}), DomainError);
  EXPECT_THROW(make_taxonomy(TaxonomySpec{{2, 0}, 0, 0.1, 0, 0, 0}), DomainError);
}

TEST(PlantedBankTest, EntriesOnManifoldWithLabels) {
  PlantedBankSpec spec;
  const auto bank = make_planted_bank(spec);
  EXPECT_EQ(bank.entries.size(), 64u * 10u);
  std::set<std::string> leaves;
  for (const auto& [id, e] : bank.entries) {
    EXPECT_EQ(e.id, id);
    EXPECT_LE(e.z.manifold_residual(), kManifoldTolerance);
    EXPECT_EQ(e.z.dim(), spec.dim);
    leaves.insert(bank.leaf_of.at(id));
  }
  EXPECT_EQ(leaves.size(), 64u);
}

TEST(BalancedBankTest, ExactSizeAndDeterministic) {
  for (std::size_t n : {1u, 100u, 1000u, 5000u}) {
    const auto a = make_balanced_bank(n, 8, 3);
    EXPECT_EQ(a.size(), n);
    const auto b = make_balanced_bank(n, 8, 3);
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [id, e] : a) EXPECT_EQ(e.z, b.at(id).z);
  }
}

TEST(QueriesTest, StayNearTheBank) {
  const auto bank = make_balanced_bank(500, 8, 1);
  const auto qs = make_queries(bank, 50, 0.02, 9);
  ASSERT_EQ(qs.size(), 50u);
  for (const auto& q : qs) {
    double best = 1e300;
    for (const auto& [id, e] : bank) best = std::min(best, distance(q, e.z));
    EXPECT_LT(best, 0.02 * 8.0);
  }
  EXPECT_THROW(make_queries({}, 1, 0.1, 0), DomainError);
}

}  // namespace
}  // namespace hypermem
