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

#pragma once

// Seeded synthetic data: planted taxonomies for the embedding trainer and
// planted or balanced memory banks for consolidation and latency studies.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hypermem/embed_trainer.hpp"
#include "hypermem/memory_tree.hpp"

namespace hypermem {

struct TaxonomySpec {
  /// Children per node at each level below the root; levels = size().
  std::vector<std::size_t> branching{2, 4, 8};
  /// Entry items attached under every leaf group.
  std::size_t entries_per_leaf = 0;
  /// Feature noise of entries around their leaf group.
  double noise = 0.05;
  /// Feature length; 0 disables features.
  std::size_t feature_dim = 0;
  /// Non-relatives sampled per non-root item as negative pairs.
  std::size_t negatives_per_item = 0;
  std::uint64_t seed = 0;

  /// Throws DomainError on an empty or zero branching vector.
  void validate() const;
};

struct Taxonomy {
  EmbeddingProblem problem;
  /// Parent of every non-root item.
  std::map<std::string, std::string> parent;
  std::string root;
  std::vector<std::string> leaf_groups;

  /// Root first, `id` last.
  std::vector<std::string> path(const std::string& id) const;
  std::size_t depth(const std::string& id) const;
  /// Number of edges between two items in the taxonomy.
  std::size_t tree_distance(const std::string& a, const std::string& b) const;
};

Taxonomy make_taxonomy(const TaxonomySpec& spec);

/// One JSON object per item: {"id", "path": [...]}.
void write_ground_truth(const Taxonomy& tax, std::ostream& out);

struct PlantedBankSpec {
  std::vector<std::size_t> branching{2, 4, 8};
  std::size_t entries_per_leaf = 10;
  std::size_t dim = 8;
  double curvature = 1.0;
  /// Origin-chart radius of the first level and the increment per level.
  double root_radius = 1.0;
  double radius_step = 1.0;
  /// Angular spread of children around their parent direction.
  double spread = 0.3;
  /// Tangent-space noise of entries around their leaf point.
  double noise = 0.02;
  std::uint64_t seed = 0;
};

struct PlantedBank {
  std::map<EntryId, MemoryEntry> entries;
  /// Leaf group label of every entry (also stored as the entry's s).
  std::map<EntryId, std::string> leaf_of;
};

/// Entries hang under a planted hierarchy laid out radially: deeper levels sit
/// farther from the origin, children near their parent's direction.
PlantedBank make_planted_bank(const PlantedBankSpec& spec);

/// Balanced bank of exactly n entries (fan-out 8, 16 entries per leaf group,
/// as many levels as needed) for latency studies.
std::map<EntryId, MemoryEntry> make_balanced_bank(std::size_t n,
                                                  std::size_t dim,
                                                  std::uint64_t seed,
                                                  double curvature = 1.0);

/// Queries near randomly chosen bank entries (tangent noise at the entry).
std::vector<LorentzPoint> make_queries(
    const std::map<EntryId, MemoryEntry>& entries, std::size_t count,
    double noise, std::uint64_t seed);

}  // namespace hypermem
