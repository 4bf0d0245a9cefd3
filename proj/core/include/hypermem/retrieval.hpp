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

// Query side of the memory: cone-filtered beam search over a tree snapshot,
// exact flat scans used as baselines, and alignment of hits into a single
// prior point.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hypermem/memory_tree.hpp"

namespace hypermem {

inline constexpr std::size_t kUnlimitedBeam =
    std::numeric_limits<std::size_t>::max();

struct BeamConfig {
  std::size_t beam_width = 3;  // kUnlimitedBeam keeps every candidate
  std::size_t top_k = 5;
  ConeParams cone = ConeParams::for_curvature(Curvature{}, 0.1,
                                              AngleConvention::kPiMinus);
  /// Expand the best-angle children when no child's cone holds the query.
  bool allow_fallback = true;
  /// When false every child is a candidate, ranked by angle alone.
  bool use_cone_filter = true;
  /// Softmax temperature of align_memories.
  double temperature = 1.0;

  /// Throws DomainError on beam_width == 0, top_k == 0 or T <= 0.
  void validate(Curvature c) const;
};

struct Hit {
  EntryId entry_id = 0;
  double similarity = 0.0;  // 1 / (1 + distance)
  double distance = 0.0;
  std::string g;
  std::string s;
  LorentzPoint z;
  /// Root-to-owner node ids; empty for flat-scan hits.
  std::vector<NodeId> node_path;
};

struct VisitRecord {
  NodeId node_id = 0;
  std::size_t depth = 0;
};

struct RetrievalResult {
  std::vector<Hit> hits;
  LorentzPoint z_mem;
  std::vector<VisitRecord> visited;
  double latency = 0.0;  // seconds
  /// Some level was expanded without any child's cone holding the query.
  bool used_fallback = false;
  /// No hits; z_mem is the query itself.
  bool empty = false;
};

/// Ordering shared by every retrieval path: ascending distance, ties by id.
bool hit_before(const Hit& a, const Hit& b) noexcept;

RetrievalResult beam_search(const MemoryTree& tree, const LorentzPoint& q,
                            const BeamConfig& cfg);

namespace detail {
class PackedView;
}

/// Read-only packed copy of a tree for repeated queries: each node's
/// children occupy one run of slots, and centroids and entry coordinates sit
/// in flat arrays. search() returns exactly what beam_search() returns on
/// the tree, which must outlive the index and stay unchanged.
class TreeIndex {
 public:
  explicit TreeIndex(const MemoryTree& tree);

  const MemoryTree& tree() const noexcept { return *tree_; }
  std::size_t node_count() const noexcept { return ids_.size(); }
  RetrievalResult search(const LorentzPoint& q, const BeamConfig& cfg) const;

 private:
  friend class detail::PackedView;

  const MemoryTree* tree_;
  std::size_t stride_;
  std::vector<NodeId> ids_;
  std::vector<std::size_t> depth_;
  std::vector<double> half_angle_;
  std::vector<double> centroids_;  // stride_ doubles per slot
  std::vector<std::uint32_t> child_begin_;  // children of s: [begin[s], begin[s+1])
  std::vector<std::size_t> entry_begin_;
  std::vector<EntryId> entry_ids_;
  std::vector<double> entry_coords_;
};

enum class FlatMetric { kLorentz, kEuclideanAmbient };

/// Contiguous copy of a bank for the naive linear-scan baseline. Keeps a
/// pointer to `entries`, which must outlive the index.
class FlatIndex {
 public:
  explicit FlatIndex(const std::map<EntryId, MemoryEntry>& entries);

  std::size_t size() const noexcept { return ids_.size(); }

  /// Exact top-k (ascending distance, ties by id). Hits carry z, g and s.
  std::vector<Hit> knn(const LorentzPoint& q, std::size_t k,
                       FlatMetric metric = FlatMetric::kLorentz) const;

 private:
  const std::map<EntryId, MemoryEntry>* entries_;
  std::vector<EntryId> ids_;
  std::vector<double> coords_;  // row-major, stride_ doubles per entry
  std::size_t stride_ = 0;
  Curvature curvature_{};
};

std::vector<Hit> flat_knn(const std::map<EntryId, MemoryEntry>& entries,
                          const LorentzPoint& q, std::size_t k,
                          FlatMetric metric = FlatMetric::kLorentz);

/// Softmax over -d(q, z_i) / T, weighted mean in the origin chart, mapped back
/// to the manifold. One point is returned unchanged; no points yields q. The
/// result does not depend on the order of `points`.
LorentzPoint align_memories(const LorentzPoint& q,
                            std::span<const LorentzPoint> points,
                            double temperature = 1.0);
LorentzPoint align_memories(const LorentzPoint& q, std::span<const Hit> hits,
                            double temperature = 1.0);

/// One JSON object per hit with query_id, rank, entry_id, g, s, similarity
/// and node_path.
std::string retrieval_trace(const RetrievalResult& result,
                            const std::string& query_id);
std::string retrieval_trace(std::span<const Hit> hits,
                            const std::string& query_id);

}  // namespace hypermem
