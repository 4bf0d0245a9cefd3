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

// Long-term hierarchical memory.
//
// Nodes carry a centroid (the Lorentz centroid of every entry in their
// subtree) and the cone half-angle of that centroid. Node 0 is a structural
// root at the origin that never owns entries; semantic branches hang below it.
// Structural changes happen through insert_entry and the consolidation pass;
// readers work on immutable snapshots (see MemoryBank).

#include <array>
#include <chrono>
#include <functional>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypermem/entailment.hpp"
#include "hypermem/lorentz.hpp"

namespace hypermem {

using EntryId = std::uint64_t;
using NodeId = std::uint32_t;

inline constexpr NodeId kRootNode = 0;

namespace detail {

// Dense id-indexed storage with tombstones; node ids are allocated
// sequentially, so lookups are a bounds check and an index.
template <class T>
class SlotTable {
 public:
  const T* find(NodeId id) const {
    return id < slots_.size() && slots_[id] ? &*slots_[id] : nullptr;
  }
  T* find(NodeId id) {
    return id < slots_.size() && slots_[id] ? &*slots_[id] : nullptr;
  }
  std::size_t count(NodeId id) const { return find(id) ? 1 : 0; }
  T& at(NodeId id) {
    T* p = find(id);
    if (!p) throw std::out_of_range("SlotTable: missing id");
    return *p;
  }
  const T& at(NodeId id) const {
    const T* p = find(id);
    if (!p) throw std::out_of_range("SlotTable: missing id");
    return *p;
  }
  void emplace(NodeId id, T value) {
    if (id >= slots_.size()) slots_.resize(std::size_t{id} + 1);
    if (!slots_[id]) ++size_;
    slots_[id].emplace(std::move(value));
  }
  void erase(NodeId id) {
    if (find(id)) {
      slots_[id].reset();
      --size_;
    }
  }
  void clear() {
    slots_.clear();
    size_ = 0;
  }
  std::size_t size() const noexcept { return size_; }
  /// Ids in ascending order.
  std::vector<NodeId> ids() const {
    std::vector<NodeId> out;
    out.reserve(size_);
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (slots_[i]) out.push_back(static_cast<NodeId>(i));
    }
    return out;
  }

 private:
  std::vector<std::optional<T>> slots_;
  std::size_t size_ = 0;
};

}  // namespace detail

/// (z, g, s, a): embedding, global instruction, sub-goal description and an
/// opaque reference to the action segment.
struct MemoryEntry {
  EntryId id = 0;
  LorentzPoint z;
  std::string g;
  std::string s;
  std::vector<std::uint8_t> a;
  bool committed = false;
};

struct TreeNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  LorentzPoint centroid;
  double half_angle = 0.0;
  std::vector<NodeId> children;
  std::vector<EntryId> entries;
  std::size_t depth = 0;
  /// Number of entries in the subtree rooted here.
  std::size_t subtree_size = 0;
  /// Created by fan-out regrouping rather than by insertion or splitting.
  bool abstraction = false;
};

struct TreeConfig {
  ConeParams cone = ConeParams::for_curvature(Curvature{}, 0.1,
                                              AngleConvention::kPiMinus);
  double tau_split = 0.3;
  double merge_eps = 1e-3;
  double dedup_eps = 1e-6;
  /// Nodes with more children than this are regrouped during consolidation.
  std::size_t max_fanout = 8;
  /// Nodes holding more direct entries than this are partitioned during
  /// consolidation regardless of their violation ratio; 0 disables.
  std::size_t max_leaf_entries = 32;
  /// Scan every node before opening a new branch when greedy descent fails.
  bool exhaustive_fallback = true;
  std::size_t kmeans_max_iters = 50;
  std::uint64_t seed = 0;
};

enum class SplitStatus {
  kNoOp,            // violation ratio at or below tau, or no direct entries
  kSplit,           // two children created
  kReverted,        // children did not improve; node marked split-resistant
  kSplitResistant,  // cannot be split (too few distinct points) or marked
};

struct SplitOutcome {
  SplitStatus status = SplitStatus::kNoOp;
  double violation_before = 0.0;
  double violation_after = 0.0;  // max over the children
  std::vector<NodeId> children;
};

struct MergeOutcome {
  std::optional<NodeId> survivor;
  std::size_t merged = 0;
};

class MemoryTree {
 public:
  MemoryTree(std::size_t dim, Curvature c, TreeConfig cfg = {});

  std::size_t dim() const noexcept { return dim_; }
  Curvature curvature() const noexcept { return c_; }
  const TreeConfig& config() const noexcept { return cfg_; }

  const TreeNode& node(NodeId id) const;
  bool has_node(NodeId id) const { return nodes_.count(id) != 0; }
  /// Node ids in ascending order (root first).
  std::vector<NodeId> node_ids() const;
  std::size_t node_count() const noexcept { return nodes_.size(); }

  const MemoryEntry& entry(EntryId id) const;
  bool has_entry(EntryId id) const { return entries_.count(id) != 0; }
  const std::map<EntryId, MemoryEntry>& entries() const noexcept {
    return entries_;
  }
  std::size_t entry_count() const noexcept { return entries_.size(); }
  /// Node that owns the entry.
  NodeId owner(EntryId id) const;
  std::size_t max_depth() const;

  /// Exterior angle used by every structural decision: the configured
  /// convention, with phi = 0 when the point coincides with the centroid or
  /// the centroid sits at the apex.
  double angle(const TreeNode& n, const LorentzPoint& z) const;
  bool accepts(const TreeNode& n, const LorentzPoint& z) const;

  /// Top-down insertion. Returns the accept path (node ids, root excluded),
  /// ending with the node that now owns the entry. Throws DomainError on a
  /// duplicate id and ShapeError on a dimension or curvature mismatch.
  std::vector<NodeId> insert_entry(MemoryEntry entry);

  /// Fraction of the node's direct entries outside its cone. Throws
  /// DomainError when the node owns no entries.
  double violation_ratio(NodeId id) const;

  SplitOutcome split_node(NodeId id, double tau_split);
  SplitOutcome split_node(NodeId id) { return split_node(id, cfg_.tau_split); }

  /// Merges redundant siblings: mutual entailment or centroid distance below
  /// merge_eps. Throws DomainError when the ids do not share a parent.
  MergeOutcome merge_nodes(std::span<const NodeId> sibling_ids);

  /// When `id` has more than max_fanout children, rebuilds the abstraction
  /// layer below it: intermediate nodes created by earlier regroupings are
  /// dissolved and the underlying branches are clustered by Lorentzian
  /// K-Means (k = max_fanout), recursively, until no node exceeds the fan-out.
  /// Returns the number of intermediate nodes created.
  std::size_t regroup_children(NodeId id);

  /// Bisects the node's direct entries by binary Lorentzian K-Means,
  /// recursively, until no resulting node holds more than max_leaf_entries.
  /// Unlike split_node this ignores the violation ratio. Returns the number
  /// of nodes created.
  std::size_t partition_entries(NodeId id);

  /// Removes the entry and prunes nodes whose subtree becomes empty.
  void remove_entry(EntryId id);

  /// Recomputes sums, centroids and half-angles of the whole tree from the
  /// entries.
  void recompute_all();

  bool is_split_resistant(NodeId id) const {
    return split_resistant_.count(id) != 0;
  }
  void clear_split_resistance() { split_resistant_.clear(); }

  /// Throws ValidationError describing the first broken invariant.
  void check_invariants() const;

  /// Rebuilds a tree from a flat node table (used by the snapshot loader).
  /// Centroids are re-derived from the entries. A stored centroid, when
  /// given, must agree with the re-derived one to 1e-8 and is then kept
  /// verbatim; a stored half-angle must match its centroid to 1e-12.
  /// Throws ValidationError on any inconsistency, including entry ids that
  /// are not in `entries`.
  struct NodeRecord {
    NodeId id = 0;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
    std::vector<EntryId> entries;
    std::size_t depth = 0;
    std::optional<std::vector<double>> centroid;
    std::optional<double> half_angle;
    bool abstraction = false;
  };
  static MemoryTree from_records(std::size_t dim, Curvature c, TreeConfig cfg,
                                 std::map<EntryId, MemoryEntry> entries,
                                 const std::vector<NodeRecord>& records);

 private:
  TreeNode& mutable_node(NodeId id);
  NodeId new_node(NodeId parent);
  void refresh_node(NodeId id);
  void recompute_subtree(NodeId id);
  void add_to_ancestors(NodeId id, const LorentzPoint& z, double sign);
  void set_depths(NodeId id, std::size_t depth);
  void erase_node(NodeId id);
  void prune_upwards(NodeId id);
  std::size_t build_groups(NodeId parent, std::vector<NodeId> members);
  std::optional<std::array<NodeId, 2>> bisect_entries(NodeId id);

  std::size_t dim_;
  Curvature c_;
  TreeConfig cfg_;
  detail::SlotTable<TreeNode> nodes_;
  detail::SlotTable<std::vector<double>> sums_;
  std::map<EntryId, MemoryEntry> entries_;
  std::map<EntryId, NodeId> owner_;
  std::set<NodeId> split_resistant_;
  NodeId next_id_ = 1;
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> free_ids_;
};

/// Entries waiting for consolidation. Appends may come from any thread.
class UnconsolidatedPool {
 public:
  struct Pending {
    MemoryEntry entry;
    /// Set by the caller once the trajectory passed its consistency check.
    bool verified = true;
  };

  void append(MemoryEntry entry, bool verified = true);
  /// Removes and returns up to max_count entries in append order.
  std::vector<Pending> drain(std::size_t max_count = SIZE_MAX);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<Pending> pending_;
};

struct ConsolidationReport {
  std::size_t drained = 0;
  /// Unverified entries plus entries whose id is already in the tree.
  std::size_t discarded_unverified = 0;
  std::size_t new_branches = 0;
  std::size_t splits = 0;
  std::size_t reverted_splits = 0;
  std::size_t merges = 0;
  /// Intermediate nodes created by fan-out regrouping.
  std::size_t abstractions = 0;
  /// Nodes created by capacity partitioning.
  std::size_t partitions = 0;
  std::size_t dedups = 0;
  std::vector<std::pair<double, double>> violation_before_after;
  double wall_time = 0.0;
  bool budget_exhausted = false;

  /// True when the pass changed the tree structure.
  bool structural_change() const {
    return splits + merges + abstractions + partitions + dedups +
               new_branches >
           0;
  }
};

struct ConsolidateOptions {
  std::optional<double> tau_split;  // defaults to the tree's config
  /// Upper bound on insertions plus structural operations.
  std::optional<std::size_t> budget;
};

/// Drain, split, merge, regroup and deduplicate until a fixed point.
ConsolidationReport consolidate(MemoryTree& tree, UnconsolidatedPool& pool,
                                const ConsolidateOptions& opts = {});

/// One JSON object per pass, terminated by a newline.
std::string report_to_json_line(const ConsolidationReport& report);

struct DepthStats {
  std::size_t depth = 0;
  std::size_t nodes = 0;
  std::size_t entries = 0;  // entries owned directly by nodes at this depth
  double mean_subtree_size = 0.0;
};

struct IcicleRecord {
  NodeId node_id = 0;
  std::size_t depth = 0;
  std::size_t subtree_entry_count = 0;
  std::optional<NodeId> parent_id;
};

struct TreeStats {
  std::vector<DepthStats> per_depth;
  std::vector<IcicleRecord> icicle;  // depth-first, children in stored order
  std::size_t max_depth = 0;
  std::size_t node_count = 0;
  std::size_t entry_count = 0;
};

/// Deterministic depth-first statistics including the structural root at
/// depth 0; a tree without entries yields empty histograms.
TreeStats tree_stats(const MemoryTree& tree);

/// Mean violation ratio over nodes that own entries (0 when there are none).
double mean_violation_ratio(const MemoryTree& tree);

/// Publishes immutable tree snapshots to readers; consolidation works on a
/// private copy and swaps it in when done.
class MemoryBank {
 public:
  explicit MemoryBank(MemoryTree tree);

  std::shared_ptr<const MemoryTree> snapshot() const;
  UnconsolidatedPool& pool() noexcept { return pool_; }
  ConsolidationReport consolidate(const ConsolidateOptions& opts = {});

 private:
  mutable std::mutex snapshot_mu_;
  std::mutex writer_mu_;
  std::shared_ptr<const MemoryTree> current_;
  UnconsolidatedPool pool_;
};

}  // namespace hypermem
