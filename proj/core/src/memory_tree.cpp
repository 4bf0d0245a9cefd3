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

#include "hypermem/memory_tree.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <sstream>
#include <unordered_map>

#include "hypermem/errors.hpp"
#include "hypermem/kmeans.hpp"

namespace hypermem {

namespace {

constexpr double kHalfAngleTolerance = 1e-12;
// Ids are reused smallest-first, so they never exceed the peak node count.
constexpr NodeId kMaxNodeId = NodeId{1} << 26;

std::string node_str(NodeId id) { return "node " + std::to_string(id); }

void add_scaled(std::vector<double>& acc, std::span<const double> v,
                double sign) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += sign * v[i];
}

}  // namespace

MemoryTree::MemoryTree(std::size_t dim, Curvature c, TreeConfig cfg)
    : dim_(dim), c_(c), cfg_(cfg) {
  if (dim == 0) throw ShapeError("MemoryTree: dimension must be positive");
  cfg_.cone.validate(c_);
  if (!(cfg_.tau_split >= 0.0 && cfg_.tau_split <= 1.0)) {
    throw DomainError("MemoryTree: tau_split must lie in [0, 1]");
  }
  if (!(cfg_.merge_eps >= 0.0) || !(cfg_.dedup_eps >= 0.0)) {
    throw DomainError("MemoryTree: merge_eps and dedup_eps must be >= 0");
  }
  if (cfg_.max_fanout < 2) {
    throw DomainError("MemoryTree: max_fanout must be at least 2");
  }
  const LorentzPoint o = origin(dim_, c_);
  TreeNode root{kRootNode, std::nullopt, o, cone_half_angle(o, cfg_.cone),
                {}, {}, 0, 0, false};
  nodes_.emplace(kRootNode, std::move(root));
  sums_.emplace(kRootNode, std::vector<double>(dim_ + 1, 0.0));
}

const TreeNode& MemoryTree::node(NodeId id) const {
  auto* n = nodes_.find(id);
  if (n == nullptr) throw LookupError("unknown " + node_str(id));
  return *n;
}

TreeNode& MemoryTree::mutable_node(NodeId id) {
  auto* n = nodes_.find(id);
  if (n == nullptr) throw LookupError("unknown " + node_str(id));
  return *n;
}

std::vector<NodeId> MemoryTree::node_ids() const {
  return nodes_.ids();
}

const MemoryEntry& MemoryTree::entry(EntryId id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw LookupError("unknown entry " + std::to_string(id));
  }
  return it->second;
}

NodeId MemoryTree::owner(EntryId id) const {
  auto it = owner_.find(id);
  if (it == owner_.end()) {
    throw LookupError("unknown entry " + std::to_string(id));
  }
  return it->second;
}

std::size_t MemoryTree::max_depth() const {
  std::size_t d = 0;
  for (NodeId id : nodes_.ids()) d = std::max(d, node(id).depth);
  return d;
}

double MemoryTree::angle(const TreeNode& n, const LorentzPoint& z) const {
  if (n.id == kRootNode) return 0.0;
  return exterior_angle_or_zero(n.centroid, z, cfg_.cone.convention);
}

bool MemoryTree::accepts(const TreeNode& n, const LorentzPoint& z) const {
  return angle(n, z) <= n.half_angle;
}

NodeId MemoryTree::new_node(NodeId parent) {
  NodeId id;
  if (!free_ids_.empty()) {
    id = free_ids_.top();
    free_ids_.pop();
  } else {
    id = next_id_++;
  }
  TreeNode& p = mutable_node(parent);
  TreeNode n{id,  parent, p.centroid, p.half_angle, {}, {}, p.depth + 1,
             0, false};
  p.children.push_back(id);
  nodes_.emplace(id, std::move(n));
  sums_.emplace(id, std::vector<double>(dim_ + 1, 0.0));
  return id;
}

void MemoryTree::refresh_node(NodeId id) {
  if (id == kRootNode) return;  // structural anchor stays at the origin
  TreeNode& n = mutable_node(id);
  if (n.subtree_size == 0) return;
  n.centroid = centroid_from_sum(sums_.at(id), c_);
  n.half_angle = cone_half_angle(n.centroid, cfg_.cone);
}

void MemoryTree::add_to_ancestors(NodeId id, const LorentzPoint& z,
                                  double sign) {
  std::optional<NodeId> cur = id;
  while (cur) {
    TreeNode& n = mutable_node(*cur);
    add_scaled(sums_.at(*cur), z.coords(), sign);
    if (sign > 0) {
      ++n.subtree_size;
    } else {
      --n.subtree_size;
    }
    refresh_node(*cur);
    cur = n.parent;
  }
}

void MemoryTree::set_depths(NodeId id, std::size_t depth) {
  std::vector<std::pair<NodeId, std::size_t>> stack{{id, depth}};
  while (!stack.empty()) {
    auto [nid, d] = stack.back();
    stack.pop_back();
    TreeNode& n = mutable_node(nid);
    n.depth = d;
    for (NodeId ch : n.children) stack.emplace_back(ch, d + 1);
  }
}

void MemoryTree::erase_node(NodeId id) {
  TreeNode& n = mutable_node(id);
  if (n.parent) {
    auto& siblings = mutable_node(*n.parent).children;
    siblings.erase(std::remove(siblings.begin(), siblings.end(), id),
                   siblings.end());
  }
  split_resistant_.erase(id);
  sums_.erase(id);
  nodes_.erase(id);
  free_ids_.push(id);
}

void MemoryTree::prune_upwards(NodeId id) {
  while (id != kRootNode) {
    const TreeNode& n = node(id);
    if (n.subtree_size > 0 || !n.children.empty()) return;
    const NodeId parent = *n.parent;
    erase_node(id);
    id = parent;
  }
}

std::vector<NodeId> MemoryTree::insert_entry(MemoryEntry entry) {
  if (entry.z.dim() != dim_) {
    throw ShapeError("insert_entry: entry dimension " +
                     std::to_string(entry.z.dim()) + " != tree dimension " +
                     std::to_string(dim_));
  }
  if (!(entry.z.curvature() == c_)) {
    throw ShapeError("insert_entry: curvature mismatch");
  }
  if (entries_.count(entry.id) != 0) {
    throw DomainError("insert_entry: duplicate entry id " +
                      std::to_string(entry.id));
  }

  // Greedy descent: at each level follow the accepting child with the
  // smallest exterior angle.
  std::vector<NodeId> path;
  NodeId cur = kRootNode;
  for (;;) {
    std::optional<NodeId> best;
    double best_phi = 0.0;
    for (NodeId ch : node(cur).children) {
      const TreeNode& cn = node(ch);
      const double phi = angle(cn, entry.z);
      if (phi > cn.half_angle) continue;
      if (!best || phi < best_phi) {
        best = ch;
        best_phi = phi;
      }
    }
    if (!best) break;
    cur = *best;
    path.push_back(cur);
  }

  if (path.empty() && cfg_.exhaustive_fallback) {
    // Greedy descent can miss acceptors hidden under non-accepting parents.
    std::optional<NodeId> best;
    double best_phi = 0.0;
    for (NodeId id : nodes_.ids()) {
      if (id == kRootNode) continue;
      const TreeNode& n = node(id);
      const double phi = angle(n, entry.z);
      if (phi > n.half_angle) continue;
      if (!best || n.depth > node(*best).depth ||
          (n.depth == node(*best).depth && phi < best_phi)) {
        best = id;
        best_phi = phi;
      }
    }
    if (best) {
      for (std::optional<NodeId> a = *best; a && *a != kRootNode;
           a = node(*a).parent) {
        path.push_back(*a);
      }
      std::reverse(path.begin(), path.end());
    }
  }

  if (path.empty()) path.push_back(new_node(kRootNode));

  const NodeId target = path.back();
  const LorentzPoint z = entry.z;
  const EntryId id = entry.id;
  mutable_node(target).entries.push_back(id);
  owner_.emplace(id, target);
  entries_.emplace(id, std::move(entry));
  add_to_ancestors(target, z, +1.0);
  return path;
}

double MemoryTree::violation_ratio(NodeId id) const {
  const TreeNode& n = node(id);
  if (n.entries.empty()) {
    throw DomainError("violation_ratio: " + node_str(id) +
                      " has no direct entries");
  }
  std::size_t outside = 0;
  for (EntryId e : n.entries) {
    if (!accepts(n, entries_.at(e).z)) ++outside;
  }
  return static_cast<double>(outside) / static_cast<double>(n.entries.size());
}

SplitOutcome MemoryTree::split_node(NodeId id, double tau_split) {
  const TreeNode& n = node(id);
  SplitOutcome out;
  if (id == kRootNode || n.entries.empty()) return out;
  out.violation_before = violation_ratio(id);
  out.violation_after = out.violation_before;
  if (out.violation_before <= tau_split) return out;
  if (split_resistant_.count(id) != 0) {
    out.status = SplitStatus::kSplitResistant;
    return out;
  }
  if (n.entries.size() < 2) {
    split_resistant_.insert(id);
    out.status = SplitStatus::kSplitResistant;
    return out;
  }

  const std::vector<EntryId> members = n.entries;
  const auto bisected = bisect_entries(id);
  if (!bisected) {
    // Every point coincides with the seeds; there is nothing to separate.
    split_resistant_.insert(id);
    out.status = SplitStatus::kSplitResistant;
    return out;
  }
  const std::array<NodeId, 2> kids = *bisected;

  double after = 0.0;
  for (NodeId k : kids) after = std::max(after, violation_ratio(k));
  const TreeNode& a = node(kids[0]);
  const TreeNode& b = node(kids[1]);
  const bool redundant =
      distance(a.centroid, b.centroid) < cfg_.merge_eps ||
      (accepts(a, b.centroid) && accepts(b, a.centroid));

  if (after >= out.violation_before || redundant) {
    // Undo: entries return to the parent in their original order.
    TreeNode& p = mutable_node(id);
    p.entries = members;
    for (EntryId e : members) owner_[e] = id;
    erase_node(kids[0]);
    erase_node(kids[1]);
    split_resistant_.insert(id);
    out.status = SplitStatus::kReverted;
    return out;
  }
  out.status = SplitStatus::kSplit;
  out.violation_after = after;
  out.children = {kids[0], kids[1]};
  return out;
}

std::optional<std::array<NodeId, 2>> MemoryTree::bisect_entries(NodeId id) {
  const std::vector<EntryId> members = node(id).entries;
  if (members.size() < 2) return std::nullopt;
  std::vector<LorentzPoint> pts;
  pts.reserve(members.size());
  for (EntryId e : members) pts.push_back(entries_.at(e).z);
  const KMeansResult km =
      lorentzian_kmeans(pts, 2, cfg_.seed, cfg_.kmeans_max_iters);
  const auto n_first = static_cast<std::size_t>(
      std::count(km.assignments.begin(), km.assignments.end(), 0));
  if (n_first == 0 || n_first == members.size()) return std::nullopt;

  const std::array<NodeId, 2> kids = {new_node(id), new_node(id)};
  for (std::size_t i = 0; i < members.size(); ++i) {
    const NodeId k = kids[km.assignments[i]];
    mutable_node(k).entries.push_back(members[i]);
    owner_[members[i]] = k;
    add_scaled(sums_.at(k), pts[i].coords(), 1.0);
    ++mutable_node(k).subtree_size;
  }
  mutable_node(id).entries.clear();
  refresh_node(kids[0]);
  refresh_node(kids[1]);
  return kids;
}

std::size_t MemoryTree::partition_entries(NodeId id) {
  const std::size_t cap = cfg_.max_leaf_entries;
  if (cap == 0) return 0;
  std::size_t created = 0;
  std::deque<NodeId> work{id};
  while (!work.empty()) {
    const NodeId cur = work.front();
    work.pop_front();
    if (cur == kRootNode || node(cur).entries.size() <= cap) continue;
    const auto kids = bisect_entries(cur);
    if (!kids) continue;
    created += 2;
    work.push_back((*kids)[0]);
    work.push_back((*kids)[1]);
  }
  return created;
}

MergeOutcome MemoryTree::merge_nodes(std::span<const NodeId> sibling_ids) {
  MergeOutcome out;
  if (sibling_ids.empty()) return out;
  std::optional<NodeId> parent;
  for (NodeId id : sibling_ids) {
    if (id == kRootNode) throw DomainError("merge_nodes: cannot merge root");
    const TreeNode& n = node(id);
    if (parent && n.parent != parent) {
      throw DomainError("merge_nodes: " + node_str(id) +
                        " is not a sibling of the others");
    }
    parent = n.parent;
  }

  std::vector<NodeId> alive(sibling_ids.begin(), sibling_ids.end());
  std::sort(alive.begin(), alive.end());
  alive.erase(std::unique(alive.begin(), alive.end()), alive.end());

  for (std::size_t i = 0; i < alive.size(); ++i) {
    for (std::size_t j = i + 1; j < alive.size();) {
      const TreeNode& a = node(alive[i]);
      const TreeNode& b = node(alive[j]);
      const bool close = distance(a.centroid, b.centroid) < cfg_.merge_eps;
      const bool mutual = accepts(a, b.centroid) && accepts(b, a.centroid);
      if (!(close || mutual) ||
          a.children.size() + b.children.size() > cfg_.max_fanout) {
        ++j;
        continue;
      }
      const NodeId keep = alive[i];
      const NodeId gone = alive[j];
      TreeNode& k = mutable_node(keep);
      TreeNode& g = mutable_node(gone);
      for (EntryId e : g.entries) {
        k.entries.push_back(e);
        owner_[e] = keep;
      }
      for (NodeId ch : g.children) {
        k.children.push_back(ch);
        mutable_node(ch).parent = keep;
      }
      g.children.clear();
      k.subtree_size += g.subtree_size;
      k.abstraction = k.abstraction && g.abstraction;
      add_scaled(sums_.at(keep), sums_.at(gone), 1.0);
      split_resistant_.erase(keep);
      erase_node(gone);
      refresh_node(keep);
      alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(j));
      if (!out.survivor) out.survivor = keep;
      ++out.merged;
      j = i + 1;  // the survivor moved; re-examine the remaining siblings
    }
  }
  return out;
}

std::size_t MemoryTree::build_groups(NodeId parent,
                                     std::vector<NodeId> members) {
  const std::size_t fan = cfg_.max_fanout;
  if (members.size() <= fan) {
    for (NodeId m : members) {
      mutable_node(parent).children.push_back(m);
      mutable_node(m).parent = parent;
    }
    return 0;
  }
  std::vector<LorentzPoint> pts;
  pts.reserve(members.size());
  for (NodeId m : members) pts.push_back(node(m).centroid);
  std::vector<std::size_t> assign =
      lorentzian_kmeans(pts, fan, cfg_.seed, cfg_.kmeans_max_iters)
          .assignments;
  std::vector<std::vector<NodeId>> groups(fan);
  for (std::size_t i = 0; i < members.size(); ++i) {
    groups[assign[i]].push_back(members[i]);
  }
  const auto largest = std::max_element(
      groups.begin(), groups.end(),
      [](const auto& x, const auto& y) { return x.size() < y.size(); });
  if (largest->size() == members.size()) {
    // Coincident centroids: deal the members out in order instead.
    for (auto& g : groups) g.clear();
    for (std::size_t i = 0; i < members.size(); ++i) {
      groups[i % fan].push_back(members[i]);
    }
  }
  std::size_t created = 0;
  for (auto& g : groups) {
    if (g.empty()) continue;
    if (g.size() == 1) {
      mutable_node(parent).children.push_back(g.front());
      mutable_node(g.front()).parent = parent;
      continue;
    }
    const NodeId mid = new_node(parent);
    mutable_node(mid).abstraction = true;
    ++created;
    created += build_groups(mid, std::move(g));
  }
  return created;
}

std::size_t MemoryTree::regroup_children(NodeId id) {
  if (node(id).children.size() <= cfg_.max_fanout) return 0;
  // Dissolve earlier abstraction layers below `id` so the new grouping is
  // built from the underlying branches rather than stacked on top.
  std::vector<NodeId> base;
  std::vector<NodeId> stack(node(id).children.rbegin(),
                            node(id).children.rend());
  mutable_node(id).children.clear();
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    TreeNode& n = mutable_node(cur);
    if (n.abstraction && n.entries.empty()) {
      for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
        stack.push_back(*it);
      }
      n.children.clear();
      n.parent.reset();
      split_resistant_.erase(cur);
      sums_.erase(cur);
      nodes_.erase(cur);
      free_ids_.push(cur);
    } else {
      base.push_back(cur);
    }
  }
  const std::size_t created = build_groups(id, std::move(base));
  set_depths(id, node(id).depth);
  recompute_subtree(id);
  return created;
}

void MemoryTree::remove_entry(EntryId id) {
  const NodeId o = owner(id);
  const LorentzPoint z = entries_.at(id).z;
  auto& list = mutable_node(o).entries;
  list.erase(std::find(list.begin(), list.end(), id));
  owner_.erase(id);
  entries_.erase(id);
  add_to_ancestors(o, z, -1.0);
  prune_upwards(o);
}

void MemoryTree::recompute_subtree(NodeId id) {
  // Post-order without recursion: deep chains are possible.
  std::vector<NodeId> order;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    order.push_back(cur);
    for (NodeId ch : node(cur).children) stack.push_back(ch);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TreeNode& n = mutable_node(*it);
    std::vector<double>& sum = sums_.at(*it);
    std::fill(sum.begin(), sum.end(), 0.0);
    n.subtree_size = n.entries.size();
    for (EntryId e : n.entries) add_scaled(sum, entries_.at(e).z.coords(), 1.0);
    for (NodeId ch : n.children) {
      add_scaled(sum, sums_.at(ch), 1.0);
      n.subtree_size += node(ch).subtree_size;
    }
    refresh_node(*it);
  }
}

void MemoryTree::recompute_all() { recompute_subtree(kRootNode); }

void MemoryTree::check_invariants() const {
  auto fail = [](const std::string& msg) {
    throw ValidationError("tree invariant violated: " + msg);
  };
  const TreeNode& root = node(kRootNode);
  if (root.parent || root.depth != 0 || !root.entries.empty()) {
    fail("root must be parentless, at depth 0 and own no entries");
  }
  std::size_t reached = 0;
  std::map<EntryId, NodeId> seen;
  std::unordered_map<NodeId, std::size_t> sizes;
  std::vector<NodeId> order;
  std::vector<NodeId> stack{kRootNode};
  std::set<NodeId> visited;
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (!visited.insert(id).second) fail(node_str(id) + " reached twice");
    ++reached;
    order.push_back(id);
    const TreeNode& n = node(id);
    if (n.id != id) fail(node_str(id) + " stores a different id");
    for (EntryId e : n.entries) {
      if (!seen.emplace(e, id).second) {
        fail("entry " + std::to_string(e) + " owned by two nodes");
      }
      auto o = owner_.find(e);
      if (o == owner_.end() || o->second != id) {
        fail("owner index disagrees for entry " + std::to_string(e));
      }
      if (entries_.count(e) == 0) {
        fail("entry " + std::to_string(e) + " is missing from the store");
      }
    }
    for (NodeId ch : n.children) {
      if (!has_node(ch)) fail(node_str(id) + " lists missing child");
      const TreeNode& cn = node(ch);
      if (cn.parent != id) fail(node_str(ch) + " has the wrong parent");
      if (cn.depth != n.depth + 1) fail(node_str(ch) + " has the wrong depth");
      stack.push_back(ch);
    }
    if (id != kRootNode) {
      const double omega = cone_half_angle(n.centroid, cfg_.cone);
      if (std::abs(omega - n.half_angle) > kHalfAngleTolerance) {
        fail(node_str(id) + " caches a stale half-angle");
      }
    }
  }
  if (reached != nodes_.size()) fail("unreachable nodes present");
  if (seen.size() != entries_.size()) fail("entries without an owner");
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const TreeNode& n = node(*it);
    std::size_t s = n.entries.size();
    for (NodeId ch : n.children) s += sizes.at(ch);
    sizes[*it] = s;
    if (s != n.subtree_size) fail(node_str(*it) + " has a stale subtree size");
    if (*it != kRootNode && s == 0) fail(node_str(*it) + " is empty");
  }
}

MemoryTree MemoryTree::from_records(std::size_t dim, Curvature c,
                                    TreeConfig cfg,
                                    std::map<EntryId, MemoryEntry> entries,
                                    const std::vector<NodeRecord>& records) {
  MemoryTree t(dim, c, cfg);
  for (const auto& [id, e] : entries) {
    if (e.z.dim() != dim || !(e.z.curvature() == c)) {
      throw ShapeError("from_records: entry " + std::to_string(id) +
                       " does not match the tree space");
    }
  }
  t.nodes_.clear();
  t.sums_.clear();
  NodeId max_id = 0;
  for (const NodeRecord& r : records) {
    if (r.id >= kMaxNodeId) {
      throw ValidationError("from_records: implausible " + node_str(r.id));
    }
    if (t.nodes_.count(r.id) != 0) {
      throw ValidationError("from_records: duplicate " + node_str(r.id));
    }
    TreeNode n{r.id,    r.parent, origin(dim, c), 0.0, r.children,
               r.entries, r.depth, 0,              r.abstraction};
    n.half_angle = cone_half_angle(n.centroid, t.cfg_.cone);
    t.nodes_.emplace(r.id, std::move(n));
    t.sums_.emplace(r.id, std::vector<double>(dim + 1, 0.0));
    max_id = std::max(max_id, r.id);
  }
  if (t.nodes_.count(kRootNode) == 0) {
    throw ValidationError("from_records: root node missing");
  }
  for (NodeId nid : t.nodes_.ids()) {
    const TreeNode& n = t.node(nid);
    for (EntryId e : n.entries) {
      if (entries.count(e) == 0) {
        throw ValidationError("from_records: " + node_str(nid) +
                              " references unknown entry " +
                              std::to_string(e));
      }
      if (!t.owner_.emplace(e, nid).second) {
        throw ValidationError("from_records: entry " + std::to_string(e) +
                              " owned twice");
      }
    }
    for (NodeId ch : n.children) {
      if (t.nodes_.count(ch) == 0) {
        throw ValidationError("from_records: " + node_str(nid) +
                              " references unknown child " + node_str(ch));
      }
    }
  }
  t.entries_ = std::move(entries);
  t.next_id_ = max_id + 1;
  for (NodeId id = 0; id < max_id; ++id) {
    if (!t.nodes_.count(id)) t.free_ids_.push(id);
  }
  t.recompute_all();
  t.check_invariants();
  for (const NodeRecord& r : records) {
    if (!r.centroid) continue;
    TreeNode& n = t.mutable_node(r.id);
    std::optional<LorentzPoint> stored;
    try {
      stored.emplace(*r.centroid, c);
    } catch (const Error& e) {
      throw ValidationError("from_records: " + node_str(r.id) +
                            " has an invalid centroid: " + e.what());
    }
    if (stored->dim() != dim) {
      throw ValidationError("from_records: " + node_str(r.id) +
                            " centroid has the wrong dimension");
    }
    if (r.id != kRootNode && distance(*stored, n.centroid) > 1e-8) {
      throw ValidationError("from_records: " + node_str(r.id) +
                            " centroid disagrees with its entries");
    }
    const double omega = cone_half_angle(*stored, t.cfg_.cone);
    if (r.half_angle && std::abs(*r.half_angle - omega) > kHalfAngleTolerance) {
      throw ValidationError("from_records: " + node_str(r.id) +
                            " caches a stale half-angle");
    }
    n.centroid = std::move(*stored);
    n.half_angle = omega;
  }
  return t;
}

// ---------------------------------------------------------------------------

void UnconsolidatedPool::append(MemoryEntry entry, bool verified) {
  entry.committed = false;
  std::lock_guard lock(mu_);
  pending_.push_back({std::move(entry), verified});
}

std::vector<UnconsolidatedPool::Pending> UnconsolidatedPool::drain(
    std::size_t max_count) {
  std::lock_guard lock(mu_);
  const std::size_t n = std::min(max_count, pending_.size());
  std::vector<Pending> out(std::make_move_iterator(pending_.begin()),
                           std::make_move_iterator(pending_.begin() +
                                                   static_cast<std::ptrdiff_t>(n)));
  pending_.erase(pending_.begin(),
                 pending_.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

std::size_t UnconsolidatedPool::size() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

// ---------------------------------------------------------------------------

namespace {

// Removes near-identical entries with the same (g, s), keeping the lowest id.
std::size_t dedup_entries(MemoryTree& tree, std::size_t max_ops) {
  if (tree.config().dedup_eps <= 0.0 || max_ops == 0) return 0;
  std::map<std::pair<std::string, std::string>, std::vector<EntryId>> buckets;
  for (const auto& [id, e] : tree.entries()) buckets[{e.g, e.s}].push_back(id);

  std::vector<EntryId> doomed;
  const double eps = tree.config().dedup_eps;
  const double sc = tree.curvature().sqrt_value();
  for (auto& [key, ids] : buckets) {
    if (ids.size() < 2) continue;
    // Sweep along the first space-like coordinate. For points on the
    // hyperboloid |dx_1| <= ||ds|| <= sqrt(c) x0 * chord, so the window
    // below cannot miss a pair within eps.
    std::vector<std::pair<double, EntryId>> keyed;
    double x0max = 0.0;
    for (EntryId id : ids) {
      const auto z = tree.entry(id).z.coords();
      keyed.emplace_back(z[1], id);
      x0max = std::max(x0max, z[0]);
    }
    std::sort(keyed.begin(), keyed.end());
    const double window =
        2.0 * std::sinh(sc * eps / 2.0) / sc * sc * x0max * 1.01 + 1e-15;
    std::set<EntryId> gone;
    for (std::size_t i = 0; i < keyed.size(); ++i) {
      for (std::size_t j = i + 1;
           j < keyed.size() && keyed[j].first - keyed[i].first <= window; ++j) {
        const EntryId a = keyed[i].second;
        const EntryId b = keyed[j].second;
        if (gone.count(a) || gone.count(b)) continue;
        if (distance(tree.entry(a).z, tree.entry(b).z) < eps) {
          gone.insert(std::max(a, b));
        }
      }
    }
    doomed.insert(doomed.end(), gone.begin(), gone.end());
  }
  std::sort(doomed.begin(), doomed.end());
  if (doomed.size() > max_ops) doomed.resize(max_ops);
  for (EntryId id : doomed) tree.remove_entry(id);
  return doomed.size();
}

}  // namespace

double mean_violation_ratio(const MemoryTree& tree) {
  double total = 0.0;
  std::size_t count = 0;
  for (NodeId id : tree.node_ids()) {
    if (tree.node(id).entries.empty()) continue;
    total += tree.violation_ratio(id);
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

namespace {
constexpr std::size_t kMinInsertChunk = 1000;
constexpr std::size_t kMaxInsertChunk = 16000;
}  // namespace

ConsolidationReport consolidate(MemoryTree& tree, UnconsolidatedPool& pool,
                                const ConsolidateOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  ConsolidationReport rep;
  const double tau = opts.tau_split.value_or(tree.config().tau_split);
  std::size_t ops_left = opts.budget.value_or(SIZE_MAX);
  auto spend = [&]() {
    if (ops_left == 0) {
      rep.budget_exhausted = true;
      return false;
    }
    if (ops_left != SIZE_MAX) --ops_left;
    return true;
  };

  // 1. Drain. Entries beyond the budget stay in the pool.
  auto pending = pool.drain(ops_left);
  if (opts.budget && pool.size() > 0) rep.budget_exhausted = true;
  // New branches pile up under the root; every time their number passes a
  // chunk that grows with the tree (1k to 16k), the root is regrouped so that
  // insertion does not degrade into a scan over all pending branches.
  std::size_t since_regroup = 0;
  for (auto& p : pending) {
    ++rep.drained;
    spend();
    if (!p.verified || tree.has_entry(p.entry.id)) {
      ++rep.discarded_unverified;
      continue;
    }
    p.entry.committed = true;
    const std::size_t before = tree.node_count();
    tree.insert_entry(std::move(p.entry));
    if (tree.node_count() > before) {
      ++rep.new_branches;
      ++since_regroup;
    }
    const std::size_t chunk = std::clamp<std::size_t>(
        tree.entry_count(), kMinInsertChunk, kMaxInsertChunk);
    if (since_regroup >= chunk &&
        tree.node(kRootNode).children.size() > tree.config().max_fanout) {
      rep.abstractions += tree.regroup_children(kRootNode);
      since_regroup = 0;
    }
  }

  // Split, partition, regroup, merge and dedup until nothing changes.
  // Regrouping precedes merging so that sibling sets stay small.
  constexpr int kMaxRounds = 16;
  for (int round = 0; round < kMaxRounds && !rep.budget_exhausted; ++round) {
    tree.recompute_all();
    // Marks from an earlier round may describe entry sets that merges,
    // partitions or dedup have since changed; retry them. A round with no
    // change leaves every mark reproducible, which keeps a later pass idle.
    tree.clear_split_resistance();
    bool changed = false;

    std::deque<NodeId> work;
    for (NodeId id : tree.node_ids()) {
      if (!tree.node(id).entries.empty()) work.push_back(id);
    }
    while (!work.empty()) {
      const NodeId id = work.front();
      work.pop_front();
      if (!tree.has_node(id) || tree.node(id).entries.empty()) continue;
      if (tree.violation_ratio(id) <= tau || tree.is_split_resistant(id)) {
        continue;
      }
      if (!spend()) break;
      const SplitOutcome s = tree.split_node(id, tau);
      if (s.status == SplitStatus::kSplit) {
        ++rep.splits;
        rep.violation_before_after.emplace_back(s.violation_before,
                                                s.violation_after);
        for (NodeId ch : s.children) work.push_back(ch);
        changed = true;
      } else if (s.status == SplitStatus::kReverted) {
        ++rep.reverted_splits;
      }
    }

    if (tree.config().max_leaf_entries > 0) {
      for (NodeId id : tree.node_ids()) {
        if (rep.budget_exhausted) break;
        if (!tree.has_node(id) ||
            tree.node(id).entries.size() <= tree.config().max_leaf_entries) {
          continue;
        }
        if (!spend()) break;
        const std::size_t made = tree.partition_entries(id);
        rep.partitions += made;
        changed = changed || made > 0;
      }
    }

    for (NodeId id : tree.node_ids()) {
      if (rep.budget_exhausted) break;
      if (!tree.has_node(id) ||
          tree.node(id).children.size() <= tree.config().max_fanout) {
        continue;
      }
      if (!spend()) break;
      const std::size_t made = tree.regroup_children(id);
      rep.abstractions += made;
      changed = changed || made > 0;
    }

    for (NodeId id : tree.node_ids()) {
      if (rep.budget_exhausted) break;
      if (!tree.has_node(id)) continue;
      const auto kids = tree.node(id).children;
      if (kids.size() < 2) continue;
      const MergeOutcome m = tree.merge_nodes(kids);
      if (m.merged > 0) {
        spend();
        rep.merges += m.merged;
        changed = true;
      }
    }

    if (!rep.budget_exhausted) {
      const std::size_t removed = dedup_entries(tree, ops_left);
      if (ops_left != SIZE_MAX) ops_left -= removed;
      rep.dedups += removed;
      changed = changed || removed > 0;
    }
    if (!changed) break;
  }
  tree.recompute_all();

  rep.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

std::string report_to_json_line(const ConsolidationReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"drained\":" << r.drained
     << ",\"discarded_unverified\":" << r.discarded_unverified
     << ",\"new_branches\":" << r.new_branches << ",\"splits\":" << r.splits
     << ",\"reverted_splits\":" << r.reverted_splits
     << ",\"merges\":" << r.merges << ",\"abstractions\":" << r.abstractions
     << ",\"partitions\":" << r.partitions
     << ",\"dedups\":" << r.dedups << ",\"violation_before_after\":[";
  for (std::size_t i = 0; i < r.violation_before_after.size(); ++i) {
    if (i) os << ',';
    os << '[' << r.violation_before_after[i].first << ','
       << r.violation_before_after[i].second << ']';
  }
  os << "],\"wall_time\":" << r.wall_time
     << ",\"budget_exhausted\":" << (r.budget_exhausted ? "true" : "false")
     << "}\n";
  return os.str();
}

TreeStats tree_stats(const MemoryTree& tree) {
  TreeStats st;
  st.entry_count = tree.entry_count();
  if (tree.entry_count() == 0 && tree.node_count() == 1) return st;
  st.node_count = tree.node_count();
  st.max_depth = tree.max_depth();
  st.per_depth.resize(st.max_depth + 1);
  for (std::size_t d = 0; d <= st.max_depth; ++d) st.per_depth[d].depth = d;

  std::vector<NodeId> stack{kRootNode};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const TreeNode& n = tree.node(id);
    st.icicle.push_back({id, n.depth, n.subtree_size, n.parent});
    DepthStats& ds = st.per_depth[n.depth];
    ++ds.nodes;
    ds.entries += n.entries.size();
    ds.mean_subtree_size += static_cast<double>(n.subtree_size);
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
      stack.push_back(*it);
    }
  }
  for (DepthStats& ds : st.per_depth) {
    if (ds.nodes > 0) ds.mean_subtree_size /= static_cast<double>(ds.nodes);
  }
  return st;
}

// ---------------------------------------------------------------------------

MemoryBank::MemoryBank(MemoryTree tree)
    : current_(std::make_shared<const MemoryTree>(std::move(tree))) {}

std::shared_ptr<const MemoryTree> MemoryBank::snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return current_;
}

ConsolidationReport MemoryBank::consolidate(const ConsolidateOptions& opts) {
  std::lock_guard writer(writer_mu_);
  MemoryTree work = *snapshot();
  ConsolidationReport rep = hypermem::consolidate(work, pool_, opts);
  auto next = std::make_shared<const MemoryTree>(std::move(work));
  std::lock_guard lock(snapshot_mu_);
  current_ = std::move(next);
  return rep;
}

}  // namespace hypermem
