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

#include "hypermem/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hypermem/errors.hpp"

namespace hypermem {

namespace {

double node_angle(const TreeNode& n, const LorentzPoint& q,
                  AngleConvention conv) {
  if (n.id == kRootNode) return 0.0;
  return exterior_angle_or_zero(n.centroid, q, conv);
}

Hit make_hit(const MemoryEntry& e, double d) {
  return Hit{e.id, 1.0 / (1.0 + d), d, e.g, e.s, e.z, {}};
}

std::vector<NodeId> path_to(const MemoryTree& tree, NodeId id) {
  std::vector<NodeId> path;
  for (std::optional<NodeId> cur = id; cur; cur = tree.node(*cur).parent) {
    path.push_back(*cur);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

void BeamConfig::validate(Curvature c) const {
  if (beam_width == 0) throw DomainError("beam_width must be >= 1");
  if (top_k == 0) throw DomainError("top_k must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError("temperature must be finite and > 0");
  }
  cone.validate(c);
}

bool hit_before(const Hit& a, const Hit& b) noexcept {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.entry_id < b.entry_id;
}

namespace {

// Beam search over any layout that exposes the tree's nodes through
// handles. Both layouts below run this one loop, so their results agree.
template <class View>
RetrievalResult run_beam(const View& view, const LorentzPoint& q,
                         const BeamConfig& cfg) {
  using Handle = typename View::Handle;
  const auto t0 = std::chrono::steady_clock::now();
  const MemoryTree& tree = view.tree();
  cfg.validate(tree.curvature());
  if (q.dim() != tree.dim() || !(q.curvature() == tree.curvature())) {
    throw ShapeError("beam_search: query does not live in the tree's space");
  }
  RetrievalResult res{{}, q, {}, 0.0, false, false};

  struct Cand {
    double phi;
    NodeId id;
    Handle h;
    bool inside;
  };
  struct Scored {
    double d;
    EntryId id;
    NodeId node;
  };
  std::vector<Scored> scored;
  std::vector<Handle> beam{view.root()};
  std::vector<Cand> cands;
  while (!beam.empty()) {
    cands.clear();
    for (Handle b : beam) {
      view.for_each_child(b, [&](Handle ch) {
        const double phi = view.angle(ch, q, cfg.cone.convention);
        cands.push_back({phi, view.id(ch), ch, phi <= view.half_angle(ch)});
      });
    }
    if (cands.empty()) break;
    auto by_angle = [](const Cand& a, const Cand& b) {
      return a.phi != b.phi ? a.phi < b.phi : a.id < b.id;
    };
    if (cfg.use_cone_filter) {
      const bool any_inside = std::any_of(
          cands.begin(), cands.end(), [](const Cand& c) { return c.inside; });
      if (any_inside) {
        cands.erase(std::remove_if(cands.begin(), cands.end(),
                                   [](const Cand& c) { return !c.inside; }),
                    cands.end());
      } else if (cfg.allow_fallback) {
        res.used_fallback = true;
      } else {
        break;
      }
    }
    const std::size_t keep = std::min(cfg.beam_width, cands.size());
    std::partial_sort(cands.begin(),
                      cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), by_angle);
    beam.clear();
    for (std::size_t i = 0; i < keep; ++i) {
      const Handle h = cands[i].h;
      beam.push_back(h);
      res.visited.push_back({cands[i].id, view.depth(h)});
      view.for_each_entry(h, q, [&](EntryId e, double d) {
        scored.push_back({d, e, cands[i].id});
      });
    }
  }

  const std::size_t k = std::min(cfg.top_k, scored.size());
  auto before = [](const Scored& a, const Scored& b) {
    return a.d != b.d ? a.d < b.d : a.id < b.id;
  };
  std::partial_sort(scored.begin(),
                    scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), before);
  res.hits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    Hit h = make_hit(tree.entry(scored[i].id), scored[i].d);
    h.node_path = path_to(tree, scored[i].node);
    res.hits.push_back(std::move(h));
  }
  res.empty = res.hits.empty();
  res.z_mem = align_memories(q, std::span<const Hit>(res.hits),
                             cfg.temperature);
  res.latency =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

class TreeView {
 public:
  using Handle = NodeId;
  explicit TreeView(const MemoryTree& t) : t_(t) {}
  const MemoryTree& tree() const { return t_; }
  Handle root() const { return kRootNode; }
  NodeId id(Handle h) const { return h; }
  std::size_t depth(Handle h) const { return t_.node(h).depth; }
  double half_angle(Handle h) const { return t_.node(h).half_angle; }
  double angle(Handle h, const LorentzPoint& q, AngleConvention conv) const {
    return node_angle(t_.node(h), q, conv);
  }
  template <class F>
  void for_each_child(Handle h, F&& f) const {
    for (NodeId ch : t_.node(h).children) f(ch);
  }
  template <class F>
  void for_each_entry(Handle h, const LorentzPoint& q, F&& f) const {
    for (EntryId e : t_.node(h).entries) f(e, distance(q, t_.entry(e).z));
  }

 private:
  const MemoryTree& t_;
};

}  // namespace

RetrievalResult beam_search(const MemoryTree& tree, const LorentzPoint& q,
                            const BeamConfig& cfg) {
  return run_beam(TreeView(tree), q, cfg);
}

TreeIndex::TreeIndex(const MemoryTree& tree)
    : tree_(&tree), stride_(tree.dim() + 1) {
  // Breadth-first numbering puts every node's children in one run of slots.
  std::vector<NodeId> order{kRootNode};
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (NodeId ch : tree.node(order[i]).children) order.push_back(ch);
  }
  const std::size_t n = order.size();
  ids_.resize(n);
  depth_.resize(n);
  half_angle_.resize(n);
  child_begin_.resize(n + 1);
  entry_begin_.resize(n + 1);
  centroids_.reserve(n * stride_);
  std::uint32_t next_child = 1;
  for (std::size_t s = 0; s < n; ++s) {
    const TreeNode& node = tree.node(order[s]);
    ids_[s] = node.id;
    depth_[s] = node.depth;
    half_angle_[s] = node.half_angle;
    const auto c = node.centroid.coords();
    centroids_.insert(centroids_.end(), c.begin(), c.end());
    child_begin_[s] = next_child;
    next_child += static_cast<std::uint32_t>(node.children.size());
    entry_begin_[s] = entry_ids_.size();
    for (EntryId e : node.entries) {
      entry_ids_.push_back(e);
      const auto z = tree.entry(e).z.coords();
      entry_coords_.insert(entry_coords_.end(), z.begin(), z.end());
    }
  }
  child_begin_[n] = next_child;
  entry_begin_[n] = entry_ids_.size();
}

namespace detail {

class PackedView {
 public:
  using Handle = std::uint32_t;
  explicit PackedView(const TreeIndex& ix) : ix_(ix) {}
  const MemoryTree& tree() const { return ix_.tree(); }
  Handle root() const { return 0; }
  NodeId id(Handle h) const { return ix_.ids_[h]; }
  std::size_t depth(Handle h) const { return ix_.depth_[h]; }
  double half_angle(Handle h) const { return ix_.half_angle_[h]; }
  double angle(Handle h, const LorentzPoint& q, AngleConvention conv) const {
    if (h == 0) return 0.0;
    return exterior_angle_or_zero(
        std::span<const double>(ix_.centroids_.data() + h * ix_.stride_,
                                ix_.stride_),
        q.coords(), q.curvature(), conv);
  }
  template <class F>
  void for_each_child(Handle h, F&& f) const {
    for (Handle c = ix_.child_begin_[h]; c < ix_.child_begin_[h + 1]; ++c) f(c);
  }
  template <class F>
  void for_each_entry(Handle h, const LorentzPoint& q, F&& f) const {
    const Curvature c = q.curvature();
    for (std::size_t i = ix_.entry_begin_[h]; i < ix_.entry_begin_[h + 1]; ++i) {
      const std::span<const double> z(ix_.entry_coords_.data() + i * ix_.stride_,
                                      ix_.stride_);
      f(ix_.entry_ids_[i], distance(q.coords(), z, c));
    }
  }

 private:
  const TreeIndex& ix_;
};

}  // namespace detail

RetrievalResult TreeIndex::search(const LorentzPoint& q,
                                  const BeamConfig& cfg) const {
  return run_beam(detail::PackedView(*this), q, cfg);
}

FlatIndex::FlatIndex(const std::map<EntryId, MemoryEntry>& entries)
    : entries_(&entries) {
  ids_.reserve(entries.size());
  for (const auto& [id, e] : entries) {
    const auto z = e.z.coords();
    if (ids_.empty()) {
      stride_ = z.size();
      curvature_ = e.z.curvature();
      coords_.reserve(entries.size() * stride_);
    } else if (z.size() != stride_) {
      throw ShapeError("FlatIndex: mixed dimensions in bank");
    }
    ids_.push_back(id);
    coords_.insert(coords_.end(), z.begin(), z.end());
  }
}

std::vector<Hit> FlatIndex::knn(const LorentzPoint& q, std::size_t k,
                                FlatMetric metric) const {
  if (k == 0) throw DomainError("flat_knn: k must be >= 1");
  if (ids_.empty()) return {};
  if (q.coords().size() != stride_ || !(q.curvature() == curvature_)) {
    throw ShapeError("flat_knn: query dimension does not match the bank");
  }
  const auto qc = q.coords();
  // Rank by a key that is monotone in the distance (-<q,z>_L, or the squared
  // Euclidean distance), then settle the order among the leading candidates
  // with exact distances. The slack admits every point whose key could tie
  // the k-th one after rounding, so the result matches an exact sort.
  const std::size_t n = ids_.size();
  std::vector<std::pair<double, std::size_t>> keyed(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = coords_.data() + i * stride_;
    double key;
    if (metric == FlatMetric::kLorentz) {
      key = qc[0] * z[0];
      for (std::size_t j = 1; j < stride_; ++j) key -= qc[j] * z[j];
    } else {
      key = 0.0;
      for (std::size_t j = 0; j < stride_; ++j) {
        const double t = z[j] - qc[j];
        key += t * t;
      }
    }
    keyed[i] = {key, i};
  }
  const std::size_t kk = std::min(k, n);
  std::nth_element(keyed.begin(),
                   keyed.begin() + static_cast<std::ptrdiff_t>(kk - 1),
                   keyed.end());
  const double kth = keyed[kk - 1].first;
  const double cutoff = kth + 1e-9 * std::max(1.0, std::abs(kth));
  std::vector<std::pair<double, EntryId>> scored;
  for (const auto& [key, i] : keyed) {
    if (key > cutoff) continue;
    const std::span<const double> z(coords_.data() + i * stride_, stride_);
    double d;
    if (metric == FlatMetric::kLorentz) {
      d = distance(qc, z, curvature_);
    } else {
      double acc = 0.0;
      for (std::size_t j = 0; j < stride_; ++j) {
        const double t = z[j] - qc[j];
        acc += t * t;
      }
      d = std::sqrt(acc);
    }
    scored.emplace_back(d, ids_[i]);
  }
  std::partial_sort(scored.begin(),
                    scored.begin() + static_cast<std::ptrdiff_t>(kk),
                    scored.end());
  std::vector<Hit> hits;
  hits.reserve(kk);
  for (std::size_t i = 0; i < kk; ++i) {
    hits.push_back(make_hit(entries_->at(scored[i].second), scored[i].first));
  }
  return hits;
}

std::vector<Hit> flat_knn(const std::map<EntryId, MemoryEntry>& entries,
                          const LorentzPoint& q, std::size_t k,
                          FlatMetric metric) {
  return FlatIndex(entries).knn(q, k, metric);
}

LorentzPoint align_memories(const LorentzPoint& q,
                            std::span<const LorentzPoint> points,
                            double temperature) {
  if (!(temperature > 0.0)) {
    throw DomainError("align_memories: temperature must be > 0");
  }
  if (points.empty()) return q;
  if (points.size() == 1) return points.front();

  // Canonical order makes the floating-point sum permutation invariant.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> d(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d[i] = distance(q, points[i]);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (d[a] != d[b]) return d[a] < d[b];
    const auto ca = points[a].coords();
    const auto cb = points[b].coords();
    return std::lexicographical_compare(ca.begin(), ca.end(), cb.begin(),
                                        cb.end());
  });

  const double dmin = d[order.front()];
  std::vector<double> mean(q.dim(), 0.0);
  double wsum = 0.0;
  for (std::size_t i : order) {
    const double w = std::exp(-(d[i] - dmin) / temperature);
    const std::vector<double> v = log_origin(points[i]);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += w * v[j];
    wsum += w;
  }
  for (double& m : mean) m /= wsum;
  return exp_origin(mean, q.curvature());
}

LorentzPoint align_memories(const LorentzPoint& q, std::span<const Hit> hits,
                            double temperature) {
  std::vector<LorentzPoint> pts;
  pts.reserve(hits.size());
  for (const Hit& h : hits) pts.push_back(h.z);
  return align_memories(q, pts, temperature);
}

std::string retrieval_trace(std::span<const Hit> hits,
                            const std::string& query_id) {
  std::string out;
  for (std::size_t r = 0; r < hits.size(); ++r) {
    nlohmann::ordered_json j;
    j["query_id"] = query_id;
    j["rank"] = r + 1;
    j["entry_id"] = hits[r].entry_id;
    j["g"] = hits[r].g;
    j["s"] = hits[r].s;
    j["similarity"] = hits[r].similarity;
    j["node_path"] = hits[r].node_path;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string retrieval_trace(const RetrievalResult& result,
                            const std::string& query_id) {
  return retrieval_trace(std::span<const Hit>(result.hits), query_id);
}

}  // namespace hypermem
