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

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "hypermem/errors.hpp"

namespace hypermem {

namespace {

std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n,
                             double sigma) {
  std::normal_distribution<double> nd(0.0, sigma);
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

void normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  if (s == 0.0) {
    v[0] = 1.0;
    return;
  }
  for (double& x : v) x /= s;
}

}  // namespace

void TaxonomySpec::validate() const {
  if (branching.empty()) throw DomainError("taxonomy needs at least one level");
  for (std::size_t b : branching) {
    if (b == 0) throw DomainError("taxonomy branching factors must be >= 1");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw DomainError("taxonomy noise must be finite and >= 0");
  }
}

std::vector<std::string> Taxonomy::path(const std::string& id) const {
  std::vector<std::string> out{id};
  for (auto it = parent.find(id); it != parent.end(); it = parent.find(it->second)) {
    out.push_back(it->second);
  }
  if (out.back() != root) throw LookupError("unknown taxonomy item " + id);
  std::reverse(out.begin(), out.end());
  return out;
}

std::size_t Taxonomy::depth(const std::string& id) const {
  return path(id).size() - 1;
}

std::size_t Taxonomy::tree_distance(const std::string& a,
                                    const std::string& b) const {
  const auto pa = path(a);
  const auto pb = path(b);
  std::size_t common = 0;
  while (common < pa.size() && common < pb.size() && pa[common] == pb[common]) {
    ++common;
  }
  return (pa.size() - common) + (pb.size() - common);
}

Taxonomy make_taxonomy(const TaxonomySpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Taxonomy tax;
  tax.root = "t";
  auto& items = tax.problem.items;
  auto& edges = tax.problem.parent_child_edges;
  const std::size_t fd = spec.feature_dim;

  auto feat_or_none = [&](std::vector<double> f) {
    return fd == 0 ? std::optional<std::vector<double>>()
                   : std::optional<std::vector<double>>(std::move(f));
  };

  std::vector<std::pair<std::string, std::vector<double>>> level{
      {tax.root, std::vector<double>(fd, 0.0)}};
  items.push_back({tax.root, feat_or_none(level.front().second), tax.root,
                   tax.root});
  double scale = 1.0;
  for (std::size_t depth = 0; depth < spec.branching.size(); ++depth) {
    std::vector<std::pair<std::string, std::vector<double>>> next;
    for (const auto& [pid, pf] : level) {
      for (std::size_t k = 0; k < spec.branching[depth]; ++k) {
        const std::string id = pid + "." + std::to_string(k);
        std::vector<double> f = gaussian(rng, fd, scale);
        for (std::size_t i = 0; i < fd; ++i) f[i] += pf[i];
        const std::string top = depth == 0 ? id : tax.path(pid)[1];
        items.push_back({id, feat_or_none(f), top, id});
        edges.emplace_back(pid, id);
        tax.parent[id] = pid;
        next.emplace_back(id, std::move(f));
      }
    }
    level = std::move(next);
    scale *= 0.5;
  }
  for (const auto& [lid, lf] : level) {
    tax.leaf_groups.push_back(lid);
    const std::string top = tax.path(lid)[1];
    for (std::size_t e = 0; e < spec.entries_per_leaf; ++e) {
      const std::string id = lid + "/e" + std::to_string(e);
      std::vector<double> f = gaussian(rng, fd, spec.noise);
      for (std::size_t i = 0; i < fd; ++i) f[i] += lf[i];
      items.push_back({id, feat_or_none(f), top, lid});
      edges.emplace_back(lid, id);
      tax.parent[id] = lid;
    }
  }

  if (spec.negatives_per_item > 0 && items.size() > 2) {
    std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
    for (const auto& item : items) {
      if (item.id == tax.root) continue;
      const auto anc = tax.path(item.id);
      const std::set<std::string> ancestors(anc.begin(), anc.end());
      std::set<std::string> chosen;
      for (std::size_t attempt = 0;
           attempt < 20 * spec.negatives_per_item &&
           chosen.size() < spec.negatives_per_item;
           ++attempt) {
        const std::string& other = items[pick(rng)].id;
        if (ancestors.count(other) || chosen.count(other)) continue;
        const auto op = tax.path(other);
        if (std::find(op.begin(), op.end(), item.id) != op.end()) continue;
        chosen.insert(other);
        tax.problem.negatives.emplace_back(item.id, other);
      }
    }
  }
  tax.problem.validate();
  return tax;
}

void write_ground_truth(const Taxonomy& tax, std::ostream& out) {
  for (const auto& item : tax.problem.items) {
    nlohmann::ordered_json j;
    j["id"] = item.id;
    j["path"] = tax.path(item.id);
    out << j.dump() << '\n';
  }
}

PlantedBank make_planted_bank(const PlantedBankSpec& spec) {
  if (spec.branching.empty() || spec.dim == 0) {
    throw DomainError("planted bank needs levels and a positive dimension");
  }
  const Curvature c(spec.curvature);
  std::mt19937_64 rng(spec.seed);
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(spec.dim));

  struct Node {
    std::string label;
    std::vector<double> dir;
    std::size_t top;
  };
  std::vector<Node> level{{"r", std::vector<double>(spec.dim, 0.0), 0}};
  double radius = spec.root_radius;
  for (std::size_t d = 0; d < spec.branching.size(); ++d) {
    std::vector<Node> next;
    for (const Node& p : level) {
      for (std::size_t k = 0; k < spec.branching[d]; ++k) {
        std::vector<double> u = gaussian(rng, spec.dim, 1.0);
        if (d > 0) {
          for (std::size_t i = 0; i < spec.dim; ++i) {
            u[i] = p.dir[i] + spec.spread * u[i] * inv_sqrt_dim;
          }
        }
        normalize(u);
        next.push_back({p.label + "." + std::to_string(k), std::move(u),
                        d == 0 ? k : p.top});
      }
    }
    level = std::move(next);
    if (d + 1 < spec.branching.size()) radius += spec.radius_step;
  }

  PlantedBank bank;
  EntryId next_id = 0;
  for (const Node& leaf : level) {
    for (std::size_t e = 0; e < spec.entries_per_leaf; ++e) {
      std::vector<double> v = gaussian(rng, spec.dim, spec.noise);
      for (std::size_t i = 0; i < spec.dim; ++i) v[i] += radius * leaf.dir[i];
      const EntryId id = next_id++;
      const std::string ref = "seg:" + std::to_string(id);
      MemoryEntry entry{id, exp_origin(v, c), "task." + std::to_string(leaf.top),
                        leaf.label,
                        std::vector<std::uint8_t>(ref.begin(), ref.end()),
                        false};
      bank.leaf_of.emplace(id, leaf.label);
      bank.entries.emplace(id, std::move(entry));
    }
  }
  return bank;
}

std::map<EntryId, MemoryEntry> make_balanced_bank(std::size_t n,
                                                  std::size_t dim,
                                                  std::uint64_t seed,
                                                  double curvature) {
  constexpr std::size_t kFanout = 8;
  constexpr std::size_t kPerLeaf = 16;
  std::size_t levels = 1;
  std::size_t leaves = kFanout;
  while (leaves * kPerLeaf < n) {
    leaves *= kFanout;
    ++levels;
  }
  PlantedBankSpec spec;
  spec.branching.assign(levels, kFanout);
  spec.entries_per_leaf = (n + leaves - 1) / leaves;
  spec.dim = dim;
  spec.curvature = curvature;
  spec.seed = seed;
  PlantedBank full = make_planted_bank(spec);
  // Keep entries round-robin across leaves so every leaf stays populated.
  std::map<EntryId, MemoryEntry> out;
  const std::size_t per = spec.entries_per_leaf;
  for (std::size_t k = 0; out.size() < n; ++k) {
    const std::size_t leaf = k % leaves;
    const std::size_t slot = k / leaves;
    auto node = full.entries.extract(static_cast<EntryId>(leaf * per + slot));
    out.insert(std::move(node));
  }
  return out;
}

std::vector<LorentzPoint> make_queries(
    const std::map<EntryId, MemoryEntry>& entries, std::size_t count,
    double noise, std::uint64_t seed) {
  if (entries.empty()) throw DomainError("make_queries: empty bank");
  std::vector<const MemoryEntry*> pool;
  pool.reserve(entries.size());
  for (const auto& [id, e] : entries) pool.push_back(&e);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<LorentzPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const MemoryEntry& e = *pool[pick(rng)];
    std::vector<double> v = log_origin(e.z);
    const std::vector<double> eps = gaussian(rng, v.size(), noise);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += eps[j];
    out.push_back(exp_origin(v, e.z.curvature()));
  }
  return out;
}

}  // namespace hypermem
