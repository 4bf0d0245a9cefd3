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

#include <algorithm>
#include <limits>
#include <string>

#include "hypermem/errors.hpp"

namespace hypermem {
namespace {

constexpr std::size_t kExactSeedLimit = 2048;

// -<x,y>_L is monotone in the geodesic distance, so comparisons can skip
// the arccosh.
double separation(const LorentzPoint& x, const LorentzPoint& y) {
  return -minkowski_inner(x.coords(), y.coords());
}

std::size_t farthest_from(std::span<const LorentzPoint> points,
                          const LorentzPoint& from) {
  std::size_t best = 0;
  double best_d = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = separation(points[i], from);
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<std::size_t> seed_indices(std::span<const LorentzPoint> points,
                                      std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.size();
  if (k == 1) return {static_cast<std::size_t>(seed % n)};
  std::size_t a = 0, b = 1;
  if (n <= kExactSeedLimit) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = separation(points[i], points[j]);
        if (d > best) {
          best = d;
          a = i;
          b = j;
        }
      }
    }
  } else {
    a = farthest_from(points, points[seed % n]);
    b = farthest_from(points, points[a]);
    if (a == b) b = (a + 1) % n;
  }
  std::vector<std::size_t> chosen{std::min(a, b), std::max(a, b)};
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) {
    nearest[i] = std::min(separation(points[i], points[chosen[0]]),
                          separation(points[i], points[chosen[1]]));
  }
  while (chosen.size() < k) {
    const auto it = std::max_element(nearest.begin(), nearest.end());
    const auto pick = static_cast<std::size_t>(it - nearest.begin());
    chosen.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], separation(points[i], points[pick]));
    }
  }
  return chosen;
}

}  // namespace

double squared_lorentzian_distance(const LorentzPoint& x, const LorentzPoint& y) {
  const double c = x.curvature().value();
  return std::max(0.0, -2.0 / c - 2.0 * minkowski_inner(x.coords(), y.coords()));
}

KMeansResult lorentzian_kmeans(std::span<const LorentzPoint> points,
                               std::size_t k, std::uint64_t seed,
                               std::size_t max_iters) {
  if (k == 0) throw DomainError("lorentzian_kmeans: k must be >= 1");
  if (points.size() < k) {
    throw DomainError("lorentzian_kmeans: need at least k points (" +
                      std::to_string(points.size()) + " < " +
                      std::to_string(k) + ")");
  }
  const std::size_t n = points.size();
  for (const auto& p : points) {
    if (p.dim() != points.front().dim() ||
        !(p.curvature() == points.front().curvature())) {
      throw ShapeError("lorentzian_kmeans: points from different spaces");
    }
  }
  KMeansResult res;
  for (std::size_t idx : seed_indices(points, k, seed)) {
    res.centroids.push_back(points[idx]);
  }
  if (k == 1) res.centroids[0] = lorentz_centroid(points);

  res.assignments.assign(n, 0);
  std::vector<std::size_t> prev(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t iter = 0; iter <= max_iters; ++iter) {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_lorentzian_distance(points[i], res.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      res.assignments[i] = best;
      objective += best_d;
    }
    res.objective_history.push_back(objective);
    if (res.assignments == prev) {
      res.converged = true;
      break;
    }
    if (iter == max_iters) break;
    prev = res.assignments;
    ++res.iterations;

    const std::size_t width = points.front().coords().size();
    std::vector<double> sums(k * width, 0.0);
    std::vector<std::size_t> counts(k, 0), last(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      last[res.assignments[i]] = i;
      const auto z = points[i].coords();
      double* acc = sums.data() + res.assignments[i] * width;
      for (std::size_t j = 0; j < width; ++j) acc[j] += z[j];
      ++counts[res.assignments[i]];
    }
    const Curvature curv = points.front().curvature();
    for (std::size_t c = 0; c < k; ++c) {
      // An emptied cluster keeps its previous centroid.
      if (counts[c] == 0) continue;
      if (counts[c] == 1) {
        res.centroids[c] = points[last[c]];
        continue;
      }
      res.centroids[c] = centroid_from_sum(
          std::span<const double>(sums.data() + c * width, width), curv);
    }
  }
  return res;
}

}  // namespace hypermem
