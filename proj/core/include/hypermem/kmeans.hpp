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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hypermem/lorentz.hpp"

namespace hypermem {

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<LorentzPoint> centroids;
  /// Objective after each assignment step, starting with the seeding.
  std::vector<double> objective_history;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Squared Lorentzian distance ||x - y||_L^2 = -2/c - 2<x,y>_L. Monotone in
/// the geodesic distance and minimised in closed form by lorentz_centroid.
double squared_lorentzian_distance(const LorentzPoint& x, const LorentzPoint& y);

/// K-Means on the hyperboloid.
///
/// Assignment picks the nearest centroid by geodesic distance (ties go to the
/// lowest index); the update step uses lorentz_centroid. The objective is the
/// summed squared Lorentzian distance, which both steps can only decrease.
/// Seeding is deterministic: the farthest pair for small inputs (a
/// double-sweep from index seed % n for inputs above 2048 points), extended by
/// farthest-first traversal when k > 2. Throws DomainError when
/// points.size() < k or k == 0.
KMeansResult lorentzian_kmeans(std::span<const LorentzPoint> points,
                               std::size_t k, std::uint64_t seed = 0,
                               std::size_t max_iters = 50);

}  // namespace hypermem
