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

// Random inputs and independent reference formulas shared by the tests.
// Nothing here calls the kernels under test.

#include <cmath>
#include <random>
#include <vector>

#include "hypermem/lorentz.hpp"

namespace hypermem::testing {

inline std::vector<double> gaussian_vector(std::mt19937_64& rng, std::size_t n,
                                           double sigma) {
  std::normal_distribution<double> nd(0.0, sigma);
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

/// Point with space-like part ~ N(0, sigma^2 I), lifted by hand.
inline LorentzPoint random_point(std::mt19937_64& rng, std::size_t n,
                                 double sigma = 1.0, double c = 1.0) {
  std::vector<double> s = gaussian_vector(rng, n, sigma);
  double sq = 0.0;
  for (double x : s) sq += x * x;
  std::vector<double> coords{std::sqrt(1.0 / c + sq)};
  coords.insert(coords.end(), s.begin(), s.end());
  return LorentzPoint(coords, Curvature(c));
}

/// Point at geodesic distance r from the origin in direction `dir` (unit).
inline LorentzPoint radial_point(const std::vector<double>& dir, double r,
                                 double c = 1.0) {
  const double sc = std::sqrt(c);
  std::vector<double> coords{std::cosh(sc * r) / sc};
  for (double d : dir) coords.push_back(std::sinh(sc * r) / sc * d);
  return LorentzPoint(coords, Curvature(c));
}

/// Reference inner product, written out independently of the library.
inline double ref_inner(const std::vector<double>& x,
                        const std::vector<double>& y) {
  long double acc = -static_cast<long double>(x[0]) * y[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    acc += static_cast<long double>(x[i]) * y[i];
  }
  return static_cast<double>(acc);
}

/// Reference distance in extended precision.
inline double ref_distance(const LorentzPoint& x, const LorentzPoint& y) {
  const auto a = x.coords();
  const auto b = y.coords();
  const long double c = x.curvature().value();
  long double inner = -static_cast<long double>(a[0]) * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) {
    inner += static_cast<long double>(a[i]) * b[i];
  }
  const long double arg = std::max(1.0L, -c * inner);
  return static_cast<double>(std::acosh(arg) / std::sqrt(c));
}

inline std::vector<double> to_vec(std::span<const double> s) {
  return {s.begin(), s.end()};
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace hypermem::testing
