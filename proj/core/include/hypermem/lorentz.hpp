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

// Kernels for the Lorentz (hyperboloid) model of hyperbolic space.
//
// A point of curvature c lives on the upper sheet
//   { x in R^{n+1} : <x,x>_L = -1/c, x_0 > 0 }
// with <x,y>_L = -x_0 y_0 + sum_i x_i y_i. Coordinate 0 is time-like, the
// remaining n coordinates are the space-like part.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hypermem {

inline constexpr double kManifoldTolerance = 1e-9;
inline constexpr double kTangentTolerance = 1e-8;

class Curvature {
 public:
  /// Throws DomainError unless c is finite and > 0.
  explicit Curvature(double c = 1.0);

  double value() const noexcept { return c_; }
  double sqrt_value() const noexcept { return sqrt_c_; }

  friend bool operator==(const Curvature&, const Curvature&) = default;

 private:
  double c_;
  double sqrt_c_;
};

class LorentzPoint {
 public:
  /// Validates the manifold invariant; throws ContractError when violated and
  /// NumericError on non-finite coordinates.
  LorentzPoint(std::vector<double> coords, Curvature c);

  /// Wraps coordinates without validation. Callers must guarantee the
  /// invariant (used by kernels that construct points on the manifold).
  static LorentzPoint unchecked(std::vector<double> coords, Curvature c);

  std::span<const double> coords() const noexcept { return coords_; }
  double time() const noexcept { return coords_[0]; }
  std::span<const double> space() const noexcept {
    return std::span<const double>(coords_).subspan(1);
  }
  /// Manifold dimension n (the ambient vector has n + 1 entries).
  std::size_t dim() const noexcept { return coords_.size() - 1; }
  Curvature curvature() const noexcept { return c_; }

  double space_norm() const noexcept;
  /// |<x,x>_L + 1/c|.
  double manifold_residual() const noexcept;

  friend bool operator==(const LorentzPoint&, const LorentzPoint&) = default;

 private:
  struct NoCheck {};
  LorentzPoint(std::vector<double> coords, Curvature c, NoCheck) noexcept
      : coords_(std::move(coords)), c_(c) {}

  std::vector<double> coords_;
  Curvature c_;
};

/// A vector in the tangent space at `base`, i.e. <base, vec>_L ~ 0.
struct TangentVector {
  LorentzPoint base;
  std::vector<double> vec;
};

double minkowski_inner(std::span<const double> x, std::span<const double> y);

LorentzPoint origin(std::size_t n, Curvature c = Curvature{});

/// Lifts a space-like part onto the hyperboloid by solving for x_0.
LorentzPoint project_to_manifold(std::span<const double> spatial,
                                 Curvature c = Curvature{});

/// Recomputes the time-like coordinate of `p` from its space-like part.
/// Cheap re-normalisation applied after every kernel that could drift.
LorentzPoint renormalize(std::span<const double> coords, Curvature c);

/// Geodesic distance (1/sqrt c) * arccosh(-c <x,y>_L).
double distance(const LorentzPoint& x, const LorentzPoint& y);
/// Same, on raw coordinates already known to lie on the manifold.
double distance(std::span<const double> x, std::span<const double> y,
                Curvature c);

/// Lorentz norm sqrt(<v,v>_L) of a space-like vector, clamped at 0.
double lorentz_norm(std::span<const double> v);

/// Removes the component of `v` normal to the hyperboloid at `base`.
std::vector<double> tangent_project(const LorentzPoint& base,
                                    std::span<const double> v);

LorentzPoint exp_map(const LorentzPoint& base, std::span<const double> v);
LorentzPoint exp_map(const LorentzPoint& base, const TangentVector& v);

TangentVector log_map(const LorentzPoint& base, const LorentzPoint& target);

/// Exp_{z_i}(rho * Log_{z_i}(z_j)); rho must lie in [0, 1].
LorentzPoint geodesic_interpolate(const LorentzPoint& z_i,
                                  const LorentzPoint& z_j, double rho);

/// Weighted Minkowski mean re-normalised onto the hyperboloid.
LorentzPoint lorentz_centroid(std::span<const LorentzPoint> points,
                              std::optional<std::span<const double>> weights =
                                  std::nullopt);

/// Centroid from an accumulated Minkowski sum m: m / sqrt(-c <m,m>_L).
LorentzPoint centroid_from_sum(std::span<const double> sum, Curvature c);

/// Space-like coordinates of log_0(z): the Euclidean chart at the origin.
std::vector<double> log_origin(const LorentzPoint& z);

/// Inverse of log_origin.
LorentzPoint exp_origin(std::span<const double> tangent_space, Curvature c);

/// sinh(x)/x with a series expansion near zero.
double sinhc(double x) noexcept;

}  // namespace hypermem
