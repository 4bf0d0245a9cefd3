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

#include "hypermem/lorentz.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <string>

#include "hypermem/errors.hpp"

namespace hypermem {
namespace {

double manifold_tolerance(double x0) {
  // Rounding in <x,x>_L grows with x0^2; the fixed part dominates for the
  // magnitudes the library works with.
  return kManifoldTolerance + 16.0 * DBL_EPSILON * x0 * x0;
}

void check_same_space(const LorentzPoint& x, const LorentzPoint& y) {
  if (x.coords().size() != y.coords().size()) {
    throw ShapeError("dimension mismatch: " + std::to_string(x.dim()) +
                     " vs " + std::to_string(y.dim()));
  }
  if (!(x.curvature() == y.curvature())) {
    throw ShapeError("curvature mismatch");
  }
}

double euclidean_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

// asinh(x)/x with its series near zero.
double asinhc(double x) noexcept {
  if (std::abs(x) < 1e-6) return 1.0 - x * x / 6.0;
  return std::asinh(x) / x;
}

}  // namespace

Curvature::Curvature(double c) : c_(c), sqrt_c_(std::sqrt(c)) {
  if (!std::isfinite(c) || c <= 0.0) {
    throw DomainError("curvature must be finite and > 0, got " +
                      std::to_string(c));
  }
}

LorentzPoint::LorentzPoint(std::vector<double> coords, Curvature c)
    : coords_(std::move(coords)), c_(c) {
  if (coords_.size() < 2) {
    throw ShapeError("Lorentz point needs at least 2 coordinates");
  }
  for (double v : coords_) {
    if (!std::isfinite(v)) throw NumericError("non-finite coordinate");
  }
  if (coords_[0] <= 0.0) {
    throw ContractError("time-like coordinate must be positive");
  }
  const double r = manifold_residual();
  if (r > manifold_tolerance(coords_[0])) {
    throw ContractError("point is off the hyperboloid (residual " +
                        std::to_string(r) + ")");
  }
}

LorentzPoint LorentzPoint::unchecked(std::vector<double> coords, Curvature c) {
  return LorentzPoint(std::move(coords), c, NoCheck{});
}

double LorentzPoint::space_norm() const noexcept {
  return euclidean_norm(space());
}

double LorentzPoint::manifold_residual() const noexcept {
  double s = -coords_[0] * coords_[0];
  for (std::size_t i = 1; i < coords_.size(); ++i) s += coords_[i] * coords_[i];
  return std::abs(s + 1.0 / c_.value());
}

double minkowski_inner(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ShapeError("minkowski_inner: length mismatch " +
                     std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()));
  }
  if (x.size() < 2) throw ShapeError("minkowski_inner: need length >= 2");
  double s = -x[0] * y[0];
  for (std::size_t i = 1; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double sinhc(double x) noexcept {
  if (std::abs(x) < 1e-6) return 1.0 + x * x / 6.0;
  return std::sinh(x) / x;
}

LorentzPoint origin(std::size_t n, Curvature c) {
  if (n < 1) throw DomainError("origin: dimension must be >= 1");
  std::vector<double> coords(n + 1, 0.0);
  coords[0] = 1.0 / c.sqrt_value();
  return LorentzPoint::unchecked(std::move(coords), c);
}

LorentzPoint project_to_manifold(std::span<const double> spatial, Curvature c) {
  if (spatial.empty()) throw ShapeError("project_to_manifold: empty input");
  std::vector<double> coords(spatial.size() + 1);
  double sq = 0.0;
  for (std::size_t i = 0; i < spatial.size(); ++i) {
    if (!std::isfinite(spatial[i])) {
      throw NumericError("project_to_manifold: non-finite input at index " +
                         std::to_string(i));
    }
    coords[i + 1] = spatial[i];
    sq += spatial[i] * spatial[i];
  }
  coords[0] = std::sqrt(1.0 / c.value() + sq);
  if (!std::isfinite(coords[0])) {
    throw NumericError("project_to_manifold: overflow");
  }
  return LorentzPoint::unchecked(std::move(coords), c);
}

LorentzPoint renormalize(std::span<const double> coords, Curvature c) {
  return project_to_manifold(coords.subspan(1), c);
}

double distance(const LorentzPoint& x, const LorentzPoint& y) {
  check_same_space(x, y);
  return distance(x.coords(), y.coords(), x.curvature());
}

double distance(std::span<const double> xc, std::span<const double> yc,
                Curvature c) {
  const double arg = -c.value() * minkowski_inner(xc, yc);
  if (arg > 2.0) return std::acosh(arg) / c.sqrt_value();
  // Near the diagonal arccosh is ill-conditioned; use the chordal identity
  // <x-y,x-y>_L = (4/c) sinh^2(sqrt(c) d / 2) instead.
  double s2 = -(xc[0] - yc[0]) * (xc[0] - yc[0]);
  for (std::size_t i = 1; i < xc.size(); ++i) {
    const double d = xc[i] - yc[i];
    s2 += d * d;
  }
  s2 = std::max(s2, 0.0);
  return 2.0 / c.sqrt_value() * std::asinh(c.sqrt_value() * std::sqrt(s2) / 2.0);
}

double lorentz_norm(std::span<const double> v) {
  return std::sqrt(std::max(minkowski_inner(v, v), 0.0));
}

std::vector<double> tangent_project(const LorentzPoint& base,
                                    std::span<const double> v) {
  const double k =
      base.curvature().value() * minkowski_inner(base.coords(), v);
  std::vector<double> out(v.begin(), v.end());
  const auto p = base.coords();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += k * p[i];
  return out;
}

LorentzPoint exp_map(const LorentzPoint& base, std::span<const double> v) {
  if (v.size() != base.coords().size()) {
    throw ShapeError("exp_map: tangent length mismatch");
  }
  const double along = minkowski_inner(base.coords(), v);
  const double scale =
      std::max(1.0, euclidean_norm(base.coords()) * euclidean_norm(v));
  if (!std::isfinite(along) || std::abs(along) > kTangentTolerance * scale) {
    throw ContractError("exp_map: vector is not tangent at base (<p,v>_L = " +
                        std::to_string(along) + ")");
  }
  const double norm = lorentz_norm(v);
  if (norm < 1e-12) return base;
  const Curvature c = base.curvature();
  const double theta = c.sqrt_value() * norm;
  const double ch = std::cosh(theta);
  const double sc = sinhc(theta);
  const auto p = base.coords();
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = ch * p[i] + sc * v[i];
  return renormalize(out, c);
}

LorentzPoint exp_map(const LorentzPoint& base, const TangentVector& v) {
  return exp_map(base, std::span<const double>(v.vec));
}

TangentVector log_map(const LorentzPoint& base, const LorentzPoint& target) {
  check_same_space(base, target);
  const Curvature c = base.curvature();
  const std::size_t m = base.coords().size();
  const double d = distance(base, target);
  if (d == 0.0) return TangentVector{base, std::vector<double>(m, 0.0)};

  // u = y + c<x,y>_L x, written as (y - x) - (c/2)<y-x,y-x>_L x to avoid
  // cancellation when the points are close.
  const auto x = base.coords();
  const auto y = target.coords();
  std::vector<double> w(m);
  for (std::size_t i = 0; i < m; ++i) w[i] = y[i] - x[i];
  const double half_c_s2 = 0.5 * c.value() * minkowski_inner(w, w);
  const double inv = 1.0 / sinhc(c.sqrt_value() * d);
  for (std::size_t i = 0; i < m; ++i) w[i] = (w[i] - half_c_s2 * x[i]) * inv;
  return TangentVector{base, tangent_project(base, w)};
}

LorentzPoint geodesic_interpolate(const LorentzPoint& z_i,
                                  const LorentzPoint& z_j, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw DomainError("geodesic_interpolate: rho must be in [0, 1]");
  }
  check_same_space(z_i, z_j);
  if (rho == 0.0) return z_i;
  if (rho == 1.0) return z_j;
  TangentVector t = log_map(z_i, z_j);
  for (double& e : t.vec) e *= rho;
  return exp_map(z_i, t);
}

LorentzPoint centroid_from_sum(std::span<const double> sum, Curvature c) {
  const double q = -c.value() * minkowski_inner(sum, sum);
  if (!(q > 0.0) || !std::isfinite(q) || sum[0] <= 0.0) {
    throw NumericError("centroid: Minkowski mean is not time-like");
  }
  const double inv = 1.0 / std::sqrt(q);
  std::vector<double> out(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out[i] = sum[i] * inv;
  return renormalize(out, c);
}

LorentzPoint lorentz_centroid(std::span<const LorentzPoint> points,
                              std::optional<std::span<const double>> weights) {
  if (points.empty()) throw DomainError("lorentz_centroid: empty point set");
  if (weights && weights->size() != points.size()) {
    throw ShapeError("lorentz_centroid: weights length mismatch");
  }
  const std::size_t m = points.front().coords().size();
  const Curvature c = points.front().curvature();
  std::vector<double> sum(m, 0.0);
  double wsum = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    check_same_space(points.front(), points[k]);
    const double w = weights ? (*weights)[k] : 1.0;
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DomainError("lorentz_centroid: weights must be finite and >= 0");
    }
    wsum += w;
    const auto z = points[k].coords();
    for (std::size_t i = 0; i < m; ++i) sum[i] += w * z[i];
  }
  if (!(wsum > 0.0)) throw DomainError("lorentz_centroid: weights sum to 0");
  if (points.size() == 1) return points.front();
  return centroid_from_sum(sum, c);
}

std::vector<double> log_origin(const LorentzPoint& z) {
  const auto s = z.space();
  const double r = euclidean_norm(s);
  const double sc = z.curvature().sqrt_value();
  // d = asinh(sqrt(c) r) / sqrt(c); direction s / r.
  const double k = asinhc(sc * r);
  std::vector<double> out(s.begin(), s.end());
  for (double& e : out) e *= k;
  return out;
}

LorentzPoint exp_origin(std::span<const double> tangent_space, Curvature c) {
  const double r = euclidean_norm(tangent_space);
  const double k = sinhc(c.sqrt_value() * r);
  std::vector<double> s(tangent_space.begin(), tangent_space.end());
  for (double& e : s) e *= k;
  return project_to_manifold(s, c);
}

}  // namespace hypermem
