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

#include "hypermem/entailment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hypermem/errors.hpp"

namespace hypermem {
namespace {

constexpr double kDegenerateDistance = 1e-12;

double apply_convention(double phi, AngleConvention convention) {
  return convention == AngleConvention::kAsPaper ? phi
                                                 : std::numbers::pi - phi;
}

}  // namespace

std::string_view to_string(AngleConvention conv) noexcept {
  return conv == AngleConvention::kAsPaper ? "as_paper" : "pi_minus";
}

AngleConvention parse_angle_convention(std::string_view s) {
  if (s == "as_paper") return AngleConvention::kAsPaper;
  if (s == "pi_minus") return AngleConvention::kPiMinus;
  throw DomainError("unknown angle convention '" + std::string(s) + "'");
}

ConeParams ConeParams::for_curvature(Curvature c, double K,
                                     AngleConvention convention) {
  ConeParams p{K, 2.0 * K / c.sqrt_value(), convention};
  p.validate(c);
  return p;
}

void ConeParams::validate(Curvature c) const {
  if (!(K > 0.0) || !std::isfinite(K)) throw DomainError("cone K must be > 0");
  if (!(eps_apex > 0.0) || !std::isfinite(eps_apex)) {
    throw DomainError("cone eps_apex must be > 0");
  }
  // Small slack for the eps_apex = 2K/sqrt(c) tie computed in floating point.
  if (2.0 * K / (c.sqrt_value() * eps_apex) > 1.0 + 1e-12) {
    throw DomainError("cone params: 2K/(sqrt(c) eps_apex) must be <= 1");
  }
}

double cone_half_angle(const LorentzPoint& z, const ConeParams& params) {
  const double r = std::max(z.space_norm(), params.eps_apex);
  const double arg = 2.0 * params.K / (z.curvature().sqrt_value() * r);
  return std::asin(std::min(arg, 1.0));
}

std::optional<double> try_exterior_angle(const LorentzPoint& z_p,
                                         const LorentzPoint& z_c,
                                         AngleConvention convention) {
  const LorentzPoint o = origin(z_p.dim(), z_p.curvature());
  const double du = distance(z_p, z_c);
  const double da = distance(z_p, o);
  if (du < kDegenerateDistance || da < kDegenerateDistance) return std::nullopt;
  const TangentVector u = log_map(z_p, z_c);
  const TangentVector a = log_map(z_p, o);
  const double cosine =
      std::clamp(minkowski_inner(u.vec, a.vec) / (du * da), -1.0, 1.0);
  return apply_convention(std::acos(cosine), convention);
}

double exterior_angle(const LorentzPoint& z_p, const LorentzPoint& z_c,
                      AngleConvention convention) {
  auto phi = try_exterior_angle(z_p, z_c, convention);
  if (!phi) {
    throw DegenerateGeometryError(
        "exterior angle undefined: child coincides with parent or parent "
        "coincides with the origin");
  }
  return *phi;
}

double exterior_angle_closed_form(std::span<const double> parent,
                                  std::span<const double> child, Curvature c,
                                  AngleConvention convention) {
  const double alpha = -c.value() * minkowski_inner(parent, child);
  const double beta = c.sqrt_value() * parent[0];
  const double gamma = c.sqrt_value() * child[0];
  const double p = alpha * alpha - 1.0;
  const double q = beta * beta - 1.0;
  if (!(p > 0.0) || !(q > 0.0)) {
    throw DegenerateGeometryError("closed-form exterior angle is degenerate");
  }
  const double cosine =
      std::clamp((alpha * beta - gamma) / std::sqrt(p * q), -1.0, 1.0);
  return apply_convention(std::acos(cosine), convention);
}

namespace {

// Both factors under the square root of the closed form stay well away from
// 0 past this margin; closer in, cancellation makes it lose digits.
bool closed_form_safe(std::span<const double> parent,
                      std::span<const double> child, Curvature c) {
  constexpr double kSafe = 1e-6;
  const double alpha = -c.value() * minkowski_inner(parent, child);
  const double beta = c.sqrt_value() * parent[0];
  return alpha - 1.0 > kSafe && beta - 1.0 > kSafe;
}

}  // namespace

double exterior_angle_or_zero(const LorentzPoint& z_p, const LorentzPoint& z_c,
                              AngleConvention convention) {
  const Curvature c = z_p.curvature();
  if (closed_form_safe(z_p.coords(), z_c.coords(), c)) {
    return exterior_angle_closed_form(z_p.coords(), z_c.coords(), c,
                                      convention);
  }
  return try_exterior_angle(z_p, z_c, convention).value_or(0.0);
}

double exterior_angle_or_zero(std::span<const double> parent,
                              std::span<const double> child, Curvature c,
                              AngleConvention convention) {
  if (closed_form_safe(parent, child, c)) {
    return exterior_angle_closed_form(parent, child, c, convention);
  }
  const auto p = LorentzPoint::unchecked({parent.begin(), parent.end()}, c);
  const auto q = LorentzPoint::unchecked({child.begin(), child.end()}, c);
  return try_exterior_angle(p, q, convention).value_or(0.0);
}

bool entails(const LorentzPoint& z_p, const LorentzPoint& z_c,
             const ConeParams& params) {
  return exterior_angle(z_p, z_c, params.convention) <=
         cone_half_angle(z_p, params);
}

double entailment_penalty(std::span<const ParentChildPair> pairs,
                          const ConeParams& params) {
  if (pairs.empty()) throw DomainError("entailment_penalty: no pairs");
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [parent, child] = pairs[i];
    auto phi = try_exterior_angle(parent, child, params.convention);
    if (!phi) {
      throw DegenerateGeometryError("entailment_penalty: pair " +
                                    std::to_string(i) + " is degenerate");
    }
    total += std::max(0.0, *phi - cone_half_angle(parent, params));
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace hypermem
