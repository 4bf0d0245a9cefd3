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

// Entailment cones on the hyperboloid.
//
// A point z carries a cone of half-angle omega(z) that narrows as z moves away
// from the apex. A child is entailed by a parent when the exterior angle at the
// parent does not exceed the parent's half-angle.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

#include "hypermem/lorentz.hpp"

namespace hypermem {

/// Which angle at the parent is compared against the cone half-angle.
///
/// kAsPaper: angle between the tangent directions toward the child and toward
///   the origin (children between the parent and the apex are contained).
/// kPiMinus: pi minus that angle, i.e. measured from the outward ray through
///   the parent (children farther out along the parent's ray are contained).
enum class AngleConvention { kAsPaper, kPiMinus };

std::string_view to_string(AngleConvention conv) noexcept;
/// Accepts "as_paper" and "pi_minus"; throws DomainError otherwise.
AngleConvention parse_angle_convention(std::string_view s);

struct ConeParams {
  double K = 0.1;
  /// Space-like norm below which omega saturates.
  double eps_apex = 0.2;
  AngleConvention convention = AngleConvention::kAsPaper;

  /// Ties eps_apex to the arcsin domain: eps_apex = 2K / sqrt(c).
  static ConeParams for_curvature(
      Curvature c, double K = 0.1,
      AngleConvention convention = AngleConvention::kAsPaper);

  /// Throws DomainError unless K > 0, eps_apex > 0 and
  /// 2K / (sqrt(c) eps_apex) <= 1.
  void validate(Curvature c) const;

  friend bool operator==(const ConeParams&, const ConeParams&) = default;
};

/// arcsin(2K / (sqrt(c) * max(||z_space||, eps_apex))), argument clamped to 1.
double cone_half_angle(const LorentzPoint& z, const ConeParams& params);

/// Angle at z_p between log_{z_p}(z_c) and log_{z_p}(origin), in [0, pi],
/// mapped through `convention`. Throws DegenerateGeometryError when z_c
/// coincides with z_p or z_p coincides with the origin.
double exterior_angle(const LorentzPoint& z_p, const LorentzPoint& z_c,
                      AngleConvention convention = AngleConvention::kAsPaper);

/// As exterior_angle, but returns nullopt instead of throwing on degenerate
/// geometry.
std::optional<double> try_exterior_angle(
    const LorentzPoint& z_p, const LorentzPoint& z_c,
    AngleConvention convention = AngleConvention::kAsPaper);

/// Closed form of the same angle from alpha = -c<x,y>, beta = sqrt(c) x_0,
/// gamma = sqrt(c) y_0:
///   cos = (alpha beta - gamma) / sqrt((alpha^2 - 1)(beta^2 - 1)).
/// Defined for arbitrary ambient vectors; used by the embedding trainer.
double exterior_angle_closed_form(std::span<const double> parent,
                                  std::span<const double> child, Curvature c,
                                  AngleConvention convention);

/// Exterior angle with degenerate configurations (coincident points, parent
/// at the apex) mapped to 0. Uses the allocation-free closed form away from
/// them and the log-map definition near them.
double exterior_angle_or_zero(const LorentzPoint& z_p, const LorentzPoint& z_c,
                              AngleConvention convention);
/// The same on raw coordinates of two points of the hyperboloid.
double exterior_angle_or_zero(std::span<const double> parent,
                              std::span<const double> child, Curvature c,
                              AngleConvention convention);

bool entails(const LorentzPoint& z_p, const LorentzPoint& z_c,
             const ConeParams& params);

using ParentChildPair = std::pair<LorentzPoint, LorentzPoint>;

/// Mean of max(0, phi - omega) over the pairs. Throws DegenerateGeometryError
/// naming the offending pair index; DomainError on an empty list.
double entailment_penalty(std::span<const ParentChildPair> pairs,
                          const ConeParams& params);

}  // namespace hypermem
