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

// Combining short-term context with retrieved long-term memories. Linear
// combinations of manifold points are taken in the tangent space at the
// origin and mapped back, so every output stays on the hyperboloid.

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hypermem/embed_trainer.hpp"
#include "hypermem/lorentz.hpp"

namespace hypermem {

/// Fixed-capacity ring of recent latent points; the oldest is evicted first.
class ShortTermBuffer {
 public:
  /// Throws DomainError when capacity is 0.
  explicit ShortTermBuffer(std::size_t capacity);

  void push(LorentzPoint z);
  void clear() noexcept { items_.clear(); }
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return items_.empty(); }
  /// Oldest first.
  std::vector<LorentzPoint> points() const;

 private:
  std::size_t capacity_;
  std::deque<LorentzPoint> items_;
};

/// Mean in the origin chart. A single element is returned unchanged.
/// Throws DomainError on an empty input.
LorentzPoint pool_short_term(std::span<const LorentzPoint> points);
LorentzPoint pool_short_term(const ShortTermBuffer& buffer);

/// beta * z_short + (1 - beta) * z_mem in the origin chart. The endpoints
/// beta = 1 and beta = 0 return the corresponding input unchanged.
LorentzPoint gate_fuse(const LorentzPoint& z_short, const LorentzPoint& z_mem,
                       double beta);

/// The same combination on raw ambient coordinates. The result is generally
/// off the manifold; kept only for ablations.
std::vector<double> gate_fuse_euclidean(const LorentzPoint& z_short,
                                        const LorentzPoint& z_mem,
                                        double beta);

struct SynthesizedMemory {
  LorentzPoint z;
  double rho = 0.0;
  /// Always true: synthesized points are priors and are never stored.
  bool ephemeral = true;
};

/// rho = sim_j / (sim_i + sim_j); z = geodesic_interpolate(z_i, z_j, rho).
SynthesizedMemory synthesize_memory(const LorentzPoint& z_i,
                                    const LorentzPoint& z_j, double sim_i,
                                    double sim_j);

struct InjectionConfig {
  double alpha0 = 0.03;
  /// Maps the latent difference to the suffix space; identity when unset.
  std::optional<AffineHead> proj;
  /// Similarity to [0, 1]; the identity when unset.
  std::function<double(double)> gate;

  void validate() const;
};

/// alpha_t = alpha0 * gate(similarity).
double injection_strength(double similarity, const InjectionConfig& cfg);

/// e_suffix + proj(alpha_t * (v_prior - h_last)), where an affine proj
/// contributes only its linear part. Throws ShapeError on
/// inconsistent dimensions and DomainError when similarity or the gate output
/// leaves [0, 1].
std::vector<double> residual_inject(std::span<const double> e_suffix,
                                    std::span<const double> h_last,
                                    std::span<const double> v_prior,
                                    double similarity,
                                    const InjectionConfig& cfg = {});

/// Same, with alpha_t supplied directly (must lie in [0, 1]).
std::vector<double> residual_inject_alpha(std::span<const double> e_suffix,
                                          std::span<const double> h_last,
                                          std::span<const double> v_prior,
                                          double alpha_t,
                                          const std::optional<AffineHead>& proj);

/// The Euclidean decode of a context point: its origin log-map.
std::vector<double> decode_prior(const LorentzPoint& z_ctx);

}  // namespace hypermem
