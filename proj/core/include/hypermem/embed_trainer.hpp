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

// Riemannian training of free Lorentz embeddings under a hierarchy objective:
//
//   recon_weight * L_recon + lambda_dist * mean d(z_p, z_c)
//     + gamma_entail * mean max(0, phi - omega) + norm_reg * mean ||z_space||^2
//     + neg_weight * mean max(0, neg_margin - d(z_p, z_n))
//
// The reconstruction term decodes log_0(z) through an optional affine head.
// The negative term is only active when the problem lists negatives.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hypermem/entailment.hpp"
#include "hypermem/lorentz.hpp"

namespace hypermem {

struct EmbeddingItem {
  std::string id;
  std::optional<std::vector<double>> feat;
  std::string g;  // global label carried through to the bank
  std::string s;  // sub-goal label
};

struct EmbeddingProblem {
  std::vector<EmbeddingItem> items;
  std::vector<std::pair<std::string, std::string>> parent_child_edges;
  std::vector<std::pair<std::string, std::string>> negatives;

  /// Throws ValidationError on duplicate ids, dangling or self edges, or
  /// inconsistent feature lengths.
  void validate() const;
  /// Feature length, or 0 when no item carries features.
  std::size_t feature_dim() const;
};

struct TrainerConfig {
  std::size_t dim = 512;
  double curvature = 1.0;
  double lr = 1e-3;
  double lambda_dist = 1.0;
  double gamma_entail = 1.0;
  double recon_weight = 0.0;
  double norm_reg = 1e-4;
  double neg_weight = 0.0;
  double neg_margin = 1.0;
  double init_sigma = 0.1;
  std::size_t steps = 1000;
  /// Anneal the step size from lr to 0 along a half cosine.
  bool cosine_decay = false;
  /// Cap on the geodesic length of one update per point; 0 disables.
  double max_step = 0.0;
  std::uint64_t seed = 0;
  /// Verify the manifold invariant for every point after every step.
  bool check_manifold = false;

  void validate() const;
};

/// Settings that embed small taxonomies reliably: 32 dims, strong edge pull,
/// clipped steps and a cosine-annealed step size. Pair with a pi_minus cone.
TrainerConfig taxonomy_preset(std::uint64_t seed = 0);

/// Affine decoder from the tangent chart at the origin to feature space:
/// feat ~ W * log_0(z) + b, with W stored row-major (out_dim x in_dim).
struct AffineHead {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  std::vector<double> W;
  std::vector<double> b;
};

using EmbeddingMap = std::map<std::string, LorentzPoint>;

struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double dist = 0.0;
  double entail = 0.0;
  double norm = 0.0;
  double neg = 0.0;
};

struct LossRecord {
  std::size_t step = 0;
  LossBreakdown loss;
  double satisfaction = 0.0;
};

/// Throws LookupError when an edge endpoint has no embedding.
LossBreakdown loss_total(const EmbeddingProblem& problem,
                         const EmbeddingMap& embeddings,
                         const std::optional<AffineHead>& head,
                         const TrainerConfig& cfg, const ConeParams& cone);

/// Euclidean gradients of loss_total with respect to ambient coordinates.
std::map<std::string, std::vector<double>> loss_gradient(
    const EmbeddingProblem& problem, const EmbeddingMap& embeddings,
    const std::optional<AffineHead>& head, const TrainerConfig& cfg,
    const ConeParams& cone);

/// One step of Riemannian gradient descent: raise the index with the
/// Minkowski metric, project to the tangent space, move by -lr and retract
/// with exp_map. Throws NumericError naming the item on non-finite input.
EmbeddingMap riemannian_step(
    const EmbeddingMap& embeddings,
    const std::map<std::string, std::vector<double>>& grads, double lr);

/// Riemannian gradient at z of a Euclidean ambient gradient.
std::vector<double> riemannian_gradient(const LorentzPoint& z,
                                        std::span<const double> euclidean);

struct TrainResult {
  EmbeddingMap embeddings;
  std::optional<AffineHead> head;
  std::vector<LossRecord> history;
  /// Fraction of parent/child edges with entails(parent, child).
  double satisfaction = 0.0;
};

/// Deterministic given (problem, cfg, cone). Throws TrainingError with the
/// step index if the loss becomes non-finite.
TrainResult train(const EmbeddingProblem& problem, const TrainerConfig& cfg,
                  const ConeParams& cone);

/// Seeded initialisation used by train(): space-like parts ~ N(0, sigma^2).
EmbeddingMap initial_embeddings(const EmbeddingProblem& problem,
                                const TrainerConfig& cfg);

double satisfaction_rate(const EmbeddingProblem& problem,
                         const EmbeddingMap& embeddings,
                         const ConeParams& cone);

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates skipped because a hinge or clamp switches within the stencil.
  std::size_t excluded = 0;
};

/// Central differences of loss_total against the analytic ambient gradient.
/// h must lie in [1e-7, 1e-3]. Relative error uses max(|a|, |f|, 1e-6) as the
/// denominator.
FiniteDiffReport finite_diff_check(const EmbeddingProblem& problem,
                                   const EmbeddingMap& embeddings,
                                   const std::optional<AffineHead>& head,
                                   const TrainerConfig& cfg,
                                   const ConeParams& cone, double h = 1e-5);

}  // namespace hypermem
