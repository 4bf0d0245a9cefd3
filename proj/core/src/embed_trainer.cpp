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

#include "hypermem/embed_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <unordered_map>

#include "hypermem/errors.hpp"

namespace hypermem {
namespace {

using Coords = std::vector<double>;

struct Indexed {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::pair<std::size_t, std::size_t>> negatives;
  std::vector<const std::vector<double>*> feats;  // nullptr when absent
  std::size_t feat_dim = 0;
  std::size_t featured = 0;
};

Indexed index_problem(const EmbeddingProblem& problem) {
  problem.validate();
  Indexed ix;
  for (std::size_t i = 0; i < problem.items.size(); ++i) {
    ix.ids.push_back(problem.items[i].id);
    ix.index.emplace(problem.items[i].id, i);
    const auto& f = problem.items[i].feat;
    ix.feats.push_back(f ? &*f : nullptr);
    if (f) ++ix.featured;
  }
  ix.feat_dim = problem.feature_dim();
  for (const auto& [p, c] : problem.parent_child_edges) {
    ix.edges.emplace_back(ix.index.at(p), ix.index.at(c));
  }
  for (const auto& [p, n] : problem.negatives) {
    ix.negatives.emplace_back(ix.index.at(p), ix.index.at(n));
  }
  return ix;
}

std::vector<Coords> gather(const Indexed& ix, const EmbeddingMap& embeddings) {
  std::vector<Coords> X;
  X.reserve(ix.ids.size());
  for (const auto& id : ix.ids) {
    auto it = embeddings.find(id);
    if (it == embeddings.end()) {
      throw LookupError("no embedding for item '" + id + "'");
    }
    const auto c = it->second.coords();
    X.emplace_back(c.begin(), c.end());
  }
  return X;
}

double inner(const Coords& x, const Coords& y) {
  double s = -x[0] * y[0];
  for (std::size_t i = 1; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double space_norm(const Coords& x) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

// d(x,y) and dd/dalpha from alpha = -c<x,y>.
struct DistanceTerm {
  double value;
  double d_alpha;
};

// alpha - 1 via the identity
//   -c<x,y> - 1 = c/2 <x-y,x-y> - c/2 (<x,x> + 1/c) - c/2 (<y,y> + 1/c),
// which holds off the manifold too (finite differences probe there) and
// keeps the digits acosh(alpha) loses for near-coincident pairs.
DistanceTerm distance_term(const Coords& x, const Coords& y, double c) {
  const double sqrt_c = std::sqrt(c);
  double dd = 0.0, rx = 0.0, ry = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double sign = i == 0 ? -1.0 : 1.0;
    const double e = x[i] - y[i];
    dd += sign * e * e;
    rx += sign * x[i] * x[i];
    ry += sign * y[i] * y[i];
  }
  if (dd == 0.0 && x == y) return {0.0, 0.0};
  const double delta = 0.5 * c * dd - 0.5 * c * (rx + 1.0 / c) -
                       0.5 * c * (ry + 1.0 / c);
  if (delta <= 0.0) return {0.0, 0.0};
  const double root = std::sqrt(delta * (delta + 2.0));
  return {std::log1p(delta + root) / sqrt_c, 1.0 / (sqrt_c * root)};
}

// Adds scale * d(alpha)/d(x) = scale * (-c J y) into gx.
void add_alpha_grad(Coords& gx, const Coords& y, double c, double scale) {
  gx[0] += scale * c * y[0];
  for (std::size_t i = 1; i < y.size(); ++i) gx[i] -= scale * c * y[i];
}

struct HalfAngle {
  double value;
  bool clamped;
  double margin;  // distance of ||z_space|| from the clamp radius
};

HalfAngle half_angle(const Coords& x, const ConeParams& cone, double sqrt_c,
                     Coords* grad, double scale) {
  const double r = space_norm(x);
  const double s = 2.0 * cone.K / (sqrt_c * std::max(r, cone.eps_apex));
  if (r <= cone.eps_apex || s >= 1.0) {
    return {std::asin(std::min(s, 1.0)), true, r - cone.eps_apex};
  }
  if (grad) {
    const double k = -scale * s / (r * r * std::sqrt(1.0 - s * s));
    for (std::size_t i = 1; i < x.size(); ++i) (*grad)[i] += k * x[i];
  }
  return {std::asin(s), false, r - cone.eps_apex};
}

struct Evaluation {
  LossBreakdown loss;
  std::vector<Coords> grad;
  AffineHead head_grad;
  std::vector<char> signature;
  std::size_t satisfied = 0;
};

Evaluation evaluate(const Indexed& ix, const std::vector<Coords>& X,
                    const AffineHead* head, const TrainerConfig& cfg,
                    const ConeParams& cone, bool want_grad) {
  const Curvature curv(cfg.curvature);
  const double c = curv.value();
  const double sqrt_c = curv.sqrt_value();
  const std::size_t m = X.empty() ? 0 : X.front().size();

  Evaluation ev;
  if (want_grad) ev.grad.assign(X.size(), Coords(m, 0.0));
  auto* G = want_grad ? &ev.grad : nullptr;

  const double n_edges = static_cast<double>(ix.edges.size());
  for (const auto& [p, ch] : ix.edges) {
    const Coords& x = X[p];
    const Coords& y = X[ch];
    const double alpha = -c * inner(x, y);

    const DistanceTerm d = distance_term(x, y, c);
    ev.loss.dist += d.value / n_edges;
    ev.signature.push_back(alpha <= 1.0);
    if (G && d.d_alpha != 0.0 && cfg.lambda_dist != 0.0) {
      const double k = cfg.lambda_dist * d.d_alpha / n_edges;
      add_alpha_grad((*G)[p], y, c, k);
      add_alpha_grad((*G)[ch], x, c, k);
    }

    // Closed-form exterior angle; degenerate pairs contribute nothing.
    const double beta = sqrt_c * x[0];
    const double gamma = sqrt_c * y[0];
    const double P = alpha * alpha - 1.0;
    const double Q = beta * beta - 1.0;
    const HalfAngle omega = half_angle(x, cone, sqrt_c, nullptr, 0.0);
    if (!(P > 0.0) || !(Q > 0.0)) {
      ev.signature.push_back(2);
      ++ev.satisfied;
      continue;
    }
    const double S = std::sqrt(P * Q);
    const double N = alpha * beta - gamma;
    const double C = std::clamp(N / S, -1.0, 1.0);
    double phi = std::acos(C);
    double sign = -1.0;  // dphi/dC = sign / sqrt(1 - C^2)
    if (cone.convention == AngleConvention::kPiMinus) {
      phi = std::numbers::pi - phi;
      sign = 1.0;
    }
    const double hinge = phi - omega.value;
    const bool active = hinge > 0.0;
    ev.signature.push_back(active);
    ev.signature.push_back(omega.clamped);
    if (!active) ++ev.satisfied;
    if (!active) continue;
    ev.loss.entail += hinge / n_edges;
    if (!G || cfg.gamma_entail == 0.0) continue;

    const double w = cfg.gamma_entail / n_edges;
    const double dphi_dC = sign / std::sqrt(std::max(1.0 - C * C, 1e-300));
    const double dC_dalpha = (beta - N * alpha / P) / S;
    const double dC_dbeta = (alpha - N * beta / Q) / S;
    const double dC_dgamma = -1.0 / S;
    const double ka = w * dphi_dC * dC_dalpha;
    add_alpha_grad((*G)[p], y, c, ka);
    add_alpha_grad((*G)[ch], x, c, ka);
    (*G)[p][0] += w * dphi_dC * dC_dbeta * sqrt_c;
    (*G)[ch][0] += w * dphi_dC * dC_dgamma * sqrt_c;
    half_angle(x, cone, sqrt_c, &(*G)[p], -w);
  }

  if (!ix.negatives.empty()) {
    const double n_neg = static_cast<double>(ix.negatives.size());
    for (const auto& [p, q] : ix.negatives) {
      const DistanceTerm d = distance_term(X[p], X[q], c);
      const double gap = cfg.neg_margin - d.value;
      ev.signature.push_back(gap > 0.0);
      if (gap <= 0.0) continue;
      ev.loss.neg += gap / n_neg;
      if (G && d.d_alpha != 0.0) {
        const double k = -cfg.neg_weight * d.d_alpha / n_neg;
        add_alpha_grad((*G)[p], X[q], c, k);
        add_alpha_grad((*G)[q], X[p], c, k);
      }
    }
  }

  if (!X.empty()) {
    const double inv_n = 1.0 / static_cast<double>(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
      double sq = 0.0;
      for (std::size_t k = 1; k < m; ++k) sq += X[i][k] * X[i][k];
      ev.loss.norm += sq * inv_n;
      if (G) {
        for (std::size_t k = 1; k < m; ++k) {
          (*G)[i][k] += cfg.norm_reg * 2.0 * X[i][k] * inv_n;
        }
      }
    }
  }

  if (head && ix.featured > 0) {
    if (head->in_dim + 1 != m || head->out_dim != ix.feat_dim ||
        head->W.size() != head->in_dim * head->out_dim ||
        head->b.size() != head->out_dim) {
      throw ShapeError("recon head shape does not match embeddings/features");
    }
    const std::size_t in = head->in_dim;
    const std::size_t out = head->out_dim;
    if (want_grad) {
      ev.head_grad = AffineHead{out, in, std::vector<double>(out * in, 0.0),
                                std::vector<double>(out, 0.0)};
    }
    const double scale = 1.0 / (static_cast<double>(ix.featured) *
                                static_cast<double>(out));
    Coords v(in), err(out), gv(in);
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (!ix.feats[i]) continue;
      const Coords& z = X[i];
      const double r = space_norm(z);
      const double a = sqrt_c * r;
      // v = k(r) z_space with k = asinh(a)/a; smooth through the origin.
      const double k = a < 1e-6 ? 1.0 - a * a / 6.0 : std::asinh(a) / a;
      for (std::size_t j = 0; j < in; ++j) v[j] = k * z[j + 1];
      double sq = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        double pred = head->b[o];
        for (std::size_t j = 0; j < in; ++j) pred += head->W[o * in + j] * v[j];
        err[o] = pred - (*ix.feats[i])[o];
        sq += err[o] * err[o];
      }
      ev.loss.recon += sq * scale;
      if (!want_grad) continue;
      std::fill(gv.begin(), gv.end(), 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double ge = 2.0 * err[o] * scale;
        ev.head_grad.b[o] += cfg.recon_weight * ge;
        for (std::size_t j = 0; j < in; ++j) {
          ev.head_grad.W[o * in + j] += cfg.recon_weight * ge * v[j];
          gv[j] += ge * head->W[o * in + j];
        }
      }
      // dk/dr / r, with its series near the origin.
      double kp_over_r;
      if (a < 1e-4) {
        kp_over_r = -c / 3.0 + 0.3 * c * a * a;
      } else {
        kp_over_r = (1.0 / (r * std::sqrt(1.0 + a * a)) - k / r) / r;
      }
      double gz = 0.0;
      for (std::size_t j = 0; j < in; ++j) gz += gv[j] * z[j + 1];
      for (std::size_t j = 0; j < in; ++j) {
        (*G)[i][j + 1] +=
            cfg.recon_weight * (k * gv[j] + kp_over_r * gz * z[j + 1]);
      }
    }
  }

  ev.loss.total = cfg.recon_weight * ev.loss.recon +
                  cfg.lambda_dist * ev.loss.dist +
                  cfg.gamma_entail * ev.loss.entail +
                  cfg.norm_reg * ev.loss.norm + cfg.neg_weight * ev.loss.neg;
  return ev;
}

const AffineHead* head_ptr(const std::optional<AffineHead>& head) {
  return head ? &*head : nullptr;
}

}  // namespace

void EmbeddingProblem::validate() const {
  std::set<std::string> seen;
  std::size_t fdim = 0;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second) {
      throw ValidationError("duplicate item id '" + item.id + "'");
    }
    if (item.feat) {
      if (item.feat->empty()) {
        throw ValidationError("empty feature vector for '" + item.id + "'");
      }
      if (fdim == 0) fdim = item.feat->size();
      if (item.feat->size() != fdim) {
        throw ValidationError("inconsistent feature length for '" + item.id +
                              "'");
      }
    }
  }
  auto check_pairs = [&](const auto& pairs, const char* what) {
    for (const auto& [a, b] : pairs) {
      if (!seen.count(a) || !seen.count(b)) {
        throw ValidationError(std::string(what) + " references unknown id: " +
                              a + " -> " + b);
      }
      if (a == b) {
        throw ValidationError(std::string(what) + " is a self-edge: " + a);
      }
    }
  };
  check_pairs(parent_child_edges, "edge");
  check_pairs(negatives, "negative");
}

std::size_t EmbeddingProblem::feature_dim() const {
  for (const auto& item : items) {
    if (item.feat) return item.feat->size();
  }
  return 0;
}

void TrainerConfig::validate() const {
  if (!(lr > 0.0)) throw DomainError("trainer lr must be > 0");
  if (dim < 1) throw DomainError("trainer dim must be >= 1");
  if (steps < 1) throw DomainError("trainer steps must be >= 1");
  for (double w : {lambda_dist, gamma_entail, recon_weight, norm_reg,
                   neg_weight, init_sigma, max_step}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DomainError("trainer weights must be finite and >= 0");
    }
  }
  Curvature{curvature};
}

TrainerConfig taxonomy_preset(std::uint64_t seed) {
  TrainerConfig cfg;
  cfg.dim = 32;
  cfg.lr = 0.05;
  cfg.lambda_dist = 3.0;
  cfg.gamma_entail = 1.0;
  cfg.init_sigma = 1.0;
  cfg.max_step = 0.2;
  cfg.cosine_decay = true;
  cfg.steps = 5000;
  cfg.seed = seed;
  return cfg;
}

LossBreakdown loss_total(const EmbeddingProblem& problem,
                         const EmbeddingMap& embeddings,
                         const std::optional<AffineHead>& head,
                         const TrainerConfig& cfg, const ConeParams& cone) {
  const Indexed ix = index_problem(problem);
  return evaluate(ix, gather(ix, embeddings), head_ptr(head), cfg, cone, false)
      .loss;
}

std::map<std::string, std::vector<double>> loss_gradient(
    const EmbeddingProblem& problem, const EmbeddingMap& embeddings,
    const std::optional<AffineHead>& head, const TrainerConfig& cfg,
    const ConeParams& cone) {
  const Indexed ix = index_problem(problem);
  Evaluation ev =
      evaluate(ix, gather(ix, embeddings), head_ptr(head), cfg, cone, true);
  std::map<std::string, std::vector<double>> out;
  for (std::size_t i = 0; i < ix.ids.size(); ++i) {
    out.emplace(ix.ids[i], std::move(ev.grad[i]));
  }
  return out;
}

std::vector<double> riemannian_gradient(const LorentzPoint& z,
                                        std::span<const double> euclidean) {
  std::vector<double> h(euclidean.begin(), euclidean.end());
  h[0] = -h[0];
  return tangent_project(z, h);
}

namespace {

LorentzPoint step_point(const LorentzPoint& z, std::span<const double> grad,
                        double lr, const std::string& id,
                        double max_step = 0.0) {
  if (grad.size() != z.coords().size()) {
    throw ShapeError("gradient for '" + id + "' has the wrong length");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw NumericError("non-finite gradient for item '" + id + "'");
    }
  }
  std::vector<double> v = riemannian_gradient(z, grad);
  double scale = -lr;
  if (max_step > 0.0) {
    const double len = lr * lorentz_norm(v);
    if (len > max_step) scale *= max_step / len;
  }
  for (double& e : v) e *= scale;
  return exp_map(z, v);
}

}  // namespace

EmbeddingMap riemannian_step(
    const EmbeddingMap& embeddings,
    const std::map<std::string, std::vector<double>>& grads, double lr) {
  EmbeddingMap out;
  for (const auto& [id, z] : embeddings) {
    auto it = grads.find(id);
    if (it == grads.end()) {
      out.emplace(id, z);
      continue;
    }
    out.emplace(id, step_point(z, it->second, lr, id));
  }
  return out;
}

EmbeddingMap initial_embeddings(const EmbeddingProblem& problem,
                                const TrainerConfig& cfg) {
  cfg.validate();
  const Curvature c(cfg.curvature);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddingMap out;
  std::vector<double> s(cfg.dim);
  for (const auto& item : problem.items) {
    for (double& e : s) e = cfg.init_sigma * normal(rng);
    out.emplace(item.id, project_to_manifold(s, c));
  }
  return out;
}

double satisfaction_rate(const EmbeddingProblem& problem,
                         const EmbeddingMap& embeddings,
                         const ConeParams& cone) {
  if (problem.parent_child_edges.empty()) return 1.0;
  std::size_t ok = 0;
  for (const auto& [p, ch] : problem.parent_child_edges) {
    auto pi = embeddings.find(p);
    auto ci = embeddings.find(ch);
    if (pi == embeddings.end() || ci == embeddings.end()) {
      throw LookupError("missing embedding for edge " + p + " -> " + ch);
    }
    auto phi = try_exterior_angle(pi->second, ci->second, cone.convention);
    if (phi && *phi <= cone_half_angle(pi->second, cone)) ++ok;
  }
  return static_cast<double>(ok) /
         static_cast<double>(problem.parent_child_edges.size());
}

TrainResult train(const EmbeddingProblem& problem, const TrainerConfig& cfg,
                  const ConeParams& cone) {
  cfg.validate();
  const Curvature curv(cfg.curvature);
  cone.validate(curv);
  const Indexed ix = index_problem(problem);

  TrainResult result;
  EmbeddingMap init = initial_embeddings(problem, cfg);
  std::vector<LorentzPoint> Z;
  std::vector<Coords> X;
  for (const auto& id : ix.ids) {
    Z.push_back(init.at(id));
    X.emplace_back(Z.back().coords().begin(), Z.back().coords().end());
  }

  std::optional<AffineHead> head;
  if (cfg.recon_weight > 0.0 && ix.featured > 0) {
    AffineHead h{ix.feat_dim, cfg.dim, std::vector<double>(ix.feat_dim * cfg.dim),
                 std::vector<double>(ix.feat_dim, 0.0)};
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    for (double& w : h.W) w = sd * normal(rng);
    for (std::size_t i = 0; i < ix.feats.size(); ++i) {
      if (!ix.feats[i]) continue;
      for (std::size_t o = 0; o < h.out_dim; ++o) {
        h.b[o] += (*ix.feats[i])[o] / static_cast<double>(ix.featured);
      }
    }
    head = std::move(h);
  }

  const double n_edges = static_cast<double>(ix.edges.size());
  result.history.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Evaluation ev = evaluate(ix, X, head_ptr(head), cfg, cone, true);
    if (!std::isfinite(ev.loss.total)) {
      throw TrainingError("loss became non-finite at step " +
                          std::to_string(step));
    }
    result.history.push_back(
        {step, ev.loss,
         ix.edges.empty() ? 1.0 : static_cast<double>(ev.satisfied) / n_edges});
    double lr = cfg.lr;
    if (cfg.cosine_decay) {
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                  static_cast<double>(cfg.steps)));
    }
    for (std::size_t i = 0; i < Z.size(); ++i) {
      try {
        Z[i] = step_point(Z[i], ev.grad[i], lr, ix.ids[i], cfg.max_step);
      } catch (const NumericError& e) {
        throw TrainingError(std::string(e.what()) + " at step " +
                            std::to_string(step));
      } catch (const ContractError& e) {
        throw TrainingError(std::string(e.what()) + " at step " +
                            std::to_string(step));
      }
      if (cfg.check_manifold &&
          Z[i].manifold_residual() > kManifoldTolerance) {
        throw TrainingError("item '" + ix.ids[i] + "' left the manifold at step " +
                            std::to_string(step));
      }
      const auto zc = Z[i].coords();
      std::copy(zc.begin(), zc.end(), X[i].begin());
    }
    if (head) {
      for (std::size_t k = 0; k < head->W.size(); ++k) {
        head->W[k] -= lr * ev.head_grad.W[k];
      }
      for (std::size_t k = 0; k < head->b.size(); ++k) {
        head->b[k] -= lr * ev.head_grad.b[k];
      }
    }
  }

  for (std::size_t i = 0; i < Z.size(); ++i) {
    result.embeddings.emplace(ix.ids[i], Z[i]);
  }
  result.head = std::move(head);
  result.satisfaction = satisfaction_rate(problem, result.embeddings, cone);
  return result;
}

FiniteDiffReport finite_diff_check(const EmbeddingProblem& problem,
                                   const EmbeddingMap& embeddings,
                                   const std::optional<AffineHead>& head,
                                   const TrainerConfig& cfg,
                                   const ConeParams& cone, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw DomainError("finite_diff_check: h must lie in [1e-7, 1e-3]");
  }
  const Indexed ix = index_problem(problem);
  std::vector<Coords> X = gather(ix, embeddings);
  const AffineHead* hp = head_ptr(head);
  const Evaluation base = evaluate(ix, X, hp, cfg, cone, true);

  FiniteDiffReport report;
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t k = 0; k < X[i].size(); ++k) {
      const double saved = X[i][k];
      X[i][k] = saved + h;
      const Evaluation plus = evaluate(ix, X, hp, cfg, cone, false);
      X[i][k] = saved - h;
      const Evaluation minus = evaluate(ix, X, hp, cfg, cone, false);
      X[i][k] = saved;
      if (plus.signature != base.signature ||
          minus.signature != base.signature) {
        ++report.excluded;
        continue;
      }
      const double fd = (plus.loss.total - minus.loss.total) / (2.0 * h);
      const double an = base.grad[i][k];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      report.max_rel_error =
          std::max(report.max_rel_error, std::abs(fd - an) / denom);
      ++report.checked;
    }
  }
  return report;
}

}  // namespace hypermem
