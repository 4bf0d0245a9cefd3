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

#include "hypermem/fusion.hpp"

#include <cmath>
#include <string>

#include "hypermem/errors.hpp"

namespace hypermem {

namespace {

void check_space(const LorentzPoint& a, const LorentzPoint& b,
                 const char* what) {
  if (a.dim() != b.dim() || !(a.curvature() == b.curvature())) {
    throw ShapeError(std::string(what) + ": points live in different spaces");
  }
}

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError(std::string(what) + " must lie in [0, 1], got " +
                      std::to_string(v));
  }
}

}  // namespace

ShortTermBuffer::ShortTermBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw DomainError("ShortTermBuffer: capacity must be > 0");
}

void ShortTermBuffer::push(LorentzPoint z) {
  if (!items_.empty()) check_space(items_.front(), z, "ShortTermBuffer");
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(z));
}

std::vector<LorentzPoint> ShortTermBuffer::points() const {
  return {items_.begin(), items_.end()};
}

LorentzPoint pool_short_term(std::span<const LorentzPoint> points) {
  if (points.empty()) throw DomainError("pool_short_term: empty buffer");
  if (points.size() == 1) return points.front();
  std::vector<double> mean(points.front().dim(), 0.0);
  for (const LorentzPoint& z : points) {
    check_space(points.front(), z, "pool_short_term");
    const std::vector<double> v = log_origin(z);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
  }
  for (double& m : mean) m /= static_cast<double>(points.size());
  return exp_origin(mean, points.front().curvature());
}

LorentzPoint pool_short_term(const ShortTermBuffer& buffer) {
  return pool_short_term(buffer.points());
}

LorentzPoint gate_fuse(const LorentzPoint& z_short, const LorentzPoint& z_mem,
                       double beta) {
  check_unit(beta, "gate_fuse: beta");
  check_space(z_short, z_mem, "gate_fuse");
  if (beta == 1.0) return z_short;
  if (beta == 0.0) return z_mem;
  const std::vector<double> a = log_origin(z_short);
  const std::vector<double> b = log_origin(z_mem);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = beta * a[i] + (1.0 - beta) * b[i];
  }
  return exp_origin(v, z_short.curvature());
}

std::vector<double> gate_fuse_euclidean(const LorentzPoint& z_short,
                                        const LorentzPoint& z_mem,
                                        double beta) {
  check_unit(beta, "gate_fuse_euclidean: beta");
  check_space(z_short, z_mem, "gate_fuse_euclidean");
  const auto a = z_short.coords();
  const auto b = z_mem.coords();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = beta * a[i] + (1.0 - beta) * b[i];
  }
  return out;
}

SynthesizedMemory synthesize_memory(const LorentzPoint& z_i,
                                    const LorentzPoint& z_j, double sim_i,
                                    double sim_j) {
  if (!(sim_i >= 0.0) || !(sim_j >= 0.0) || !std::isfinite(sim_i) ||
      !std::isfinite(sim_j)) {
    throw DomainError("synthesize_memory: similarities must be finite and >= 0");
  }
  if (sim_i + sim_j == 0.0) {
    throw DomainError("synthesize_memory: both similarities are 0");
  }
  const double rho = sim_j / (sim_i + sim_j);
  return {geodesic_interpolate(z_i, z_j, rho), rho, true};
}

void InjectionConfig::validate() const {
  check_unit(alpha0, "InjectionConfig: alpha0");
  if (proj) {
    if (proj->W.size() != proj->out_dim * proj->in_dim ||
        proj->b.size() != proj->out_dim) {
      throw ShapeError("InjectionConfig: projection shape is inconsistent");
    }
  }
}

double injection_strength(double similarity, const InjectionConfig& cfg) {
  cfg.validate();
  check_unit(similarity, "residual_inject: similarity");
  const double g = cfg.gate ? cfg.gate(similarity) : similarity;
  check_unit(g, "residual_inject: gate output");
  return cfg.alpha0 * g;
}

std::vector<double> residual_inject_alpha(std::span<const double> e_suffix,
                                          std::span<const double> h_last,
                                          std::span<const double> v_prior,
                                          double alpha_t,
                                          const std::optional<AffineHead>& proj) {
  check_unit(alpha_t, "residual_inject: alpha_t");
  if (h_last.size() != v_prior.size()) {
    throw ShapeError("residual_inject: h_last has " +
                     std::to_string(h_last.size()) + " entries, v_prior " +
                     std::to_string(v_prior.size()));
  }
  const std::size_t in = v_prior.size();
  const std::size_t out = proj ? proj->out_dim : in;
  if (proj && proj->in_dim != in) {
    throw ShapeError("residual_inject: projection expects " +
                     std::to_string(proj->in_dim) + " inputs, got " +
                     std::to_string(in));
  }
  if (e_suffix.size() != out) {
    throw ShapeError("residual_inject: suffix has " +
                     std::to_string(e_suffix.size()) + " entries, expected " +
                     std::to_string(out));
  }
  std::vector<double> diff(in);
  for (std::size_t i = 0; i < in; ++i) {
    diff[i] = alpha_t * (v_prior[i] - h_last[i]);
  }
  std::vector<double> res(e_suffix.begin(), e_suffix.end());
  if (!proj) {
    for (std::size_t i = 0; i < out; ++i) res[i] += diff[i];
    return res;
  }
  // The bias is a translation of the suffix space; it cancels in
  // proj(x) - proj(0) so that alpha_t = 0 leaves the suffix untouched.
  for (std::size_t r = 0; r < out; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < in; ++c) acc += proj->W[r * in + c] * diff[c];
    res[r] += acc;
  }
  return res;
}

std::vector<double> residual_inject(std::span<const double> e_suffix,
                                    std::span<const double> h_last,
                                    std::span<const double> v_prior,
                                    double similarity,
                                    const InjectionConfig& cfg) {
  return residual_inject_alpha(e_suffix, h_last, v_prior,
                               injection_strength(similarity, cfg), cfg.proj);
}

std::vector<double> decode_prior(const LorentzPoint& z_ctx) {
  return log_origin(z_ctx);
}

}  // namespace hypermem
