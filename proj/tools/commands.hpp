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

// Library behind the `hypermem` executable. Every subcommand is a plain
// function so tests and the acceptance harness can drive it without a shell.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypermem/embed_trainer.hpp"
#include "hypermem/memory_tree.hpp"
#include "hypermem/retrieval.hpp"
#include "hypermem/synth.hpp"

namespace hypermem::cli {

/// Bumped whenever a column or key changes meaning.
inline constexpr int kCsvVersion = 1;
inline constexpr int kStatsVersion = 1;

/// Writes <out_dir>/problem.jsonl and <out_dir>/ground_truth.jsonl.
/// Throws DomainError on degenerate parameters.
void cmd_synth(const TaxonomySpec& spec, const std::filesystem::path& out_dir);

struct TrainSummary {
  double satisfaction = 0.0;
  LossBreakdown final_loss;
  std::size_t entries = 0;
  std::string bank_hash;
};

/// Trains embeddings for every item and saves them as a bank. Entry ids follow
/// item order; g and s come from the item, the payload is the item id.
TrainSummary cmd_train_embed(
    const std::filesystem::path& problem_path, const TrainerConfig& cfg,
    const ConeParams& cone, const std::filesystem::path& bank_out,
    const std::optional<std::filesystem::path>& loss_csv = std::nullopt);

struct BuildSummary {
  ConsolidationReport report;
  std::string snapshot_hash;
  std::size_t nodes = 0;
  std::size_t max_depth = 0;
};

/// Inserts the whole bank through one consolidation pass and saves the tree.
BuildSummary cmd_build(const std::filesystem::path& bank_path,
                       const TreeConfig& cfg,
                       const std::filesystem::path& snapshot_out);

struct QuerySpec {
  std::optional<EntryId> entry;  // query with a stored embedding
  std::optional<std::filesystem::path> coords_file;  // one point per line
  BeamConfig beam;
  bool flat_baseline = false;
};

/// Writes trace records (JSON lines). With a flat baseline each record also
/// carries "source": "tree" or "flat". Throws LookupError on unknown ids.
void cmd_query(const std::filesystem::path& bank_path,
               const std::filesystem::path& snapshot_path,
               const QuerySpec& spec, std::ostream& out);

struct BenchOptions {
  std::vector<std::size_t> sizes{1000, 5000, 25000, 100000};
  std::size_t queries = 200;
  std::size_t warmup = 5;
  std::size_t dim = 16;
  std::uint64_t seed = 0;
  BeamConfig beam;
};

struct LatencyRow {
  std::size_t n = 0;
  double tree_mean = 0.0, tree_p50 = 0.0, tree_p95 = 0.0;  // seconds
  double flat_mean = 0.0, flat_p50 = 0.0, flat_p95 = 0.0;
  double visited_mean = 0.0;
  double build_seconds = 0.0;
};

/// Throws DomainError unless sizes are non-empty and strictly ascending and
/// warmup >= 5.
std::vector<LatencyRow> cmd_bench_latency(const BenchOptions& opts);

void write_latency_csv(const std::vector<LatencyRow>& rows, std::ostream& out);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Depth histogram, icicle records and, when visit_queries > 0, per-depth
/// visit counts of that many queries drawn near stored entries.
nlohmann::ordered_json cmd_stats(const std::filesystem::path& bank_path,
                                 const std::filesystem::path& snapshot_path,
                                 std::size_t visit_queries, std::uint64_t seed,
                                 const BeamConfig& beam);

/// The same document for an in-memory tree.
nlohmann::ordered_json stats_json(const MemoryTree& tree,
                                  std::span<const LorentzPoint> queries,
                                  const BeamConfig& beam);

}  // namespace hypermem::cli
