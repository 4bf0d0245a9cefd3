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

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hypermem/errors.hpp"
#include "hypermem/problem_io.hpp"
#include "hypermem/store.hpp"

namespace hypermem::cli {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  // Nearest-rank definition.
  const auto rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(v.size())));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

std::vector<LorentzPoint> read_query_points(const std::filesystem::path& path,
                                            std::size_t dim, Curvature c) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<LorentzPoint> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof()) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": not a number");
    }
    if (v.empty()) continue;
    if (v.size() == dim + 1) {
      out.emplace_back(std::move(v), c);
    } else if (v.size() == dim) {
      out.push_back(project_to_manifold(v, c));
    } else {
      throw ShapeError(path.string() + ":" + std::to_string(lineno) +
                       ": expected " + std::to_string(dim) + " or " +
                       std::to_string(dim + 1) + " coordinates");
    }
  }
  return out;
}

nlohmann::ordered_json trace_json(const Hit& h, const std::string& query_id,
                                  std::size_t rank, const char* source) {
  nlohmann::ordered_json j;
  j["query_id"] = query_id;
  if (source) j["source"] = source;
  j["rank"] = rank;
  j["entry_id"] = h.entry_id;
  j["g"] = h.g;
  j["s"] = h.s;
  j["similarity"] = h.similarity;
  j["node_path"] = h.node_path;
  return j;
}

}  // namespace

void cmd_synth(const TaxonomySpec& spec, const std::filesystem::path& out_dir) {
  const Taxonomy tax = make_taxonomy(spec);
  std::filesystem::create_directories(out_dir);
  write_problem(tax.problem, out_dir / "problem.jsonl");
  auto gt = open_out(out_dir / "ground_truth.jsonl");
  write_ground_truth(tax, gt);
  if (!gt.flush()) throw IoError("write failed: ground_truth.jsonl");
}

TrainSummary cmd_train_embed(const std::filesystem::path& problem_path,
                             const TrainerConfig& cfg, const ConeParams& cone,
                             const std::filesystem::path& bank_out,
                             const std::optional<std::filesystem::path>& loss_csv) {
  const EmbeddingProblem problem = read_problem(problem_path);
  const TrainResult res = train(problem, cfg, cone);

  Bank bank;
  bank.dim = cfg.dim;
  bank.curvature = Curvature(cfg.curvature);
  bank.cone_K = cone.K;
  EntryId next = 0;
  for (const auto& item : problem.items) {
    MemoryEntry e{next, res.embeddings.at(item.id), item.g, item.s,
                  std::vector<std::uint8_t>(item.id.begin(), item.id.end()),
                  true};
    bank.entries.emplace(next++, std::move(e));
  }

  TrainSummary sum;
  sum.satisfaction = res.satisfaction;
  if (!res.history.empty()) sum.final_loss = res.history.back().loss;
  sum.entries = bank.entries.size();
  sum.bank_hash = save_bank(bank, bank_out);
  if (loss_csv) {
    auto out = open_out(*loss_csv);
    write_loss_history(res.history, out);
  }
  return sum;
}

BuildSummary cmd_build(const std::filesystem::path& bank_path,
                       const TreeConfig& cfg,
                       const std::filesystem::path& snapshot_out) {
  const LoadedBank lb = load_bank(bank_path);
  MemoryTree tree(lb.bank.dim, lb.bank.curvature, cfg);
  UnconsolidatedPool pool;
  for (const auto& [id, e] : lb.bank.entries) pool.append(e);
  BuildSummary sum;
  sum.report = consolidate(tree, pool);
  sum.snapshot_hash = save_snapshot(tree, lb.content_hash, snapshot_out);
  sum.nodes = tree.node_count();
  sum.max_depth = tree.max_depth();
  return sum;
}

void cmd_query(const std::filesystem::path& bank_path,
               const std::filesystem::path& snapshot_path,
               const QuerySpec& spec, std::ostream& out) {
  if (spec.entry.has_value() == spec.coords_file.has_value()) {
    throw DomainError("query needs exactly one of an entry id or a coords file");
  }
  const LoadedBank lb = load_bank(bank_path);
  const MemoryTree tree = load_snapshot(snapshot_path, lb);
  spec.beam.validate(lb.bank.curvature);

  std::vector<std::pair<std::string, LorentzPoint>> queries;
  if (spec.entry) {
    auto it = lb.bank.entries.find(*spec.entry);
    if (it == lb.bank.entries.end()) {
      throw LookupError("no entry " + std::to_string(*spec.entry) +
                        " in the bank");
    }
    queries.emplace_back("entry:" + std::to_string(*spec.entry), it->second.z);
  } else {
    auto pts = read_query_points(*spec.coords_file, lb.bank.dim,
                                 lb.bank.curvature);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      queries.emplace_back("q" + std::to_string(i), std::move(pts[i]));
    }
  }

  std::optional<FlatIndex> flat;
  if (spec.flat_baseline) flat.emplace(lb.bank.entries);
  const char* tree_tag = spec.flat_baseline ? "tree" : nullptr;
  for (const auto& [qid, q] : queries) {
    const RetrievalResult r = beam_search(tree, q, spec.beam);
    for (std::size_t i = 0; i < r.hits.size(); ++i) {
      out << trace_json(r.hits[i], qid, i + 1, tree_tag).dump() << '\n';
    }
    if (flat) {
      const auto hits = flat->knn(q, spec.beam.top_k);
      for (std::size_t i = 0; i < hits.size(); ++i) {
        out << trace_json(hits[i], qid, i + 1, "flat").dump() << '\n';
      }
    }
  }
}

std::vector<LatencyRow> cmd_bench_latency(const BenchOptions& opts) {
  if (opts.sizes.empty()) throw DomainError("bench: no sizes given");
  for (std::size_t i = 0; i < opts.sizes.size(); ++i) {
    if (opts.sizes[i] == 0 || (i > 0 && opts.sizes[i] <= opts.sizes[i - 1])) {
      throw DomainError("bench: sizes must be positive and strictly ascending");
    }
  }
  if (opts.warmup < 5) throw DomainError("bench: warmup must be >= 5");
  if (opts.queries == 0) throw DomainError("bench: queries must be >= 1");
  opts.beam.validate(Curvature{});

  using Clock = std::chrono::steady_clock;
  std::vector<LatencyRow> rows;
  for (std::size_t n : opts.sizes) {
    const auto bank = make_balanced_bank(n, opts.dim, opts.seed);
    TreeConfig tc;
    tc.cone = opts.beam.cone;
    tc.exhaustive_fallback = false;
    tc.seed = opts.seed;
    MemoryTree tree(opts.dim, Curvature{}, tc);
    UnconsolidatedPool pool;
    for (const auto& [id, e] : bank) pool.append(e);
    const auto b0 = Clock::now();
    consolidate(tree, pool);
    LatencyRow row;
    row.n = n;
    row.build_seconds =
        std::chrono::duration<double>(Clock::now() - b0).count();

    // Both paths query a packed read-only copy of their data.
    const TreeIndex tree_index(tree);
    const FlatIndex flat(bank);
    const auto queries = make_queries(bank, opts.queries + opts.warmup, 0.02,
                                      opts.seed ^ n);
    // The two paths run in separate passes so neither evicts the other's
    // working set between timed calls.
    std::vector<double> tree_t, flat_t;
    double visited = 0.0;
    std::size_t sink = 0;  // keeps results observable
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto t0 = Clock::now();
      const RetrievalResult r = tree_index.search(queries[i], opts.beam);
      const auto t1 = Clock::now();
      sink += r.hits.size();
      if (i < opts.warmup) continue;
      tree_t.push_back(std::chrono::duration<double>(t1 - t0).count());
      visited += static_cast<double>(r.visited.size());
    }
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto t0 = Clock::now();
      const auto hits = flat.knn(queries[i], opts.beam.top_k);
      const auto t1 = Clock::now();
      sink += hits.size();
      if (i < opts.warmup) continue;
      flat_t.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    if (sink == 0) throw NumericError("bench: retrieval returned nothing");
    row.tree_mean = mean(tree_t);
    row.tree_p50 = percentile(tree_t, 0.50);
    row.tree_p95 = percentile(tree_t, 0.95);
    row.flat_mean = mean(flat_t);
    row.flat_p50 = percentile(flat_t, 0.50);
    row.flat_p95 = percentile(flat_t, 0.95);
    row.visited_mean = visited / static_cast<double>(opts.queries);
    rows.push_back(row);
  }
  return rows;
}

void write_latency_csv(const std::vector<LatencyRow>& rows, std::ostream& out) {
  out << "# hypermem bench-latency v" << kCsvVersion << ", seconds\n";
  out << "N,tree_mean,tree_p50,tree_p95,flat_mean,flat_p50,flat_p95,"
         "visited_nodes,build_seconds\n";
  out.precision(9);
  for (const auto& r : rows) {
    out << r.n << ',' << r.tree_mean << ',' << r.tree_p50 << ',' << r.tree_p95
        << ',' << r.flat_mean << ',' << r.flat_p50 << ',' << r.flat_p95 << ','
        << r.visited_mean << ',' << r.build_seconds << '\n';
  }
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DomainError("loglog_slope: need two or more paired points");
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw DomainError("loglog_slope: values must be positive");
    }
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double mx = mean(lx), my = mean(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw DomainError("loglog_slope: x values are all equal");
  return sxy / sxx;
}

nlohmann::ordered_json stats_json(const MemoryTree& tree,
                                  std::span<const LorentzPoint> queries,
                                  const BeamConfig& beam) {
  const TreeStats st = tree_stats(tree);
  nlohmann::ordered_json j;
  j["version"] = kStatsVersion;
  j["node_count"] = st.node_count;
  j["entry_count"] = st.entry_count;
  j["max_depth"] = st.max_depth;
  auto& depths = j["per_depth"] = nlohmann::ordered_json::array();
  for (const auto& d : st.per_depth) {
    depths.push_back({{"depth", d.depth},
                      {"nodes", d.nodes},
                      {"entries", d.entries},
                      {"mean_subtree_size", d.mean_subtree_size}});
  }
  auto& icicle = j["icicle"] = nlohmann::ordered_json::array();
  for (const auto& r : st.icicle) {
    nlohmann::ordered_json rec{{"node_id", r.node_id},
                               {"depth", r.depth},
                               {"subtree_entry_count", r.subtree_entry_count}};
    rec["parent_id"] = r.parent_id ? nlohmann::ordered_json(*r.parent_id)
                                   : nlohmann::ordered_json(nullptr);
    icicle.push_back(std::move(rec));
  }
  if (!queries.empty()) {
    std::vector<std::size_t> visits(st.max_depth + 1, 0);
    for (const auto& q : queries) {
      for (const auto& v : beam_search(tree, q, beam).visited) {
        if (v.depth >= visits.size()) visits.resize(v.depth + 1, 0);
        ++visits[v.depth];
      }
    }
    auto& vj = j["visits_per_depth"] = nlohmann::ordered_json::array();
    for (std::size_t d = 0; d < visits.size(); ++d) {
      vj.push_back({{"depth", d}, {"visits", visits[d]}});
    }
    j["visit_queries"] = queries.size();
  }
  return j;
}

nlohmann::ordered_json cmd_stats(const std::filesystem::path& bank_path,
                                 const std::filesystem::path& snapshot_path,
                                 std::size_t visit_queries, std::uint64_t seed,
                                 const BeamConfig& beam) {
  const LoadedBank lb = load_bank(bank_path);
  const MemoryTree tree = load_snapshot(snapshot_path, lb);
  std::vector<LorentzPoint> queries;
  if (visit_queries > 0 && !lb.bank.entries.empty()) {
    queries = make_queries(lb.bank.entries, visit_queries, 0.02, seed);
  }
  return stats_json(tree, queries, beam);
}

}  // namespace hypermem::cli
