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

// hypermem: build, query and benchmark hyperbolic cone-tree memories.
//
// Exit codes: 0 success, 2 usage error, 3 invalid or inconsistent data,
// 4 I/O failure, 1 anything else. Errors go to stderr as one JSON object.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "hypermem/errors.hpp"
#include "hypermem/memory_tree.hpp"

namespace {

using namespace hypermem;

int report_error(const std::string& kind, const std::string& message,
                 int code) {
  nlohmann::ordered_json j{{"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return code;
}

std::size_t parse_beam(const std::string& s) {
  if (s == "inf" || s == "unlimited") return kUnlimitedBeam;
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || v == 0) {
    throw DomainError("--beam expects a positive integer or 'inf', got '" + s +
                      "'");
  }
  return static_cast<std::size_t>(v);
}

struct ConeFlags {
  double K = 0.1;
  std::string convention = "pi_minus";

  void add(CLI::App* app) {
    app->add_option("--K", K, "cone aperture constant")->capture_default_str();
    app->add_option("--convention", convention,
                    "exterior angle convention: pi_minus or as_paper")
        ->capture_default_str();
  }
  ConeParams params(Curvature c) const {
    return ConeParams::for_curvature(c, K, parse_angle_convention(convention));
  }
};

struct BeamFlags {
  std::string beam = "3";
  std::size_t top_k = 5;
  bool no_cone = false;
  bool no_fallback = false;
  double temperature = 1.0;
  ConeFlags cone;

  void add(CLI::App* app) {
    app->add_option("--beam", beam, "beam width, or 'inf'")
        ->capture_default_str();
    app->add_option("--top-k", top_k, "hits per query")->capture_default_str();
    app->add_flag("--no-cone", no_cone, "rank children by angle only");
    app->add_flag("--no-fallback", no_fallback,
                  "stop when no child cone holds the query");
    app->add_option("--temperature", temperature, "alignment temperature")
        ->capture_default_str();
    cone.add(app);
  }
  BeamConfig config() const {
    BeamConfig b;
    b.beam_width = parse_beam(beam);
    b.top_k = top_k;
    b.use_cone_filter = !no_cone;
    b.allow_fallback = !no_fallback;
    b.temperature = temperature;
    b.cone = cone.params(Curvature{});
    return b;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hypermem: hyperbolic cone-tree memory tools"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "TOML/INI file with default flag values (one table per "
                 "subcommand)")
      ->envname("HYPERMEM_CONFIG");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a planted taxonomy");
  TaxonomySpec tspec;
  std::string synth_out;
  synth->add_option("--branching", tspec.branching,
                    "children per node at each level")
      ->capture_default_str();
  synth->add_option("--entries-per-leaf", tspec.entries_per_leaf)
      ->capture_default_str();
  synth->add_option("--noise", tspec.noise, "feature noise sigma")
      ->capture_default_str();
  synth->add_option("--feature-dim", tspec.feature_dim)->capture_default_str();
  synth->add_option("--negatives", tspec.negatives_per_item,
                    "non-relative pairs per item")
      ->capture_default_str();
  synth->add_option("--seed", tspec.seed)->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();

  // train-embed
  auto* tr = app.add_subcommand("train-embed", "train embeddings into a bank");
  std::string tr_problem, tr_bank, tr_loss;
  TrainerConfig tcfg = taxonomy_preset();
  ConeFlags tr_cone;
  tr->add_option("--problem", tr_problem, "problem JSONL")->required();
  tr->add_option("--out", tr_bank, "bank file to write")->required();
  tr->add_option("--loss-csv", tr_loss, "write per-step losses");
  tr->add_option("--dim", tcfg.dim)->capture_default_str();
  tr->add_option("--curvature", tcfg.curvature)->capture_default_str();
  tr->add_option("--lr", tcfg.lr)->capture_default_str();
  tr->add_option("--steps", tcfg.steps)->capture_default_str();
  tr->add_option("--lambda-dist", tcfg.lambda_dist)->capture_default_str();
  tr->add_option("--gamma-entail", tcfg.gamma_entail)->capture_default_str();
  tr->add_option("--recon-weight", tcfg.recon_weight)->capture_default_str();
  tr->add_option("--norm-reg", tcfg.norm_reg)->capture_default_str();
  tr->add_option("--neg-weight", tcfg.neg_weight)->capture_default_str();
  tr->add_option("--neg-margin", tcfg.neg_margin)->capture_default_str();
  tr->add_option("--init-sigma", tcfg.init_sigma)->capture_default_str();
  tr->add_option("--max-step", tcfg.max_step)->capture_default_str();
  tr->add_option("--cosine-decay", tcfg.cosine_decay)->capture_default_str();
  tr->add_option("--seed", tcfg.seed)->capture_default_str();
  tr_cone.add(tr);

  // build
  auto* build = app.add_subcommand("build", "consolidate a bank into a tree");
  std::string b_bank, b_out;
  TreeConfig bcfg;
  ConeFlags b_cone;
  bool b_no_fallback = false;
  build->add_option("--bank", b_bank)->required();
  build->add_option("--out", b_out, "snapshot file to write")->required();
  build->add_option("--tau-split", bcfg.tau_split)->capture_default_str();
  build->add_option("--merge-eps", bcfg.merge_eps)->capture_default_str();
  build->add_option("--dedup-eps", bcfg.dedup_eps)->capture_default_str();
  build->add_option("--max-fanout", bcfg.max_fanout)->capture_default_str();
  build->add_option("--max-leaf-entries", bcfg.max_leaf_entries)
      ->capture_default_str();
  build->add_flag("--no-exhaustive-fallback", b_no_fallback,
                  "skip the full scan when greedy insertion finds no cone");
  build->add_option("--seed", bcfg.seed)->capture_default_str();
  b_cone.add(build);

  // query
  auto* query = app.add_subcommand("query", "retrieve from a snapshot");
  std::string q_bank, q_snap, q_coords, q_baseline;
  std::optional<EntryId> q_entry;
  BeamFlags q_beam;
  query->add_option("--bank", q_bank)->required();
  query->add_option("--snapshot", q_snap)->required();
  auto* q_entry_opt =
      query->add_option("--entry", q_entry, "query with a stored entry");
  query->add_option("--coords", q_coords,
                    "file with one point per line (n or n+1 numbers)")
      ->excludes(q_entry_opt);
  query->add_option("--baseline", q_baseline, "also run a baseline: flat")
      ->check(CLI::IsMember({"flat"}));
  q_beam.add(query);

  // bench-latency
  auto* bench = app.add_subcommand("bench-latency",
                                   "tree vs flat retrieval latency (CSV)");
  cli::BenchOptions bopts;
  BeamFlags bench_beam;
  bench->add_option("--sizes", bopts.sizes, "ascending bank sizes")
      ->capture_default_str();
  bench->add_option("--queries", bopts.queries)->capture_default_str();
  bench->add_option("--warmup", bopts.warmup)->capture_default_str();
  bench->add_option("--dim", bopts.dim)->capture_default_str();
  bench->add_option("--seed", bopts.seed)->capture_default_str();
  bench_beam.add(bench);

  // stats
  auto* stats = app.add_subcommand("stats", "tree statistics as JSON");
  std::string s_bank, s_snap;
  std::size_t s_queries = 0;
  std::uint64_t s_seed = 0;
  BeamFlags s_beam;
  stats->add_option("--bank", s_bank)->required();
  stats->add_option("--snapshot", s_snap)->required();
  stats->add_option("--visit-queries", s_queries,
                    "queries for the per-depth visit profile")
      ->capture_default_str();
  stats->add_option("--seed", s_seed)->capture_default_str();
  s_beam.add(stats);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }

  try {
    if (*synth) {
      cli::cmd_synth(tspec, synth_out);
      nlohmann::ordered_json j{{"problem", synth_out + "/problem.jsonl"},
                               {"ground_truth",
                                synth_out + "/ground_truth.jsonl"}};
      std::cout << j.dump() << '\n';
    } else if (*tr) {
      const ConeParams cone = tr_cone.params(Curvature(tcfg.curvature));
      std::optional<std::filesystem::path> loss;
      if (!tr_loss.empty()) loss = tr_loss;
      const auto s = cli::cmd_train_embed(tr_problem, tcfg, cone, tr_bank, loss);
      nlohmann::ordered_json j{{"entries", s.entries},
                               {"satisfaction", s.satisfaction},
                               {"loss_total", s.final_loss.total},
                               {"loss_dist", s.final_loss.dist},
                               {"loss_entail", s.final_loss.entail},
                               {"loss_recon", s.final_loss.recon},
                               {"loss_norm", s.final_loss.norm},
                               {"loss_neg", s.final_loss.neg},
                               {"bank_hash", s.bank_hash}};
      std::cout << j.dump() << '\n';
    } else if (*build) {
      bcfg.cone = b_cone.params(Curvature{});
      bcfg.exhaustive_fallback = !b_no_fallback;
      const auto s = cli::cmd_build(b_bank, bcfg, b_out);
      std::cout << report_to_json_line(s.report) << '\n';
      nlohmann::ordered_json j{{"snapshot", b_out},
                               {"snapshot_hash", s.snapshot_hash},
                               {"nodes", s.nodes},
                               {"max_depth", s.max_depth}};
      std::cout << j.dump() << '\n';
    } else if (*query) {
      cli::QuerySpec spec;
      spec.entry = q_entry;
      if (!q_coords.empty()) spec.coords_file = q_coords;
      spec.beam = q_beam.config();
      spec.flat_baseline = q_baseline == "flat";
      cli::cmd_query(q_bank, q_snap, spec, std::cout);
    } else if (*bench) {
      bopts.beam = bench_beam.config();
      const auto rows = cli::cmd_bench_latency(bopts);
      cli::write_latency_csv(rows, std::cout);
    } else if (*stats) {
      std::cout << cli::cmd_stats(s_bank, s_snap, s_queries, s_seed,
                                  s_beam.config())
                       .dump(2)
                << '\n';
    }
  } catch (const DomainError& e) {
    return report_error(e.kind(), e.what(), 2);
  } catch (const IoError& e) {
    return report_error(e.kind(), e.what(), 4);
  } catch (const Error& e) {
    return report_error(e.kind(), e.what(), 3);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
