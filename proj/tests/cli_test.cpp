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

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "../tools/commands.hpp"
#include "hypermem/errors.hpp"
#include "hypermem/store.hpp"
#include "hypermem/synth.hpp"

namespace hypermem::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hm_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  static std::vector<json> lines(const std::string& text) {
    std::vector<json> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(json::parse(line));
    }
    return out;
  }

  // Runs the real executable; returns its exit code.
  int run(const std::string& args) {
    const std::string cmd = std::string("\"") + HYPERMEM_CLI_BINARY + "\" " +
                            args + " > \"" + (dir_ / "stdout").string() +
                            "\" 2> \"" + (dir_ / "stderr").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  // A small trained bank and its snapshot.
  std::pair<fs::path, fs::path> small_bank() {
    TaxonomySpec spec;
    spec.branching = {2, 3};
    spec.entries_per_leaf = 2;
    spec.feature_dim = 3;
    cmd_synth(spec, dir_);
    TrainerConfig cfg = taxonomy_preset(1);
    cfg.dim = 6;
    cfg.steps = 300;
    const auto cone = ConeParams::for_curvature(Curvature(1.0), 0.1,
                                                AngleConvention::kPiMinus);
    cmd_train_embed(dir_ / "problem.jsonl", cfg, cone, dir_ / "bank.hmb");
    cmd_build(dir_ / "bank.hmb", TreeConfig{}, dir_ / "tree.hms");
    return {dir_ / "bank.hmb", dir_ / "tree.hms"};
  }

  fs::path dir_;
};

TEST_F(CliTest, SynthSingleLevelHasOnlyRootEdges) {
  TaxonomySpec spec;
  spec.branching = {4};
  cmd_synth(spec, dir_);
  const auto recs = lines(slurp(dir_ / "problem.jsonl"));
  std::size_t items = 0, edges = 0;
  for (const auto& r : recs) {
    if (r.contains("id")) ++items;
    if (r.contains("child")) {
      ++edges;
      EXPECT_EQ(r.at("parent"), "t");
    }
  }
  EXPECT_EQ(items, 5u);
  EXPECT_EQ(edges, 4u);
}

TEST_F(CliTest, SynthDefaultHas64LeafGroupsAndIsByteDeterministic) {
  cmd_synth(TaxonomySpec{}, dir_ / "a");
  cmd_synth(TaxonomySpec{}, dir_ / "b");
  EXPECT_EQ(slurp(dir_ / "a/problem.jsonl"), slurp(dir_ / "b/problem.jsonl"));
  EXPECT_EQ(slurp(dir_ / "a/ground_truth.jsonl"),
            slurp(dir_ / "b/ground_truth.jsonl"));
  std::size_t leaves = 0;
  for (const auto& r : lines(slurp(dir_ / "a/ground_truth.jsonl"))) {
    leaves += r.at("path").size() == 4;
  }
  EXPECT_EQ(leaves, 64u);
  TaxonomySpec bad;
  bad.branching = {};
  EXPECT_THROW(cmd_synth(bad, dir_ / "c"), DomainError);
}

TEST_F(CliTest, TrainWritesBankAndLossCsv) {
  TaxonomySpec spec;
  spec.branching = {2, 2};
  cmd_synth(spec, dir_);
  TrainerConfig cfg = taxonomy_preset(0);
  cfg.dim = 4;
  cfg.steps = 50;
  const auto s = cmd_train_embed(dir_ / "problem.jsonl", cfg, ConeParams{},
                                 dir_ / "bank.hmb", dir_ / "loss.csv");
  EXPECT_EQ(s.entries, 7u);
  const auto lb = load_bank(dir_ / "bank.hmb");
  EXPECT_EQ(lb.content_hash, s.bank_hash);
  EXPECT_EQ(lb.bank.entries.size(), 7u);
  EXPECT_EQ(lb.bank.dim, 4u);
  std::istringstream csv(slurp(dir_ / "loss.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 51u);
}

TEST_F(CliTest, BuildIsDeterministicAndHandlesEmptyBanks) {
  Bank empty;
  empty.dim = 3;
  save_bank(empty, dir_ / "empty.hmb");
  const auto e = cmd_build(dir_ / "empty.hmb", TreeConfig{}, dir_ / "empty.hms");
  EXPECT_EQ(e.nodes, 1u);
  EXPECT_EQ(e.max_depth, 0u);

  const auto [bank, snap] = small_bank();
  const auto a = cmd_build(bank, TreeConfig{}, dir_ / "a.hms");
  const auto b = cmd_build(bank, TreeConfig{}, dir_ / "b.hms");
  EXPECT_EQ(a.snapshot_hash, b.snapshot_hash);
  EXPECT_EQ(slurp(dir_ / "a.hms"), slurp(dir_ / "b.hms"));
  EXPECT_EQ(a.report.drained, 1u + 2 + 6 + 12);
}

TEST_F(CliTest, QueryStoredEntryIsSelfHit) {
  // Planted geometry keeps every entry inside its node's cone, so the
  // default beam reaches it. Weakly trained banks do not promise that.
  Bank b;
  b.dim = 6;
  b.entries = make_planted_bank(PlantedBankSpec{{2, 4}, 8, 6}).entries;
  save_bank(b, dir_ / "planted.hmb");
  cmd_build(dir_ / "planted.hmb", TreeConfig{}, dir_ / "planted.hms");
  for (EntryId id : {0ull, 17ull, 40ull}) {
    QuerySpec q;
    q.entry = id;
    std::ostringstream out;
    cmd_query(dir_ / "planted.hmb", dir_ / "planted.hms", q, out);
    const auto recs = lines(out.str());
    ASSERT_FALSE(recs.empty());
    EXPECT_EQ(recs[0].at("query_id"), "entry:" + std::to_string(id));
    EXPECT_EQ(recs[0].at("entry_id"), id);
    EXPECT_EQ(recs[0].at("rank"), 1);
    EXPECT_EQ(recs[0].at("similarity"), 1.0);
    EXPECT_FALSE(recs[0].contains("source"));
  }
}

TEST_F(CliTest, FlatBaselineAndUnlimitedBeamAgree) {
  const auto [bank, snap] = small_bank();
  // Two query points from a coords file: one with n, one with n+1 numbers.
  {
    std::ofstream f(dir_ / "q.txt");
    f << "0.1 0.2 0.0 -0.3 0.5 0.1\n";
    f << std::setprecision(17) << std::sqrt(1.0 + 0.04) << " 0.2 0 0 0 0 0\n";
  }
  QuerySpec q;
  q.coords_file = dir_ / "q.txt";
  q.beam.beam_width = kUnlimitedBeam;
  q.beam.use_cone_filter = false;
  q.beam.top_k = 6;
  q.flat_baseline = true;
  std::ostringstream out;
  cmd_query(bank, snap, q, out);
  std::map<std::string, std::vector<std::uint64_t>> by;
  for (const auto& r : lines(out.str())) {
    by[r.at("query_id").get<std::string>() + "/" + r.at("source").get<std::string>()]
        .push_back(r.at("entry_id"));
  }
  ASSERT_EQ(by.size(), 4u);
  EXPECT_EQ(by["q0/tree"], by["q0/flat"]);
  EXPECT_EQ(by["q1/tree"], by["q1/flat"]);
  EXPECT_EQ(by["q0/tree"].size(), 6u);
}

TEST_F(CliTest, QueryErrors) {
  const auto [bank, snap] = small_bank();
  QuerySpec q;
  std::ostringstream out;
  EXPECT_THROW(cmd_query(bank, snap, q, out), DomainError);
  q.entry = 12345;
  EXPECT_THROW(cmd_query(bank, snap, q, out), LookupError);
  {
    std::ofstream f(dir_ / "bad.txt");
    f << "1 2\n";
  }
  QuerySpec c;
  c.coords_file = dir_ / "bad.txt";
  EXPECT_THROW(cmd_query(bank, snap, c, out), ShapeError);
}

TEST_F(CliTest, BenchSmokeRunAndCsv) {
  BenchOptions o;
  o.sizes = {1000};
  o.queries = 20;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = cmd_bench_latency(o);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 60.0);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].n, 1000u);
  EXPECT_GT(rows[0].tree_mean, 0.0);
  EXPECT_LE(rows[0].tree_p50, rows[0].tree_p95);
  EXPECT_LE(rows[0].flat_p50, rows[0].flat_p95);
  EXPECT_GT(rows[0].visited_mean, 0.0);
  std::ostringstream csv;
  write_latency_csv(rows, csv);
  std::istringstream in(csv.str());
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  EXPECT_EQ(l1.rfind("# hypermem bench-latency v1", 0), 0u);
  EXPECT_EQ(l2, "N,tree_mean,tree_p50,tree_p95,flat_mean,flat_p50,flat_p95,"
                "visited_nodes,build_seconds");
  EXPECT_EQ(l3.rfind("1000,", 0), 0u);
}

TEST_F(CliTest, BenchValidatesOptions) {
  BenchOptions o;
  o.sizes = {5000, 1000};
  EXPECT_THROW(cmd_bench_latency(o), DomainError);
  o.sizes = {1000};
  o.warmup = 4;
  EXPECT_THROW(cmd_bench_latency(o), DomainError);
  o.sizes = {};
  o.warmup = 5;
  EXPECT_THROW(cmd_bench_latency(o), DomainError);
}

TEST(LogLogSlopeTest, RecoversPowerLaws) {
  const std::vector<double> x{1e3, 5e3, 2.5e4, 1e5};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.5));
  EXPECT_NEAR(loglog_slope(x, y), 1.5, 1e-12);
  EXPECT_THROW(loglog_slope({1.0}, {1.0}), DomainError);
}

TEST_F(CliTest, StatsDocument) {
  const auto [bank, snap] = small_bank();
  const auto j = cmd_stats(bank, snap, 20, 1, BeamConfig{});
  EXPECT_EQ(j.at("version"), kStatsVersion);
  EXPECT_EQ(j.at("entry_count"), 21);
  EXPECT_TRUE(j.at("per_depth").is_array());
  EXPECT_TRUE(j.at("icicle").is_array());
  EXPECT_EQ(j.at("visit_queries"), 20);
  EXPECT_TRUE(j.at("visits_per_depth").is_array());
  const auto k = cmd_stats(bank, snap, 0, 1, BeamConfig{});
  EXPECT_FALSE(k.contains("visits_per_depth"));
}

TEST_F(CliTest, ExecutableExitCodesAndStructuredErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(json::parse(slurp(dir_ / "stderr")).at("error"), "usage");
  EXPECT_EQ(run("build --bank /nonexistent.hmb --out x.hms"), 4);
  EXPECT_EQ(json::parse(slurp(dir_ / "stderr")).at("error"), "io");

  const auto [bank, snap] = small_bank();
  const std::string base =
      "query --bank \"" + bank.string() + "\" --snapshot \"" + snap.string() + "\" ";
  EXPECT_EQ(run(base + "--entry 3"), 0);
  EXPECT_EQ(lines(slurp(dir_ / "stdout"))[0].at("entry_id"), 3);
  EXPECT_EQ(run(base + "--entry 999"), 3);
  EXPECT_EQ(json::parse(slurp(dir_ / "stderr")).at("error"), "lookup");
  EXPECT_EQ(run(base + "--entry 3 --beam 0"), 2);
  EXPECT_EQ(run(base + "--entry 3 --beam inf --no-cone --baseline flat"), 0);

  // Config file supplies defaults; HYPERMEM_CONFIG points at it.
  {
    std::ofstream f(dir_ / "cfg.toml");
    f << "[query]\ntop-k = 2\n";
  }
  const std::string cfg = (dir_ / "cfg.toml").string();
  EXPECT_EQ(run("--config \"" + cfg + "\" " + base + "--entry 3"), 0);
  EXPECT_EQ(lines(slurp(dir_ / "stdout")).size(), 2u);
  ::setenv("HYPERMEM_CONFIG", cfg.c_str(), 1);
  EXPECT_EQ(run(base + "--entry 3"), 0);
  ::unsetenv("HYPERMEM_CONFIG");
  EXPECT_EQ(lines(slurp(dir_ / "stdout")).size(), 2u);
}

}  // namespace
}  // namespace hypermem::cli
