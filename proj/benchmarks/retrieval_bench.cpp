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

// Tree beam search against the exact flat scan on balanced banks.

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "hypermem/memory_tree.hpp"
#include "hypermem/retrieval.hpp"
#include "hypermem/synth.hpp"

namespace {

using namespace hypermem;

constexpr std::size_t kDim = 16;

struct Fixture {
  std::map<EntryId, MemoryEntry> bank;
  std::unique_ptr<MemoryTree> tree;
  std::unique_ptr<TreeIndex> index;
  std::unique_ptr<FlatIndex> flat;
  std::vector<LorentzPoint> queries;
};

// Built once per size; a 100k build takes about a minute.
const Fixture& fixture(std::size_t n) {
  static std::map<std::size_t, std::unique_ptr<Fixture>> cache;
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<Fixture>();
    slot->bank = make_balanced_bank(n, kDim, 0);
    TreeConfig cfg;
    cfg.exhaustive_fallback = false;
    slot->tree = std::make_unique<MemoryTree>(kDim, Curvature(1.0), cfg);
    UnconsolidatedPool pool;
    for (const auto& [id, e] : slot->bank) pool.append(e);
    consolidate(*slot->tree, pool);
    slot->index = std::make_unique<TreeIndex>(*slot->tree);
    slot->flat = std::make_unique<FlatIndex>(slot->bank);
    slot->queries = make_queries(slot->bank, 256, 0.05, 1);
  }
  return *slot;
}

void BM_TreeBeamSearch(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
  const BeamConfig cfg;
  std::size_t i = 0;
  for (auto _ : state) {
    auto r = f.index->search(f.queries[i++ % f.queries.size()], cfg);
    benchmark::DoNotOptimize(r.hits.data());
  }
  state.SetComplexityN(state.range(0));
}

void BM_FlatScan(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<std::size_t>(state.range(0)));
  std::size_t i = 0;
  for (auto _ : state) {
    auto hits = f.flat->knn(f.queries[i++ % f.queries.size()], 5);
    benchmark::DoNotOptimize(hits.data());
  }
  state.SetComplexityN(state.range(0));
}

BENCHMARK(BM_TreeBeamSearch)
    ->Arg(1000)->Arg(5000)->Arg(25000)->Arg(100000)
    ->Unit(benchmark::kMicrosecond)
    ->Complexity();
BENCHMARK(BM_FlatScan)
    ->Arg(1000)->Arg(5000)->Arg(25000)->Arg(100000)
    ->Unit(benchmark::kMicrosecond)
    ->Complexity(benchmark::oN);

}  // namespace
