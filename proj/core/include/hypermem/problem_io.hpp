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

// Line-delimited JSON problem files and the trainer's loss-history CSV.
//
// Problem records, one JSON object per line:
//   {"id": "a", "feat": [0.1, ...], "g": "...", "s": "..."}   item
//   {"parent": "a", "child": "b"}                             hierarchy edge
//   {"parent": "a", "non_child": "c"}                         negative pair

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "hypermem/embed_trainer.hpp"

namespace hypermem {

EmbeddingProblem read_problem(std::istream& in);
EmbeddingProblem read_problem(const std::filesystem::path& path);

void write_problem(const EmbeddingProblem& problem, std::ostream& out);
void write_problem(const EmbeddingProblem& problem,
                   const std::filesystem::path& path);

/// Header: step,total,recon,dist,entail,norm,neg,satisfaction
void write_loss_history(const std::vector<LossRecord>& history,
                        std::ostream& out);

}  // namespace hypermem
