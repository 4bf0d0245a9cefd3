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

#include "hypermem/problem_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hypermem/errors.hpp"

namespace hypermem {

using nlohmann::json;

EmbeddingProblem read_problem(std::istream& in) {
  EmbeddingProblem problem;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("problem line " + std::to_string(lineno) + ": " +
                            e.what());
    }
    try {
      if (rec.contains("id")) {
        EmbeddingItem item;
        item.id = rec.at("id").get<std::string>();
        if (rec.contains("feat") && !rec.at("feat").is_null()) {
          item.feat = rec.at("feat").get<std::vector<double>>();
        }
        item.g = rec.value("g", "");
        item.s = rec.value("s", "");
        problem.items.push_back(std::move(item));
      } else if (rec.contains("parent") && rec.contains("child")) {
        problem.parent_child_edges.emplace_back(
            rec.at("parent").get<std::string>(), rec.at("child").get<std::string>());
      } else if (rec.contains("parent") && rec.contains("non_child")) {
        problem.negatives.emplace_back(rec.at("parent").get<std::string>(),
                                       rec.at("non_child").get<std::string>());
      } else {
        throw ValidationError("problem line " + std::to_string(lineno) +
                              ": unrecognised record");
      }
    } catch (const json::exception& e) {
      throw ValidationError("problem line " + std::to_string(lineno) + ": " +
                            e.what());
    }
  }
  problem.validate();
  return problem;
}

EmbeddingProblem read_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open problem file " + path.string());
  return read_problem(in);
}

void write_problem(const EmbeddingProblem& problem, std::ostream& out) {
  for (const auto& item : problem.items) {
    json rec = {{"id", item.id}};
    if (item.feat) rec["feat"] = *item.feat;
    if (!item.g.empty()) rec["g"] = item.g;
    if (!item.s.empty()) rec["s"] = item.s;
    out << rec.dump() << '\n';
  }
  for (const auto& [p, c] : problem.parent_child_edges) {
    out << json{{"parent", p}, {"child", c}}.dump() << '\n';
  }
  for (const auto& [p, n] : problem.negatives) {
    out << json{{"parent", p}, {"non_child", n}}.dump() << '\n';
  }
}

void write_problem(const EmbeddingProblem& problem,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write problem file " + path.string());
  write_problem(problem, out);
}

void write_loss_history(const std::vector<LossRecord>& history,
                        std::ostream& out) {
  out << "step,total,recon,dist,entail,norm,neg,satisfaction\n";
  out << std::setprecision(17);
  for (const auto& r : history) {
    out << r.step << ',' << r.loss.total << ',' << r.loss.recon << ','
        << r.loss.dist << ',' << r.loss.entail << ',' << r.loss.norm << ','
        << r.loss.neg << ',' << r.satisfaction << '\n';
  }
}

}  // namespace hypermem
