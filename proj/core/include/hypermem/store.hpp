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

// On-disk formats.
//
// Bank file:      "HMBANK" magic line, one text header line of key=value
//                 pairs, then a little-endian binary body of entry records.
// Snapshot file:  "HMSNAP" magic line, a text header naming the bank it was
//                 built from (by content hash) and the tree configuration,
//                 then a binary node table.
// Both headers carry a SHA-256 over the header fields and the body. Files are
// written to a temporary sibling and renamed into place.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "hypermem/memory_tree.hpp"

namespace hypermem {

inline constexpr std::uint32_t kBankFormatVersion = 1;
inline constexpr std::uint32_t kSnapshotFormatVersion = 1;

struct Bank {
  std::size_t dim = 0;
  Curvature curvature;
  double cone_K = 0.1;
  std::map<EntryId, MemoryEntry> entries;
};

/// SHA-256 (lower-case hex) of the canonical serialization of `bank`.
std::string bank_content_hash(const Bank& bank);

/// Writes the bank and returns its content hash. Throws ShapeError when an
/// entry does not match bank.dim or bank.curvature, IoError on I/O failure.
std::string save_bank(const Bank& bank, const std::filesystem::path& path);

struct LoadedBank {
  Bank bank;
  std::string content_hash;
};

/// Throws CorruptionError on a bad magic, header, truncation or hash
/// mismatch; ValidationError listing the ids of off-manifold embeddings.
LoadedBank load_bank(const std::filesystem::path& path);

/// One JSON object per entry: id, committed, g, s, a (hex) and z.
void write_bank_text(const Bank& bank, std::ostream& out);
Bank read_bank_text(std::istream& in, std::size_t dim, Curvature c,
                    double cone_K);

/// Writes the tree and returns the snapshot content hash.
std::string save_snapshot(const MemoryTree& tree, const std::string& bank_hash,
                          const std::filesystem::path& path);

/// Throws ReferenceError when the snapshot names a different bank,
/// CorruptionError on damaged files and ValidationError when the node table
/// is inconsistent with the bank (dangling ids, stale cached angles).
MemoryTree load_snapshot(const std::filesystem::path& path,
                         const LoadedBank& bank);

}  // namespace hypermem
