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

#include "hypermem/store.hpp"

#include <openssl/evp.h>

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "hypermem/errors.hpp"

namespace hypermem {

namespace {

constexpr std::string_view kBankMagic = "HMBANK\n";
constexpr std::string_view kSnapMagic = "HMSNAP\n";
constexpr std::size_t kMaxHeader = 4096;

// ---- little-endian body encoding -------------------------------------------

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) {
    if (s.size() > UINT32_MAX) throw ShapeError("field longer than 4 GiB");
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  const std::string& str() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>(v >> (8 * i)));
  }
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string bytes() {
    const std::uint32_t n = u32();
    return std::string(take(n));
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view take(std::size_t n) {
    if (data_.size() - pos_ < n) throw CorruptionError("file is truncated");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t get(int n) {
    const auto s = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i]))
           << (8 * i);
    }
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

// ---- hashing and text header -------------------------------------------------

std::string sha256_hex(std::string_view a, std::string_view b) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw IoError("sha256: cannot allocate context");
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, a.data(), a.size()) == 1 &&
                  EVP_DigestUpdate(ctx, b.data(), b.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw IoError("sha256: digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

using Fields = std::vector<std::pair<std::string, std::string>>;

std::string join_fields(const Fields& f) {
  std::string out;
  for (const auto& [k, v] : f) {
    if (!out.empty()) out += ' ';
    out += k + '=' + v;
  }
  return out;
}

std::map<std::string, std::string> parse_fields(std::string_view line) {
  std::map<std::string, std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw CorruptionError("malformed header field '" + tok + "'");
    }
    out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

const std::string& field(const std::map<std::string, std::string>& f,
                         const std::string& key) {
  auto it = f.find(key);
  if (it == f.end()) throw CorruptionError("header lacks '" + key + "'");
  return it->second;
}

double field_double(const std::map<std::string, std::string>& f,
                    const std::string& key) {
  const std::string& s = field(f, key);
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw CorruptionError("header field '" + key + "' is not a number");
  }
  return v;
}

std::uint64_t field_u64(const std::map<std::string, std::string>& f,
                        const std::string& key) {
  const std::string& s = field(f, key);
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw CorruptionError("header field '" + key + "' is not an integer");
  }
  return v;
}

// File = magic, header line ("<fields> sha256=<hex>\n"), body. The hash
// covers the header fields and the body.
std::string assemble(std::string_view magic, const Fields& fields,
                     const std::string& body, std::string* hash_out) {
  const std::string head = join_fields(fields);
  const std::string hash = sha256_hex(head, body);
  if (hash_out) *hash_out = hash;
  std::string out(magic);
  out += head + " sha256=" + hash + '\n';
  out += body;
  return out;
}

struct Parsed {
  std::map<std::string, std::string> fields;
  std::string hash;
  std::string_view body;
};

Parsed disassemble(std::string_view magic, std::string_view file) {
  if (file.substr(0, magic.size()) != magic) {
    throw CorruptionError("bad magic: not a " +
                          std::string(magic.substr(0, magic.size() - 1)) +
                          " file");
  }
  file.remove_prefix(magic.size());
  const auto nl = file.find('\n');
  if (nl == std::string_view::npos || nl > kMaxHeader) {
    throw CorruptionError("missing or oversized header line");
  }
  std::string_view line = file.substr(0, nl);
  const auto hpos = line.rfind(" sha256=");
  if (hpos == std::string_view::npos) {
    throw CorruptionError("header lacks a content hash");
  }
  Parsed p;
  p.hash = std::string(line.substr(hpos + 8));
  line = line.substr(0, hpos);
  p.fields = parse_fields(line);
  p.body = file.substr(nl + 1);
  if (sha256_hex(line, p.body) != p.hash) {
    throw CorruptionError("content hash mismatch");
  }
  return p;
}

void atomic_write(const std::filesystem::path& path, const std::string& data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ---- bank ------------------------------------------------------------------

Fields bank_fields(const Bank& b) {
  return {{"version", std::to_string(kBankFormatVersion)},
          {"dim", std::to_string(b.dim)},
          {"c", fmt_double(b.curvature.value())},
          {"K", fmt_double(b.cone_K)},
          {"count", std::to_string(b.entries.size())}};
}

std::string bank_body(const Bank& b) {
  Writer w;
  for (const auto& [id, e] : b.entries) {
    if (e.id != id) throw ShapeError("bank: entry key and id disagree");
    if (e.z.dim() != b.dim || !(e.z.curvature() == b.curvature)) {
      throw ShapeError("bank: entry " + std::to_string(id) +
                       " does not match the bank space");
    }
    w.u64(id);
    w.u8(e.committed ? 1 : 0);
    for (double v : e.z.coords()) w.f64(v);
    w.bytes(e.g);
    w.bytes(e.s);
    w.bytes(std::string_view(reinterpret_cast<const char*>(e.a.data()),
                             e.a.size()));
  }
  return w.str();
}

}  // namespace

std::string bank_content_hash(const Bank& bank) {
  return sha256_hex(join_fields(bank_fields(bank)), bank_body(bank));
}

std::string save_bank(const Bank& bank, const std::filesystem::path& path) {
  std::string hash;
  atomic_write(path, assemble(kBankMagic, bank_fields(bank), bank_body(bank),
                              &hash));
  return hash;
}

LoadedBank load_bank(const std::filesystem::path& path) {
  const std::string file = read_file(path);
  const Parsed p = disassemble(kBankMagic, file);
  if (field_u64(p.fields, "version") != kBankFormatVersion) {
    throw CorruptionError("unsupported bank format version " +
                          field(p.fields, "version"));
  }
  LoadedBank out;
  Bank& b = out.bank;
  b.dim = field_u64(p.fields, "dim");
  if (b.dim == 0 || b.dim > (1u << 20)) {
    throw CorruptionError("implausible bank dimension");
  }
  try {
    b.curvature = Curvature(field_double(p.fields, "c"));
  } catch (const DomainError& e) {
    throw CorruptionError(std::string("bad curvature: ") + e.what());
  }
  b.cone_K = field_double(p.fields, "K");
  const std::uint64_t count = field_u64(p.fields, "count");

  Reader r(p.body);
  std::vector<EntryId> bad;
  std::string first_problem;
  for (std::uint64_t i = 0; i < count; ++i) {
    const EntryId id = r.u64();
    const bool committed = r.u8() != 0;
    std::vector<double> coords(b.dim + 1);
    for (double& v : coords) v = r.f64();
    std::string g = r.bytes();
    std::string s = r.bytes();
    const std::string a = r.bytes();
    std::optional<LorentzPoint> z;
    try {
      z.emplace(std::move(coords), b.curvature);
    } catch (const Error& e) {
      if (first_problem.empty()) first_problem = e.what();
      bad.push_back(id);
      z.emplace(LorentzPoint::unchecked({1.0, 0.0}, b.curvature));
    }
    MemoryEntry e{id, std::move(*z), std::move(g), std::move(s),
                  std::vector<std::uint8_t>(a.begin(), a.end()), committed};
    if (!b.entries.emplace(id, std::move(e)).second) {
      throw CorruptionError("duplicate entry id " + std::to_string(id));
    }
  }
  if (!r.done()) throw CorruptionError("trailing bytes after the last entry");
  if (!bad.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < bad.size(); ++i) {
      ids += (i ? "," : "") + std::to_string(bad[i]);
    }
    throw ValidationError("off-manifold embeddings for ids [" + ids +
                          "]: " + first_problem);
  }
  out.content_hash = p.hash;
  return out;
}

void write_bank_text(const Bank& bank, std::ostream& out) {
  static constexpr char kHex[] = "0123456789abcdef";
  for (const auto& [id, e] : bank.entries) {
    std::string a;
    for (std::uint8_t byte : e.a) {
      a.push_back(kHex[byte >> 4]);
      a.push_back(kHex[byte & 15]);
    }
    nlohmann::ordered_json j;
    j["id"] = id;
    j["committed"] = e.committed;
    j["g"] = e.g;
    j["s"] = e.s;
    j["a"] = a;
    j["z"] = std::vector<double>(e.z.coords().begin(), e.z.coords().end());
    out << j.dump() << '\n';
  }
}

Bank read_bank_text(std::istream& in, std::size_t dim, Curvature c,
                    double cone_K) {
  Bank b{dim, c, cone_K, {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const EntryId id = j.at("id").get<EntryId>();
      std::vector<std::uint8_t> a;
      const std::string hex = j.value("a", std::string());
      if (hex.size() % 2 != 0) throw ValidationError("odd-length hex blob");
      for (std::size_t i = 0; i < hex.size(); i += 2) {
        a.push_back(static_cast<std::uint8_t>(
            std::stoul(hex.substr(i, 2), nullptr, 16)));
      }
      LorentzPoint z(j.at("z").get<std::vector<double>>(), c);
      if (z.dim() != dim) throw ShapeError("embedding dimension mismatch");
      MemoryEntry e{id,         std::move(z), j.value("g", std::string()),
                    j.value("s", std::string()), std::move(a),
                    j.value("committed", false)};
      if (!b.entries.emplace(id, std::move(e)).second) {
        throw ValidationError("duplicate id " + std::to_string(id));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("bank text line " + std::to_string(lineno) +
                            ": " + e.what());
    } catch (const std::invalid_argument&) {
      throw ValidationError("bank text line " + std::to_string(lineno) +
                            ": bad hex blob");
    } catch (const Error& e) {
      throw ValidationError("bank text line " + std::to_string(lineno) +
                            ": " + e.what());
    }
  }
  return b;
}

// ---- snapshot --------------------------------------------------------------

std::string save_snapshot(const MemoryTree& tree, const std::string& bank_hash,
                          const std::filesystem::path& path) {
  const TreeConfig& cfg = tree.config();
  const Fields fields{
      {"version", std::to_string(kSnapshotFormatVersion)},
      {"bank", bank_hash},
      {"dim", std::to_string(tree.dim())},
      {"c", fmt_double(tree.curvature().value())},
      {"K", fmt_double(cfg.cone.K)},
      {"eps_apex", fmt_double(cfg.cone.eps_apex)},
      {"convention", std::string(to_string(cfg.cone.convention))},
      {"tau_split", fmt_double(cfg.tau_split)},
      {"merge_eps", fmt_double(cfg.merge_eps)},
      {"dedup_eps", fmt_double(cfg.dedup_eps)},
      {"max_fanout", std::to_string(cfg.max_fanout)},
      {"max_leaf_entries", std::to_string(cfg.max_leaf_entries)},
      {"exhaustive_fallback", cfg.exhaustive_fallback ? "1" : "0"},
      {"kmeans_max_iters", std::to_string(cfg.kmeans_max_iters)},
      {"seed", std::to_string(cfg.seed)},
      {"nodes", std::to_string(tree.node_count())}};
  Writer w;
  for (NodeId id : tree.node_ids()) {
    const TreeNode& n = tree.node(id);
    w.u32(n.id);
    w.u8(n.parent ? 1 : 0);
    w.u32(n.parent.value_or(0));
    w.u64(n.depth);
    for (double v : n.centroid.coords()) w.f64(v);
    w.f64(n.half_angle);
    w.u8(n.abstraction ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(n.children.size()));
    for (NodeId ch : n.children) w.u32(ch);
    w.u32(static_cast<std::uint32_t>(n.entries.size()));
    for (EntryId e : n.entries) w.u64(e);
  }
  std::string hash;
  atomic_write(path, assemble(kSnapMagic, fields, w.str(), &hash));
  return hash;
}

MemoryTree load_snapshot(const std::filesystem::path& path,
                         const LoadedBank& bank) {
  const std::string file = read_file(path);
  const Parsed p = disassemble(kSnapMagic, file);
  const auto& f = p.fields;
  if (field_u64(f, "version") != kSnapshotFormatVersion) {
    throw CorruptionError("unsupported snapshot format version " +
                          field(f, "version"));
  }
  if (field(f, "bank") != bank.content_hash) {
    throw ReferenceError("snapshot was built from bank " + field(f, "bank") +
                         ", not " + bank.content_hash);
  }
  const std::size_t dim = field_u64(f, "dim");
  const double c = field_double(f, "c");
  if (dim != bank.bank.dim || c != bank.bank.curvature.value()) {
    throw ValidationError("snapshot space does not match the bank");
  }

  TreeConfig cfg;
  try {
    cfg.cone.K = field_double(f, "K");
    cfg.cone.eps_apex = field_double(f, "eps_apex");
    cfg.cone.convention = parse_angle_convention(field(f, "convention"));
  } catch (const DomainError& e) {
    throw CorruptionError(e.what());
  }
  cfg.tau_split = field_double(f, "tau_split");
  cfg.merge_eps = field_double(f, "merge_eps");
  cfg.dedup_eps = field_double(f, "dedup_eps");
  cfg.max_fanout = field_u64(f, "max_fanout");
  cfg.max_leaf_entries = field_u64(f, "max_leaf_entries");
  cfg.exhaustive_fallback = field_u64(f, "exhaustive_fallback") != 0;
  cfg.kmeans_max_iters = field_u64(f, "kmeans_max_iters");
  cfg.seed = field_u64(f, "seed");
  const std::uint64_t count = field_u64(f, "nodes");

  Reader r(p.body);
  std::vector<MemoryTree::NodeRecord> records;
  std::map<EntryId, MemoryEntry> used;
  for (std::uint64_t i = 0; i < count; ++i) {
    MemoryTree::NodeRecord rec;
    rec.id = r.u32();
    const bool has_parent = r.u8() != 0;
    const NodeId parent = r.u32();
    if (has_parent) rec.parent = parent;
    rec.depth = r.u64();
    std::vector<double> centroid(dim + 1);
    for (double& v : centroid) v = r.f64();
    rec.centroid = std::move(centroid);
    rec.half_angle = r.f64();
    rec.abstraction = r.u8() != 0;
    const std::uint32_t nc = r.u32();
    if (nc > p.body.size()) throw CorruptionError("implausible child count");
    for (std::uint32_t k = 0; k < nc; ++k) rec.children.push_back(r.u32());
    const std::uint32_t ne = r.u32();
    if (ne > p.body.size()) throw CorruptionError("implausible entry count");
    for (std::uint32_t k = 0; k < ne; ++k) {
      const EntryId e = r.u64();
      auto it = bank.bank.entries.find(e);
      if (it == bank.bank.entries.end()) {
        throw ValidationError("snapshot node " + std::to_string(rec.id) +
                              " references entry " + std::to_string(e) +
                              " missing from the bank");
      }
      used.emplace(e, it->second);
      rec.entries.push_back(e);
    }
    records.push_back(std::move(rec));
  }
  if (!r.done()) throw CorruptionError("trailing bytes after the node table");
  try {
    return MemoryTree::from_records(dim, bank.bank.curvature, cfg,
                                    std::move(used), records);
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(std::string("snapshot is inconsistent: ") + e.what());
  }
}

}  // namespace hypermem
