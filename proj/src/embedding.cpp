#include "clauseforge/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "clauseforge/binary_io.hpp"
#include "clauseforge/errors.hpp"
#include "clauseforge/hashing.hpp"

namespace clauseforge::embedding {

std::string EncoderSpec::describe() const {
  if (kind == EncoderKind::HashDeterministic) {
    return "hash-deterministic(dim=" + std::to_string(dim) + ",seed=" + std::to_string(seed) +
           ")";
  }
  return "external-file(" + file.string() + ",dim=" + std::to_string(dim) + ")";
}

EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "hash" || name == "hash-deterministic") return EncoderKind::HashDeterministic;
  if (name == "file" || name == "external-file") return EncoderKind::ExternalFile;
  throw ConfigError("unknown encoder kind: " + name);
}

std::vector<std::string> encoder_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Embedding encode(const EncoderSpec& spec, std::string_view text) {
  if (spec.kind != EncoderKind::HashDeterministic) {
    throw ConfigError("encode: external-file embeddings are loaded, not computed");
  }
  if (spec.dim == 0) throw ConfigError("encode: dim must be positive");
  const auto tokens = encoder_tokens(text);
  if (tokens.empty()) throw Error("unencodable text");

  std::vector<double> acc(spec.dim, 0.0);
  auto bump = [&](const std::string& feature) {
    const auto h = seeded_hash(feature, spec.seed);
    const auto bucket = static_cast<std::size_t>(h % spec.dim);
    acc[bucket] += ((h >> 40) & 1U) ? 1.0 : -1.0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    bump("u\x1f" + tokens[i]);
    if (i + 1 < tokens.size()) bump("b\x1f" + tokens[i] + "\x1f" + tokens[i + 1]);
  }

  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  Embedding out(spec.dim, 0.0F);
  // Colliding features can cancel out exactly; leave the zero vector then.
  if (norm > 0.0) {
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / norm);
  }
  return out;
}

EmbeddingStore::EmbeddingStore(std::uint32_t dim, std::string provenance)
    : dim_(dim), provenance_(std::move(provenance)) {
  if (dim == 0) throw ConfigError("embedding store dim must be positive");
}

void EmbeddingStore::add(std::string id, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw FormatError("dim mismatch for " + id + ": expected " + std::to_string(dim_) +
                      ", got " + std::to_string(vector.size()));
  }
  for (float v : vector) {
    if (!std::isfinite(v)) throw FormatError("non-finite component in embedding " + id);
  }
  auto [it, inserted] = index_.emplace(id, ids_.size());
  if (!inserted) throw FormatError("duplicate embedding id " + id);
  ids_.push_back(std::move(id));
  data_.insert(data_.end(), vector.begin(), vector.end());
}

std::span<const float> EmbeddingStore::get(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("missing embedding for " + id);
  return at(it->second);
}

std::span<const float> EmbeddingStore::at(std::size_t i) const {
  return {data_.data() + i * dim_, dim_};
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
  return dim_ == other.dim_ && ids_ == other.ids_ && data_.size() == other.data_.size() &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

void store_write(const EmbeddingStore& store, const std::filesystem::path& path) {
  if (store.empty()) throw Error("refusing to write an empty embedding store");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kCrebMagic, 4);
  binio::write_u32(out, kCrebVersion);
  binio::write_u32(out, store.dim());
  binio::write_u32(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    binio::write_bytes(out, store.ids()[i]);
    const auto v = store.at(i);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  }
  if (!out) throw Error("write failed: " + path.string());

  const auto sidecar = std::filesystem::path(path.string() + ".json");
  if (!store.provenance().empty()) {
    nlohmann::json meta = {{"provenance", store.provenance()},
                           {"dim", store.dim()},
                           {"count", store.size()}};
    std::ofstream(sidecar) << meta.dump(2) << '\n';
  } else {
    std::filesystem::remove(sidecar);
  }
}

EmbeddingStore store_read(const std::filesystem::path& path, std::uint32_t expected_dim,
                          std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kCrebMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad magic, not a CREB file");
  }
  const auto version = binio::read_u32(in, "version");
  if (version != kCrebVersion) {
    throw FormatError(path.string() + ": unsupported CREB version " + std::to_string(version));
  }
  const auto dim = binio::read_u32(in, "dim");
  if (dim == 0) throw FormatError(path.string() + ": dim must be positive");
  if (expected_dim != 0 && dim != expected_dim) {
    throw FormatError(path.string() + ": dim mismatch, expected " +
                      std::to_string(expected_dim) + ", file has " + std::to_string(dim));
  }
  const auto count = binio::read_u32(in, "count");

  EmbeddingStore store(dim);
  std::vector<float> buf(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto id = binio::read_bytes(in, "record id");
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(dim * sizeof(float))) {
      throw FormatError(path.string() + ": truncated file in record " + std::to_string(i));
    }
    if (warnings && std::all_of(buf.begin(), buf.end(), [](float v) { return v == 0.0F; })) {
      warnings->push_back("all-zero vector for " + id);
    }
    store.add(std::move(id), buf);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(path.string() + ": trailing bytes after " + std::to_string(count) +
                      " records");
  }

  const auto sidecar = std::filesystem::path(path.string() + ".json");
  if (std::filesystem::exists(sidecar)) {
    std::ifstream meta_in(sidecar);
    const auto meta = nlohmann::json::parse(meta_in, nullptr, false);
    if (meta.is_object() && meta.contains("provenance")) {
      store.set_provenance(meta["provenance"].get<std::string>());
    }
  }
  return store;
}

std::uint64_t creb_file_size(const EmbeddingStore& store) {
  std::uint64_t n = 16;
  for (const auto& id : store.ids()) n += 4 + id.size() + 4ULL * store.dim();
  return n;
}

EmbeddingStore embed_corpus(const EncoderSpec& spec,
                            const std::vector<corpus::Contract>& contracts) {
  EmbeddingStore store(spec.dim, spec.describe());
  for (const auto& c : contracts) {
    for (const auto& cl : c.clauses) {
      try {
        store.add(cl.clause_id, encode(spec, cl.text));
      } catch (const Error& e) {
        throw Error("clause " + cl.clause_id + ": " + e.what());
      }
    }
  }
  return store;
}

EmbeddingStore load_external(const EncoderSpec& spec,
                             const std::vector<corpus::Contract>& contracts) {
  auto store = store_read(spec.file, spec.dim);
  for (const auto& c : contracts) {
    for (const auto& cl : c.clauses) {
      if (!store.contains(cl.clause_id)) {
        throw Error("external embeddings lack clause " + cl.clause_id);
      }
    }
  }
  return store;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace clauseforge::embedding
