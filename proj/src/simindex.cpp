#include "clauseforge/simindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <unordered_set>

#include "clauseforge/binary_io.hpp"
#include "clauseforge/errors.hpp"

namespace clauseforge::simindex {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'H', 'N'};
constexpr std::uint32_t kVersion = 1;

double squared_l2(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void check_k(std::size_t k) {
  if (k < kMinK) {
    throw ConfigError("k must be at least " + std::to_string(kMinK) + ", got " +
                      std::to_string(k));
  }
}

}  // namespace

HnswIndex HnswIndex::build(std::span<const std::string> ids,
                           std::span<const std::vector<double>> vectors,
                           const IndexParams& params) {
  if (ids.size() != vectors.size()) throw ConfigError("ids and vectors differ in length");
  if (ids.empty()) throw ConfigError("cannot build an index over zero vectors");
  if (params.M < 2) throw ConfigError("M must be at least 2");
  const std::size_t dim = vectors.front().size();
  if (dim == 0) throw ConfigError("vectors must have positive dim");

  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

  HnswIndex index;
  index.dim_ = dim;
  index.params_ = params;
  index.ids_.reserve(ids.size());
  index.data_.reserve(ids.size() * dim);
  for (std::size_t i : order) {
    if (vectors[i].size() != dim) {
      throw ConfigError("dim mismatch for " + ids[i] + ": expected " + std::to_string(dim) +
                        ", got " + std::to_string(vectors[i].size()));
    }
    if (!index.ids_.empty() && index.ids_.back() == ids[i]) {
      throw ConfigError("duplicate id in index input: " + ids[i]);
    }
    index.ids_.push_back(ids[i]);
    index.data_.insert(index.data_.end(), vectors[i].begin(), vectors[i].end());
  }

  std::mt19937_64 rng(params.seed);
  const double ml = 1.0 / std::log(static_cast<double>(params.M));
  index.levels_.resize(ids.size());
  index.links_.resize(ids.size());
  for (std::uint32_t node = 0; node < ids.size(); ++node) {
    // u in (0, 1]
    const double u = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    const int level = static_cast<int>(std::floor(-std::log(u) * ml));
    index.levels_[node] = level;
    index.links_[node].resize(static_cast<std::size_t>(level) + 1);
    index.insert(node, level);
  }
  return index;
}

std::span<const double> HnswIndex::vector(std::size_t internal_id) const {
  return {data_.data() + internal_id * dim_, dim_};
}

const std::vector<std::uint32_t>& HnswIndex::links(std::uint32_t node, int level) const {
  return links_.at(node).at(static_cast<std::size_t>(level));
}

double HnswIndex::distance_to(std::span<const double> query, std::uint32_t node) const {
  return squared_l2(query.data(), data_.data() + std::size_t{node} * dim_, dim_);
}

double HnswIndex::distance_between(std::uint32_t a, std::uint32_t b) const {
  return squared_l2(data_.data() + std::size_t{a} * dim_, data_.data() + std::size_t{b} * dim_,
                    dim_);
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(std::span<const double> query,
                                                          std::uint32_t entry, std::size_t ef,
                                                          int level) const {
  std::unordered_set<std::uint32_t> visited{entry};
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
  std::priority_queue<Candidate> best;  // max-heap of the current ef closest
  const Candidate start{distance_to(query, entry), entry};
  frontier.push(start);
  best.push(start);

  while (!frontier.empty()) {
    const auto current = frontier.top();
    frontier.pop();
    if (best.top() < current && best.size() >= ef) break;
    for (std::uint32_t nb : links_[current.id][static_cast<std::size_t>(level)]) {
      if (!visited.insert(nb).second) continue;
      const Candidate cand{distance_to(query, nb), nb};
      if (best.size() < ef || cand < best.top()) {
        frontier.push(cand);
        best.push(cand);
        if (best.size() > ef) best.pop();
      }
    }
  }

  std::vector<Candidate> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

// Keeps a candidate only if it is closer to the base node than to every
// neighbor kept so far, which spreads links across directions.
std::vector<std::uint32_t> HnswIndex::select_neighbors(const std::vector<Candidate>& sorted,
                                                       std::size_t max_count) const {
  std::vector<std::uint32_t> kept;
  kept.reserve(max_count);
  for (const auto& cand : sorted) {
    if (kept.size() >= max_count) break;
    const bool diverse = std::all_of(kept.begin(), kept.end(), [&](std::uint32_t r) {
      return cand.distance < distance_between(cand.id, r);
    });
    if (diverse) kept.push_back(cand.id);
  }
  return kept;
}

void HnswIndex::insert(std::uint32_t node, int level) {
  if (max_level_ < 0) {
    entry_ = node;
    max_level_ = level;
    return;
  }
  const auto query = vector(node);
  std::uint32_t ep = entry_;
  for (int l = max_level_; l > level; --l) {
    ep = search_layer(query, ep, 1, l).front().id;
  }
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    const auto candidates = search_layer(query, ep, params_.ef_construction, l);
    const auto chosen = select_neighbors(candidates, params_.M);
    auto& own = links_[node][static_cast<std::size_t>(l)];
    own = chosen;
    for (std::uint32_t nb : chosen) {
      auto& theirs = links_[nb][static_cast<std::size_t>(l)];
      theirs.push_back(node);
      if (theirs.size() > max_links(l)) {
        std::vector<Candidate> pool;
        pool.reserve(theirs.size());
        for (std::uint32_t x : theirs) pool.push_back({distance_between(nb, x), x});
        std::sort(pool.begin(), pool.end());
        theirs = select_neighbors(pool, max_links(l));
      }
    }
    ep = candidates.front().id;
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = node;
  }
}

std::vector<Neighbor> HnswIndex::search(std::span<const double> query, std::size_t k,
                                        std::optional<std::string_view> exclude) const {
  check_k(k);
  if (ids_.empty()) throw Error("search on an empty index");
  if (query.size() != dim_) {
    throw ConfigError("query dim " + std::to_string(query.size()) + " does not match index dim " +
                      std::to_string(dim_));
  }
  std::uint32_t ep = entry_;
  for (int l = max_level_; l > 0; --l) ep = search_layer(query, ep, 1, l).front().id;
  // ef is fixed for every k <= ef_search - 1, so result lists for different
  // k share their prefix.
  const std::size_t ef = std::max<std::size_t>(params_.ef_search, k + 1);
  const auto found = search_layer(query, ep, ef, 0);

  std::vector<Neighbor> out;
  out.reserve(k);
  for (const auto& c : found) {
    if (out.size() == k) break;
    if (exclude && ids_[c.id] == *exclude) continue;
    out.push_back({ids_[c.id], c.distance});
  }
  return out;
}

void HnswIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, 4);
  binio::write_u32(out, kVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(dim_));
  binio::write_u32(out, params_.M);
  binio::write_u32(out, params_.ef_construction);
  binio::write_u32(out, params_.ef_search);
  out.write(reinterpret_cast<const char*>(&params_.seed), sizeof params_.seed);
  binio::write_u32(out, static_cast<std::uint32_t>(ids_.size()));
  binio::write_u32(out, entry_);
  binio::write_u32(out, static_cast<std::uint32_t>(max_level_));
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    binio::write_bytes(out, ids_[i]);
    binio::write_u32(out, static_cast<std::uint32_t>(levels_[i]));
    const auto v = vector(i);
    for (double x : v) binio::write_f64(out, x);
  }
  for (const auto& node_links : links_) {
    for (const auto& level_links : node_links) {
      binio::write_u32(out, static_cast<std::uint32_t>(level_links.size()));
      for (std::uint32_t nb : level_links) binio::write_u32(out, nb);
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

HnswIndex HnswIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(path.string() + ": not an index snapshot");
  }
  if (const auto v = binio::read_u32(in, "version"); v != kVersion) {
    throw FormatError(path.string() + ": unsupported index version " + std::to_string(v));
  }
  HnswIndex index;
  index.dim_ = binio::read_u32(in, "dim");
  index.params_.M = binio::read_u32(in, "M");
  index.params_.ef_construction = binio::read_u32(in, "ef_construction");
  index.params_.ef_search = binio::read_u32(in, "ef_search");
  index.params_.seed = binio::read_pod<std::uint64_t>(in, "seed");
  const auto count = binio::read_u32(in, "count");
  index.entry_ = binio::read_u32(in, "entry point");
  index.max_level_ = static_cast<int>(binio::read_u32(in, "max level"));
  if (count == 0 || index.dim_ == 0 || index.entry_ >= count) {
    throw FormatError(path.string() + ": inconsistent index header");
  }
  index.ids_.reserve(count);
  index.levels_.reserve(count);
  index.data_.reserve(std::size_t{count} * index.dim_);
  for (std::uint32_t i = 0; i < count; ++i) {
    index.ids_.push_back(binio::read_bytes(in, "id"));
    index.levels_.push_back(static_cast<int>(binio::read_u32(in, "level")));
    for (std::size_t d = 0; d < index.dim_; ++d) {
      index.data_.push_back(binio::read_pod<double>(in, "vector"));
    }
  }
  index.links_.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    index.links_[i].resize(static_cast<std::size_t>(index.levels_[i]) + 1);
    for (auto& level_links : index.links_[i]) {
      const auto n = binio::read_u32(in, "link count");
      level_links.resize(n);
      for (auto& nb : level_links) {
        nb = binio::read_u32(in, "link");
        if (nb >= count) throw FormatError(path.string() + ": link out of range");
      }
    }
  }
  return index;
}

std::vector<Neighbor> brute_force_search(std::span<const std::string> ids,
                                         std::span<const std::vector<double>> vectors,
                                         std::span<const double> query, std::size_t k,
                                         std::optional<std::string_view> exclude) {
  check_k(k);
  if (ids.empty()) throw Error("search on an empty index");
  std::vector<Neighbor> all;
  all.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (exclude && ids[i] == *exclude) continue;
    if (vectors[i].size() != query.size()) throw ConfigError("query dim mismatch");
    all.push_back({ids[i], squared_l2(vectors[i].data(), query.data(), query.size())});
  }
  const auto by_distance = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.contract_id < b.contract_id);
  };
  const auto take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    by_distance);
  all.resize(take);
  return all;
}

double recall(const std::vector<Neighbor>& approx, const std::vector<Neighbor>& exact) {
  if (exact.empty()) return 1.0;
  std::set<std::string_view> truth;
  for (const auto& n : exact) truth.insert(n.contract_id);
  std::size_t hit = 0;
  for (const auto& n : approx) hit += truth.count(n.contract_id);
  return static_cast<double>(hit) / static_cast<double>(exact.size());
}

}  // namespace clauseforge::simindex
