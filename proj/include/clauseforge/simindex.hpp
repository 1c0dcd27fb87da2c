#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clauseforge::simindex {

/// Paper floor: at least two neighbors so a self-match can be dropped.
inline constexpr std::size_t kMinK = 2;
inline constexpr std::size_t kDefaultK = 6;

struct IndexParams {
  std::uint32_t M = 16;
  std::uint32_t ef_construction = 200;
  std::uint32_t ef_search = 64;
  std::uint64_t seed = 42;
};

/// A search hit. `distance` is the squared L2 distance.
struct Neighbor {
  std::string contract_id;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// Hierarchical navigable small-world graph over contract vectors.
///
/// Nodes are inserted in ascending contract_id order and levels are drawn
/// from a seeded generator, so the same input always yields the same graph.
/// Immutable after build; concurrent searches are safe.
class HnswIndex {
 public:
  static HnswIndex build(std::span<const std::string> ids,
                         std::span<const std::vector<double>> vectors,
                         const IndexParams& params = {});

  /// Up to k nearest ids by ascending distance (ties by id), never `exclude`.
  std::vector<Neighbor> search(std::span<const double> query, std::size_t k,
                               std::optional<std::string_view> exclude = std::nullopt) const;

  void save(const std::filesystem::path& path) const;
  static HnswIndex load(const std::filesystem::path& path);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const IndexParams& params() const { return params_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> vector(std::size_t internal_id) const;
  int max_level() const { return max_level_; }
  /// Adjacency of a node at a level, for inspection and tests.
  const std::vector<std::uint32_t>& links(std::uint32_t node, int level) const;

 private:
  struct Candidate {
    double distance;
    std::uint32_t id;
    bool operator<(const Candidate& o) const {
      return distance < o.distance || (distance == o.distance && id < o.id);
    }
    bool operator>(const Candidate& o) const { return o < *this; }
  };

  double distance_to(std::span<const double> query, std::uint32_t node) const;
  double distance_between(std::uint32_t a, std::uint32_t b) const;
  std::vector<Candidate> search_layer(std::span<const double> query, std::uint32_t entry,
                                      std::size_t ef, int level) const;
  std::vector<std::uint32_t> select_neighbors(const std::vector<Candidate>& sorted,
                                              std::size_t max_count) const;
  void insert(std::uint32_t node, int level);
  std::size_t max_links(int level) const { return level == 0 ? 2 * params_.M : params_.M; }

  std::size_t dim_ = 0;
  IndexParams params_;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // [node][level]
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
};

/// Exact k-NN by linear scan, same result contract as HnswIndex::search.
std::vector<Neighbor> brute_force_search(std::span<const std::string> ids,
                                         std::span<const std::vector<double>> vectors,
                                         std::span<const double> query, std::size_t k,
                                         std::optional<std::string_view> exclude = std::nullopt);

/// |approx ∩ exact| / |exact| over contract ids.
double recall(const std::vector<Neighbor>& approx, const std::vector<Neighbor>& exact);

}  // namespace clauseforge::simindex
