#pragma once

#include "nbrenc/matrix.hpp"
#include "nbrenc/neighbors/kdtree.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace nbrenc::neighbors {

// Distance reported by neighborhood functions that have no metric.
inline constexpr double kNoDistance = -1.0;

struct NeighborEntry {
  std::size_t neighbor = 0;
  std::size_t slot = 0;
  double distance = kNoDistance;
  bool operator==(const NeighborEntry&) const = default;
};

// Output of every neighborhood function: per sample, the (neighbor, slot)
// pairs to reconstruct. A sample with no entries is isolated and trains
// against itself.
struct NeighborAssignment {
  std::size_t slot_count = 1;
  std::vector<std::vector<NeighborEntry>> entries;

  std::size_t size() const { return entries.size(); }
  bool isolated(std::size_t sample) const { return entries.at(sample).empty(); }
  std::size_t isolated_count() const;

  // Throws ContractError on self-assignment, out-of-range index or slot.
  void validate() const;

  bool operator==(const NeighborAssignment&) const = default;
};

// Fraction of samples whose entry list differs between two assignments.
double change_fraction(const NeighborAssignment& before, const NeighborAssignment& after);

// Dimension subsets; slot s of the result uses subspaces[s].
struct SubspaceSpec {
  std::vector<std::vector<std::size_t>> subspaces;
};

// group id -> member sample indices in file order.
struct SideInfoGroups {
  std::map<std::string, std::vector<std::size_t>> groups;
};

// Maps an n×d batch to its n×m representation.
using EncoderFn = std::function<DenseMatrix(const DenseMatrix&)>;

// Each sample's `proximity`-th nearest neighbor (1 = nearest), self excluded.
NeighborAssignment simple_neighbors(const DenseMatrix& data, std::size_t proximity);

// The k nearest neighbors as k slots, slot r holding rank r+1.
NeighborAssignment nearest_k_neighbors(const DenseMatrix& data, std::size_t k);

// simple_neighbors over encoder(data); indices refer to the original rows.
NeighborAssignment feature_space_neighbors(const DenseMatrix& data, const EncoderFn& encoder,
                                           std::size_t proximity);

// One slot per subspace: nearest neighbor under the distance restricted to
// that dimension subset.
NeighborAssignment subspace_neighbors(const DenseMatrix& data, const SubspaceSpec& spec);

// Samples i and j are neighbors when 0 < |i - j| < window. Slots run over the
// signed offsets -(window-1)..-1, +1..+(window-1) in that order.
NeighborAssignment temporal_neighbors(std::size_t n, std::size_t window);

// Per group, a seeded representative becomes every other member's neighbor;
// the representative itself points at a seeded draw among the others.
// Samples outside any group of size >= 2 are isolated.
NeighborAssignment side_info_neighbors(const SideInfoGroups& groups, std::size_t n,
                                       std::uint64_t seed);

// `group_id<TAB>sample_index` per line; `#` starts a comment.
SideInfoGroups load_side_info_groups(const std::filesystem::path& path);

}  // namespace nbrenc::neighbors
