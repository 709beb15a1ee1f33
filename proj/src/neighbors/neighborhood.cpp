#include "nbrenc/neighbors/neighborhood.hpp"

#include "nbrenc/errors.hpp"

#include <string>

namespace nbrenc::neighbors {

std::size_t NeighborAssignment::isolated_count() const {
  std::size_t count = 0;
  for (const auto& e : entries) count += e.empty() ? 1 : 0;
  return count;
}

void NeighborAssignment::validate() const {
  const std::size_t n = entries.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (const NeighborEntry& e : entries[i]) {
      if (e.neighbor == i) throw ContractError("sample " + std::to_string(i) + " assigned to itself");
      if (e.neighbor >= n) throw ContractError("neighbor index out of range for sample " + std::to_string(i));
      if (e.slot >= slot_count) throw ContractError("slot out of range for sample " + std::to_string(i));
    }
  }
}

double change_fraction(const NeighborAssignment& before, const NeighborAssignment& after) {
  if (before.size() != after.size()) throw ContractError("assignments cover different sample counts");
  if (before.size() == 0) return 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& a = before.entries[i];
    const auto& b = after.entries[i];
    bool same = a.size() == b.size();
    for (std::size_t j = 0; same && j < a.size(); ++j) {
      same = a[j].neighbor == b[j].neighbor && a[j].slot == b[j].slot;
    }
    changed += same ? 0 : 1;
  }
  return static_cast<double>(changed) / static_cast<double>(before.size());
}

NeighborAssignment simple_neighbors(const DenseMatrix& data, std::size_t proximity) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (proximity < 1 || n < 2 || proximity > n - 1) {
    throw InputError("proximity " + std::to_string(proximity) + " out of range for " +
                     std::to_string(n) + " samples");
  }
  const auto found = all_knn(data, proximity);
  NeighborAssignment out;
  out.slot_count = 1;
  out.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Neighbor nb = found[i].back();
    out.entries[i].push_back(NeighborEntry{nb.index, 0, nb.distance});
  }
  return out;
}

NeighborAssignment nearest_k_neighbors(const DenseMatrix& data, std::size_t k) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (k < 1 || n < 2 || k > n - 1) {
    throw InputError("k=" + std::to_string(k) + " out of range for " + std::to_string(n) + " samples");
  }
  const auto all = all_knn(data, k);
  NeighborAssignment out;
  out.slot_count = k;
  out.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& found = all[i];
    for (std::size_t r = 0; r < found.size(); ++r) {
      out.entries[i].push_back(NeighborEntry{found[r].index, r, found[r].distance});
    }
  }
  return out;
}

NeighborAssignment feature_space_neighbors(const DenseMatrix& data, const EncoderFn& encoder,
                                           std::size_t proximity) {
  const DenseMatrix encoded = encoder(data);
  if (encoded.rows() != data.rows()) {
    throw ContractError("encoder returned " + std::to_string(encoded.rows()) + " rows for " +
                        std::to_string(data.rows()) + " samples");
  }
  if (!encoded.allFinite()) throw TrainingError("encoder produced non-finite values");
  return simple_neighbors(encoded, proximity);
}

NeighborAssignment subspace_neighbors(const DenseMatrix& data, const SubspaceSpec& spec) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (spec.subspaces.empty()) throw InputError("subspace spec lists no subspaces");
  for (std::size_t s = 0; s < spec.subspaces.size(); ++s) {
    if (spec.subspaces[s].empty()) throw InputError("subspace " + std::to_string(s) + " is empty");
    for (std::size_t dim : spec.subspaces[s]) {
      if (dim >= d) {
        throw InputError("subspace " + std::to_string(s) + " names dimension " + std::to_string(dim) +
                         " of " + std::to_string(d));
      }
    }
  }
  if (n < 2) throw InputError("subspace neighbors need at least 2 samples");

  NeighborAssignment out;
  out.slot_count = spec.subspaces.size();
  out.entries.resize(n);
  for (std::size_t s = 0; s < spec.subspaces.size(); ++s) {
    const auto& dims = spec.subspaces[s];
    DenseMatrix projected(data.rows(), static_cast<Eigen::Index>(dims.size()));
    for (std::size_t c = 0; c < dims.size(); ++c) {
      projected.col(static_cast<Eigen::Index>(c)) = data.col(static_cast<Eigen::Index>(dims[c]));
    }
    const auto found = all_knn(projected, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const Neighbor nb = found[i].front();
      out.entries[i].push_back(NeighborEntry{nb.index, s, nb.distance});
    }
  }
  return out;
}

NeighborAssignment temporal_neighbors(std::size_t n, std::size_t window) {
  if (window < 1) throw InputError("temporal window must be >= 1");
  NeighborAssignment out;
  const std::size_t reach = window - 1;
  out.slot_count = reach == 0 ? 1 : 2 * reach;
  out.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t off = reach; off >= 1; --off) {
      if (i >= off) out.entries[i].push_back(NeighborEntry{i - off, reach - off, kNoDistance});
    }
    for (std::size_t off = 1; off <= reach; ++off) {
      if (i + off < n) out.entries[i].push_back(NeighborEntry{i + off, reach + off - 1, kNoDistance});
    }
  }
  return out;
}

}  // namespace nbrenc::neighbors
