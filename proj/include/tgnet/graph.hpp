#pragma once

#include <vector>

namespace tgnet {

// Symmetric adjacency over region nodes. Neighbor lists are kept sorted by
// construction, but consumers must not rely on the order: aggregation sorts
// indices before reducing so results are independent of list permutation.
struct RegionGraph {
  int n_nodes = 0;
  std::vector<std::vector<int>> neighbors;

  int degree(int i) const { return static_cast<int>(neighbors[i].size()); }
};

// Moore (8-neighborhood) adjacency over a rows x cols lattice.
RegionGraph build_lattice_graph(int rows, int cols);

}  // namespace tgnet
