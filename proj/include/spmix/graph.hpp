#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spmix/numeric.hpp"

namespace spmix {

// Undirected proximity structure over I areas: symmetric 0/1 adjacency,
// no self loops. Isolated areas are allowed.
class ProximityGraph {
 public:
  ProximityGraph(int n_areas, const std::vector<std::pair<int, int>>& edges);

  static ProximityGraph from_adjacency(const Matrix& adjacency);
  // Rook adjacency on a side x side grid, areas numbered row-major.
  static ProximityGraph grid(int side);
  // Text format: first line I, then one "i j" edge per line (0-based).
  static ProximityGraph load(const std::string& path);
  void save(const std::string& path) const;

  int n_areas() const { return n_areas_; }
  int n_edges() const;
  int degree(int i) const { return static_cast<int>(neighbors_[i].size()); }
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }
  bool has_edge(int i, int j) const;
  Matrix adjacency() const;  // dense 0/1

 private:
  int n_areas_;
  std::vector<std::vector<int>> neighbors_;  // sorted, symmetric
};

// Partition of areas into connected components, labeled 0..count-1 in order
// of first appearance (by lowest area index).
struct ComponentPartition {
  int count = 0;
  std::vector<int> label;                 // per area
  std::vector<std::vector<int>> members;  // per component, ascending
};

ComponentPartition connected_components(const ProximityGraph& g);

// Structure matrix of the spatial Gaussian field: rho * (deg(i) - adjacency)
// + (1 - rho) * identity. SPD for rho in [0, 1); block diagonal under any
// ordering grouping connected components.
Matrix precision_matrix(const ProximityGraph& g, double rho);

// Blockwise inverse of precision_matrix: entries joining different
// components are exactly zero, not merely small.
Matrix marginal_scale_matrix(const ProximityGraph& g, double rho);

}  // namespace spmix
