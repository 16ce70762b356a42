#include "spmix/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace spmix {

ProximityGraph::ProximityGraph(int n_areas, const std::vector<std::pair<int, int>>& edges)
    : n_areas_(n_areas), neighbors_(static_cast<std::size_t>(std::max(n_areas, 0))) {
  if (n_areas < 1) throw std::invalid_argument("ProximityGraph: need at least one area");
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n_areas || j >= n_areas)
      throw std::invalid_argument("ProximityGraph: edge endpoint out of range");
    if (i == j) throw std::invalid_argument("ProximityGraph: self loop");
    neighbors_[i].push_back(j);
    neighbors_[j].push_back(i);
  }
  for (auto& ns : neighbors_) {
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  }
}

ProximityGraph ProximityGraph::from_adjacency(const Matrix& adjacency) {
  if (adjacency.rows() != adjacency.cols())
    throw std::invalid_argument("from_adjacency: matrix must be square");
  const int n = static_cast<int>(adjacency.rows());
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) throw std::invalid_argument("from_adjacency: nonzero diagonal");
    for (int j = i + 1; j < n; ++j) {
      const double a = adjacency(i, j);
      if (a != adjacency(j, i)) throw std::invalid_argument("from_adjacency: asymmetric matrix");
      if (a != 0.0 && a != 1.0) throw std::invalid_argument("from_adjacency: entries must be 0 or 1");
      if (a == 1.0) edges.emplace_back(i, j);
    }
  }
  return ProximityGraph(n, edges);
}

ProximityGraph ProximityGraph::grid(int side) {
  if (side < 1) throw std::invalid_argument("grid: side must be >= 1");
  std::vector<std::pair<int, int>> edges;
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const int id = r * side + c;
      if (c + 1 < side) edges.emplace_back(id, id + 1);
      if (r + 1 < side) edges.emplace_back(id, id + side);
    }
  return ProximityGraph(side * side, edges);
}

ProximityGraph ProximityGraph::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open adjacency file: " + path);
  int n = 0;
  if (!(in >> n)) throw std::runtime_error("adjacency file: missing area count: " + path);
  std::vector<std::pair<int, int>> edges;
  int i, j;
  while (in >> i >> j) edges.emplace_back(i, j);
  if (!in.eof()) throw std::runtime_error("adjacency file: malformed edge line: " + path);
  return ProximityGraph(n, edges);
}

void ProximityGraph::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write adjacency file: " + path);
  out << n_areas_ << "\n";
  for (int i = 0; i < n_areas_; ++i)
    for (int j : neighbors_[i])
      if (i < j) out << i << " " << j << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

int ProximityGraph::n_edges() const {
  std::size_t twice = 0;
  for (const auto& ns : neighbors_) twice += ns.size();
  return static_cast<int>(twice / 2);
}

bool ProximityGraph::has_edge(int i, int j) const {
  const auto& ns = neighbors_[i];
  return std::binary_search(ns.begin(), ns.end(), j);
}

Matrix ProximityGraph::adjacency() const {
  Matrix a = Matrix::Zero(n_areas_, n_areas_);
  for (int i = 0; i < n_areas_; ++i)
    for (int j : neighbors_[i]) a(i, j) = 1.0;
  return a;
}

ComponentPartition connected_components(const ProximityGraph& g) {
  ComponentPartition part;
  part.label.assign(g.n_areas(), -1);
  std::vector<int> stack;
  for (int start = 0; start < g.n_areas(); ++start) {
    if (part.label[start] != -1) continue;
    const int c = part.count++;
    part.members.emplace_back();
    stack.push_back(start);
    part.label[start] = c;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      part.members[c].push_back(i);
      for (int j : g.neighbors(i)) {
        if (part.label[j] == -1) {
          part.label[j] = c;
          stack.push_back(j);
        }
      }
    }
    std::sort(part.members[c].begin(), part.members[c].end());
  }
  return part;
}

Matrix precision_matrix(const ProximityGraph& g, double rho) {
  if (!(rho >= 0.0 && rho < 1.0))
    throw std::invalid_argument("precision_matrix: rho must lie in [0, 1)");
  const int n = g.n_areas();
  Matrix p = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    p(i, i) = rho * g.degree(i) + 1.0 - rho;
    for (int j : g.neighbors(i)) p(i, j) = -rho;
  }
  return p;
}

Matrix marginal_scale_matrix(const ProximityGraph& g, double rho) {
  const Matrix p = precision_matrix(g, rho);
  const ComponentPartition part = connected_components(g);
  const int n = g.n_areas();
  Matrix a = Matrix::Zero(n, n);
  for (const auto& comp : part.members) {
    const int k = static_cast<int>(comp.size());
    Matrix block(k, k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) block(r, c) = p(comp[r], comp[c]);
    Eigen::LLT<Matrix> llt(block);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("marginal_scale_matrix: component block not SPD");
    const Matrix inv = llt.solve(Matrix::Identity(k, k));
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) a(comp[r], comp[c]) = inv(r, c);
  }
  return a;
}

}  // namespace spmix
