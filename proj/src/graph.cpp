#include "graphprobe/graph.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <string>

namespace graphprobe {

Graph::Graph(std::string id, int n, std::span<const std::pair<int, int>> edges,
             std::optional<int> label)
    : id_(std::move(id)), n_(n) {
  if (n <= 0) throw ContractError("graph '" + id_ + "': node count must be positive");
  edges_.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw ContractError("graph '" + id_ + "': edge (" + std::to_string(a) + "," +
                          std::to_string(b) + ") has an endpoint outside [0," +
                          std::to_string(n) + ")");
    }
    if (a == b) {
      throw ContractError("graph '" + id_ + "': self-loop on node " + std::to_string(a));
    }
    edges_.push_back({std::min(a, b), std::max(a, b)});
  }
  std::sort(edges_.begin(), edges_.end());
  if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end()) {
    throw ContractError("graph '" + id_ + "': duplicate edge (" + std::to_string(dup->u) + "," +
                        std::to_string(dup->v) + ")");
  }

  std::vector<int> deg(n, 0);
  for (const auto& e : edges_) {
    ++deg[e.u];
    ++deg[e.v];
  }
  offsets_.assign(n + 1, 0);
  for (int v = 0; v < n; ++v) offsets_[v + 1] = offsets_[v] + deg[v];
  adjacency_.resize(offsets_[n]);
  std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : edges_) {
    adjacency_[fill[e.u]++] = e.v;
    adjacency_[fill[e.v]++] = e.u;
  }
  for (int v = 0; v < n; ++v) {
    std::sort(adjacency_.begin() + offsets_[v], adjacency_.begin() + offsets_[v + 1]);
  }
  set_label(label);
}

bool Graph::has_edge(int u, int v) const {
  if (u < 0 || v < 0 || u >= n_ || v >= n_) return false;
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

void Graph::set_label(std::optional<int> label) {
  if (label && *label != 0 && *label != 1) {
    throw ContractError("graph '" + id_ + "': label must be 0 or 1");
  }
  label_ = label;
}

void Graph::set_features(Matrix features) {
  if (features.rows() != n_) {
    throw ContractError("graph '" + id_ + "': feature rows (" + std::to_string(features.rows()) +
                        ") differ from node count (" + std::to_string(n_) + ")");
  }
  features_ = std::move(features);
}

Matrix Graph::adjacency_matrix() const {
  Matrix a = Matrix::Zero(n_, n_);
  for (const auto& e : edges_) {
    a(e.u, e.v) = 1.0;
    a(e.v, e.u) = 1.0;
  }
  return a;
}

bool operator==(const Graph& a, const Graph& b) {
  if (a.id_ != b.id_ || a.n_ != b.n_ || a.edges_ != b.edges_ || a.label_ != b.label_) return false;
  if (a.features_.rows() != b.features_.rows() || a.features_.cols() != b.features_.cols()) {
    return false;
  }
  return a.features_ == b.features_;
}

Graph permute_nodes(const Graph& g, std::span<const int> perm) {
  const int n = g.num_nodes();
  if (static_cast<int>(perm.size()) != n) throw ContractError("permutation size mismatch");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(g.num_edges());
  for (const auto& e : g.edges()) edges.emplace_back(perm[e.u], perm[e.v]);
  Graph out(g.id(), n, edges, g.label());
  if (g.has_features()) {
    Matrix f(n, g.features().cols());
    for (int v = 0; v < n; ++v) f.row(perm[v]) = g.features().row(v);
    out.set_features(std::move(f));
  }
  return out;
}

Graph disjoint_union(const Graph& a, const Graph& b, std::string id) {
  const int shift = a.num_nodes();
  std::vector<std::pair<int, int>> edges;
  edges.reserve(a.num_edges() + b.num_edges());
  for (const auto& e : a.edges()) edges.emplace_back(e.u, e.v);
  for (const auto& e : b.edges()) edges.emplace_back(e.u + shift, e.v + shift);
  return Graph(std::move(id), a.num_nodes() + b.num_nodes(), edges);
}

std::vector<int> connected_components(const Graph& g, int* count) {
  const int n = g.num_nodes();
  std::vector<int> comp(n, -1);
  int c = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = c;
    stack.push_back(s);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : g.neighbors(v)) {
        if (comp[w] < 0) {
          comp[w] = c;
          stack.push_back(w);
        }
      }
    }
    ++c;
  }
  if (count) *count = c;
  return comp;
}

bool is_connected(const Graph& g) {
  int count = 0;
  connected_components(g, &count);
  return count == 1;
}

Graph induced_subgraph(const Graph& g, std::span<const int> nodes) {
  std::vector<int> index(g.num_nodes(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i]] = static_cast<int>(i);
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : g.edges()) {
    if (index[e.u] >= 0 && index[e.v] >= 0) edges.emplace_back(index[e.u], index[e.v]);
  }
  return Graph(g.id(), static_cast<int>(nodes.size()), edges, g.label());
}

}  // namespace graphprobe
