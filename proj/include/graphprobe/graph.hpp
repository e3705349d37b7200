#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphprobe/types.hpp"

namespace graphprobe {

/// Undirected edge stored with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected simple graph with optional node features and binary label.
///
/// Edges are normalized (u < v) and sorted on construction; self-loops,
/// duplicate edges and out-of-range endpoints are rejected with ContractError.
class Graph {
 public:
  Graph() = default;
  Graph(std::string id, int n, std::span<const std::pair<int, int>> edges,
        std::optional<int> label = std::nullopt);
  Graph(std::string id, int n, std::initializer_list<std::pair<int, int>> edges,
        std::optional<int> label = std::nullopt)
      : Graph(std::move(id), n, std::span<const std::pair<int, int>>(edges.begin(), edges.size()),
              label) {}

  const std::string& id() const { return id_; }
  int num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Sorted neighbor list of v.
  std::span<const int> neighbors(int v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }
  int degree(int v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(int u, int v) const;

  const std::optional<int>& label() const { return label_; }
  void set_label(std::optional<int> label);
  void set_id(std::string id) { id_ = std::move(id); }

  bool has_features() const { return features_.rows() > 0; }
  const Matrix& features() const { return features_; }
  /// Row count must equal num_nodes().
  void set_features(Matrix features);

  /// Dense 0/1 adjacency matrix.
  Matrix adjacency_matrix() const;

  friend bool operator==(const Graph& a, const Graph& b);

 private:
  std::string id_;
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> offsets_{0};
  std::vector<int> adjacency_;
  std::optional<int> label_;
  Matrix features_;
};

/// Relabel nodes: node v of g becomes node perm[v]. Feature rows follow.
Graph permute_nodes(const Graph& g, std::span<const int> perm);

/// Disjoint union; nodes of b are shifted by a.num_nodes().
Graph disjoint_union(const Graph& a, const Graph& b, std::string id = {});

/// Connected component index per node (components numbered by lowest member).
std::vector<int> connected_components(const Graph& g, int* count = nullptr);

bool is_connected(const Graph& g);

/// Induced subgraph on the given nodes (in the given order).
Graph induced_subgraph(const Graph& g, std::span<const int> nodes);

}  // namespace graphprobe
