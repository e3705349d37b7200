#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "graphprobe/graph.hpp"
#include "graphprobe/rng.hpp"

namespace graphprobe {

/// A real value plus a flag that is false when the quantity is mathematically
/// undefined for the graph at hand (the value is then 0).
struct PropertyValue {
  double value = 0.0;
  bool defined = true;

  static PropertyValue undefined() { return {0.0, false}; }
  friend bool operator==(const PropertyValue&, const PropertyValue&) = default;
};

// --- local properties ----------------------------------------------------

struct NodePropertyTable {
  std::vector<double> degree;
  std::vector<double> local_clustering;
  std::vector<double> betweenness;
  std::vector<double> closeness;
  std::vector<double> eigenvector_centrality;
  std::vector<double> pagerank;

  static constexpr std::array<std::string_view, 6> names{
      "degree", "local_clustering", "betweenness", "closeness", "eigenvector_centrality", "pagerank"};
  const std::vector<double>& column(std::size_t k) const;
};

NodePropertyTable node_properties(const Graph& g);

/// Fraction of neighbour pairs that are adjacent; 0 for degree < 2.
std::vector<double> local_clustering(const Graph& g);

/// Brandes, normalised by 2/((n-1)(n-2)) for n >= 3, zero otherwise.
std::vector<double> betweenness_centrality(const Graph& g);

/// Component-scaled closeness: (r/(n-1)) * (r / sum of distances), r being the
/// number of other nodes reachable from v.
std::vector<double> closeness_centrality(const Graph& g);

/// Unit-norm, non-negative principal eigenvector of A.
std::vector<double> eigenvector_centrality(const Graph& g);

/// Damping 0.85; dangling mass is spread uniformly. Sums to 1.
std::vector<double> pagerank(const Graph& g, double damping = 0.85, double tolerance = 1e-10,
                             int max_iterations = 1000);

// --- counts ------------------------------------------------------------------

/// trace(A^3) / 6
std::int64_t count_triangles(const Graph& g);
/// (trace(A^4) - 2m - 2 sum_v d_v (d_v - 1)) / 8
std::int64_t count_squares(const Graph& g);

struct CliqueCount {
  std::int64_t count = 0;
  bool complete = true;  // false when the recursion budget was exhausted
};
/// Bron-Kerbosch with Tomita pivoting.
CliqueCount count_maximal_cliques(const Graph& g, std::int64_t budget = 5'000'000);

// --- paths and degrees -----------------------------------------------------

struct PathMetrics {
  PropertyValue avg_path_length;  // mean over connected ordered pairs
  int diameter = 0;               // on the largest component
  int radius = 0;
  int largest_component_size = 0;
};

PathMetrics path_metrics(const Graph& g);

/// BFS hop distances from `source`; -1 marks unreachable nodes.
std::vector<int> bfs_distances(const Graph& g, int source);

struct DegreeStats {
  PropertyValue density;
  PropertyValue avg_degree;
  PropertyValue transitivity;
  PropertyValue assortativity;
};

DegreeStats degree_stats(const Graph& g);

// --- spectra -----------------------------------------------------------------

Matrix laplacian_matrix(const Graph& g);

struct SpectralProps {
  PropertyValue spectral_radius;
  PropertyValue algebraic_connectivity;
  PropertyValue graph_energy;      // sum |eig(L)|
  PropertyValue adjacency_energy;  // sum |eig(A)|
};

SpectralProps spectral_props(const Graph& g);

// --- small-world -------------------------------------------------------------

struct RewireResult {
  Graph graph;
  bool warning = false;  // too few feasible swaps; graph returned (partly) unchanged
  long long swaps = 0;
};

/// Degree-preserving double-edge swaps, `swaps_per_edge` * m successful swaps.
RewireResult random_reference(const Graph& g, Rng& rng, int swaps_per_edge = 10);

/// Ring lattice with the same node and edge count: ring edges by increasing
/// hop distance, filled round-robin until m edges are placed.
Graph lattice_reference(const Graph& g);

struct SmallWorld {
  PropertyValue coefficient;  // Q = (C / C_r) / (L / L_r)
  PropertyValue index;        // SWI
};

struct SmallWorldOptions {
  int random_references = 10;
  int swaps_per_edge = 10;
};

SmallWorld small_world(const Graph& g, Rng& rng, const SmallWorldOptions& options = {});

// --- centralization ----------------------------------------------------------

enum class CentralizationKind { freeman, stddev };

struct Centralizations {
  PropertyValue betweenness_centralization;
  PropertyValue pagerank_centralization;
  PropertyValue avg_betweenness_centrality;
  PropertyValue avg_clustering;
};

/// Freeman: sum_v (c_max - c_v) / ((n-1) c_max), undefined when c_max = 0.
PropertyValue centralization(const std::vector<double>& c, CentralizationKind kind);

Centralizations centralizations(const Graph& g, CentralizationKind kind = CentralizationKind::freeman);
Centralizations centralizations(const Graph& g, const NodePropertyTable& nodes,
                                CentralizationKind kind = CentralizationKind::freeman);

// --- the global vector ------------------------------------------------------

enum class GlobalProperty : int {
  n_nodes,
  n_edges,
  density,
  avg_path_length,
  diameter,
  radius,
  transitivity,
  assortativity,
  n_cliques,
  n_triangles,
  n_squares,
  largest_component_size,
  avg_degree,
  spectral_radius,
  algebraic_connectivity,
  graph_energy,
  small_world_coefficient,
  small_world_index,
  betweenness_centralization,
  pagerank_centralization,
  avg_betweenness_centrality,
  avg_clustering,
};

inline constexpr std::size_t kNumGlobalProperties = 22;

inline constexpr std::array<std::string_view, kNumGlobalProperties> kGlobalPropertyNames{
    "n_nodes",
    "n_edges",
    "density",
    "avg_path_length",
    "diameter",
    "radius",
    "transitivity",
    "assortativity",
    "n_cliques",
    "n_triangles",
    "n_squares",
    "largest_component_size",
    "avg_degree",
    "spectral_radius",
    "algebraic_connectivity",
    "graph_energy",
    "small_world_coefficient",
    "small_world_index",
    "betweenness_centralization",
    "pagerank_centralization",
    "avg_betweenness_centrality",
    "avg_clustering",
};

std::optional<GlobalProperty> parse_global_property(std::string_view name);

struct GraphPropertyVector {
  std::array<PropertyValue, kNumGlobalProperties> values{};

  PropertyValue& operator[](GlobalProperty p) { return values[static_cast<std::size_t>(p)]; }
  const PropertyValue& operator[](GlobalProperty p) const { return values[static_cast<std::size_t>(p)]; }
  friend bool operator==(const GraphPropertyVector&, const GraphPropertyVector&) = default;
};

struct PropertyOptions {
  SmallWorldOptions small_world;
  CentralizationKind centralization = CentralizationKind::freeman;
  std::int64_t clique_budget = 5'000'000;
};

/// Every global property in one pass. Deterministic for a given rng state.
GraphPropertyVector global_properties(const Graph& g, Rng& rng, const PropertyOptions& options = {});

/// Seed used for the stochastic properties of graph `id` in a corpus seeded
/// with `seed`; independent of corpus order.
inline std::uint64_t property_seed(std::uint64_t seed, std::string_view id) {
  return derive_seed(seed, hash_string(id));
}

}  // namespace graphprobe
