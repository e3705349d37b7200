#include "graphprobe/properties.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "graphprobe/linalg.hpp"

namespace graphprobe {

const std::vector<double>& NodePropertyTable::column(std::size_t k) const {
  switch (k) {
    case 0: return degree;
    case 1: return local_clustering;
    case 2: return betweenness;
    case 3: return closeness;
    case 4: return eigenvector_centrality;
    case 5: return pagerank;
    default: throw ContractError("node property index out of range");
  }
}

std::vector<int> bfs_distances(const Graph& g, int source) {
  std::vector<int> dist(g.num_nodes(), -1);
  std::vector<int> queue{source};
  dist[source] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int v = queue[head];
    for (int w : g.neighbors(v)) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

std::vector<double> local_clustering(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<double> c(n, 0.0);
  for (int v = 0; v < n; ++v) {
    auto nb = g.neighbors(v);
    const auto d = static_cast<long long>(nb.size());
    if (d < 2) continue;
    long long links = 0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      for (std::size_t j = i + 1; j < nb.size(); ++j) links += g.has_edge(nb[i], nb[j]);
    }
    c[v] = static_cast<double>(2 * links) / static_cast<double>(d * (d - 1));
  }
  return c;
}

std::vector<double> betweenness_centrality(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<double> cb(n, 0.0);
  if (n < 3) return cb;
  std::vector<int> stack, dist(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<std::vector<int>> preds(n);
  for (int s = 0; s < n; ++s) {
    stack.clear();
    for (int v = 0; v < n; ++v) preds[v].clear();
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    dist[s] = 0;
    sigma[s] = 1.0;
    std::vector<int> queue{s};
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int v = queue[head];
      stack.push_back(v);
      for (int w : g.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    std::fill(delta.begin(), delta.end(), 0.0);
    while (!stack.empty()) {
      const int w = stack.back();
      stack.pop_back();
      for (int v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) cb[w] += delta[w];
    }
  }
  // Each unordered pair was visited from both ends.
  const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
  for (double& x : cb) x *= scale;
  return cb;
}

std::vector<double> closeness_centrality(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<double> c(n, 0.0);
  if (n < 2) return c;
  for (int v = 0; v < n; ++v) {
    auto dist = bfs_distances(g, v);
    long long total = 0;
    int reach = 0;
    for (int u = 0; u < n; ++u) {
      if (u != v && dist[u] > 0) {
        total += dist[u];
        ++reach;
      }
    }
    if (total > 0) {
      c[v] = (static_cast<double>(reach) / (n - 1)) * (static_cast<double>(reach) / static_cast<double>(total));
    }
  }
  return c;
}

std::vector<double> eigenvector_centrality(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
  if (g.num_edges() == 0) return x;

  std::vector<double> next(n);
  constexpr double kTolerance = 1e-8;
  constexpr int kMaxIterations = 1000;
  for (int it = 0; it < kMaxIterations; ++it) {
    for (int v = 0; v < n; ++v) {
      double s = 0.0;
      for (int w : g.neighbors(v)) s += x[w];
      next[v] = s;
    }
    double norm = 0.0;
    for (double y : next) norm += y * y;
    norm = std::sqrt(norm);
    double change = 0.0;
    for (int v = 0; v < n; ++v) {
      next[v] /= norm;
      change += (next[v] - x[v]) * (next[v] - x[v]);
    }
    x.swap(next);
    if (std::sqrt(change) < kTolerance) return x;
  }

  // Bipartite components make the iteration oscillate between two vectors;
  // take the Perron vector from the full spectrum instead.
  auto eig = jacobi_eigen(g.adjacency_matrix());
  const auto top = eig.vectors.col(n - 1);
  const double sign = top.sum() < 0 ? -1.0 : 1.0;
  double norm = 0.0;
  for (int v = 0; v < n; ++v) {
    x[v] = std::abs(sign * top(v));
    norm += x[v] * x[v];
  }
  norm = std::sqrt(norm);
  for (double& y : x) y /= norm;
  return x;
}

std::vector<double> pagerank(const Graph& g, double damping, double tolerance, int max_iterations) {
  const int n = g.num_nodes();
  std::vector<double> p(n, 1.0 / n), next(n);
  for (int it = 0; it < max_iterations; ++it) {
    double dangling = 0.0;
    for (int v = 0; v < n; ++v) {
      if (g.degree(v) == 0) dangling += p[v];
    }
    const double base = (1.0 - damping) / n + damping * dangling / n;
    for (int v = 0; v < n; ++v) {
      double s = 0.0;
      for (int w : g.neighbors(v)) s += p[w] / g.degree(w);
      next[v] = base + damping * s;
    }
    double change = 0.0;
    for (int v = 0; v < n; ++v) change += std::abs(next[v] - p[v]);
    p.swap(next);
    if (change < tolerance) break;
  }
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= total;
  return p;
}

NodePropertyTable node_properties(const Graph& g) {
  NodePropertyTable t;
  const int n = g.num_nodes();
  t.degree.resize(n);
  for (int v = 0; v < n; ++v) t.degree[v] = g.degree(v);
  t.local_clustering = local_clustering(g);
  t.betweenness = betweenness_centrality(g);
  t.closeness = closeness_centrality(g);
  t.eigenvector_centrality = eigenvector_centrality(g);
  t.pagerank = pagerank(g);
  return t;
}

// --- counts ------------------------------------------------------------------

namespace {

// Common-neighbour counts, i.e. the off-diagonal of A^2 (diagonal = degree).
std::vector<std::int64_t> adjacency_squared(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<std::int64_t> a2(static_cast<std::size_t>(n) * n, 0);
  for (int w = 0; w < n; ++w) {
    auto nb = g.neighbors(w);
    for (int i : nb) {
      for (int j : nb) a2[static_cast<std::size_t>(i) * n + j] += 1;
    }
  }
  return a2;
}

}  // namespace

std::int64_t count_triangles(const Graph& g) {
  const int n = g.num_nodes();
  const auto a2 = adjacency_squared(g);
  // trace(A^3) = sum_ij A2_ij A_ij
  std::int64_t trace3 = 0;
  for (const auto& e : g.edges()) trace3 += 2 * a2[static_cast<std::size_t>(e.u) * n + e.v];
  return trace3 / 6;
}

std::int64_t count_squares(const Graph& g) {
  const int n = g.num_nodes();
  const auto a2 = adjacency_squared(g);
  std::int64_t trace4 = 0;
  for (auto x : a2) trace4 += x * x;
  std::int64_t wedge = 0;
  for (int v = 0; v < n; ++v) {
    const std::int64_t d = g.degree(v);
    wedge += d * (d - 1);
  }
  const auto m = static_cast<std::int64_t>(g.num_edges());
  return (trace4 - 2 * m - 2 * wedge) / 8;
}

namespace {

class BronKerbosch {
 public:
  BronKerbosch(const Graph& g, std::int64_t budget) : g_(g), budget_(budget) {}

  CliqueCount run() {
    std::vector<int> p(g_.num_nodes());
    std::iota(p.begin(), p.end(), 0);
    expand(p, {});
    return {count_, !exhausted_};
  }

 private:
  std::vector<int> neighbours_in(int v, const std::vector<int>& set) const {
    std::vector<int> out;
    auto nb = g_.neighbors(v);
    std::set_intersection(set.begin(), set.end(), nb.begin(), nb.end(), std::back_inserter(out));
    return out;
  }

  void expand(const std::vector<int>& p, const std::vector<int>& x) {
    if (exhausted_) return;
    if (++calls_ > budget_) {
      exhausted_ = true;
      return;
    }
    if (p.empty()) {
      if (x.empty()) ++count_;
      return;
    }
    // Pivot maximising |P ∩ N(u)| over P ∪ X.
    int pivot = -1;
    std::size_t best = 0;
    for (const auto* set : {&p, &x}) {
      for (int u : *set) {
        const std::size_t k = neighbours_in(u, p).size();
        if (pivot < 0 || k > best) {
          pivot = u;
          best = k;
        }
      }
    }
    std::vector<int> candidates;
    auto pivot_nb = g_.neighbors(pivot);
    std::set_difference(p.begin(), p.end(), pivot_nb.begin(), pivot_nb.end(),
                        std::back_inserter(candidates));
    std::vector<int> pp = p;
    std::vector<int> xx = x;
    for (int v : candidates) {
      expand(neighbours_in(v, pp), neighbours_in(v, xx));
      pp.erase(std::lower_bound(pp.begin(), pp.end(), v));
      xx.insert(std::lower_bound(xx.begin(), xx.end(), v), v);
      if (exhausted_) return;
    }
  }

  const Graph& g_;
  std::int64_t budget_;
  std::int64_t calls_ = 0;
  std::int64_t count_ = 0;
  bool exhausted_ = false;
};

}  // namespace

CliqueCount count_maximal_cliques(const Graph& g, std::int64_t budget) {
  return BronKerbosch(g, budget).run();
}

// --- paths and degrees -----------------------------------------------------

PathMetrics path_metrics(const Graph& g) {
  const int n = g.num_nodes();
  PathMetrics out;
  int ncomp = 0;
  const auto comp = connected_components(g, &ncomp);
  std::vector<int> size(ncomp, 0);
  for (int c : comp) ++size[c];
  out.largest_component_size = *std::max_element(size.begin(), size.end());

  std::vector<int> ecc(n, 0);
  long double total = 0.0L;
  long long pairs = 0;
  for (int v = 0; v < n; ++v) {
    auto dist = bfs_distances(g, v);
    for (int u = 0; u < n; ++u) {
      if (u == v || dist[u] < 0) continue;
      total += dist[u];
      ++pairs;
      ecc[v] = std::max(ecc[v], dist[u]);
    }
  }
  out.avg_path_length = pairs > 0 ? PropertyValue{static_cast<double>(total / pairs), true}
                                  : PropertyValue::undefined();
  // Among equally large components keep the one with the largest
  // (diameter, radius), so the choice does not depend on node labels.
  bool first = true;
  for (int c = 0; c < ncomp; ++c) {
    if (size[c] != out.largest_component_size) continue;
    int diam = 0;
    int rad = std::numeric_limits<int>::max();
    for (int v = 0; v < n; ++v) {
      if (comp[v] != c) continue;
      diam = std::max(diam, ecc[v]);
      rad = std::min(rad, ecc[v]);
    }
    if (first || std::pair(diam, rad) > std::pair(out.diameter, out.radius)) {
      out.diameter = diam;
      out.radius = rad;
      first = false;
    }
  }
  return out;
}

DegreeStats degree_stats(const Graph& g) {
  const int n = g.num_nodes();
  const auto m = static_cast<long long>(g.num_edges());
  DegreeStats s;
  s.density = n >= 2 ? PropertyValue{2.0 * m / (static_cast<double>(n) * (n - 1)), true}
                     : PropertyValue::undefined();
  s.avg_degree = {2.0 * m / n, true};

  long long triples = 0;
  for (int v = 0; v < n; ++v) {
    const long long d = g.degree(v);
    triples += d * (d - 1) / 2;
  }
  s.transitivity = triples > 0
                       ? PropertyValue{3.0 * static_cast<double>(count_triangles(g)) / static_cast<double>(triples), true}
                       : PropertyValue::undefined();

  // Pearson over both orientations of every edge; exact integer moments so
  // that regular graphs give an exactly zero variance.
  long long s1 = 0, s2 = 0, sxy = 0;
  for (const auto& e : g.edges()) {
    const long long a = g.degree(e.u);
    const long long b = g.degree(e.v);
    s1 += a + b;
    s2 += a * a + b * b;
    sxy += 2 * a * b;
  }
  const long long count = 2 * m;
  const long double var = static_cast<long double>(count) * s2 - static_cast<long double>(s1) * s1;
  if (m == 0 || var == 0) {
    s.assortativity = PropertyValue::undefined();
  } else {
    const long double cov = static_cast<long double>(count) * sxy - static_cast<long double>(s1) * s1;
    s.assortativity = {static_cast<double>(cov / var), true};
  }
  return s;
}

// --- spectra -----------------------------------------------------------------

Matrix laplacian_matrix(const Graph& g) {
  Matrix l = -g.adjacency_matrix();
  for (int v = 0; v < g.num_nodes(); ++v) l(v, v) = g.degree(v);
  return l;
}

SpectralProps spectral_props(const Graph& g) {
  SpectralProps s;
  const int n = g.num_nodes();
  const auto adj = jacobi_eigen(g.adjacency_matrix()).values;
  const auto lap = jacobi_eigen(laplacian_matrix(g)).values;
  s.spectral_radius = {adj.back(), true};
  double e_adj = 0.0, e_lap = 0.0;
  for (double x : adj) e_adj += std::abs(x);
  for (double x : lap) e_lap += std::abs(x);
  s.adjacency_energy = {e_adj, true};
  s.graph_energy = {e_lap, true};
  if (n < 2) {
    s.algebraic_connectivity = PropertyValue::undefined();
  } else if (!is_connected(g)) {
    // Zero has multiplicity equal to the component count.
    s.algebraic_connectivity = {0.0, true};
  } else {
    s.algebraic_connectivity = {lap[1], true};
  }
  return s;
}

// --- small-world -------------------------------------------------------------

RewireResult random_reference(const Graph& g, Rng& rng, int swaps_per_edge) {
  const int n = g.num_nodes();
  const auto m = static_cast<long long>(g.num_edges());
  if (m < 2) return {g, true, 0};
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : g.edges()) edges.emplace_back(e.u, e.v);
  std::vector<char> adj(static_cast<std::size_t>(n) * n, 0);
  auto at = [&](int a, int b) -> char& { return adj[static_cast<std::size_t>(a) * n + b]; };
  for (auto [a, b] : edges) at(a, b) = at(b, a) = 1;

  const long long target = static_cast<long long>(swaps_per_edge) * m;
  const long long max_tries = 100 * std::max<long long>(target, 1);
  long long done = 0;
  for (long long tries = 0; tries < max_tries && done < target; ++tries) {
    const std::size_t i = rng.index(edges.size());
    const std::size_t j = rng.index(edges.size());
    if (i == j) continue;
    auto [a, b] = edges[i];
    auto [c, d] = edges[j];
    if (rng.bernoulli(0.5)) std::swap(c, d);
    // (a,b),(c,d) -> (a,d),(c,b)
    if (a == c || a == d || b == c || b == d) continue;
    if (at(a, d) || at(c, b)) continue;
    at(a, b) = at(b, a) = 0;
    at(c, d) = at(d, c) = 0;
    at(a, d) = at(d, a) = 1;
    at(c, b) = at(b, c) = 1;
    edges[i] = {a, d};
    edges[j] = {c, b};
    ++done;
  }
  return {Graph(g.id(), n, edges, g.label()), done < target, done};
}

Graph lattice_reference(const Graph& g) {
  const int n = g.num_nodes();
  const auto m = static_cast<long long>(g.num_edges());
  if (n < 3) throw ContractError("lattice_reference: need at least 3 nodes");
  if (m > static_cast<long long>(n) * (n - 1) / 2) {
    throw ContractError("lattice_reference: " + std::to_string(m) + " edges do not fit on " +
                        std::to_string(n) + " nodes");
  }
  std::vector<std::pair<int, int>> edges;
  for (int d = 1; d <= n / 2 && static_cast<long long>(edges.size()) < m; ++d) {
    for (int i = 0; i < n && static_cast<long long>(edges.size()) < m; ++i) {
      const int j = (i + d) % n;
      // At d = n/2 (even n) each chord shows up from both ends.
      if (2 * d == n && i >= n / 2) continue;
      edges.emplace_back(i, j);
    }
  }
  return Graph(g.id(), n, edges, g.label());
}

namespace {

struct ClusteringPath {
  double clustering = 0.0;
  double path = 0.0;
};

ClusteringPath on_largest_component(const Graph& g) {
  int ncomp = 0;
  const auto comp = connected_components(g, &ncomp);
  const Graph* target = &g;
  Graph sub;
  if (ncomp > 1) {
    std::vector<int> size(ncomp, 0);
    for (int c : comp) ++size[c];
    const int best = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
    std::vector<int> nodes;
    for (int v = 0; v < g.num_nodes(); ++v) {
      if (comp[v] == best) nodes.push_back(v);
    }
    sub = induced_subgraph(g, nodes);
    target = &sub;
  }
  const auto c = local_clustering(*target);
  ClusteringPath out;
  out.clustering = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
  out.path = path_metrics(*target).avg_path_length.value;
  return out;
}

}  // namespace

SmallWorld small_world(const Graph& g, Rng& rng, const SmallWorldOptions& options) {
  SmallWorld out{PropertyValue::undefined(), PropertyValue::undefined()};
  if (g.num_nodes() < 4 || path_metrics(g).largest_component_size < 4) return out;

  const auto cl = local_clustering(g);
  const double c = std::accumulate(cl.begin(), cl.end(), 0.0) / g.num_nodes();
  const auto pm = path_metrics(g);
  if (!pm.avg_path_length.defined) return out;
  const double l = pm.avg_path_length.value;

  double cr = 0.0, lr = 0.0;
  const int refs = std::max(1, options.random_references);
  for (int k = 0; k < refs; ++k) {
    Rng sub = rng.fork(static_cast<std::uint64_t>(k));
    auto ref = random_reference(g, sub, options.swaps_per_edge);
    auto cp = on_largest_component(ref.graph);
    cr += cp.clustering;
    lr += cp.path;
  }
  cr /= refs;
  lr /= refs;
  const auto lat = on_largest_component(lattice_reference(g));

  constexpr double kEps = 1e-9;
  if (std::abs(cr) >= kEps && std::abs(l) >= kEps && std::abs(lr) >= kEps) {
    out.coefficient = {(c / cr) / (l / lr), true};
  }
  if (std::abs(lr - lat.path) >= kEps && std::abs(lat.clustering - cr) >= kEps) {
    out.index = {((l - lat.path) / (lr - lat.path)) * ((c - cr) / (lat.clustering - cr)), true};
  }
  return out;
}

// --- centralization ----------------------------------------------------------

PropertyValue centralization(const std::vector<double>& c, CentralizationKind kind) {
  const auto n = c.size();
  if (n < 2) return PropertyValue::undefined();
  if (kind == CentralizationKind::stddev) {
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : c) ss += (x - mean) * (x - mean);
    return {std::sqrt(ss / n), true};
  }
  const double cmax = *std::max_element(c.begin(), c.end());
  if (cmax <= 0.0) return PropertyValue::undefined();
  double s = 0.0;
  for (double x : c) s += cmax - x;
  return {s / (static_cast<double>(n - 1) * cmax), true};
}

Centralizations centralizations(const Graph& g, const NodePropertyTable& nodes, CentralizationKind kind) {
  Centralizations out;
  const double n = g.num_nodes();
  out.betweenness_centralization = centralization(nodes.betweenness, kind);
  out.pagerank_centralization = centralization(nodes.pagerank, kind);
  out.avg_betweenness_centrality = {
      std::accumulate(nodes.betweenness.begin(), nodes.betweenness.end(), 0.0) / n, true};
  out.avg_clustering = {
      std::accumulate(nodes.local_clustering.begin(), nodes.local_clustering.end(), 0.0) / n, true};
  return out;
}

Centralizations centralizations(const Graph& g, CentralizationKind kind) {
  return centralizations(g, node_properties(g), kind);
}

// --- the global vector ------------------------------------------------------

std::optional<GlobalProperty> parse_global_property(std::string_view name) {
  for (std::size_t k = 0; k < kNumGlobalProperties; ++k) {
    if (kGlobalPropertyNames[k] == name) return static_cast<GlobalProperty>(k);
  }
  return std::nullopt;
}

GraphPropertyVector global_properties(const Graph& g, Rng& rng, const PropertyOptions& options) {
  using P = GlobalProperty;
  GraphPropertyVector out;
  const auto nodes = node_properties(g);
  const auto paths = path_metrics(g);
  const auto deg = degree_stats(g);
  const auto spec = spectral_props(g);
  const auto cliques = count_maximal_cliques(g, options.clique_budget);
  const auto cent = centralizations(g, nodes, options.centralization);

  out[P::n_nodes] = {static_cast<double>(g.num_nodes()), true};
  out[P::n_edges] = {static_cast<double>(g.num_edges()), true};
  out[P::density] = deg.density;
  out[P::avg_path_length] = paths.avg_path_length;
  out[P::diameter] = {static_cast<double>(paths.diameter), true};
  out[P::radius] = {static_cast<double>(paths.radius), true};
  out[P::transitivity] = deg.transitivity;
  out[P::assortativity] = deg.assortativity;
  out[P::n_cliques] = cliques.complete ? PropertyValue{static_cast<double>(cliques.count), true}
                                       : PropertyValue::undefined();
  out[P::n_triangles] = {static_cast<double>(count_triangles(g)), true};
  out[P::n_squares] = {static_cast<double>(count_squares(g)), true};
  out[P::largest_component_size] = {static_cast<double>(paths.largest_component_size), true};
  out[P::avg_degree] = deg.avg_degree;
  out[P::spectral_radius] = spec.spectral_radius;
  out[P::algebraic_connectivity] = spec.algebraic_connectivity;
  out[P::graph_energy] = spec.graph_energy;
  const auto sw = small_world(g, rng, options.small_world);
  out[P::small_world_coefficient] = sw.coefficient;
  out[P::small_world_index] = sw.index;
  out[P::betweenness_centralization] = cent.betweenness_centralization;
  out[P::pagerank_centralization] = cent.pagerank_centralization;
  out[P::avg_betweenness_centrality] = cent.avg_betweenness_centrality;
  out[P::avg_clustering] = cent.avg_clustering;
  return out;
}

}  // namespace graphprobe
