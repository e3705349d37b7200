#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "graphprobe/dataset.hpp"
#include "graphprobe/linalg.hpp"
#include "graphprobe/properties.hpp"
#include "oracles.hpp"

using namespace graphprobe;
using doctest::Approx;

namespace {

Graph watts_strogatz(int n, int k, double p, Rng& rng) {
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int d = 1; d <= k / 2; ++d) adj[i][(i + d) % n] = adj[(i + d) % n][i] = 1;
  for (int d = 1; d <= k / 2; ++d)
    for (int i = 0; i < n; ++i) {
      const int j = (i + d) % n;
      if (!adj[i][j] || !rng.bernoulli(p)) continue;
      int t = static_cast<int>(rng.index(n));
      while (t == i || adj[i][t]) t = static_cast<int>(rng.index(n));
      adj[i][j] = adj[j][i] = 0;
      adj[i][t] = adj[t][i] = 1;
    }
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (adj[u][v]) edges.emplace_back(u, v);
  return Graph("ws", n, edges);
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST_CASE("cycle and clique counts match exhaustive enumeration") {
  Rng rng(2024);
  for (int trial = 0; trial < 250; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    Graph g = oracle::random_graph(n, rng.uniform(0.1, 0.8), rng);
    CHECK(count_triangles(g) == oracle::triangles(g));
    CHECK(count_squares(g) == oracle::squares(g));
    auto cl = count_maximal_cliques(g);
    CHECK(cl.complete);
    CHECK(cl.count == oracle::maximal_cliques(g));
  }
}

TEST_CASE("known counts") {
  CHECK(count_triangles(oracle::complete(4)) == 4);
  CHECK(count_squares(oracle::complete(4)) == 3);
  CHECK(count_squares(oracle::cycle(4)) == 1);
  CHECK(count_maximal_cliques(oracle::complete(4)).count == 1);
  CHECK(count_maximal_cliques(oracle::cycle(4)).count == 4);
  CHECK(count_maximal_cliques(Graph("e", 3, {})).count == 3);
  CHECK_FALSE(count_maximal_cliques(oracle::cycle(30), 3).complete);
}

TEST_CASE("Brandes betweenness matches path counting") {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 250; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 10));
    Graph g = oracle::random_graph(n, rng.uniform(0.15, 0.7), rng);
    auto got = betweenness_centrality(g);
    auto want = oracle::betweenness(g);
    for (int v = 0; v < n; ++v) worst = std::max(worst, std::abs(got[v] - want[v]));
  }
  CHECK(worst < 1e-12);

  auto p3 = betweenness_centrality(oracle::path(3));
  CHECK(p3[1] == Approx(1.0));
  CHECK(p3[0] == 0.0);
}

TEST_CASE("node properties on small graphs") {
  auto k3 = local_clustering(oracle::complete(3));
  for (double c : k3) CHECK(c == 1.0);

  for (int n = 2; n <= 8; ++n) {
    auto pr = pagerank(oracle::complete(n));
    for (double x : pr) CHECK(x == Approx(1.0 / n).epsilon(1e-9));
  }

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g = oracle::random_graph(static_cast<int>(rng.uniform_int(1, 15)), 0.25, rng);
    auto t = node_properties(g);
    CHECK(std::accumulate(t.pagerank.begin(), t.pagerank.end(), 0.0) == Approx(1.0).epsilon(1e-9));
    double norm = 0.0;
    for (double x : t.eigenvector_centrality) {
      CHECK(x >= -1e-12);
      norm += x * x;
    }
    if (g.num_edges() > 0) CHECK(std::sqrt(norm) == Approx(1.0).epsilon(1e-9));
    for (int v = 0; v < g.num_nodes(); ++v) {
      CHECK(t.degree[v] == g.degree(v));
      CHECK(t.betweenness[v] >= 0.0);
      CHECK(t.betweenness[v] <= 1.0 + 1e-12);
      CHECK(t.local_clustering[v] >= 0.0);
      CHECK(t.local_clustering[v] <= 1.0);
    }
  }

  // Bipartite graphs make plain power iteration oscillate.
  auto star = eigenvector_centrality(oracle::star(4));
  CHECK(star[0] == Approx(std::sqrt(0.5)));
  CHECK(star[1] == Approx(std::sqrt(0.125)));
  auto k4 = eigenvector_centrality(oracle::complete(4));
  for (double x : k4) CHECK(x == Approx(0.5));

  // Path 0-1-2 plus isolated node 3: closeness of 1 is (2/3)(2/2).
  Graph g("g", 4, {{0, 1}, {1, 2}});
  auto c = closeness_centrality(g);
  CHECK(c[1] == Approx(2.0 / 3.0));
  CHECK(c[0] == Approx((2.0 / 3.0) * (2.0 / 3.0)));
  CHECK(c[3] == 0.0);
}

TEST_CASE("path metrics") {
  auto p3 = path_metrics(oracle::path(3));
  CHECK(p3.avg_path_length.value == Approx(4.0 / 3.0));
  CHECK(p3.diameter == 2);
  CHECK(p3.radius == 1);
  CHECK(path_metrics(oracle::complete(6)).avg_path_length.value == 1.0);
  auto c6 = path_metrics(oracle::cycle(6));
  CHECK(c6.diameter == 3);
  CHECK(c6.radius == 3);

  Graph split = disjoint_union(oracle::path(4), oracle::complete(2));
  auto s = path_metrics(split);
  CHECK(s.largest_component_size == 4);
  CHECK(s.diameter == 3);
  CHECK(s.radius == 2);
  // Ordered connected pairs: P4 gives 12 with total 20, K2 gives 2 with total 2.
  CHECK(s.avg_path_length.value == Approx(22.0 / 14.0));
  CHECK_FALSE(path_metrics(Graph("k1", 1, {})).avg_path_length.defined);
}

TEST_CASE("degree statistics") {
  for (int n = 3; n <= 7; ++n) {
    auto k = degree_stats(oracle::complete(n));
    CHECK(k.density.value == 1.0);
    CHECK(k.transitivity.value == Approx(1.0));
    CHECK_FALSE(k.assortativity.defined);
  }
  CHECK_FALSE(degree_stats(oracle::cycle(7)).assortativity.defined);
  CHECK(degree_stats(oracle::star(4)).assortativity.value == Approx(-1.0));
  CHECK_FALSE(degree_stats(Graph("k1", 1, {})).density.defined);

  // Direct Pearson over both edge orientations.
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g = oracle::random_graph(10, 0.3, rng);
    std::vector<double> x, y;
    for (const auto& e : g.edges()) {
      x.push_back(g.degree(e.u));
      y.push_back(g.degree(e.v));
      x.push_back(g.degree(e.v));
      y.push_back(g.degree(e.u));
    }
    if (x.empty()) continue;
    const double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    auto s = degree_stats(g);
    if (sxx == 0) {
      CHECK_FALSE(s.assortativity.defined);
      continue;
    }
    CHECK(s.assortativity.value == Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-12));
    long long triples = 0;
    for (int v = 0; v < g.num_nodes(); ++v) triples += g.degree(v) * (g.degree(v) - 1) / 2;
    if (triples > 0) CHECK(s.transitivity.value == Approx(3.0 * oracle::triangles(g) / triples));
  }
}

TEST_CASE("Jacobi eigensolver") {
  auto k4 = symmetric_eigenvalues(oracle::complete(4).adjacency_matrix());
  CHECK(k4[0] == Approx(-1.0));
  CHECK(k4[1] == Approx(-1.0));
  CHECK(k4[2] == Approx(-1.0));
  CHECK(k4[3] == Approx(3.0));
  for (double x : symmetric_eigenvalues(Matrix::Zero(5, 5))) CHECK(x == 0.0);

  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m = oracle::random_matrix(8, 8, rng, 2.0);
    m = (m + m.transpose()).eval();
    auto e = jacobi_eigen(m);
    CHECK(std::accumulate(e.values.begin(), e.values.end(), 0.0) == Approx(m.trace()).epsilon(1e-9));
    for (int k = 0; k < 8; ++k) {
      const Vector v = e.vectors.col(k);
      CHECK((m * v - e.values[k] * v).norm() < 1e-8);
      if (k > 0) CHECK(e.values[k - 1] <= e.values[k]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref{Eigen::MatrixXd(m)};
    for (int k = 0; k < 8; ++k) CHECK(std::abs(e.values[k] - ref.eigenvalues()[k]) < 1e-9);
  }

  Matrix asym = Matrix::Identity(3, 3);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(jacobi_eigen(asym), ContractError);
  Matrix hard = oracle::random_matrix(6, 6, rng);
  hard = (hard + hard.transpose()).eval();
  CHECK_THROWS_AS(jacobi_eigen(hard, 1e-300, 1), ConvergenceError);
}

TEST_CASE("spectral properties") {
  for (int n = 3; n <= 10; ++n) {
    auto s = spectral_props(oracle::complete(n));
    CHECK(std::abs(s.spectral_radius.value - (n - 1)) < 1e-8);
    CHECK(s.graph_energy.value == Approx(n * (n - 1.0)));
    CHECK(s.algebraic_connectivity.value == Approx(static_cast<double>(n)));
  }
  CHECK(spectral_props(oracle::complete(4)).adjacency_energy.value == Approx(6.0));
  // Path Laplacian: lambda_2 = 2 - 2 cos(pi / n).
  for (int n = 2; n <= 9; ++n) {
    CHECK(spectral_props(oracle::path(n)).algebraic_connectivity.value ==
          Approx(2.0 - 2.0 * std::cos(M_PI / n)));
  }
  Rng rng(6);
  int disconnected = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Graph g = oracle::random_graph(static_cast<int>(rng.uniform_int(2, 12)), 0.25, rng);
    auto s = spectral_props(g);
    if (is_connected(g)) {
      CHECK(s.algebraic_connectivity.value > 0.0);
    } else {
      ++disconnected;
      CHECK(s.algebraic_connectivity.value == 0.0);
    }
    CHECK(s.graph_energy.value == Approx(2.0 * g.num_edges()).epsilon(1e-9));
  }
  CHECK(disconnected > 20);
}

TEST_CASE("reference graphs") {
  Rng rng(9);
  Graph g = oracle::random_graph(20, 0.25, rng);
  auto r = random_reference(g, rng);
  CHECK_FALSE(r.warning);
  CHECK(r.graph.num_edges() == g.num_edges());
  for (int v = 0; v < 20; ++v) CHECK(r.graph.degree(v) == g.degree(v));

  Rng a(5), b(5);
  CHECK(random_reference(g, a).graph == random_reference(g, b).graph);
  CHECK(random_reference(oracle::path(2), rng).warning);
  // K4 has no feasible swap.
  CHECK(random_reference(oracle::complete(4), rng).warning);

  Graph ring = oracle::path(6);
  Graph six("six", 6, {{0, 2}, {1, 3}, {2, 4}, {3, 5}, {0, 4}, {1, 5}});
  Graph lat = lattice_reference(six);
  CHECK(lat.edges() == oracle::cycle(6).edges());
  CHECK(lattice_reference(ring).num_edges() == 5);
  CHECK_THROWS_AS(lattice_reference(oracle::path(2)), ContractError);

  double lattice_c = 0.0, random_c = 0.0;
  for (int s = 0; s < 5; ++s) {
    Rng gr(100 + s);
    Graph base = oracle::random_graph(50, 100.0 / 1225.0, gr);
    while (base.num_edges() != 100) base = oracle::random_graph(50, 100.0 / 1225.0, gr);
    lattice_c += mean(local_clustering(lattice_reference(base)));
    random_c += mean(local_clustering(random_reference(base, gr).graph));
  }
  CHECK(lattice_c > random_c);

  double rewired = 0.0;
  Graph thick = watts_strogatz(60, 4, 0.0, rng);
  for (int s = 0; s < 10; ++s) {
    Rng sr(s);
    rewired += mean(local_clustering(random_reference(thick, sr).graph));
  }
  CHECK(mean(local_clustering(thick)) == Approx(0.5));
  CHECK(rewired / 10 < 0.2);
  CHECK(lattice_reference(oracle::cycle(20)).edges() == oracle::cycle(20).edges());
}

TEST_CASE("small-world measures") {
  Rng rng(42);
  double q = 0.0;
  for (int s = 0; s < 3; ++s) {
    Graph ws = watts_strogatz(100, 4, 0.1, rng);
    auto sw = small_world(ws, rng);
    REQUIRE(sw.coefficient.defined);
    q += sw.coefficient.value;
    CHECK(sw.coefficient.value > 1.0);
  }
  MESSAGE("mean Q for Watts-Strogatz(100, 4, 0.1): " << q / 3);

  // A graph equal to its own lattice reference: L = L_l.
  Graph lat = lattice_reference(watts_strogatz(30, 4, 0.0, rng));
  auto sw = small_world(lat, rng);
  REQUIRE(sw.index.defined);
  CHECK(std::abs(sw.index.value) < 1e-12);

  // An Erdos-Renyi graph looks like its random references.
  double swi = 0.0;
  for (int s = 0; s < 5; ++s) {
    Graph er = oracle::random_graph(60, 0.1, rng);
    auto m = small_world(er, rng);
    if (m.index.defined) swi += m.index.value;
  }
  CHECK(std::abs(swi / 5) < 0.15);

  CHECK_FALSE(small_world(oracle::path(3), rng).index.defined);
  Rng a(1), b(1);
  Graph g = watts_strogatz(40, 4, 0.2, rng);
  CHECK(small_world(g, a).index == small_world(g, b).index);
}

TEST_CASE("centralizations") {
  for (int leaves = 2; leaves <= 8; ++leaves) {
    auto c = centralizations(oracle::star(leaves));
    CHECK(c.betweenness_centralization.value == Approx(1.0));
  }
  CHECK_FALSE(centralizations(oracle::complete(5)).betweenness_centralization.defined);
  CHECK(centralizations(oracle::cycle(7)).pagerank_centralization.value == Approx(0.0).epsilon(1e-9));
  CHECK(centralization({1.0, 3.0}, CentralizationKind::stddev).value == Approx(1.0));
  std::vector<double> v{0.5, 0.25, 0.25};
  CHECK(centralization(v, CentralizationKind::freeman).value == Approx(0.5 / (2 * 0.5)));
}

TEST_CASE("global property vector") {
  Rng rng(1);
  auto grid = global_properties(make_grid3x3(), rng);
  CHECK(grid[GlobalProperty::n_squares].value == 4);
  CHECK(grid[GlobalProperty::n_triangles].value == 0);
  CHECK(grid[GlobalProperty::n_edges].value == 12);

  GridHouseOptions o;
  o.count = 20;
  o.seed = 3;
  Dataset d = generate_grid_house(o);
  for (const auto& g : d.graphs) {
    if (g.label() != 1) continue;
    CHECK(global_properties(g, rng)[GlobalProperty::n_squares].value == 5);
  }

  auto k1 = global_properties(Graph("k1", 1, {}), rng);
  CHECK(k1[GlobalProperty::n_nodes].value == 1);
  CHECK_FALSE(k1[GlobalProperty::density].defined);

  for (int trial = 0; trial < 100; ++trial) {
    Graph g = oracle::random_graph(static_cast<int>(rng.uniform_int(1, 14)), 0.3, rng);
    auto p = global_properties(g, rng);
    const int n = g.num_nodes();
    if (p[GlobalProperty::density].defined) {
      CHECK(p[GlobalProperty::density].value >= 0.0);
      CHECK(p[GlobalProperty::density].value <= 1.0);
    }
    CHECK(p[GlobalProperty::radius].value <= p[GlobalProperty::diameter].value);
    CHECK(p[GlobalProperty::diameter].value <= n - 1);
    for (auto k : {GlobalProperty::n_cliques, GlobalProperty::n_triangles, GlobalProperty::n_squares}) {
      CHECK(p[k].value >= 0);
      CHECK(p[k].value == std::floor(p[k].value));
    }
  }
}

TEST_CASE("properties are invariant under node relabeling") {
  Rng rng(314);
  for (int trial = 0; trial < 60; ++trial) {
    Graph g = oracle::random_graph(static_cast<int>(rng.uniform_int(2, 14)), 0.3, rng);
    auto perm = oracle::random_permutation(g.num_nodes(), rng);
    Graph h = permute_nodes(g, perm);
    Rng ra(1), rb(1);
    auto a = global_properties(g, ra);
    auto b = global_properties(h, rb);
    for (std::size_t k = 0; k < kNumGlobalProperties; ++k) {
      const auto p = static_cast<GlobalProperty>(k);
      // The random references depend on edge order, so the seeded small-world
      // pair is only invariant in distribution.
      if (p == GlobalProperty::small_world_coefficient || p == GlobalProperty::small_world_index) continue;
      CAPTURE(kGlobalPropertyNames[k]);
      CHECK(a[p].defined == b[p].defined);
      CHECK(std::abs(a[p].value - b[p].value) <= 1e-9 * std::max(1.0, std::abs(a[p].value)));
    }
    auto na = node_properties(g);
    auto nb = node_properties(h);
    for (std::size_t c = 0; c < NodePropertyTable::names.size(); ++c)
      for (int v = 0; v < g.num_nodes(); ++v)
        CHECK(std::abs(na.column(c)[v] - nb.column(c)[perm[v]]) < 1e-9);
  }
}
