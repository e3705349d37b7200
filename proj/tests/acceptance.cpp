// One PASS/FAIL line per acceptance criterion. Criteria 7 and 10 are soft:
// they are reported but do not change the exit status.

#define DOCTEST_CONFIG_DISABLE

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/core.h>

#include "graphprobe/config.hpp"
#include "graphprobe/dataset.hpp"
#include "graphprobe/isomorphism.hpp"
#include "graphprobe/linalg.hpp"
#include "graphprobe/models.hpp"
#include "graphprobe/nn/tape.hpp"
#include "graphprobe/pipeline.hpp"
#include "graphprobe/probe.hpp"
#include "graphprobe/properties.hpp"
#include "oracles.hpp"

using namespace graphprobe;
using Clock = std::chrono::steady_clock;

namespace {

int hard_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, bool pass, const std::string& detail, bool soft = false) {
  fmt::print("{} criterion {}: {}{}\n", pass ? "PASS" : "FAIL", id, detail, soft ? " [soft]" : "");
  std::fflush(stdout);
  if (!pass && !soft) ++hard_failures;
}

void progress(const std::string& msg) {
  fmt::print(stderr, "  .. {}\n", msg);
  std::fflush(stderr);
}

// --- 1 ---------------------------------------------------------------------

void dataset_law(const Dataset& d, double generation_seconds) {
  const auto t0 = Clock::now();
  int bad_law = 0;
  for (const auto& g : d.graphs) {
    const auto sq = count_squares(g);
    const auto tri = count_triangles(g);
    const bool ok = *g.label() == 1 ? (sq == 5 && tri == 1) : ((sq == 1 && tri == 1) || (sq == 4 && tri == 0));
    bad_law += !ok;
  }

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < d.size(); ++i) buckets[wl_hash(d.graphs[i])].push_back(i);
  int cross_iso = 0;
  for (const auto& [h, idx] : buckets)
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = a + 1; b < idx.size(); ++b)
        if (d.split[idx[a]] != d.split[idx[b]] && is_isomorphic(d.graphs[idx[a]], d.graphs[idx[b]])) ++cross_iso;

  std::stringstream first, second;
  write_dataset(d, first);
  const Dataset back = read_dataset(first);
  write_dataset(back, second);
  const bool round_trip = back == d && second.str() == first.str();

  const double total = generation_seconds + seconds_since(t0);
  report(1, bad_law == 0 && cross_iso == 0 && round_trip && total < 120.0 && d.size() == 2000,
         fmt::format("{} graphs, {} law violations, {} cross-split isomorphic pairs, loader round trip {}, {:.1f} s",
                     d.size(), bad_law, cross_iso, round_trip ? "exact" : "MISMATCH", total));
}

// --- 2 ---------------------------------------------------------------------

void property_oracles() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  int graphs = 0, count_mismatch = 0;
  double worst_betweenness = 0.0;
  for (int trial = 0; trial < 250; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    const double p = rng.uniform(0.05, 0.9);
    Graph g = oracle::random_graph(n, p, rng, "g" + std::to_string(trial));
    ++graphs;
    if (count_triangles(g) != oracle::triangles(g)) ++count_mismatch;
    if (count_squares(g) != oracle::squares(g)) ++count_mismatch;
    const auto cliques = count_maximal_cliques(g);
    if (!cliques.complete || cliques.count != oracle::maximal_cliques(g)) ++count_mismatch;
    const auto fast = betweenness_centrality(g);
    const auto slow = oracle::betweenness(g);
    for (int v = 0; v < n; ++v) worst_betweenness = std::max(worst_betweenness, std::abs(fast[v] - slow[v]));
  }
  const double secs = seconds_since(t0);
  report(2, graphs >= 200 && count_mismatch == 0 && worst_betweenness <= 1e-12 && secs < 120.0,
         fmt::format("{} graphs (n <= 12), {} count mismatches, max betweenness error {:.2e}, {:.1f} s", graphs,
                     count_mismatch, worst_betweenness, secs));
}

// --- 3 ---------------------------------------------------------------------

void spectral() {
  double radius_err = 0.0;
  for (int n = 3; n <= 10; ++n) {
    const auto s = spectral_props(oracle::complete(n));
    radius_err = std::max(radius_err, std::abs(s.spectral_radius.value - (n - 1)));
  }
  Rng rng(33);
  int disconnected_nonzero = 0, connected_nonpositive = 0, disconnected = 0, connected = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Graph g = oracle::random_graph(static_cast<int>(rng.uniform_int(2, 12)), rng.uniform(0.1, 0.6), rng);
    const double ac = spectral_props(g).algebraic_connectivity.value;
    if (is_connected(g)) {
      ++connected;
      connected_nonpositive += !(ac > 0.0);
    } else {
      ++disconnected;
      disconnected_nonzero += ac != 0.0;
    }
  }
  double residual = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m = oracle::random_matrix(8, 8, rng);
    m = (m + m.transpose()).eval();
    const auto e = jacobi_eigen(m);
    for (int k = 0; k < 8; ++k) {
      const Vector v = e.vectors.col(k);
      residual = std::max(residual, (m * v - e.values[k] * v).norm());
    }
  }
  report(3,
         radius_err < 1e-8 && disconnected_nonzero == 0 && connected_nonpositive == 0 && residual < 1e-8 &&
             disconnected > 0 && connected > 0,
         fmt::format("K_n radius error {:.1e}; lambda2: {}/{} disconnected nonzero, {}/{} connected not positive; "
                     "max eigen residual {:.1e}",
                     radius_err, disconnected_nonzero, disconnected, connected_nonpositive, connected, residual));
}

// --- 4 ---------------------------------------------------------------------

// Fixed random weights turn any tensor into a scalar.
nn::Tensor readout(nn::Tape& t, const nn::Tensor& x, std::uint64_t seed = 99) {
  Rng rng(seed);
  auto w = nn::constant(oracle::random_matrix(static_cast<int>(x->rows()), static_cast<int>(x->cols()), rng));
  auto r = t.matmul(nn::constant(Matrix::Ones(1, x->rows())), t.mul(x, w));
  return t.matmul(r, nn::constant(Matrix::Ones(x->cols(), 1)));
}

void gradients() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, double>> errors;
  Rng rng(4);
  using nn::parameter;
  auto a = parameter(oracle::random_matrix(6, 4, rng));
  auto b = parameter(oracle::random_matrix(4, 5, rng));
  auto c = parameter(oracle::random_matrix(6, 5, rng));
  auto bias = parameter(oracle::random_matrix(1, 5, rng));
  auto s = parameter(oracle::random_matrix(1, 1, rng));
  auto att = parameter(oracle::random_matrix(2, 2, rng));
  auto logits = parameter(oracle::random_matrix(6, 3, rng, 2.0));
  std::vector<int> labels{0, 2, 1, 1, 0, 2};
  nn::Segments seg{{0, 2, 3, 6}};
  std::vector<Eigen::Triplet<double>> trip{{0, 1, 0.5}, {1, 0, 0.5}, {2, 3, 1.0}, {3, 2, 1.0}, {4, 5, 0.3}, {0, 0, 1.0}};
  auto sp = std::make_shared<SparseMatrix>(6, 6);
  sp->setFromTriplets(trip.begin(), trip.end());
  std::vector<int> src{0, 1, 2, 1, 3, 4, 5, 0}, dst{0, 0, 1, 1, 2, 2, 2, 3};

  auto check = [&](const std::string& name, std::vector<nn::Tensor> params, auto fn) {
    errors.emplace_back(name, oracle::check_gradients(params, fn).max_rel_error);
  };
  check("matmul", {a, b}, [&](nn::Tape& t) { return readout(t, t.matmul(a, b)); });
  check("add", {c}, [&](nn::Tape& t) { return readout(t, t.add(c, t.mul(c, c))); });
  check("add_bias_row", {c, bias}, [&](nn::Tape& t) { return readout(t, t.add_bias_row(c, bias)); });
  check("relu", {c}, [&](nn::Tape& t) { return readout(t, t.relu(c)); });
  check("leaky_relu", {c}, [&](nn::Tape& t) { return readout(t, t.leaky_relu(c, 0.2)); });
  check("mul", {c}, [&](nn::Tape& t) { return readout(t, t.mul(c, c)); });
  check("scale", {c, s}, [&](nn::Tape& t) { return readout(t, t.scale(c, s)); });
  check("concat_cols", {a, c}, [&](nn::Tape& t) {
    std::vector<nn::Tensor> parts{a, c};
    return readout(t, t.concat_cols(parts));
  });
  for (auto kind : {nn::PoolKind::mean, nn::PoolKind::sum, nn::PoolKind::max})
    check("segment_pool/" + std::string(to_string(kind)), {c},
          [&](nn::Tape& t) { return readout(t, t.segment_pool(c, seg, kind)); });
  check("dropout", {c}, [&](nn::Tape& t) {
    Rng mask(7);
    return readout(t, t.dropout(c, 0.3, true, mask));
  });
  check("softmax_cross_entropy", {logits}, [&](nn::Tape& t) { return t.softmax_cross_entropy(logits, labels); });
  check("spmm", {c}, [&](nn::Tape& t) { return readout(t, t.spmm(sp, c)); });
  check("gather_rows", {c}, [&](nn::Tape& t) { return readout(t, t.gather_rows(c, src)); });
  check("head_dot", {a, att}, [&](nn::Tape& t) { return readout(t, t.head_dot(a, att)); });
  check("segment_softmax", {a, att}, [&](nn::Tape& t) {
    return readout(t, t.segment_softmax(t.gather_rows(t.head_dot(a, att), src), dst, 4));
  });
  check("edge_aggregate", {a, att}, [&](nn::Tape& t) {
    auto alpha = t.segment_softmax(t.leaky_relu(t.gather_rows(t.head_dot(a, att), src), 0.2), dst, 4);
    return readout(t, t.edge_aggregate(alpha, a, src, dst, 4));
  });

  std::vector<Graph> gs;
  for (int i = 0; i < 3; ++i) {
    Graph g = oracle::random_graph(static_cast<int>(rng.uniform_int(3, 7)), 0.5, rng, "s" + std::to_string(i));
    g.set_label(i % 2);
    g.set_features(build_features(g, 10));
    gs.push_back(std::move(g));
  }
  std::vector<const Graph*> ptr;
  for (const auto& g : gs) ptr.push_back(&g);
  for (Arch arch : {Arch::gcn, Arch::gin, Arch::gat}) {
    Model m = init_model(ModelConfig::defaults(arch), rng);
    // Zero biases put isolated nodes exactly on the ReLU kink.
    for (auto& [name, t] : m.params)
      if (name.find("bias") != std::string::npos) t->value = oracle::random_matrix(t->rows(), t->cols(), rng, 0.1);
    const GraphBatch batch = make_batch(ptr, arch);
    // The default GAT has ~200k weights; a fixed random subset per tensor keeps it under a minute.
    const Eigen::Index per_tensor = arch == Arch::gat ? 400 : 0;
    auto res = oracle::check_gradients(
        m.tensors(),
        [&](nn::Tape& t) {
          Rng unused(0);
          return t.softmax_cross_entropy(forward(t, m, batch, false, unused).logits, batch.labels);
        },
        1e-5, per_tensor);
    errors.emplace_back(std::string("model/") + std::string(to_string(arch)) + fmt::format("({} entries, {} kink fallbacks)", res.entries, res.one_sided),
                        res.max_rel_error);
  }

  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, e] : errors)
    if (e >= worst) {
      worst = e;
      worst_name = name;
    }
  const double secs = seconds_since(t0);
  std::string models;
  for (const auto& [name, e] : errors)
    if (name.rfind("model/", 0) == 0) models += fmt::format(" {} {:.1e};", name.substr(6), e);
  report(4, worst < 1e-4 && secs < 300.0,
         fmt::format("{} checks, max relative error {:.2e} ({}),{} {:.1f} s", errors.size(), worst, worst_name, models,
                     secs));
}

// --- 8 ---------------------------------------------------------------------

void probe_nulls(const GraphPropertyTable& props) {
  const auto squares = std::find(props.names.begin(), props.names.end(), "n_squares") - props.names.begin();
  const auto n = props.values.rows();
  std::vector<int> defined_cols;
  for (Eigen::Index k = 0; k < props.values.cols(); ++k)
    if (props.values.col(k).allFinite()) defined_cols.push_back(static_cast<int>(k));
  Matrix base(n, static_cast<Eigen::Index>(defined_cols.size()));
  for (std::size_t j = 0; j < defined_cols.size(); ++j) base.col(static_cast<Eigen::Index>(j)) = props.values.col(defined_cols[j]);

  double worst_linear = 1.0, worst_null = -1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    ProbeFeatureMatrix f;
    f.layer = "synthetic";
    f.aggregation = "pooled_native";
    f.x = base * oracle::random_matrix(static_cast<int>(base.cols()), 48, rng);
    for (Eigen::Index i = 0; i < n; ++i) f.split.push_back(rng.uniform(0.0, 1.0) < 0.8 ? Split::train : Split::test);

    TargetTable linear{{"n_squares"}, props.values.col(squares)};
    RidgeOptions opt;
    opt.seed = seed;
    worst_linear = std::min(worst_linear, *probe_features(f, linear, opt).at(0).r2_test);

    std::vector<double> shuffled(props.values.col(squares).data(), props.values.col(squares).data() + n);
    rng.shuffle(std::span(shuffled));
    TargetTable null{{"shuffled"}, Eigen::Map<Vector>(shuffled.data(), n)};
    worst_null = std::max(worst_null, *probe_features(f, null, opt).at(0).r2_test);
  }
  report(8, worst_linear >= 0.99 && worst_null <= 0.05,
         fmt::format("5 seeds: min linear-map r2_test {:.4f}, max shuffled-target r2_test {:.4f}", worst_linear,
                     worst_null));
}

// --- 9 ---------------------------------------------------------------------

void permutation_invariance() {
  Rng rng(9);
  std::vector<Model> models;
  for (Arch arch : {Arch::gcn, Arch::gin, Arch::gat}) models.push_back(init_model(ModelConfig::defaults(arch), rng));
  int norm_sort_diffs = 0;
  double worst_pooled = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Graph g = oracle::random_graph(static_cast<int>(rng.uniform_int(2, 20)), rng.uniform(0.1, 0.5), rng, "p");
    g.set_label(0);
    g.set_features(build_features(g, 10));
    const auto perm = oracle::random_permutation(g.num_nodes(), rng);
    Graph h = permute_nodes(g, perm);

    for (const auto& m : models) {
      std::vector<const Graph*> one{&g}, other{&h};
      nn::Tape t1(false), t2(false);
      Rng unused(0);
      const auto a = forward(t1, m, make_batch(one, m.config.arch), false, unused);
      const auto b = forward(t2, m, make_batch(other, m.config.arch), false, unused);
      for (std::size_t k = 0; k < a.layers.size(); ++k) {
        const Matrix& x = a.layers[k].value->value;
        if (a.layers[k].per_node) {
          // Same rows in relabelled order: norm-sort must not see the labels at all.
          Matrix moved(x.rows(), x.cols());
          for (int v = 0; v < g.num_nodes(); ++v) moved.row(perm[v]) = x.row(v);
          norm_sort_diffs += aggregate_norm_sort(x, 20) != aggregate_norm_sort(moved, 20);
        } else {
          worst_pooled = std::max(worst_pooled, (x - b.layers[k].value->value).cwiseAbs().maxCoeff());
        }
      }
    }
  }
  report(9, norm_sort_diffs == 0 && worst_pooled <= 1e-12,
         fmt::format("100 trials x 3 architectures: {} norm-sort differences, max pooled deviation {:.2e}",
                     norm_sort_diffs, worst_pooled));
}

// --- 5, 6, 7, 10 -------------------------------------------------------------

struct Trained {
  std::string name;
  TrainedModel result;
  std::vector<ProbeResult> probes;
};

std::map<std::string, double> layer_scores(const std::vector<ProbeResult>& probes, const std::string& layer) {
  std::map<std::string, double> out;
  for (const auto& r : probes)
    if (r.layer == layer && r.status == ProbeStatus::ok && r.r2_test) out[r.property] = *r.r2_test;
  return out;
}

std::pair<std::string, double> best_of(const std::map<std::string, double>& scores) {
  std::pair<std::string, double> best{"", -1e300};
  for (const auto& [k, v] : scores)
    if (v > best.second) best = {k, v};
  return best;
}

double squares_gap(const std::map<std::string, double>& scores) {
  double next = -1e300;
  for (const auto& [k, v] : scores)
    if (k != "n_squares") next = std::max(next, v);
  return scores.at("n_squares") - next;
}

int separable_count(const std::map<std::string, double>& scores) {
  return static_cast<int>(std::count_if(scores.begin(), scores.end(), [](const auto& kv) { return kv.second >= 0.3; }));
}

}  // namespace

int main() {
  const RunConfig config = RunConfig::defaults();
  const int threads = resolve_threads();
  fmt::print("acceptance run: config hash {}, {} thread(s)\n", config.hash(), threads);

  auto t0 = Clock::now();
  const Dataset data = generate_grid_house(config.dataset);
  const double generation_seconds = seconds_since(t0);
  dataset_law(data, generation_seconds);
  property_oracles();
  spectral();
  gradients();

  progress("computing graph properties");
  std::vector<std::string> ids;
  for (const auto& g : data.graphs) ids.push_back(g.id());
  const auto rows = compute_global_properties(data, threads);
  const GraphPropertyTable props = make_property_table(ids, rows);

  probe_nulls(props);
  permutation_invariance();

  // The three criterion-5 models go first so their wall time can be measured on its own.
  std::vector<std::string> order{"gin_control", "gcn_control", "gat", "gcn_l2", "gcn_dropout", "gin_l2", "gin_dropout"};
  std::map<std::string, Trained> trained;
  double band_seconds = 0.0;
  for (const auto& name : order) {
    const NamedModel& m = config.model(name);
    progress(fmt::format("training {} ({} restarts, up to {} epochs)", name, m.config.restarts, m.config.epochs));
    const auto start = Clock::now();
    TrainOptions opt;
    opt.threads = threads;
    opt.log = [&](const std::string& s) { progress(name + ": " + s); };
    Trained t{name, train(m.config, data, opt), {}};
    const double secs = seconds_since(start);
    if (name == "gin_control" || name == "gcn_control" || name == "gat") band_seconds += secs;
    progress(fmt::format("{}: test accuracy {:.4f} in {:.0f} s; probing", name, t.result.test_accuracy, secs));
    const EmbeddingSet set = extract_embeddings(t.result.model, data);
    t.probes = probe_graph_level(set, props, config.aggregation, config.ridge);
    trained.emplace(name, std::move(t));
    if (name == "gat") {
      const double gin = trained.at("gin_control").result.test_accuracy;
      const double gcn = trained.at("gcn_control").result.test_accuracy;
      const double gat = trained.at("gat").result.test_accuracy;
      report(5, gin >= 0.95 && gcn >= 0.85 && gat >= 0.90 && band_seconds <= 1800.0,
             fmt::format("test accuracy GIN {:.4f} (>= 0.95), GCN {:.4f} (>= 0.85), GAT {:.4f} (>= 0.90); "
                         "20 restarts in {:.0f} s",
                         gin, gcn, gat, band_seconds));

      const auto& probes = trained.at("gin_control").probes;
      bool ok = true;
      std::string detail;
      for (const char* layer : {"x5", "x_global"}) {
        const auto scores = layer_scores(probes, layer);
        const auto best = best_of(scores);
        const double sq = scores.count("n_squares") ? scores.at("n_squares") : -1e300;
        ok = ok && best.first == "n_squares" && sq >= 0.80;
        detail += fmt::format("{}: n_squares {:.4f}, top {} {:.4f}; ", layer, sq, best.first, best.second);
      }
      report(6, ok, "GIN control " + detail.substr(0, detail.size() - 2));
      for (const char* layer : {"x5", "x_global"}) {
        auto scores = layer_scores(probes, layer);
        std::erase_if(scores, [](const auto& kv) {
          static const std::set<std::string> reported{"n_nodes",   "n_edges",     "density",   "avg_path_length",
                                                      "n_cliques", "n_triangles", "n_squares", "largest_component_size"};
          return !reported.count(kv.first);
        });
        const auto best = best_of(scores);
        fmt::print("INFO criterion 6 over the eight commonly tabulated properties, {}: top {} {:.4f}\n", layer,
                   best.first, best.second);
      }
    }
  }

  {
    bool ok = true;
    std::string detail;
    for (const char* arch : {"gcn", "gin"}) {
      const std::string control = std::string(arch) + "_control";
      const std::string final_layer = layer_names(config.model(control).config).back();
      const auto c = layer_scores(trained.at(control).probes, final_layer);
      const auto l2 = layer_scores(trained.at(std::string(arch) + "_l2").probes, final_layer);
      const auto drop = layer_scores(trained.at(std::string(arch) + "_dropout").probes, final_layer);
      const double gc = squares_gap(c), gl = squares_gap(l2);
      const int nc = separable_count(c), nd = separable_count(drop);
      ok = ok && gl >= gc && nd >= nc;
      detail += fmt::format("{} at {}: L2 gap {:.4f} vs control {:.4f}, dropout count {} vs control {}; ", arch,
                            final_layer, gl, gc, nd, nc);
    }
    report(7, ok, detail.substr(0, detail.size() - 2), true);
  }

  {
    std::vector<std::string> names;
    std::vector<double> acc;
    std::vector<std::vector<ProbeResult>> tables;
    for (const auto& m : config.models) {
      names.push_back(m.name);
      acc.push_back(trained.at(m.name).result.test_accuracy);
      tables.push_back(trained.at(m.name).probes);
    }
    const auto corr = correlation_report(names, acc, tables);
    std::string detail;
    for (const auto& r : corr.rows)
      detail += fmt::format(" {} {:.4f}/{:.4f};", r.model, r.test_accuracy, r.max_r2_test.value_or(NAN));
    report(10, corr.correlation && *corr.correlation >= 0.8,
           fmt::format("Pearson(test accuracy, max r2_test) = {} over 7 models (accuracy/max r2:{})",
                       corr.correlation ? fmt::format("{:.4f}", *corr.correlation) : "undefined",
                       detail.substr(0, detail.size() - 1)),
           true);
  }

  for (const auto& m : config.models) {
    const std::string logits = layer_names(m.config).back();
    const auto scores = layer_scores(trained.at(m.name).probes, logits);
    const auto best = best_of(scores);
    const double sq = scores.count("n_squares") ? scores.at("n_squares") : NAN;
    fmt::print("INFO {} logits layer {}: n_squares r2_test {:.4f}, best {} {:.4f} ({})\n", m.name, logits, sq,
               best.first, best.second, best.second - sq <= 0.05 ? "within 0.05" : "more than 0.05 behind");
  }

  fmt::print("acceptance: {} hard failure(s)\n", hard_failures);
  return hard_failures == 0 ? 0 : 1;
}
