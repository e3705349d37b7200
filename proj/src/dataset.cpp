#include "graphprobe/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "graphprobe/isomorphism.hpp"

namespace graphprobe {

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ParameterError("unknown split '" + std::string(s) + "'");
}

std::size_t Dataset::count(Split s) const {
  return static_cast<std::size_t>(std::count(split.begin(), split.end(), s));
}

int Dataset::max_nodes() const {
  int m = 0;
  for (const auto& g : graphs) m = std::max(m, g.num_nodes());
  return m;
}

FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "degree") return FeatureKind::degree;
  if (s == "constant") return FeatureKind::constant;
  throw ParameterError("unknown feature kind '" + std::string(s) + "'");
}

std::string_view to_string(FeatureKind k) { return k == FeatureKind::degree ? "degree" : "constant"; }

Matrix build_features(const Graph& g, int dim, FeatureKind kind) {
  if (dim < 1) throw ParameterError("feature dim must be >= 1");
  Matrix f(g.num_nodes(), dim);
  for (int v = 0; v < g.num_nodes(); ++v) {
    const double base = kind == FeatureKind::degree ? g.degree(v) : 1.0;
    f.row(v).setConstant(base / dim);
  }
  return f;
}

void ensure_features(Dataset& d, int dim, FeatureKind kind) {
  for (auto& g : d.graphs) {
    if (!g.has_features()) g.set_features(build_features(g, dim, kind));
  }
}

Graph generate_ba(int n, int m, Rng& rng) {
  if (m < 1) throw ParameterError("generate_ba: m must be >= 1");
  if (n < std::max(2, m + 1)) {
    throw ParameterError("generate_ba: n must be >= max(2, m+1), got n=" + std::to_string(n));
  }
  std::vector<std::pair<int, int>> edges;
  // Each endpoint occurrence is one entry, so uniform draws are degree-weighted.
  std::vector<int> repeated;
  for (int v = 1; v <= m; ++v) {
    edges.emplace_back(0, v);
    repeated.push_back(0);
    repeated.push_back(v);
  }
  std::vector<int> targets;
  for (int v = m + 1; v < n; ++v) {
    targets.clear();
    while (static_cast<int>(targets.size()) < m) {
      int t = repeated[rng.index(repeated.size())];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (int t : targets) {
      edges.emplace_back(t, v);
      repeated.push_back(t);
      repeated.push_back(v);
    }
  }
  return Graph("ba", n, edges);
}

Graph make_house() {
  return Graph("house", 5, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {1, 4}});
}

Graph make_grid3x3() {
  std::vector<std::pair<int, int>> edges;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      int v = r * 3 + c;
      if (c < 2) edges.emplace_back(v, v + 1);
      if (r < 2) edges.emplace_back(v, v + 3);
    }
  }
  return Graph("grid3x3", 9, edges);
}

Graph attach(const Graph& base, const Graph& motif, Rng& rng) {
  const int a = static_cast<int>(rng.index(base.num_nodes()));
  const int b = static_cast<int>(rng.index(motif.num_nodes()));
  std::vector<std::pair<int, int>> edges;
  edges.reserve(base.num_edges() + motif.num_edges() + 1);
  const int shift = base.num_nodes();
  for (const auto& e : base.edges()) edges.emplace_back(e.u, e.v);
  for (const auto& e : motif.edges()) edges.emplace_back(e.u + shift, e.v + shift);
  edges.emplace_back(a, b + shift);
  return Graph(base.id(), base.num_nodes() + motif.num_nodes(), edges);
}

namespace {

enum class Composition { grid, house, both };

Graph compose(Composition kind, const GridHouseOptions& o, Rng& rng) {
  auto draw = [&](int lo, int hi) {
    return std::max(o.min_base, static_cast<int>(rng.uniform_int(lo, hi)));
  };
  switch (kind) {
    case Composition::grid: {
      Graph g = attach(generate_ba(draw(o.grid_min, o.grid_max), o.ba_m, rng), make_grid3x3(), rng);
      g.set_label(0);
      return g;
    }
    case Composition::house: {
      Graph g = attach(generate_ba(draw(o.house_min, o.house_max), o.ba_m, rng), make_house(), rng);
      g.set_label(0);
      return g;
    }
    case Composition::both: {
      Graph g = attach(generate_ba(draw(o.both_min, o.both_max), o.ba_m, rng), make_grid3x3(), rng);
      g = attach(g, make_house(), rng);
      g.set_label(1);
      return g;
    }
  }
  throw ContractError("unreachable composition");
}

std::string_view composition_name(Composition c) {
  switch (c) {
    case Composition::grid: return "grid";
    case Composition::house: return "house";
    case Composition::both: return "grid+house";
  }
  return "";
}

}  // namespace

Dataset generate_grid_house(const GridHouseOptions& o) {
  if (o.count < 2) throw ParameterError("generate_grid_house: count must be >= 2");
  if (o.test_fraction <= 0.0 || o.test_fraction >= 1.0) {
    throw ParameterError("generate_grid_house: test_fraction must be in (0,1)");
  }
  Rng rng(derive_seed(o.seed, hash_string("grid-house")));

  const int n_pos = o.count / 2;
  const int n_neg = o.count - n_pos;
  std::vector<Composition> plan;
  plan.reserve(o.count);
  for (int i = 0; i < n_pos; ++i) plan.push_back(Composition::both);
  for (int i = 0; i < n_neg; ++i) plan.push_back(i % 2 == 0 ? Composition::grid : Composition::house);
  rng.shuffle(std::span(plan));

  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
  std::vector<Graph> graphs;
  std::vector<Composition> kinds;
  graphs.reserve(o.count);
  long long collisions = 0;
  for (Composition kind : plan) {
    bool placed = false;
    for (int attempt = 0; attempt < o.max_attempts_per_graph; ++attempt) {
      Graph g = compose(kind, o, rng);
      const auto h = wl_hash(g, o.wl_iterations);
      auto& bucket = buckets[h];
      bool duplicate = false;
      for (std::size_t idx : bucket) {
        if (check_isomorphism(g, graphs[idx]) != IsoResult::not_isomorphic) {
          duplicate = true;
          break;
        }
      }
      if (duplicate) {
        ++collisions;
        continue;
      }
      bucket.push_back(graphs.size());
      graphs.push_back(std::move(g));
      kinds.push_back(kind);
      placed = true;
      break;
    }
    if (!placed) {
      throw GenerationError("generate_grid_house: could not find a non-isomorphic " +
                                std::string(composition_name(kind)) + " graph after " +
                                std::to_string(o.max_attempts_per_graph) + " attempts (" +
                                std::to_string(graphs.size()) + " of " +
                                std::to_string(o.count) + " generated)",
                            graphs.size());
    }
  }

  Dataset d;
  d.seed = o.seed;
  d.split.assign(graphs.size(), Split::train);
  // Stratified split; graphs are pairwise non-isomorphic, so no leakage.
  for (int label = 0; label <= 1; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      if (graphs[i].label() == label) idx.push_back(i);
    }
    rng.shuffle(std::span(idx));
    const auto n_test = static_cast<std::size_t>(std::llround(o.test_fraction * idx.size()));
    for (std::size_t k = 0; k < n_test; ++k) d.split[idx[k]] = Split::test;
  }
  const int width = static_cast<int>(std::to_string(graphs.size() - 1).size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    std::string num = std::to_string(i);
    graphs[i].set_id("gh-" + std::string(width - num.size(), '0') + num);
    graphs[i].set_features(build_features(graphs[i], o.feature_dim, o.features));
  }
  d.graphs = std::move(graphs);

  int max_nodes = d.max_nodes();
  d.meta = {
      {"generator", "grid-house"},
      {"count", o.count},
      {"test_fraction", o.test_fraction},
      {"ba_m", o.ba_m},
      {"base_ranges",
       {{"grid", {o.grid_min, o.grid_max}},
        {"house", {o.house_min, o.house_max}},
        {"both", {o.both_min, o.both_max}}}},
      {"min_base", o.min_base},
      {"wl_iterations", o.wl_iterations},
      {"isomorphic_rejections", collisions},
      {"feature_dim", o.feature_dim},
      {"features", to_string(o.features)},
      {"max_nodes", max_nodes},
  };
  return d;
}

// --- persistence -------------------------------------------------------------

namespace {

nlohmann::ordered_json graph_to_json(const Graph& g, Split s) {
  nlohmann::ordered_json j;
  j["id"] = g.id();
  j["n"] = g.num_nodes();
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : g.edges()) edges.push_back({e.u, e.v});
  j["edges"] = std::move(edges);
  j["label"] = g.label() ? nlohmann::ordered_json(*g.label()) : nlohmann::ordered_json(nullptr);
  j["split"] = to_string(s);
  if (g.has_features()) {
    auto rows = nlohmann::ordered_json::array();
    const Matrix& f = g.features();
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      auto row = nlohmann::ordered_json::array();
      for (Eigen::Index c = 0; c < f.cols(); ++c) row.push_back(f(r, c));
      rows.push_back(std::move(row));
    }
    j["features"] = std::move(rows);
  }
  return j;
}

std::pair<Graph, Split> graph_from_json(const nlohmann::ordered_json& j, std::size_t line) {
  try {
    if (!j.is_object()) throw ParseError("expected a graph object", line);
    std::string id = j.at("id").get<std::string>();
    int n = j.at("n").get<int>();
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw ParseError("edge must be a [u, v] pair", line);
      edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    std::optional<int> label;
    if (auto it = j.find("label"); it != j.end() && !it->is_null()) label = it->get<int>();
    Split split = parse_split(j.at("split").get<std::string>());
    Graph g(std::move(id), n, edges, label);
    if (auto it = j.find("features"); it != j.end() && !it->is_null()) {
      const auto& rows = *it;
      if (!rows.is_array() || rows.size() != static_cast<std::size_t>(n)) {
        throw ParseError("features must have one row per node", line);
      }
      const std::size_t width = rows.empty() ? 0 : rows[0].size();
      Matrix f(n, static_cast<Eigen::Index>(width));
      for (int r = 0; r < n; ++r) {
        if (!rows[r].is_array() || rows[r].size() != width) {
          throw ParseError("ragged feature matrix", line);
        }
        for (std::size_t c = 0; c < width; ++c) f(r, static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
      }
      g.set_features(std::move(f));
    }
    return {std::move(g), split};
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(e.what(), line);
  }
}

}  // namespace

void write_dataset(const Dataset& d, std::ostream& out) {
  nlohmann::ordered_json header;
  header["schema"] = kDatasetSchema;
  header["seed"] = d.seed;
  auto meta = d.meta;
  meta["graphs"] = d.graphs.size();
  header["meta"] = std::move(meta);
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < d.graphs.size(); ++i) out << graph_to_json(d.graphs[i], d.split[i]).dump() << '\n';
}

Dataset read_dataset(std::istream& in) {
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::optional<std::size_t> expected;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("schema")) throw ParseError("missing schema header", lineno);
      const auto schema = j["schema"].get<std::string>();
      if (schema != kDatasetSchema) {
        throw VersionError("dataset schema '" + schema + "' is not supported (expected '" +
                           std::string(kDatasetSchema) + "')");
      }
      d.seed = j.value("seed", std::uint64_t{0});
      if (j.contains("meta")) d.meta = j["meta"];
      if (d.meta.contains("graphs")) {
        expected = d.meta["graphs"].get<std::size_t>();
        d.meta.erase("graphs");
      }
      have_header = true;
      continue;
    }
    auto [g, s] = graph_from_json(j, lineno);
    d.graphs.push_back(std::move(g));
    d.split.push_back(s);
  }
  if (!have_header) throw ParseError("empty dataset file", lineno + 1);
  if (expected && *expected != d.graphs.size()) {
    throw ParseError("truncated dataset: header announces " + std::to_string(*expected) +
                         " graphs, found " + std::to_string(d.graphs.size()),
                     lineno + 1);
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_dataset(d, out);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_dataset(in);
}

}  // namespace graphprobe
