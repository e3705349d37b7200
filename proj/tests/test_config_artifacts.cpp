#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "graphprobe/artifacts.hpp"
#include "graphprobe/config.hpp"
#include "graphprobe/pipeline.hpp"
#include "oracles.hpp"

using namespace graphprobe;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("graphprobe-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Dataset tiny_corpus() {
  GridHouseOptions o;
  o.count = 20;
  o.seed = 4;
  return generate_grid_house(o);
}

}  // namespace

TEST_CASE("TOML subset") {
  auto j = parse_toml(R"(
# comment
seed = 7
name = "a \"quoted\" # not a comment"
[training]
lr = 1e-3   # trailing
flag = true
sizes = [1, 2,
         3]
[models.first]
arch = "gin"
)");
  CHECK(j["seed"] == 7);
  CHECK(j["name"] == "a \"quoted\" # not a comment");
  CHECK(j["training"]["lr"].get<double>() == 1e-3);
  CHECK(j["training"]["flag"] == true);
  CHECK(j["training"]["sizes"] == nlohmann::ordered_json({1, 2, 3}));
  CHECK(j["models"]["first"]["arch"] == "gin");

  try {
    parse_toml("a = 1\nb = \n");
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), ParameterError);
  CHECK_THROWS_AS(parse_toml("[open\n"), ParameterError);
}

TEST_CASE("run configuration") {
  RunConfig d = RunConfig::defaults();
  REQUIRE(d.models.size() == 7);
  CHECK(d.model("gcn_l2").config.weight_decay == 1e-4);
  CHECK(d.model("gin_l2").config.weight_decay == 1e-2);
  CHECK(d.model("gin_dropout").config.dropout == 0.2);
  CHECK(d.model("gat").config.heads == 8);
  CHECK(d.dataset.count == 2000);
  CHECK(d.aggregation == Aggregation::norm_sort);
  CHECK_THROWS_AS(d.model("nope"), ParameterError);

  RunConfig same = RunConfig::from_toml("");
  CHECK(same.hash() == d.hash());
  CHECK(d.hash().size() == 16);

  RunConfig c = RunConfig::from_toml(R"(
seed = 3
[dataset]
count = 50
[training]
epochs = 7
[probe]
aggregation = "mean"
lambdas = [0.1, 1.0]
[output]
dir = "elsewhere"
)");
  CHECK(c.dataset.seed == 3);
  CHECK(c.dataset.count == 50);
  CHECK(c.models.size() == 7);
  for (const auto& m : c.models) {
    CHECK(m.config.epochs == 7);
    CHECK(m.config.seed == 3);
  }
  CHECK(c.model("gin_l2").config.weight_decay == 1e-2);
  CHECK(c.aggregation == Aggregation::mean);
  CHECK(c.ridge.lambdas == std::vector<double>{0.1, 1.0});
  CHECK(c.hash() != d.hash());

  // The output directory is not part of the experiment identity.
  RunConfig moved = c;
  moved.out_dir = "x";
  CHECK(moved.hash() == c.hash());

  RunConfig custom = RunConfig::from_toml("[models.only]\narch = \"gat\"\nheads = 2\n");
  REQUIRE(custom.models.size() == 1);
  CHECK(custom.models[0].config.heads == 2);

  CHECK_THROWS_AS(RunConfig::from_toml("[dataset]\ncolor = 1\n"), ParameterError);
  CHECK_THROWS_AS(RunConfig::from_toml("[training]\nlearning_rate = 1\n"), ParameterError);
  CHECK_THROWS_AS(RunConfig::from_toml("[models.x]\nepochs = 1\n"), ParameterError);
  CHECK_THROWS_AS(RunConfig::from_toml("[models.x]\narch = \"mlp\"\n"), ParameterError);
  CHECK_THROWS_AS(RunConfig::from_toml("[dataset]\ncount = \"many\"\n"), ParameterError);
  CHECK_THROWS_AS(RunConfig::from_toml("[training]\ndropout = 1.5\n"), ParameterError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/run.toml"), std::exception);
}

TEST_CASE("atomic writes") {
  fs::path dir = scratch("atomic");
  fs::path target = dir / "out.txt";
  write_atomically(target, [](std::ostream& os) { os << "done"; });
  CHECK(fs::exists(target));
  CHECK_FALSE(fs::exists(dir / "out.txt.partial"));

  fs::path failing = dir / "bad.txt";
  CHECK_THROWS(write_atomically(failing, [](std::ostream& os) {
    os << "half";
    throw std::runtime_error("boom");
  }));
  CHECK_FALSE(fs::exists(failing));
  CHECK(fs::exists(dir / "bad.txt.partial"));

  try {
    require_input(dir / "missing.csv", "graph properties", "props");
    FAIL("expected MissingInputError");
  } catch (const MissingInputError& e) {
    CHECK(std::string(e.what()).find("graphprobe props") != std::string::npos);
  }
}

TEST_CASE("property tables round trip") {
  Dataset d = tiny_corpus();
  auto rows = compute_global_properties(d, 1);
  rows[0][GlobalProperty::assortativity] = PropertyValue::undefined();
  ArtifactHeader h;
  h.config_hash = "abc";
  h.seed = 4;
  std::stringstream s;
  write_properties_csv(s, h, d, rows);
  ArtifactHeader back;
  auto table = read_properties_csv(s, &back);
  CHECK(back.config_hash == "abc");
  CHECK(back.seed == 4);
  CHECK(back.schema == "graphprobe-v1");
  REQUIRE(table.ids.size() == d.size());
  CHECK(table.names.size() == kNumGlobalProperties);
  CHECK(std::isnan(table.values(0, static_cast<int>(GlobalProperty::assortativity))));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t k = 0; k < kNumGlobalProperties; ++k) {
      if (!rows[i].values[k].defined) continue;
      CHECK(table.values(i, k) == rows[i].values[k].value);
    }

  auto nodes = compute_node_properties(d, 2);
  std::stringstream ns;
  write_node_properties_csv(ns, h, nodes);
  auto nback = read_node_properties_csv(ns);
  REQUIRE(nback.ids == nodes.ids);
  CHECK(nback.tables[3].pagerank == nodes.tables[3].pagerank);

  // Thread count does not change the result.
  CHECK(compute_global_properties(d, 3) == compute_global_properties(d, 1));
}

TEST_CASE("embedding files round trip") {
  Dataset d = tiny_corpus();
  Rng rng(1);
  ModelConfig c = ModelConfig::defaults(Arch::gin);
  Model m = init_model(c, rng);
  EmbeddingSet set = extract_embeddings(m, d);
  ArtifactHeader h;
  h.config_hash = "feed";
  h.seed = 2;
  for (auto fmt : {EmbeddingFormat::csv, EmbeddingFormat::binary}) {
    fs::path dir = scratch(fmt == EmbeddingFormat::csv ? "emb-csv" : "emb-bin");
    write_embeddings(dir, set, h, fmt);
    ArtifactHeader hb;
    EmbeddingSet back = read_embeddings(dir, &hb);
    CHECK(hb.config_hash == "feed");
    CHECK(back.graph_ids == set.graph_ids);
    CHECK(back.split == set.split);
    CHECK(back.max_nodes == set.max_nodes);
    REQUIRE(back.layers.size() == set.layers.size());
    for (std::size_t k = 0; k < set.layers.size(); ++k) {
      CHECK(back.layers[k].name == set.layers[k].name);
      CHECK(back.layers[k].per_node == set.layers[k].per_node);
      for (std::size_t i = 0; i < d.size(); ++i) CHECK(back.layers[k].per_graph[i] == set.layers[k].per_graph[i]);
    }
  }

  fs::path dir = scratch("emb-bad");
  write_embeddings(dir, set, h, EmbeddingFormat::binary);
  {
    std::fstream f(dir / "x1.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char v = 9;
    f.write(&v, 1);
  }
  CHECK_THROWS(read_embeddings(dir));
  CHECK_THROWS_AS(read_embeddings(scratch("emb-none")), MissingInputError);
}

TEST_CASE("probe tables round trip") {
  std::vector<ProbeResult> rs(2);
  rs[0] = {"x1", "n_squares", ProbeStatus::ok, 0.9, 0.1 + 0.2, 1e-3, 100, 20, 0};
  rs[1] = {"x1", "assortativity", ProbeStatus::undefined_target, std::nullopt, std::nullopt, std::nullopt, 90, 20, 10};
  ArtifactHeader h;
  h.config_hash = "0123";
  std::stringstream s;
  write_probes_csv(s, h, rs);
  const std::string text = s.str();
  CHECK(text.find("layer,property,r2_train,r2_test,status,lambda,n_train,n_test") != std::string::npos);
  auto back = read_probes_csv(s);
  REQUIRE(back.size() == 2);
  CHECK(*back[0].r2_test == 0.1 + 0.2);
  CHECK(back[0].lambda == 1e-3);
  CHECK(back[1].status == ProbeStatus::undefined_target);
  CHECK_FALSE(back[1].r2_test.has_value());
  CHECK(back[1].n_dropped == 10);
  CHECK(format_double(0.1 + 0.2) == "0.30000000000000004");
}
