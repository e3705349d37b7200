#include <fstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "graphprobe/artifacts.hpp"
#include "graphprobe/config.hpp"
#include "graphprobe/dataset.hpp"
#include "graphprobe/isomorphism.hpp"
#include "graphprobe/pipeline.hpp"
#include "graphprobe/probe.hpp"
#include "graphprobe/properties.hpp"

namespace py = pybind11;
using namespace graphprobe;

namespace {

Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges, std::optional<int> label, std::string id) {
  return Graph(std::move(id), n, std::span<const std::pair<int, int>>(edges), label);
}

py::dict property_dict(const GraphPropertyVector& v) {
  py::dict out;
  for (std::size_t k = 0; k < kNumGlobalProperties; ++k) {
    const auto& p = v.values[k];
    out[py::str(std::string(kGlobalPropertyNames[k]))] = p.defined ? py::cast(p.value) : py::none();
  }
  return out;
}

RunConfig load_config(const std::optional<std::string>& toml) {
  return toml ? RunConfig::from_toml(*toml) : RunConfig::defaults();
}

Logger quiet_or_print(bool quiet) {
  if (quiet) return {};
  return [](const std::string& s) {
    py::gil_scoped_acquire gil;
    py::print(s);
  };
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Grid-House generation, graph properties, GNN training and linear probing";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<MissingInputError>(m, "MissingInputError", PyExc_FileNotFoundError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

  py::class_<Graph>(m, "Graph")
      .def(py::init(&make_graph), py::arg("n"), py::arg("edges"), py::arg("label") = py::none(),
           py::arg("id") = "g")
      .def_property_readonly("id", &Graph::id)
      .def_property_readonly("num_nodes", &Graph::num_nodes)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("label", [](const Graph& g) { return g.label(); })
      .def_property_readonly("edges",
                             [](const Graph& g) {
                               std::vector<std::pair<int, int>> out;
                               for (const auto& e : g.edges()) out.emplace_back(e.u, e.v);
                               return out;
                             })
      .def_property_readonly("features", [](const Graph& g) { return g.features(); })
      .def("adjacency_matrix", &Graph::adjacency_matrix)
      .def("__repr__", [](const Graph& g) {
        return "<Graph " + g.id() + " n=" + std::to_string(g.num_nodes()) + " m=" + std::to_string(g.num_edges()) +
               ">";
      });

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("graphs", &Dataset::graphs)
      .def_readonly("seed", &Dataset::seed)
      .def_property_readonly("split",
                             [](const Dataset& d) {
                               std::vector<std::string> out;
                               for (auto s : d.split) out.emplace_back(to_string(s));
                               return out;
                             })
      .def("__len__", &Dataset::size)
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); });

  m.def(
      "generate_grid_house",
      [](int count, std::uint64_t seed, double test_fraction) {
        GridHouseOptions o;
        o.count = count;
        o.seed = seed;
        o.test_fraction = test_fraction;
        py::gil_scoped_release release;
        return generate_grid_house(o);
      },
      py::arg("count") = 2000, py::arg("seed") = 0, py::arg("test_fraction") = 0.2);
  m.def(
      "load_dataset",
      [](const std::filesystem::path& p) {
        require_input(p, "dataset", "generate --out " + p.string());
        return load_dataset(p);
      },
      py::arg("path"));

  m.def("count_triangles", &count_triangles);
  m.def("count_squares", &count_squares);
  m.def("count_maximal_cliques", [](const Graph& g) { return count_maximal_cliques(g).count; });
  m.def("betweenness_centrality", &betweenness_centrality);
  m.def("wl_hash", &wl_hash, py::arg("graph"), py::arg("iterations") = 3);
  m.def("is_isomorphic", &is_isomorphic);
  m.def(
      "global_properties",
      [](const Graph& g, std::uint64_t seed) {
        Rng rng(property_seed(seed, g.id()));
        return property_dict(global_properties(g, rng));
      },
      py::arg("graph"), py::arg("seed") = 0);
  m.attr("GLOBAL_PROPERTIES") = [] {
    std::vector<std::string> names;
    for (auto n : kGlobalPropertyNames) names.emplace_back(n);
    return names;
  }();

  m.def("aggregate_mean", &aggregate_mean);
  m.def("aggregate_norm_sort", &aggregate_norm_sort, py::arg("nodes"), py::arg("max_nodes"));
  m.def("r2_score", [](const std::vector<double>& y, const std::vector<double>& yhat) { return r2_score(y, yhat); });
  m.def("pearson", [](const std::vector<double>& a, const std::vector<double>& b) { return pearson(a, b); });
  m.def(
      "probe",
      [](const Matrix& x, const Vector& y, const std::vector<bool>& train_mask, std::uint64_t seed) {
        if (static_cast<Eigen::Index>(train_mask.size()) != x.rows() || y.size() != x.rows())
          throw ContractError("probe: x, y and train_mask need the same number of rows");
        ProbeFeatureMatrix f;
        f.layer = "x";
        f.aggregation = "pooled_native";
        f.x = x;
        for (bool t : train_mask) f.split.push_back(t ? Split::train : Split::test);
        RidgeOptions opt;
        opt.seed = seed;
        const auto r = probe_features(f, TargetTable{{"y"}, y}, opt).at(0);
        py::dict out;
        out["status"] = std::string(to_string(r.status));
        out["r2_train"] = r.r2_train;
        out["r2_test"] = r.r2_test;
        out["lambda"] = r.lambda;
        out["n_train"] = r.n_train;
        out["n_test"] = r.n_test;
        return out;
      },
      py::arg("x"), py::arg("y"), py::arg("train_mask"), py::arg("seed") = 0,
      "Ridge probe with lambda picked by cross-validation on the train rows.");

  m.def(
      "config_hash", [](const std::optional<std::string>& toml) { return load_config(toml).hash(); },
      py::arg("toml") = py::none());
  m.def(
      "model_names",
      [](const std::optional<std::string>& toml) {
        std::vector<std::string> out;
        for (const auto& nm : load_config(toml).models) out.push_back(nm.name);
        return out;
      },
      py::arg("toml") = py::none());

  m.def(
      "run_generate",
      [](const std::filesystem::path& out, const std::optional<std::string>& toml, bool quiet) {
        const RunConfig c = load_config(toml);
        py::gil_scoped_release release;
        cmd_generate(c, out, quiet_or_print(quiet));
      },
      py::arg("out"), py::arg("toml") = py::none(), py::arg("quiet") = true);
  m.def(
      "run_props",
      [](const std::filesystem::path& data, const std::filesystem::path& out,
         const std::optional<std::filesystem::path>& node_out, const std::optional<std::string>& toml, bool quiet) {
        const RunConfig c = load_config(toml);
        py::gil_scoped_release release;
        cmd_props(c, data, out, node_out, quiet_or_print(quiet));
      },
      py::arg("data"), py::arg("out"), py::arg("node_out") = py::none(), py::arg("toml") = py::none(),
      py::arg("quiet") = true);
  m.def(
      "run_train",
      [](const std::string& model, const std::filesystem::path& data, const std::filesystem::path& out,
         const std::optional<std::filesystem::path>& embeddings, const std::optional<std::string>& toml, bool quiet) {
        const RunConfig c = load_config(toml);
        TrainPaths paths{out, std::nullopt, embeddings};
        py::gil_scoped_release release;
        return cmd_train(c, model, data, paths, quiet_or_print(quiet)).test_accuracy;
      },
      py::arg("model"), py::arg("data"), py::arg("out"), py::arg("embeddings") = py::none(),
      py::arg("toml") = py::none(), py::arg("quiet") = true, "Returns the selected restart's test accuracy.");
  m.def(
      "run_probe",
      [](const std::filesystem::path& embeddings, const std::filesystem::path& props, const std::filesystem::path& out,
         const std::optional<std::string>& toml, bool quiet) {
        const RunConfig c = load_config(toml);
        ProbePaths paths{embeddings, props, out, std::nullopt, std::nullopt};
        py::gil_scoped_release release;
        cmd_probe(c, paths, quiet_or_print(quiet));
      },
      py::arg("embeddings"), py::arg("props"), py::arg("out"), py::arg("toml") = py::none(), py::arg("quiet") = true);
  m.def(
      "run_all",
      [](const std::filesystem::path& out, const std::optional<std::string>& toml, bool quiet) {
        const RunConfig c = load_config(toml);
        py::gil_scoped_release release;
        cmd_all(c, out, quiet_or_print(quiet));
      },
      py::arg("out"), py::arg("toml") = py::none(), py::arg("quiet") = true);
  m.def(
      "read_probes",
      [](const std::filesystem::path& path) {
        require_input(path, "probe table", "probe");
        std::ifstream in(path);
        py::list rows;
        for (const auto& r : read_probes_csv(in)) {
          py::dict d;
          d["layer"] = r.layer;
          d["property"] = r.property;
          d["status"] = std::string(to_string(r.status));
          d["r2_train"] = r.r2_train;
          d["r2_test"] = r.r2_test;
          d["lambda"] = r.lambda;
          rows.append(d);
        }
        return rows;
      },
      py::arg("path"));
}
