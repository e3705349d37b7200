#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "graphprobe/pipeline.hpp"

namespace fs = std::filesystem;
using namespace graphprobe;

namespace {

enum Exit { kOk = 0, kConfigError = 2, kMissingInput = 3, kRuntimeError = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool quiet = false;

  RunConfig load() const {
    RunConfig c = config.empty() ? RunConfig::defaults() : RunConfig::load(config);
    if (seed) {
      c.dataset.seed = *seed;
      c.ridge.seed = *seed;
      for (auto& m : c.models) m.config.seed = *seed;
    }
    c.validate();
    return c;
  }

  Logger logger() const {
    if (quiet) return {};
    return [](const std::string& msg) { std::cerr << msg << std::endl; };
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "run file (TOML)")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "seed for the corpus, training and probe folds");
  sub->add_flag("--quiet", c.quiet, "no progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphprobe: Grid-House generation, GNN training and linear probing of graph properties"};
  app.require_subcommand(1);

  Common common;

  auto* gen = app.add_subcommand("generate", "write a Grid-House corpus as JSON lines");
  add_common(gen, common);
  std::optional<int> count;
  std::string gen_out;
  gen->add_option("--count", count, "number of graphs");
  gen->add_option("--out", gen_out, "dataset file")->required();

  auto* props = app.add_subcommand("props", "compute graph and node properties");
  add_common(props, common);
  std::string props_data, props_out, props_node_out;
  props->add_option("--data,--in", props_data, "dataset file")->required();
  props->add_option("--out", props_out, "graph property CSV")->required();
  props->add_option("--node-out,--nodes", props_node_out, "node property CSV");

  auto* trn = app.add_subcommand("train", "train one model of the run file with restarts");
  add_common(trn, common);
  std::string train_data, train_model, train_out, train_metrics, train_embeddings, train_format;
  std::optional<int> epochs, restarts;
  trn->add_option("--data", train_data, "dataset file")->required();
  trn->add_option("--model", train_model, "model name in the run file (default: the first)");
  trn->add_option("--out", train_out, "checkpoint JSON")->required();
  trn->add_option("--metrics", train_metrics, "per-epoch history CSV");
  trn->add_option("--embeddings", train_embeddings, "also export layer embeddings to this directory");
  trn->add_option("--format", train_format, "embedding format: csv or binary");
  trn->add_option("--epochs", epochs, "override the epoch budget");
  trn->add_option("--restarts", restarts, "override the number of restarts");

  auto* emb = app.add_subcommand("embed", "export layer embeddings of a saved model");
  add_common(emb, common);
  std::string emb_model, emb_data, emb_out, emb_format;
  emb->add_option("--model-file", emb_model, "checkpoint JSON")->required();
  emb->add_option("--data", emb_data, "dataset file")->required();
  emb->add_option("--out", emb_out, "output directory")->required();
  emb->add_option("--format", emb_format, "csv or binary");

  auto* prb = app.add_subcommand("probe", "fit ridge probes per layer and property");
  add_common(prb, common);
  std::string probe_emb, probe_props, probe_out, probe_agg, probe_node_props, probe_node_out;
  prb->add_option("--embeddings", probe_emb, "embedding directory")->required();
  prb->add_option("--props", probe_props, "graph property CSV")->required();
  prb->add_option("--agg", probe_agg, "norm_sort, mean or pooled");
  prb->add_option("--out", probe_out, "probe table CSV")->required();
  prb->add_option("--node-props", probe_node_props, "node property CSV");
  prb->add_option("--node-out", probe_node_out, "node-level probe table CSV");

  auto* rep = app.add_subcommand("report", "summarize probe tables");
  std::vector<std::string> report_probes;
  std::string report_out;
  bool report_force = false;
  bool report_quiet = false;
  rep->add_option("--probes", report_probes, "probe table CSVs")->required();
  rep->add_option("--out", report_out, "report directory")->required();
  rep->add_flag("--force", report_force, "combine tables with different config hashes");
  rep->add_flag("--quiet", report_quiet, "no progress output");

  auto* all = app.add_subcommand("all", "run the whole Grid-House experiment");
  add_common(all, common);
  std::string all_out;
  all->add_option("--out", all_out, "output directory (default: output.dir of the run file)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (gen->parsed()) {
      RunConfig c = common.load();
      if (count) c.dataset.count = *count;
      c.validate();
      cmd_generate(c, gen_out, common.logger());
    } else if (props->parsed()) {
      cmd_props(common.load(), props_data, props_out,
                props_node_out.empty() ? std::nullopt : std::optional<fs::path>(props_node_out), common.logger());
    } else if (trn->parsed()) {
      RunConfig c = common.load();
      if (!train_format.empty()) c.embedding_format = train_format;
      for (auto& m : c.models) {
        if (epochs) m.config.epochs = *epochs;
        if (restarts) m.config.restarts = *restarts;
      }
      c.validate();
      TrainPaths paths{train_out, std::nullopt, std::nullopt};
      if (!train_metrics.empty()) paths.metrics = train_metrics;
      if (!train_embeddings.empty()) paths.embeddings = train_embeddings;
      cmd_train(c, train_model.empty() ? c.models.front().name : train_model, train_data, paths, common.logger());
    } else if (emb->parsed()) {
      RunConfig c = common.load();
      if (!emb_format.empty()) c.embedding_format = emb_format;
      c.validate();
      cmd_embed(c, emb_model, emb_data, emb_out, common.logger());
    } else if (prb->parsed()) {
      RunConfig c = common.load();
      if (!probe_agg.empty()) c.aggregation = parse_aggregation(probe_agg);
      ProbePaths paths;
      paths.embeddings = probe_emb;
      paths.props = probe_props;
      paths.out = probe_out;
      if (!probe_node_props.empty() != !probe_node_out.empty()) {
        throw ParameterError("--node-props and --node-out go together");
      }
      if (!probe_node_props.empty()) {
        paths.node_props = probe_node_props;
        paths.node_out = probe_node_out;
      }
      cmd_probe(c, paths, common.logger());
    } else if (rep->parsed()) {
      std::vector<fs::path> tables(report_probes.begin(), report_probes.end());
      Logger log;
      if (!report_quiet) log = [](const std::string& msg) { std::cerr << msg << std::endl; };
      cmd_report(tables, report_out, report_force, log);
    } else if (all->parsed()) {
      RunConfig c = common.load();
      cmd_all(c, all_out.empty() ? fs::path(c.out_dir) : fs::path(all_out), common.logger());
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kConfigError;
  } catch (const MissingInputError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kMissingInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kRuntimeError;
  }
  return kOk;
}
