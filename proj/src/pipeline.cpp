#include "graphprobe/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include <fmt/format.h>

namespace graphprobe {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int resolve_threads() {
  if (const char* env = std::getenv("GRAPHPROBE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ArtifactHeader make_header(const RunConfig& config) {
  ArtifactHeader h;
  h.config_hash = config.hash();
  h.seed = config.dataset.seed;
  return h;
}

namespace {

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

// Runs body(i) for i in [0, n) on up to `threads` threads.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(n))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

Dataset load_data(const RunConfig& config, const fs::path& path) {
  require_input(path, "dataset", "generate --out " + path.string());
  Dataset d = load_dataset(path);
  ensure_features(d, config.dataset.feature_dim, config.dataset.features);
  return d;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

}  // namespace

std::vector<GraphPropertyVector> compute_global_properties(const Dataset& data, int threads) {
  std::vector<GraphPropertyVector> rows(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto& g = data.graphs[i];
    Rng rng(property_seed(data.seed, g.id()));
    rows[i] = global_properties(g, rng);
  });
  return rows;
}

NodePropertySet compute_node_properties(const Dataset& data, int threads) {
  NodePropertySet set;
  set.tables.resize(data.size());
  for (const auto& g : data.graphs) set.ids.push_back(g.id());
  parallel_for(data.size(), threads, [&](std::size_t i) { set.tables[i] = node_properties(data.graphs[i]); });
  return set;
}

void cmd_generate(const RunConfig& config, const fs::path& out, const Logger& log) {
  Dataset d = generate_grid_house(config.dataset);
  d.meta["config_hash"] = config.hash();
  write_atomically(out, [&](std::ostream& os) { write_dataset(d, os); });
  say(log, fmt::format("generated {} graphs ({} train, {} test) -> {}", d.size(), d.count(Split::train),
                       d.count(Split::test), out.string()));
}

void cmd_props(const RunConfig& config, const fs::path& data, const fs::path& out,
               const std::optional<fs::path>& node_out, const Logger& log) {
  const Dataset d = load_data(config, data);
  const int threads = resolve_threads();
  ArtifactHeader header = make_header(config);
  header.seed = d.seed;
  const auto rows = compute_global_properties(d, threads);
  write_atomically(out, [&](std::ostream& os) { write_properties_csv(os, header, d, rows); });
  say(log, fmt::format("graph properties for {} graphs -> {}", d.size(), out.string()));
  if (node_out) {
    const auto nodes = compute_node_properties(d, threads);
    write_atomically(*node_out, [&](std::ostream& os) { write_node_properties_csv(os, header, nodes); });
    say(log, fmt::format("node properties -> {}", node_out->string()));
  }
}

namespace {

json restart_json(const RestartSummary& r) {
  return {{"restart", r.restart},       {"best_test_accuracy", r.best_test_accuracy},
          {"best_epoch", r.best_epoch}, {"epochs_run", r.epochs_run},
          {"aborted", r.aborted},       {"skipped", r.skipped}};
}

void export_embeddings(const RunConfig& config, const Model& model, const Dataset& d, const ArtifactHeader& header,
                       const fs::path& dir) {
  const EmbeddingSet set = extract_embeddings(model, d);
  write_embeddings(dir, set, header, parse_embedding_format(config.embedding_format));
}

}  // namespace

TrainedModel cmd_train(const RunConfig& config, const std::string& model_name, const fs::path& data,
                       const TrainPaths& paths, const Logger& log) {
  const NamedModel& named = config.model(model_name);
  const Dataset d = load_data(config, data);
  TrainOptions options;
  options.threads = resolve_threads();
  options.log = log;
  say(log, fmt::format("training {} ({} restarts, up to {} epochs)", named.name, named.config.restarts,
                       named.config.epochs));
  TrainedModel trained = train(named.config, d, options);

  ArtifactHeader header = make_header(config);
  header.seed = named.config.seed;
  header.extra["model"] = named.name;
  header.extra["test_accuracy"] = trained.test_accuracy;

  json j = header.to_json();
  const json body = model_to_json(trained.model);
  j["config"] = body["config"];
  j["best_restart"] = trained.best_restart;
  j["best_epoch"] = trained.best_epoch;
  j["history"] = {{"loss", trained.history.loss},
                  {"train_accuracy", trained.history.train_accuracy},
                  {"test_accuracy", trained.history.test_accuracy}};
  json restarts = json::array();
  for (const auto& r : trained.restarts) restarts.push_back(restart_json(r));
  j["restarts"] = restarts;
  j["weights"] = body["weights"];
  write_atomically(paths.model, [&](std::ostream& os) { os << j.dump() << "\n"; });
  if (paths.metrics) {
    write_atomically(*paths.metrics, [&](std::ostream& os) { write_history_csv(os, header, trained.history); });
  }
  if (paths.embeddings) export_embeddings(config, trained.model, d, header, *paths.embeddings);
  say(log, fmt::format("{}: test accuracy {:.4f} (restart {}, epoch {})", named.name, trained.test_accuracy,
                       trained.best_restart, trained.best_epoch));
  return trained;
}

void cmd_embed(const RunConfig& config, const fs::path& model, const fs::path& data, const fs::path& out,
               const Logger& log) {
  require_input(model, "model checkpoint", "train --out " + model.string());
  const json j = read_json_file(model);
  const Model m = model_from_json(j);
  const Dataset d = load_data(config, data);
  ArtifactHeader header = ArtifactHeader::from_json(j);
  for (const char* drop : {"config", "best_restart", "best_epoch", "history", "restarts", "weights"}) {
    header.extra.erase(drop);
  }
  export_embeddings(config, m, d, header, out);
  say(log, fmt::format("embeddings of {} graphs -> {}", d.size(), out.string()));
}

void cmd_probe(const RunConfig& config, const ProbePaths& paths, const Logger& log) {
  require_input(paths.props, "graph properties", "props --out " + paths.props.string());
  ArtifactHeader emb_header;
  const EmbeddingSet set = read_embeddings(paths.embeddings, &emb_header);
  GraphPropertyTable props;
  {
    std::ifstream in(paths.props);
    props = read_properties_csv(in);
  }
  ArtifactHeader header = emb_header;
  header.extra["aggregation"] = std::string(to_string(config.aggregation));
  header.extra["level"] = "graph";
  header.extra["lambdas"] = config.ridge.lambdas;
  header.extra["folds"] = config.ridge.folds;
  const auto results = probe_graph_level(set, props, config.aggregation, config.ridge);
  write_atomically(paths.out, [&](std::ostream& os) { write_probes_csv(os, header, results); });
  say(log, fmt::format("{} graph-level probes -> {}", results.size(), paths.out.string()));

  if (paths.node_props && paths.node_out) {
    require_input(*paths.node_props, "node properties", "props --node-out " + paths.node_props->string());
    std::ifstream in(*paths.node_props);
    const NodePropertySet nodes = read_node_properties_csv(in);
    header.extra["level"] = "node";
    header.extra["aggregation"] = "node";
    const auto node_results = probe_node_level(set, nodes, config.ridge);
    write_atomically(*paths.node_out, [&](std::ostream& os) { write_probes_csv(os, header, node_results); });
    say(log, fmt::format("{} node-level probes -> {}", node_results.size(), paths.node_out->string()));
  }
}

// --- report ----------------------------------------------------------------------

namespace {

struct LoadedProbes {
  fs::path path;
  ArtifactHeader header;
  std::string model;
  std::string level;
  std::optional<double> accuracy;
  std::vector<ProbeResult> results;
};

std::string r2_cell(const ProbeResult& r) {
  switch (r.status) {
    case ProbeStatus::undefined_target: return "undef";
    case ProbeStatus::degenerate: return "degen";
    case ProbeStatus::ok: break;
  }
  if (!r.r2_test) return "";
  return fmt::format("{:.2f}", clip_for_display(*r.r2_test));
}

std::vector<std::string> ordered_unique(const std::vector<ProbeResult>& rs, bool layers) {
  std::vector<std::string> out;
  for (const auto& r : rs) {
    const auto& key = layers ? r.layer : r.property;
    if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
  }
  return out;
}

void write_table(std::ostream& os, const std::vector<ProbeResult>& results) {
  const auto layers = ordered_unique(results, true);
  const auto props = ordered_unique(results, false);
  std::map<std::pair<std::string, std::string>, const ProbeResult*> at;
  for (const auto& r : results) at[{r.layer, r.property}] = &r;
  os << "| layer |";
  for (const auto& p : props) os << " " << p << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < props.size(); ++i) os << "---:|";
  os << "\n";
  for (const auto& l : layers) {
    os << "| " << l << " |";
    for (const auto& p : props) {
      auto it = at.find({l, p});
      os << " " << (it == at.end() ? "" : r2_cell(*it->second)) << " |";
    }
    os << "\n";
  }
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) c = '_';
  }
  return s;
}

}  // namespace

void cmd_report(const std::vector<fs::path>& probes, const fs::path& out, bool force, const Logger& log) {
  if (probes.empty()) throw ParameterError("report: no probe tables given");
  std::vector<LoadedProbes> tables;
  for (const auto& p : probes) {
    require_input(p, "probe table", "probe --out " + p.string());
    LoadedProbes t;
    t.path = p;
    std::ifstream in(p);
    t.results = read_probes_csv(in, &t.header);
    t.model = t.header.extra.value("model", p.stem().string());
    t.level = t.header.extra.value("level", "graph");
    if (t.header.extra.contains("test_accuracy")) t.accuracy = t.header.extra["test_accuracy"].get<double>();
    tables.push_back(std::move(t));
  }
  for (const auto& t : tables) {
    if (t.header.config_hash != tables.front().header.config_hash && !force) {
      throw ParameterError("report: '" + t.path.string() + "' has config hash " + t.header.config_hash + " but '" +
                           tables.front().path.string() + "' has " + tables.front().header.config_hash +
                           " (use --force to combine them anyway)");
    }
  }

  std::vector<std::string> models;
  std::vector<double> accuracy;
  std::vector<std::vector<ProbeResult>> graph_tables;
  for (const auto& t : tables) {
    if (t.level != "graph") continue;
    models.push_back(t.model);
    accuracy.push_back(t.accuracy.value_or(std::numeric_limits<double>::quiet_NaN()));
    graph_tables.push_back(t.results);
  }
  std::vector<std::string> corr_models;
  std::vector<double> corr_acc;
  std::vector<std::vector<ProbeResult>> corr_tables;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (std::isfinite(accuracy[i])) {
      corr_models.push_back(models[i]);
      corr_acc.push_back(accuracy[i]);
      corr_tables.push_back(graph_tables[i]);
    }
  }
  const CorrelationReport corr = correlation_report(corr_models, corr_acc, corr_tables);

  fs::create_directories(out);
  ArtifactHeader header = tables.front().header;
  header.extra = json::object();
  if (force) header.extra["forced"] = true;

  write_atomically(out / "correlation.csv", [&](std::ostream& os) {
    json h = header.to_json();
    h["correlation"] = corr.correlation ? json(*corr.correlation) : json(nullptr);
    os << "# " << h.dump() << "\n";
    os << "model,test_accuracy,max_r2_test\n";
    for (const auto& r : corr.rows) {
      os << r.model << "," << format_double(r.test_accuracy) << ","
         << (r.max_r2_test ? format_double(*r.max_r2_test) : "") << "\n";
    }
  });

  for (const auto& t : tables) {
    const auto layers = ordered_unique(t.results, true);
    const auto file = out / "series" / (safe_name(t.model) + (t.level == "graph" ? "" : "." + t.level) + ".csv");
    write_atomically(file, [&](std::ostream& os) {
      json h = t.header.to_json();
      os << "# " << h.dump() << "\n";
      os << "property,x,layer,y,status\n";
      for (const auto& prop : ordered_unique(t.results, false)) {
        for (const auto& r : t.results) {
          if (r.property != prop) continue;
          const auto x = std::find(layers.begin(), layers.end(), r.layer) - layers.begin() + 1;
          os << prop << "," << x << "," << r.layer << ","
             << (r.status == ProbeStatus::ok && r.r2_test ? format_double(clip_for_display(*r.r2_test)) : "") << ","
             << to_string(r.status) << "\n";
        }
      }
    });
  }

  write_atomically(out / "summary.md", [&](std::ostream& os) {
    os << "# Probing summary\n\n";
    os << "config hash `" << header.config_hash << "`, seed " << header.seed;
    if (force) os << " (tables combined with --force)";
    os << "\n\n## Models\n\n| model | test accuracy | max r2_test |\n|---|---:|---:|\n";
    for (const auto& r : corr.rows) {
      os << "| " << r.model << " | " << fmt::format("{:.4f}", r.test_accuracy) << " | "
         << (r.max_r2_test ? fmt::format("{:.3f}", *r.max_r2_test) : "n/a") << " |\n";
    }
    os << "\nPearson correlation between test accuracy and max r2_test: "
       << (corr.correlation ? fmt::format("{:.3f}", *corr.correlation) : "undefined") << "\n";
    os << "\nCells show r2_test clipped at -0.05; `undef` = target without variance, `degen` = fewer than "
       << kMinProbeRows << " usable train rows.\n";
    for (const auto& t : tables) {
      os << "\n## " << t.model << " (" << t.level << " level";
      if (t.header.extra.contains("aggregation")) os << ", " << t.header.extra["aggregation"].get<std::string>();
      os << ")\n\n";
      write_table(os, t.results);
    }
  });
  say(log, fmt::format("report for {} table(s) -> {}", tables.size(), out.string()));
}

void cmd_all(const RunConfig& config, const fs::path& out, const Logger& log) {
  const fs::path data = out / "data.jsonl";
  const fs::path props = out / "props.csv";
  const fs::path node_props = out / "node_props.csv";
  cmd_generate(config, data, log);
  cmd_props(config, data, props, config.node_level ? std::optional(node_props) : std::nullopt, log);
  std::vector<fs::path> tables;
  for (const auto& m : config.models) {
    const fs::path dir = out / "models" / m.name;
    TrainPaths tp{dir / "model.json", dir / "history.csv", dir / "embeddings"};
    cmd_train(config, m.name, data, tp, log);
    ProbePaths pp;
    pp.embeddings = dir / "embeddings";
    pp.props = props;
    pp.out = out / "probes" / (m.name + ".csv");
    if (config.node_level) {
      pp.node_props = node_props;
      pp.node_out = out / "probes" / (m.name + ".nodes.csv");
    }
    cmd_probe(config, pp, log);
    tables.push_back(pp.out);
    if (pp.node_out) tables.push_back(*pp.node_out);
  }
  cmd_report(tables, out / "report", false, log);
}

}  // namespace graphprobe
