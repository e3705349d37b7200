#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "graphprobe/artifacts.hpp"
#include "graphprobe/config.hpp"

namespace graphprobe {

using Logger = std::function<void(const std::string&)>;

/// GRAPHPROBE_THREADS if set to a positive integer, else the hardware count.
int resolve_threads();

ArtifactHeader make_header(const RunConfig& config);

/// Computes properties for each graph on up to `threads` threads.
std::vector<GraphPropertyVector> compute_global_properties(const Dataset& data, int threads);
NodePropertySet compute_node_properties(const Dataset& data, int threads);

void cmd_generate(const RunConfig& config, const std::filesystem::path& out, const Logger& log = {});

void cmd_props(const RunConfig& config, const std::filesystem::path& data, const std::filesystem::path& out,
               const std::optional<std::filesystem::path>& node_out, const Logger& log = {});

struct TrainPaths {
  std::filesystem::path model;
  std::optional<std::filesystem::path> metrics;
  std::optional<std::filesystem::path> embeddings;
};

TrainedModel cmd_train(const RunConfig& config, const std::string& model_name, const std::filesystem::path& data,
                       const TrainPaths& paths, const Logger& log = {});

/// Embeddings of a saved model over a dataset.
void cmd_embed(const RunConfig& config, const std::filesystem::path& model, const std::filesystem::path& data,
               const std::filesystem::path& out, const Logger& log = {});

struct ProbePaths {
  std::filesystem::path embeddings;
  std::filesystem::path props;
  std::filesystem::path out;
  std::optional<std::filesystem::path> node_props;
  std::optional<std::filesystem::path> node_out;
};

void cmd_probe(const RunConfig& config, const ProbePaths& paths, const Logger& log = {});

/// Reads graph- and node-level probe tables and writes summary.md,
/// correlation.csv and per-model R^2 series. Tables stamped with different
/// config hashes are refused unless `force`.
void cmd_report(const std::vector<std::filesystem::path>& probes, const std::filesystem::path& out, bool force,
                const Logger& log = {});

/// generate, props, train + embed every model, probe, report.
void cmd_all(const RunConfig& config, const std::filesystem::path& out, const Logger& log = {});

}  // namespace graphprobe
