#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphprobe/dataset.hpp"
#include "graphprobe/nn/adam.hpp"
#include "graphprobe/nn/tape.hpp"

namespace graphprobe {

enum class Arch { gcn, gin, gat };

std::string_view to_string(Arch a);
Arch parse_arch(std::string_view s);

struct ModelConfig {
  Arch arch = Arch::gcn;
  int gnn_layers = 4;
  int mlp_layers = 3;      // dense layers after pooling, the logits layer included
  int hidden_dim = 60;     // per head for GAT
  int heads = 1;           // GAT only
  int mlp_dim = 0;         // hidden width of the dense head; 0 = GNN output width
  nn::PoolKind pooling = nn::PoolKind::max;
  double dropout = 0.0;
  double weight_decay = 0.0;
  bool decoupled_weight_decay = false;
  bool learn_eps = false;  // GIN
  double attention_slope = 0.2;  // GAT LeakyReLU
  double lr = 1e-3;
  int batch_size = 64;
  int epochs = 200;
  int restarts = 20;
  std::uint64_t seed = 0;
  int input_dim = 10;
  int num_classes = 2;

  /// Final-specification defaults per architecture.
  static ModelConfig defaults(Arch arch);

  int gnn_width() const { return arch == Arch::gat ? heads * hidden_dim : hidden_dim; }
  int head_width() const { return mlp_dim > 0 ? mlp_dim : gnn_width(); }
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::ordered_json& j);
};

/// Named parameter list in a fixed order.
struct Model {
  ModelConfig config;
  std::vector<std::pair<std::string, nn::Tensor>> params;

  const nn::Tensor& param(std::string_view name) const;
  std::vector<nn::Tensor> tensors() const;
  Model clone() const;
};

/// Glorot-uniform weights, zero biases.
Model init_model(const ModelConfig& config, Rng& rng);

/// Checkpoint: {"config": ..., "weights": {name: {"shape": [r, c], "values": [...]}}}.
nlohmann::ordered_json model_to_json(const Model& m);
Model model_from_json(const nlohmann::ordered_json& j);

/// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
Matrix normalize_adjacency(const Graph& g);

/// Several graphs stacked into one block-diagonal problem.
struct GraphBatch {
  nn::Segments segments;
  nn::Tensor features;
  std::shared_ptr<const SparseMatrix> propagate;  // GCN: normalized; GIN: plain A
  std::vector<int> src;                           // GAT edges (both directions plus self loops)
  std::vector<int> dst;
  std::vector<int> labels;
  int num_nodes() const { return segments.rows(); }
  int num_graphs() const { return segments.count(); }
};

GraphBatch make_batch(std::span<const Graph* const> graphs, Arch arch);

struct LayerActivation {
  std::string name;
  nn::Tensor value;
  bool per_node = false;
};

/// Pre-pooling node matrices x1..xk, then x_global and the dense-head
/// activations (x5, x6, ...); the last entry is the logits.
struct ActivationTrace {
  std::vector<LayerActivation> layers;
  nn::Tensor logits;
  std::vector<nn::Tensor> attention;  // GAT: per layer, E x heads, rows follow GraphBatch::src/dst

  const LayerActivation& at(std::string_view name) const;
};

ActivationTrace gcn_forward(nn::Tape& tape, const Model& model, const GraphBatch& batch, bool train, Rng& rng);
ActivationTrace gin_forward(nn::Tape& tape, const Model& model, const GraphBatch& batch, bool train, Rng& rng);
ActivationTrace gat_forward(nn::Tape& tape, const Model& model, const GraphBatch& batch, bool train, Rng& rng);
ActivationTrace forward(nn::Tape& tape, const Model& model, const GraphBatch& batch, bool train, Rng& rng);

/// Names of the captured layers for a configuration, in forward order.
std::vector<std::string> layer_names(const ModelConfig& config);

// --- training ------------------------------------------------------------------

// Entry e is epoch e; entry 0 holds the initial weights in eval mode.
struct TrainingHistory {
  std::vector<double> loss;
  std::vector<double> train_accuracy;
  std::vector<double> test_accuracy;
  friend bool operator==(const TrainingHistory&, const TrainingHistory&) = default;
};

struct RestartSummary {
  int restart = 0;
  double best_test_accuracy = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  bool aborted = false;
  bool skipped = false;
};

struct TrainedModel {
  Model model;
  TrainingHistory history;  // of the selected restart
  double test_accuracy = 0.0;
  int best_epoch = 0;       // 0 = the initial weights
  int best_restart = 0;
  std::vector<RestartSummary> restarts;
};

struct TrainOptions {
  int threads = 1;
  std::function<void(const std::string&)> log;
};

/// Every restart starts from fresh weights and keeps its best-test-accuracy
/// epoch; the best restart wins (lowest index on ties). A restart that reaches
/// accuracy 1.0 ends early, and restarts after it are skipped, since neither
/// can change the selection.
TrainedModel train(const ModelConfig& config, const Dataset& data, const TrainOptions& options = {});

double evaluate_accuracy(const Model& model, const Dataset& data, Split split);

/// Mean training loss over the train split (eval mode).
double evaluate_loss(const Model& model, const Dataset& data, Split split);

// --- embeddings ----------------------------------------------------------------

struct LayerEmbeddings {
  std::string name;
  bool per_node = false;
  int width = 0;
  std::vector<Matrix> per_graph;  // n x width for node layers, 1 x width otherwise
};

struct EmbeddingSet {
  std::vector<std::string> graph_ids;
  std::vector<Split> split;
  std::vector<LayerEmbeddings> layers;
  int max_nodes = 0;

  const LayerEmbeddings& layer(std::string_view name) const;
};

/// Eval-mode forward over every graph of the dataset.
EmbeddingSet extract_embeddings(const Model& model, const Dataset& data);

}  // namespace graphprobe
