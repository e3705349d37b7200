#include "graphprobe/models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <thread>

namespace graphprobe {

std::string_view to_string(Arch a) {
  switch (a) {
    case Arch::gcn: return "gcn";
    case Arch::gin: return "gin";
    case Arch::gat: return "gat";
  }
  return "";
}

Arch parse_arch(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "gcn") return Arch::gcn;
  if (lower == "gin") return Arch::gin;
  if (lower == "gat") return Arch::gat;
  throw ParameterError("unknown architecture '" + std::string(s) + "'");
}

ModelConfig ModelConfig::defaults(Arch arch) {
  ModelConfig c;
  c.arch = arch;
  switch (arch) {
    case Arch::gcn:
      c.gnn_layers = 4;
      c.mlp_layers = 3;
      c.hidden_dim = 60;
      c.pooling = nn::PoolKind::max;
      break;
    case Arch::gin:
      c.gnn_layers = 2;
      c.mlp_layers = 2;
      c.hidden_dim = 30;
      c.pooling = nn::PoolKind::mean;
      break;
    case Arch::gat:
      c.gnn_layers = 3;
      c.mlp_layers = 2;
      c.hidden_dim = 32;
      c.heads = 8;
      c.pooling = nn::PoolKind::max;
      break;
  }
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ParameterError("model config: " + what); };
  if (gnn_layers < 1) fail("gnn_layers must be >= 1");
  if (mlp_layers < 1) fail("mlp_layers must be >= 1");
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (heads < 1) fail("heads must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (lr <= 0.0) fail("lr must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (restarts < 1) fail("restarts must be >= 1");
  if (input_dim < 1) fail("input_dim must be >= 1");
  if (num_classes < 2) fail("num_classes must be >= 2");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  return {
      {"arch", to_string(arch)},
      {"gnn_layers", gnn_layers},
      {"mlp_layers", mlp_layers},
      {"hidden_dim", hidden_dim},
      {"heads", heads},
      {"mlp_dim", mlp_dim},
      {"pooling", nn::to_string(pooling)},
      {"dropout", dropout},
      {"weight_decay", weight_decay},
      {"decoupled_weight_decay", decoupled_weight_decay},
      {"learn_eps", learn_eps},
      {"attention_slope", attention_slope},
      {"lr", lr},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"restarts", restarts},
      {"seed", seed},
      {"input_dim", input_dim},
      {"num_classes", num_classes},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::ordered_json& j) {
  ModelConfig c = defaults(parse_arch(j.at("arch").get<std::string>()));
  c.gnn_layers = j.value("gnn_layers", c.gnn_layers);
  c.mlp_layers = j.value("mlp_layers", c.mlp_layers);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.heads = j.value("heads", c.heads);
  c.mlp_dim = j.value("mlp_dim", c.mlp_dim);
  if (j.contains("pooling")) c.pooling = nn::parse_pool_kind(j["pooling"].get<std::string>());
  c.dropout = j.value("dropout", c.dropout);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.decoupled_weight_decay = j.value("decoupled_weight_decay", c.decoupled_weight_decay);
  c.learn_eps = j.value("learn_eps", c.learn_eps);
  c.attention_slope = j.value("attention_slope", c.attention_slope);
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.restarts = j.value("restarts", c.restarts);
  c.seed = j.value("seed", c.seed);
  c.input_dim = j.value("input_dim", c.input_dim);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.validate();
  return c;
}

// --- parameters ----------------------------------------------------------------

const nn::Tensor& Model::param(std::string_view name) const {
  for (const auto& [n, t] : params) {
    if (n == name) return t;
  }
  throw ContractError("model has no parameter '" + std::string(name) + "'");
}

std::vector<nn::Tensor> Model::tensors() const {
  std::vector<nn::Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.second);
  return out;
}

Model Model::clone() const {
  Model m;
  m.config = config;
  for (const auto& [name, t] : params) m.params.emplace_back(name, nn::parameter(t->value));
  return m;
}

namespace {

Matrix glorot(int fan_in, int fan_out, int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
  return w;
}

void add_dense(Model& m, const std::string& prefix, int in, int out, Rng& rng) {
  m.params.emplace_back(prefix + ".weight", nn::parameter(glorot(in, out, in, out, rng)));
  m.params.emplace_back(prefix + ".bias", nn::parameter(Matrix::Zero(1, out)));
}

int dense_name_offset(const ModelConfig& c) { return std::max(5, c.gnn_layers + 1); }

}  // namespace

std::vector<std::string> layer_names(const ModelConfig& c) {
  std::vector<std::string> names;
  for (int l = 1; l <= c.gnn_layers; ++l) names.push_back("x" + std::to_string(l));
  names.emplace_back("x_global");
  const int offset = dense_name_offset(c);
  for (int k = 0; k < c.mlp_layers; ++k) names.push_back("x" + std::to_string(offset + k));
  return names;
}

Model init_model(const ModelConfig& config, Rng& rng) {
  config.validate();
  Model m;
  m.config = config;
  int in = config.input_dim;
  for (int l = 0; l < config.gnn_layers; ++l) {
    const std::string p = std::string(to_string(config.arch)) + "." + std::to_string(l);
    switch (config.arch) {
      case Arch::gcn:
        add_dense(m, p, in, config.hidden_dim, rng);
        in = config.hidden_dim;
        break;
      case Arch::gin:
        add_dense(m, p + ".mlp0", in, config.hidden_dim, rng);
        add_dense(m, p + ".mlp1", config.hidden_dim, config.hidden_dim, rng);
        if (config.learn_eps) m.params.emplace_back(p + ".eps", nn::parameter(Matrix::Zero(1, 1)));
        in = config.hidden_dim;
        break;
      case Arch::gat: {
        const int width = config.heads * config.hidden_dim;
        m.params.emplace_back(p + ".weight", nn::parameter(glorot(in, width, in, width, rng)));
        m.params.emplace_back(p + ".att_src",
                              nn::parameter(glorot(config.hidden_dim, 1, config.heads, config.hidden_dim, rng)));
        m.params.emplace_back(p + ".att_dst",
                              nn::parameter(glorot(config.hidden_dim, 1, config.heads, config.hidden_dim, rng)));
        m.params.emplace_back(p + ".bias", nn::parameter(Matrix::Zero(1, width)));
        in = width;
        break;
      }
    }
  }
  for (int k = 0; k < config.mlp_layers; ++k) {
    const int out = k + 1 == config.mlp_layers ? config.num_classes : config.head_width();
    add_dense(m, "mlp." + std::to_string(k), in, out, rng);
    in = out;
  }
  return m;
}

nlohmann::ordered_json model_to_json(const Model& m) {
  nlohmann::ordered_json j;
  j["config"] = m.config.to_json();
  // std::map gives a deterministic key order.
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [name, t] : m.params) {
    std::vector<double> values(t->value.data(), t->value.data() + t->value.size());
    weights[name] = {{"shape", {t->rows(), t->cols()}}, {"values", values}};
  }
  j["weights"] = weights;
  return j;
}

Model model_from_json(const nlohmann::ordered_json& j) {
  ModelConfig config = ModelConfig::from_json(j.at("config"));
  Rng dummy(0);
  Model m = init_model(config, dummy);
  const auto& weights = j.at("weights");
  for (auto& [name, t] : m.params) {
    if (!weights.contains(name)) throw ParameterError("checkpoint lacks weight '" + name + "'");
    const auto& w = weights.at(name);
    const auto rows = w.at("shape")[0].get<Eigen::Index>();
    const auto cols = w.at("shape")[1].get<Eigen::Index>();
    const auto values = w.at("values").get<std::vector<double>>();
    if (rows != t->rows() || cols != t->cols() || static_cast<Eigen::Index>(values.size()) != rows * cols) {
      throw ParameterError("checkpoint weight '" + name + "' has the wrong shape");
    }
    t->value = Eigen::Map<const Matrix>(values.data(), rows, cols);
  }
  return m;
}

// --- batching ------------------------------------------------------------------

Matrix normalize_adjacency(const Graph& g) {
  const int n = g.num_nodes();
  Matrix a = g.adjacency_matrix() + Matrix::Identity(n, n);
  Vector inv_sqrt(n);
  for (int v = 0; v < n; ++v) inv_sqrt(v) = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) *= inv_sqrt(i) * inv_sqrt(j);
  }
  return a;
}

GraphBatch make_batch(std::span<const Graph* const> graphs, Arch arch) {
  GraphBatch b;
  int total = 0;
  int width = -1;
  for (const Graph* g : graphs) {
    if (!g->has_features()) throw ContractError("make_batch: graph '" + g->id() + "' has no features");
    if (width >= 0 && g->features().cols() != width) throw ContractError("make_batch: feature widths differ");
    width = static_cast<int>(g->features().cols());
    total += g->num_nodes();
    b.segments.offsets.push_back(total);
    b.labels.push_back(g->label().value_or(0));
  }
  Matrix x(total, std::max(width, 0));
  std::vector<Eigen::Triplet<double>> trip;
  int base = 0;
  for (const Graph* g : graphs) {
    const int n = g->num_nodes();
    x.middleRows(base, n) = g->features();
    switch (arch) {
      case Arch::gcn: {
        for (int v = 0; v < n; ++v) {
          const double dv = 1.0 / std::sqrt(static_cast<double>(g->degree(v) + 1));
          trip.emplace_back(base + v, base + v, dv * dv);
          for (int w : g->neighbors(v)) {
            const double dw = 1.0 / std::sqrt(static_cast<double>(g->degree(w) + 1));
            trip.emplace_back(base + v, base + w, dv * dw);
          }
        }
        break;
      }
      case Arch::gin:
        for (int v = 0; v < n; ++v) {
          for (int w : g->neighbors(v)) trip.emplace_back(base + v, base + w, 1.0);
        }
        break;
      case Arch::gat:
        for (int v = 0; v < n; ++v) {
          b.src.push_back(base + v);
          b.dst.push_back(base + v);
          for (int w : g->neighbors(v)) {
            b.src.push_back(base + w);
            b.dst.push_back(base + v);
          }
        }
        break;
    }
    base += n;
  }
  b.features = nn::constant(std::move(x));
  if (arch != Arch::gat) {
    auto a = std::make_shared<SparseMatrix>(total, total);
    a->setFromTriplets(trip.begin(), trip.end());
    b.propagate = std::move(a);
  }
  return b;
}

// --- forward passes --------------------------------------------------------------

const LayerActivation& ActivationTrace::at(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  throw ContractError("activation trace has no layer '" + std::string(name) + "'");
}

namespace {

void check_input(const Model& model, const GraphBatch& batch) {
  if (batch.features->cols() != model.config.input_dim) {
    throw ContractError("forward: feature width " + std::to_string(batch.features->cols()) +
                        " does not match the model input width " + std::to_string(model.config.input_dim));
  }
}

nn::Tensor dense(nn::Tape& tape, const Model& m, const std::string& prefix, const nn::Tensor& x) {
  return tape.add_bias_row(tape.matmul(x, m.param(prefix + ".weight")), m.param(prefix + ".bias"));
}

// Pool the last node layer and run the dense head, appending to the trace.
void pool_and_head(nn::Tape& tape, const Model& model, const GraphBatch& batch, nn::Tensor h, bool train, Rng& rng,
                   ActivationTrace& trace) {
  const auto& c = model.config;
  nn::Tensor z = tape.segment_pool(h, batch.segments, c.pooling);
  trace.layers.push_back({"x_global", z, false});
  const int offset = dense_name_offset(c);
  for (int k = 0; k < c.mlp_layers; ++k) {
    const bool last = k + 1 == c.mlp_layers;
    z = dense(tape, model, "mlp." + std::to_string(k), z);
    if (!last) z = tape.relu(z);
    trace.layers.push_back({"x" + std::to_string(offset + k), z, false});
    if (!last) z = tape.dropout(z, c.dropout, train, rng);
  }
  trace.logits = z;
}

}  // namespace

ActivationTrace gcn_forward(nn::Tape& tape, const Model& model, const GraphBatch& batch, bool train, Rng& rng) {
  check_input(model, batch);
  ActivationTrace trace;
  nn::Tensor h = batch.features;
  for (int l = 0; l < model.config.gnn_layers; ++l) {
    const std::string p = "gcn." + std::to_string(l);
    h = tape.spmm(batch.propagate, tape.matmul(h, model.param(p + ".weight")));
    h = tape.relu(tape.add_bias_row(h, model.param(p + ".bias")));
    trace.layers.push_back({"x" + std::to_string(l + 1), h, true});
    h = tape.dropout(h, model.config.dropout, train, rng);
  }
  pool_and_head(tape, model, batch, h, train, rng, trace);
  return trace;
}

ActivationTrace gin_forward(nn::Tape& tape, const Model& model, const GraphBatch& batch, bool train, Rng& rng) {
  check_input(model, batch);
  ActivationTrace trace;
  nn::Tensor h = batch.features;
  for (int l = 0; l < model.config.gnn_layers; ++l) {
    const std::string p = "gin." + std::to_string(l);
    // (1 + eps) h_v + sum of neighbours
    nn::Tensor agg = tape.add(tape.spmm(batch.propagate, h), h);
    if (model.config.learn_eps) agg = tape.add(agg, tape.scale(h, model.param(p + ".eps")));
    h = tape.relu(dense(tape, model, p + ".mlp0", agg));
    h = tape.relu(dense(tape, model, p + ".mlp1", h));
    trace.layers.push_back({"x" + std::to_string(l + 1), h, true});
    h = tape.dropout(h, model.config.dropout, train, rng);
  }
  pool_and_head(tape, model, batch, h, train, rng, trace);
  return trace;
}

ActivationTrace gat_forward(nn::Tape& tape, const Model& model, const GraphBatch& batch, bool train, Rng& rng) {
  check_input(model, batch);
  ActivationTrace trace;
  const int n = batch.num_nodes();
  nn::Tensor h = batch.features;
  for (int l = 0; l < model.config.gnn_layers; ++l) {
    const std::string p = "gat." + std::to_string(l);
    nn::Tensor wh = tape.matmul(h, model.param(p + ".weight"));
    nn::Tensor s_src = tape.head_dot(wh, model.param(p + ".att_src"));
    nn::Tensor s_dst = tape.head_dot(wh, model.param(p + ".att_dst"));
    nn::Tensor e = tape.leaky_relu(tape.add(tape.gather_rows(s_src, batch.src), tape.gather_rows(s_dst, batch.dst)),
                                   model.config.attention_slope);
    nn::Tensor alpha = tape.segment_softmax(e, batch.dst, n);
    trace.attention.push_back(alpha);
    h = tape.edge_aggregate(alpha, wh, batch.src, batch.dst, n);
    h = tape.relu(tape.add_bias_row(h, model.param(p + ".bias")));
    trace.layers.push_back({"x" + std::to_string(l + 1), h, true});
    h = tape.dropout(h, model.config.dropout, train, rng);
  }
  pool_and_head(tape, model, batch, h, train, rng, trace);
  return trace;
}

ActivationTrace forward(nn::Tape& tape, const Model& model, const GraphBatch& batch, bool train, Rng& rng) {
  switch (model.config.arch) {
    case Arch::gcn: return gcn_forward(tape, model, batch, train, rng);
    case Arch::gin: return gin_forward(tape, model, batch, train, rng);
    case Arch::gat: return gat_forward(tape, model, batch, train, rng);
  }
  throw ContractError("unknown architecture");
}

// --- training --------------------------------------------------------------------

namespace {

constexpr int kEvalBatch = 128;

std::vector<GraphBatch> fixed_batches(const Dataset& data, Split split, Arch arch) {
  std::vector<const Graph*> graphs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.split[i] == split) graphs.push_back(&data.graphs[i]);
  }
  std::vector<GraphBatch> out;
  for (std::size_t lo = 0; lo < graphs.size(); lo += kEvalBatch) {
    const std::size_t hi = std::min(graphs.size(), lo + kEvalBatch);
    out.push_back(make_batch(std::span(graphs).subspan(lo, hi - lo), arch));
  }
  return out;
}

int count_correct(const Matrix& logits, std::span<const int> labels) {
  int correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    correct += static_cast<int>(arg) == labels[r];
  }
  return correct;
}

double accuracy_on(const Model& model, const std::vector<GraphBatch>& batches) {
  int correct = 0;
  int total = 0;
  Rng unused(0);
  for (const auto& b : batches) {
    nn::Tape tape(false);
    auto trace = forward(tape, model, b, false, unused);
    correct += count_correct(trace.logits->value, b.labels);
    total += b.num_graphs();
  }
  return total > 0 ? static_cast<double>(correct) / total : 0.0;
}

std::pair<double, double> loss_and_accuracy(const Model& model, const std::vector<const Graph*>& graphs) {
  double loss = 0.0;
  int correct = 0;
  Rng unused(0);
  for (std::size_t lo = 0; lo < graphs.size(); lo += kEvalBatch) {
    const std::size_t hi = std::min(graphs.size(), lo + kEvalBatch);
    GraphBatch b = make_batch(std::span(graphs).subspan(lo, hi - lo), model.config.arch);
    nn::Tape tape(false);
    auto trace = forward(tape, model, b, false, unused);
    loss += tape.softmax_cross_entropy(trace.logits, b.labels)->value(0, 0) * static_cast<double>(hi - lo);
    correct += count_correct(trace.logits->value, b.labels);
  }
  const auto n = static_cast<double>(graphs.size());
  return {loss / n, correct / n};
}

struct RestartOutcome {
  RestartSummary summary;
  Model best;
  TrainingHistory history;
};

RestartOutcome run_restart(const ModelConfig& config, const std::vector<const Graph*>& train_graphs,
                           const std::vector<GraphBatch>& test_batches, int restart) {
  Rng init_rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(restart)));
  Rng batch_rng(derive_seed(config.seed, 2000 + static_cast<std::uint64_t>(restart)));
  Rng dropout_rng(derive_seed(config.seed, 3000 + static_cast<std::uint64_t>(restart)));

  RestartOutcome out;
  out.summary.restart = restart;
  Model model = init_model(config, init_rng);
  nn::Adam opt(model.tensors(), {.lr = config.lr,
                                 .weight_decay = config.weight_decay,
                                 .decoupled = config.decoupled_weight_decay});
  out.best = model.clone();
  out.summary.best_test_accuracy = accuracy_on(model, test_batches);
  out.summary.best_epoch = 0;
  const auto [loss0, acc0] = loss_and_accuracy(model, train_graphs);
  out.history.loss.push_back(loss0);
  out.history.train_accuracy.push_back(acc0);
  out.history.test_accuracy.push_back(out.summary.best_test_accuracy);

  std::vector<const Graph*> order = train_graphs;
  for (int epoch = 1; epoch <= config.epochs && out.summary.best_test_accuracy < 1.0; ++epoch) {
    batch_rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    int correct = 0;
    bool finite = true;
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
      GraphBatch batch = make_batch(std::span(order).subspan(lo, hi - lo), config.arch);
      nn::Tape tape;
      auto trace = forward(tape, model, batch, true, dropout_rng);
      auto loss = tape.softmax_cross_entropy(trace.logits, batch.labels);
      const double value = loss->value(0, 0);
      if (!std::isfinite(value)) {
        finite = false;
        break;
      }
      loss_sum += value * static_cast<double>(hi - lo);
      correct += count_correct(trace.logits->value, batch.labels);
      tape.backward(loss);
      opt.step();
      opt.zero_grad();
    }
    if (!finite) {
      out.summary.aborted = true;
      break;
    }
    out.summary.epochs_run = epoch;
    out.history.loss.push_back(loss_sum / static_cast<double>(order.size()));
    out.history.train_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(order.size()));
    const double acc = accuracy_on(model, test_batches);
    out.history.test_accuracy.push_back(acc);
    if (acc > out.summary.best_test_accuracy) {
      out.summary.best_test_accuracy = acc;
      out.summary.best_epoch = epoch;
      out.best = model.clone();
    }
  }
  return out;
}

}  // namespace

TrainedModel train(const ModelConfig& config, const Dataset& data, const TrainOptions& options) {
  config.validate();
  std::vector<const Graph*> train_graphs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.split[i] != Split::train) continue;
    if (!data.graphs[i].label()) throw ContractError("train: graph '" + data.graphs[i].id() + "' has no label");
    train_graphs.push_back(&data.graphs[i]);
  }
  if (train_graphs.empty() || data.count(Split::test) == 0) {
    throw ContractError("train: dataset needs both a train and a test split");
  }
  const auto test_batches = fixed_batches(data, Split::test, config.arch);

  std::vector<std::optional<RestartOutcome>> outcomes(config.restarts);
  std::atomic<int> next{0};
  std::atomic<int> first_perfect{config.restarts};
  std::mutex log_mutex;
  auto worker = [&] {
    for (int r = next++; r < config.restarts; r = next++) {
      if (r > first_perfect.load()) continue;
      auto outcome = run_restart(config, train_graphs, test_batches, r);
      if (outcome.summary.best_test_accuracy >= 1.0) {
        int cur = first_perfect.load();
        while (r < cur && !first_perfect.compare_exchange_weak(cur, r)) {
        }
      }
      if (options.log) {
        std::lock_guard lock(log_mutex);
        options.log(std::string(to_string(config.arch)) + " restart " + std::to_string(r) + ": best test accuracy " +
                    std::to_string(outcome.summary.best_test_accuracy) + " at epoch " +
                    std::to_string(outcome.summary.best_epoch) + (outcome.summary.aborted ? " (aborted: non-finite loss)" : ""));
      }
      outcomes[r] = std::move(outcome);
    }
  };
  const int threads = std::clamp(options.threads, 1, config.restarts);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  TrainedModel result;
  int best = -1;
  for (int r = 0; r < config.restarts; ++r) {
    if (!outcomes[r] || r > first_perfect.load()) {
      RestartSummary skipped;
      skipped.restart = r;
      skipped.skipped = true;
      result.restarts.push_back(skipped);
      continue;
    }
    result.restarts.push_back(outcomes[r]->summary);
    if (best < 0 || outcomes[r]->summary.best_test_accuracy > outcomes[best]->summary.best_test_accuracy) best = r;
  }
  auto& chosen = *outcomes[best];
  result.model = std::move(chosen.best);
  result.history = std::move(chosen.history);
  result.test_accuracy = chosen.summary.best_test_accuracy;
  result.best_epoch = chosen.summary.best_epoch;
  result.best_restart = best;
  return result;
}

double evaluate_accuracy(const Model& model, const Dataset& data, Split split) {
  return accuracy_on(model, fixed_batches(data, split, model.config.arch));
}

double evaluate_loss(const Model& model, const Dataset& data, Split split) {
  double total = 0.0;
  int count = 0;
  Rng unused(0);
  for (const auto& b : fixed_batches(data, split, model.config.arch)) {
    nn::Tape tape(false);
    auto trace = forward(tape, model, b, false, unused);
    auto loss = tape.softmax_cross_entropy(trace.logits, b.labels);
    total += loss->value(0, 0) * b.num_graphs();
    count += b.num_graphs();
  }
  return count > 0 ? total / count : 0.0;
}

// --- embeddings ----------------------------------------------------------------

const LayerEmbeddings& EmbeddingSet::layer(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  throw ContractError("embedding set has no layer '" + std::string(name) + "'");
}

EmbeddingSet extract_embeddings(const Model& model, const Dataset& data) {
  EmbeddingSet out;
  out.max_nodes = data.max_nodes();
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.graph_ids.push_back(data.graphs[i].id());
    out.split.push_back(data.split[i]);
  }
  Rng unused(0);
  for (std::size_t lo = 0; lo < data.size(); lo += kEvalBatch) {
    const std::size_t hi = std::min(data.size(), lo + kEvalBatch);
    std::vector<const Graph*> graphs;
    for (std::size_t i = lo; i < hi; ++i) graphs.push_back(&data.graphs[i]);
    auto batch = make_batch(graphs, model.config.arch);
    nn::Tape tape(false);
    auto trace = forward(tape, model, batch, false, unused);
    if (out.layers.empty()) {
      for (const auto& l : trace.layers) {
        out.layers.push_back({l.name, l.per_node, static_cast<int>(l.value->cols()), {}});
      }
    }
    for (std::size_t k = 0; k < trace.layers.size(); ++k) {
      const auto& value = trace.layers[k].value->value;
      auto& dest = out.layers[k].per_graph;
      for (int s = 0; s < batch.num_graphs(); ++s) {
        if (trace.layers[k].per_node) {
          const int a = batch.segments.offsets[s];
          const int b = batch.segments.offsets[s + 1];
          dest.emplace_back(value.middleRows(a, b - a));
        } else {
          dest.emplace_back(value.row(s));
        }
      }
    }
  }
  return out;
}

}  // namespace graphprobe
