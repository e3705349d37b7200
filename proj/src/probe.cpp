#include "graphprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include <Eigen/Eigenvalues>

namespace graphprobe {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::norm_sort: return "norm_sort";
    case Aggregation::mean: return "mean";
    case Aggregation::pooled: return "pooled";
  }
  return "";
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "norm_sort" || s == "norm_sorted") return Aggregation::norm_sort;
  if (s == "mean" || s == "mean_pooled") return Aggregation::mean;
  if (s == "pooled" || s == "pooled_native") return Aggregation::pooled;
  throw ParameterError("unknown aggregation '" + std::string(s) + "' (expected norm_sort, mean or pooled)");
}

Vector aggregate_mean(const Matrix& nodes) {
  if (nodes.rows() < 1) throw ContractError("aggregate_mean: empty node matrix");
  return nodes.colwise().mean().transpose();
}

Vector aggregate_norm_sort(const Matrix& nodes, int max_nodes) {
  const auto n = nodes.rows();
  const auto w = nodes.cols();
  if (n > max_nodes) {
    throw ContractError("aggregate_norm_sort: " + std::to_string(n) + " nodes exceed max_nodes " +
                        std::to_string(max_nodes) + " by " + std::to_string(n - max_nodes));
  }
  std::vector<double> norms(n);
  for (Eigen::Index r = 0; r < n; ++r) norms[r] = nodes.row(r).norm();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (norms[a] != norms[b]) return norms[a] > norms[b];
    for (Eigen::Index c = 0; c < w; ++c) {
      if (nodes(a, c) != nodes(b, c)) return nodes(a, c) > nodes(b, c);
    }
    return false;
  });
  Vector out = Vector::Zero(static_cast<Eigen::Index>(max_nodes) * w);
  for (Eigen::Index k = 0; k < n; ++k) out.segment(k * w, w) = nodes.row(order[k]).transpose();
  return out;
}

double r2_score(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw ContractError("r2_score: length mismatch");
  if (y.size() < 2) return kNaN;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (!(ss_tot > 0.0)) return kNaN;
  return 1.0 - ss_res / ss_tot;
}

// --- ridge -------------------------------------------------------------------

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  const auto n = x.rows();
  if (n < 1) throw ContractError("Standardizer: no rows");
  const Vector mean = x.colwise().mean().transpose();
  std::vector<double> keep_mean;
  std::vector<double> keep_scale;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - mean(c)).square().sum() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd > 1e-12) {
      s.keep.push_back(static_cast<int>(c));
      keep_mean.push_back(mean(c));
      keep_scale.push_back(sd);
    }
  }
  s.mean = Eigen::Map<const Vector>(keep_mean.data(), static_cast<Eigen::Index>(keep_mean.size()));
  s.scale = Eigen::Map<const Vector>(keep_scale.data(), static_cast<Eigen::Index>(keep_scale.size()));
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  Matrix z(x.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    z.col(c) = (x.col(keep[k]).array() - mean(c)) / scale(c);
  }
  return z;
}

Matrix RidgeModel::predict(const Matrix& x) const {
  Matrix out = standardizer.apply(x) * weights;
  out.rowwise() += intercept.transpose();
  return out;
}

namespace {

// Centered ridge solved through one eigendecomposition, reusable for any lambda.
class RidgeSolver {
 public:
  RidgeSolver(const Matrix& x, const Matrix& y) {
    x_mean_ = x.colwise().mean().transpose();
    y_mean_ = y.colwise().mean().transpose();
    Matrix xc = x.rowwise() - x_mean_.transpose();
    Matrix yc = y.rowwise() - y_mean_.transpose();
    const auto n = x.rows();
    const auto p = x.cols();
    if (p == 0) {
      rhs_ = Matrix::Zero(0, y.cols());
      return;
    }
    dual_ = p > n;
    Matrix gram = dual_ ? Matrix(xc * xc.transpose()) : Matrix(xc.transpose() * xc);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
    const Matrix vectors = eig.eigenvectors();
    if (dual_) {
      // w = X^T U diag(1/(s+lambda)) U^T y
      basis_ = xc.transpose() * vectors;
      rhs_ = vectors.transpose() * yc;
    } else {
      basis_ = vectors;
      rhs_ = vectors.transpose() * (xc.transpose() * yc);
    }
  }

  Matrix weights(double lambda) const {
    if (rhs_.rows() == 0) return Matrix::Zero(0, rhs_.cols());
    Matrix scaled = rhs_;
    for (Eigen::Index k = 0; k < scaled.rows(); ++k) scaled.row(k) /= (eigenvalues_(k) + lambda);
    return basis_ * scaled;
  }

  Matrix predict(const Matrix& x, const Matrix& w) const {
    Matrix out(x.rows(), w.cols());
    if (w.rows() == 0) {
      out.setZero();
    } else {
      out.noalias() = (x.rowwise() - x_mean_.transpose()) * w;
    }
    out.rowwise() += y_mean_.transpose();
    return out;
  }

  const Vector& y_mean() const { return y_mean_; }
  const Vector& x_mean() const { return x_mean_; }

 private:
  bool dual_ = false;
  Vector x_mean_;
  Vector y_mean_;
  Vector eigenvalues_;
  Matrix basis_;
  Matrix rhs_;
};

Matrix take_rows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

double column_r2(const Matrix& y, const Matrix& yhat, Eigen::Index c) {
  std::vector<double> a(y.rows());
  std::vector<double> b(y.rows());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    a[r] = y(r, c);
    b[r] = yhat(r, c);
  }
  return r2_score(a, b);
}

RidgeModel refit(Standardizer standardizer, const Matrix& z, const Matrix& y, std::vector<double> lambdas) {
  RidgeModel model;
  model.standardizer = std::move(standardizer);
  RidgeSolver solver(z, y);
  model.weights.resize(z.cols(), y.cols());
  for (Eigen::Index t = 0; t < y.cols(); ++t) {
    model.weights.col(t) = solver.weights(lambdas[t]).col(t);
  }
  // z is centered by the standardizer, up to rounding; fold any residual into the intercept.
  model.intercept = solver.y_mean() - (solver.x_mean().transpose() * model.weights).transpose();
  model.lambda = std::move(lambdas);
  return model;
}

}  // namespace

RidgeModel fit_ridge_fixed(const Matrix& x, const Matrix& y, double lambda) {
  if (x.rows() != y.rows()) throw ContractError("fit_ridge: row mismatch between features and targets");
  if (lambda < 0.0) throw ParameterError("fit_ridge: lambda must be >= 0");
  Standardizer s = Standardizer::fit(x);
  const Matrix z = s.apply(x);
  RidgeModel m = refit(std::move(s), z, y, std::vector<double>(y.cols(), lambda));
  m.cv_r2 = Matrix::Constant(1, y.cols(), kNaN);
  return m;
}

RidgeModel fit_ridge(const Matrix& x, const Matrix& y, const RidgeOptions& options) {
  if (x.rows() != y.rows()) throw ContractError("fit_ridge: row mismatch between features and targets");
  if (options.lambdas.empty()) throw ParameterError("fit_ridge: empty lambda grid");
  for (double l : options.lambdas) {
    if (!(l >= 0.0)) throw ParameterError("fit_ridge: lambdas must be >= 0");
  }
  if (options.folds < 2) throw ParameterError("fit_ridge: folds must be >= 2");
  const auto n = static_cast<int>(x.rows());
  const auto targets = y.cols();
  const auto nl = static_cast<Eigen::Index>(options.lambdas.size());

  Standardizer standardizer = Standardizer::fit(x);
  const Matrix z = standardizer.apply(x);

  Matrix sum = Matrix::Zero(nl, targets);
  Matrix count = Matrix::Zero(nl, targets);
  const int folds = std::min(options.folds, n);
  if (folds >= 2) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(options.seed);
    rng.shuffle(std::span(order));
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train_rows;
      std::vector<int> val_rows;
      for (int i = 0; i < n; ++i) (i % folds == f ? val_rows : train_rows).push_back(order[i]);
      const Matrix zv = take_rows(z, val_rows);
      const Matrix yv = take_rows(y, val_rows);
      RidgeSolver solver(take_rows(z, train_rows), take_rows(y, train_rows));
      for (Eigen::Index l = 0; l < nl; ++l) {
        const Matrix pred = solver.predict(zv, solver.weights(options.lambdas[l]));
        for (Eigen::Index t = 0; t < targets; ++t) {
          const double r = column_r2(yv, pred, t);
          if (std::isfinite(r)) {
            sum(l, t) += r;
            count(l, t) += 1.0;
          }
        }
      }
    }
  }

  Matrix cv(nl, targets);
  std::vector<double> chosen(targets);
  for (Eigen::Index t = 0; t < targets; ++t) {
    Eigen::Index best = -1;
    for (Eigen::Index l = 0; l < nl; ++l) {
      cv(l, t) = count(l, t) > 0 ? sum(l, t) / count(l, t) : kNaN;
      if (!std::isfinite(cv(l, t))) continue;
      // Ties go to the stronger penalty.
      if (best < 0 || cv(l, t) > cv(best, t) ||
          (cv(l, t) == cv(best, t) && options.lambdas[l] > options.lambdas[best])) {
        best = l;
      }
    }
    if (best < 0) {
      best = std::max_element(options.lambdas.begin(), options.lambdas.end()) - options.lambdas.begin();
    }
    chosen[t] = options.lambdas[best];
  }
  RidgeModel model = refit(std::move(standardizer), z, y, std::move(chosen));
  model.cv_r2 = std::move(cv);
  return model;
}

// --- probing -----------------------------------------------------------------

std::string_view to_string(ProbeStatus s) {
  switch (s) {
    case ProbeStatus::ok: return "ok";
    case ProbeStatus::undefined_target: return "undefined_target";
    case ProbeStatus::degenerate: return "degenerate";
  }
  return "";
}

ProbeStatus parse_probe_status(std::string_view s) {
  if (s == "ok") return ProbeStatus::ok;
  if (s == "undefined_target") return ProbeStatus::undefined_target;
  if (s == "degenerate") return ProbeStatus::degenerate;
  throw ParameterError("unknown probe status '" + std::string(s) + "'");
}

namespace {

bool has_variance(const Matrix& y, Eigen::Index c) {
  if (y.rows() < 2) return false;
  const double first = y(0, c);
  for (Eigen::Index r = 1; r < y.rows(); ++r) {
    if (y(r, c) != first) return true;
  }
  return false;
}

}  // namespace

std::vector<ProbeResult> probe_features(const ProbeFeatureMatrix& features, const TargetTable& targets,
                                        const RidgeOptions& options) {
  const auto n = features.x.rows();
  if (static_cast<Eigen::Index>(features.split.size()) != n || targets.values.rows() != n) {
    throw ContractError("probe: features, split and targets must have the same number of rows");
  }
  if (static_cast<Eigen::Index>(targets.names.size()) != targets.values.cols()) {
    throw ContractError("probe: target names do not match the target columns");
  }
  if (!features.x.allFinite()) throw ContractError("probe: layer '" + features.layer + "' has non-finite features");

  std::vector<ProbeResult> results(targets.names.size());
  std::map<std::vector<bool>, std::vector<int>> groups;
  for (Eigen::Index t = 0; t < targets.values.cols(); ++t) {
    std::vector<bool> mask(n);
    for (Eigen::Index r = 0; r < n; ++r) mask[r] = std::isfinite(targets.values(r, t));
    groups[mask].push_back(static_cast<int>(t));
  }

  for (const auto& [mask, columns] : groups) {
    std::vector<int> train_rows;
    std::vector<int> test_rows;
    int dropped = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (!mask[r]) {
        ++dropped;
        continue;
      }
      (features.split[r] == Split::train ? train_rows : test_rows).push_back(static_cast<int>(r));
    }
    Matrix y_train(static_cast<Eigen::Index>(train_rows.size()), static_cast<Eigen::Index>(columns.size()));
    Matrix y_test(static_cast<Eigen::Index>(test_rows.size()), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
      for (std::size_t i = 0; i < train_rows.size(); ++i) y_train(i, k) = targets.values(train_rows[i], columns[k]);
      for (std::size_t i = 0; i < test_rows.size(); ++i) y_test(i, k) = targets.values(test_rows[i], columns[k]);
    }

    std::vector<int> fit_columns;
    for (std::size_t k = 0; k < columns.size(); ++k) {
      ProbeResult& res = results[columns[k]];
      res.layer = features.layer;
      res.property = targets.names[columns[k]];
      res.n_train = static_cast<int>(train_rows.size());
      res.n_test = static_cast<int>(test_rows.size());
      res.n_dropped = dropped;
      if (res.n_train < kMinProbeRows) {
        res.status = ProbeStatus::degenerate;
      } else if (!has_variance(y_train, static_cast<Eigen::Index>(k)) ||
                 !has_variance(y_test, static_cast<Eigen::Index>(k))) {
        res.status = ProbeStatus::undefined_target;
      } else {
        fit_columns.push_back(static_cast<int>(k));
      }
    }
    if (fit_columns.empty()) continue;

    Matrix yt(y_train.rows(), static_cast<Eigen::Index>(fit_columns.size()));
    Matrix ye(y_test.rows(), static_cast<Eigen::Index>(fit_columns.size()));
    for (std::size_t j = 0; j < fit_columns.size(); ++j) {
      yt.col(j) = y_train.col(fit_columns[j]);
      ye.col(j) = y_test.col(fit_columns[j]);
    }
    const Matrix x_train = take_rows(features.x, train_rows);
    const Matrix x_test = take_rows(features.x, test_rows);
    const RidgeModel model = fit_ridge(x_train, yt, options);
    const Matrix pred_train = model.predict(x_train);
    const Matrix pred_test = model.predict(x_test);
    for (std::size_t j = 0; j < fit_columns.size(); ++j) {
      ProbeResult& res = results[columns[fit_columns[j]]];
      res.status = ProbeStatus::ok;
      res.r2_train = column_r2(yt, pred_train, static_cast<Eigen::Index>(j));
      res.r2_test = column_r2(ye, pred_test, static_cast<Eigen::Index>(j));
      res.lambda = model.lambda[j];
    }
  }
  return results;
}

GraphPropertyTable make_property_table(std::span<const std::string> ids, std::span<const GraphPropertyVector> rows) {
  if (ids.size() != rows.size()) throw ContractError("make_property_table: ids and rows differ in length");
  GraphPropertyTable t;
  t.ids.assign(ids.begin(), ids.end());
  t.names.assign(kGlobalPropertyNames.begin(), kGlobalPropertyNames.end());
  t.values.resize(static_cast<Eigen::Index>(rows.size()), kNumGlobalProperties);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < kNumGlobalProperties; ++c) {
      const auto& v = rows[r].values[c];
      t.values(r, c) = v.defined ? v.value : kNaN;
    }
  }
  return t;
}

ProbeFeatureMatrix graph_feature_matrix(const EmbeddingSet& set, const LayerEmbeddings& layer, Aggregation agg) {
  ProbeFeatureMatrix f;
  f.layer = layer.name;
  f.split = set.split;
  const auto rows = static_cast<Eigen::Index>(layer.per_graph.size());
  if (!layer.per_node) {
    f.aggregation = "pooled_native";
    f.x.resize(rows, layer.width);
    for (Eigen::Index r = 0; r < rows; ++r) f.x.row(r) = layer.per_graph[r].row(0);
    return f;
  }
  switch (agg) {
    case Aggregation::mean:
      f.aggregation = "mean_pooled";
      f.x.resize(rows, layer.width);
      for (Eigen::Index r = 0; r < rows; ++r) f.x.row(r) = aggregate_mean(layer.per_graph[r]).transpose();
      break;
    case Aggregation::norm_sort:
      f.aggregation = "norm_sorted";
      f.x.resize(rows, static_cast<Eigen::Index>(set.max_nodes) * layer.width);
      for (Eigen::Index r = 0; r < rows; ++r) {
        f.x.row(r) = aggregate_norm_sort(layer.per_graph[r], set.max_nodes).transpose();
      }
      break;
    case Aggregation::pooled:
      throw ContractError("graph_feature_matrix: layer '" + layer.name + "' is per-node and aggregation is pooled");
  }
  return f;
}

namespace {

std::vector<int> align_ids(const std::vector<std::string>& wanted, const std::vector<std::string>& have,
                           const char* what) {
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < have.size(); ++i) index.emplace(have[i], static_cast<int>(i));
  std::vector<int> out;
  std::vector<std::string> missing;
  for (const auto& id : wanted) {
    auto it = index.find(id);
    if (it == index.end()) {
      missing.push_back(id);
    } else {
      out.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = std::string(what) + " lack " + std::to_string(missing.size()) + " graph id(s):";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    if (missing.size() > 10) msg += " ...";
    throw ContractError(msg);
  }
  return out;
}

}  // namespace

std::vector<ProbeResult> probe_graph_level(const EmbeddingSet& set, const GraphPropertyTable& props, Aggregation agg,
                                           const RidgeOptions& options) {
  const auto rows = align_ids(set.graph_ids, props.ids, "graph properties");
  TargetTable targets;
  targets.names = props.names;
  targets.values.resize(static_cast<Eigen::Index>(rows.size()), props.values.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) targets.values.row(r) = props.values.row(rows[r]);

  std::vector<ProbeResult> out;
  for (const auto& layer : set.layers) {
    if (layer.per_node && agg == Aggregation::pooled) continue;
    const auto res = probe_features(graph_feature_matrix(set, layer, agg), targets, options);
    out.insert(out.end(), res.begin(), res.end());
  }
  return out;
}

std::vector<ProbeResult> probe_node_level(const EmbeddingSet& set, const NodePropertySet& props,
                                          const RidgeOptions& options) {
  const auto graphs = align_ids(set.graph_ids, props.ids, "node properties");
  Eigen::Index total = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    total += static_cast<Eigen::Index>(props.tables[graphs[g]].degree.size());
  }
  TargetTable targets;
  targets.names.assign(NodePropertyTable::names.begin(), NodePropertyTable::names.end());
  targets.values.resize(total, static_cast<Eigen::Index>(targets.names.size()));
  std::vector<Split> split;
  split.reserve(total);
  Eigen::Index row = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const auto& table = props.tables[graphs[g]];
    for (std::size_t v = 0; v < table.degree.size(); ++v, ++row) {
      for (std::size_t k = 0; k < NodePropertyTable::names.size(); ++k) targets.values(row, k) = table.column(k)[v];
      split.push_back(set.split[g]);
    }
  }

  std::vector<ProbeResult> out;
  for (const auto& layer : set.layers) {
    if (!layer.per_node) continue;
    ProbeFeatureMatrix f;
    f.layer = layer.name;
    f.aggregation = "node";
    f.split = split;
    f.x.resize(total, layer.width);
    Eigen::Index at = 0;
    for (std::size_t g = 0; g < layer.per_graph.size(); ++g) {
      const auto& m = layer.per_graph[g];
      if (m.rows() != static_cast<Eigen::Index>(props.tables[graphs[g]].degree.size())) {
        throw ContractError("probe_node_level: node count mismatch for graph '" + set.graph_ids[g] + "'");
      }
      f.x.middleRows(at, m.rows()) = m;
      at += m.rows();
    }
    const auto res = probe_features(f, targets, options);
    out.insert(out.end(), res.begin(), res.end());
  }
  return out;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("pearson: length mismatch");
  if (a.size() < 3) return std::nullopt;
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(a) || constant(b)) return std::nullopt;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

CorrelationReport correlation_report(std::span<const std::string> models, std::span<const double> accuracy,
                                     std::span<const std::vector<ProbeResult>> probes) {
  if (models.size() != accuracy.size() || models.size() != probes.size()) {
    throw ContractError("correlation_report: models, accuracies and probe tables differ in length");
  }
  CorrelationReport report;
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < models.size(); ++i) {
    CorrelationRow row{models[i], accuracy[i], std::nullopt};
    for (const auto& r : probes[i]) {
      if (r.status != ProbeStatus::ok || !r.r2_test) continue;
      if (!row.max_r2_test || *r.r2_test > *row.max_r2_test) row.max_r2_test = r.r2_test;
    }
    if (row.max_r2_test) {
      xs.push_back(row.test_accuracy);
      ys.push_back(*row.max_r2_test);
    }
    report.rows.push_back(row);
  }
  report.correlation = pearson(xs, ys);
  return report;
}

}  // namespace graphprobe
