#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "graphprobe/dataset.hpp"
#include "graphprobe/models.hpp"
#include "graphprobe/properties.hpp"
#include "graphprobe/types.hpp"

namespace graphprobe {

/// How per-node layers become one row per graph. Pooled layers (x_global and
/// the dense head) are always used as they are; `pooled` skips node layers.
enum class Aggregation { norm_sort, mean, pooled };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view s);

/// Column means.
Vector aggregate_mean(const Matrix& nodes);

/// Rows ordered by descending L2 norm (equal norms: lexicographically larger
/// row first), flattened, zero-padded to max_nodes * width.
Vector aggregate_norm_sort(const Matrix& nodes, int max_nodes);

/// Undefined (NaN) when either side has fewer than two values or zero variance.
double r2_score(std::span<const double> y, std::span<const double> yhat);

/// Value shown in tables and plot series; stored results stay unclipped.
inline double clip_for_display(double r2) { return r2 < -0.05 ? -0.05 : r2; }

// --- ridge -------------------------------------------------------------------

struct RidgeOptions {
  std::vector<double> lambdas{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
  int folds = 5;
  std::uint64_t seed = 0;  // fold assignment
};

/// Per-column standardization fitted on one set of rows; columns whose
/// standard deviation is below 1e-12 are dropped.
struct Standardizer {
  std::vector<int> keep;
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

/// Multi-target ridge with an intercept; each target gets its own lambda.
struct RidgeModel {
  Standardizer standardizer;
  Matrix weights;  // kept columns x targets, in standardized units
  Vector intercept;
  std::vector<double> lambda;
  Matrix cv_r2;  // lambdas x targets, mean validation R^2 (NaN if never defined)

  Matrix predict(const Matrix& x) const;
};

/// Standardizes x, picks lambda per target by k-fold CV on mean validation
/// R^2, then refits on all rows. Small p uses the primal normal equations,
/// p > n the kernel form.
RidgeModel fit_ridge(const Matrix& x, const Matrix& y, const RidgeOptions& options = {});

/// Ridge at one fixed lambda (no CV).
RidgeModel fit_ridge_fixed(const Matrix& x, const Matrix& y, double lambda);

// --- probing -----------------------------------------------------------------

enum class ProbeStatus { ok, undefined_target, degenerate };

std::string_view to_string(ProbeStatus s);
ProbeStatus parse_probe_status(std::string_view s);

struct ProbeResult {
  std::string layer;
  std::string property;
  ProbeStatus status = ProbeStatus::ok;
  std::optional<double> r2_train;
  std::optional<double> r2_test;
  std::optional<double> lambda;
  int n_train = 0;
  int n_test = 0;
  int n_dropped = 0;  // rows whose target was undefined
};

/// Rows aligned with targets; `split` marks which rows train the probe.
struct ProbeFeatureMatrix {
  std::string layer;
  std::string aggregation;  // pooled_native | mean_pooled | norm_sorted | node
  Matrix x;
  std::vector<Split> split;
};

/// Named targets; NaN marks an undefined value.
struct TargetTable {
  std::vector<std::string> names;
  Matrix values;
};

constexpr int kMinProbeRows = 10;

/// One probe per target column. Targets sharing the same defined rows are
/// fitted together.
std::vector<ProbeResult> probe_features(const ProbeFeatureMatrix& features, const TargetTable& targets,
                                        const RidgeOptions& options = {});

/// Graph properties keyed by graph id.
struct GraphPropertyTable {
  std::vector<std::string> ids;
  std::vector<std::string> names;
  Matrix values;  // NaN = undefined
};

GraphPropertyTable make_property_table(std::span<const std::string> ids, std::span<const GraphPropertyVector> rows);

ProbeFeatureMatrix graph_feature_matrix(const EmbeddingSet& set, const LayerEmbeddings& layer, Aggregation agg);

/// Every layer against every property, in (layer, property) order. Layers not
/// covered by the aggregation are skipped.
std::vector<ProbeResult> probe_graph_level(const EmbeddingSet& set, const GraphPropertyTable& props, Aggregation agg,
                                           const RidgeOptions& options = {});

/// Per-node properties, one table per graph in the embedding set's order.
struct NodePropertySet {
  std::vector<std::string> ids;
  std::vector<NodePropertyTable> tables;
};

/// Node rows pooled across all graphs; all nodes of a test graph are test rows.
std::vector<ProbeResult> probe_node_level(const EmbeddingSet& set, const NodePropertySet& props,
                                          const RidgeOptions& options = {});

/// Pearson correlation; undefined with fewer than three points or zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct CorrelationRow {
  std::string model;
  double test_accuracy = 0.0;
  std::optional<double> max_r2_test;
};

struct CorrelationReport {
  std::vector<CorrelationRow> rows;
  std::optional<double> correlation;
};

/// Highest graph-level r2_test per model against its test accuracy.
CorrelationReport correlation_report(std::span<const std::string> models, std::span<const double> accuracy,
                                     std::span<const std::vector<ProbeResult>> probes);

}  // namespace graphprobe
