#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphprobe/dataset.hpp"
#include "graphprobe/models.hpp"
#include "graphprobe/probe.hpp"

namespace graphprobe {

/// Parses the small TOML dialect used by run files: [section] and
/// [section.sub] headers, key = value with integers, floats, booleans,
/// double-quoted strings and flat arrays, and # comments.
nlohmann::ordered_json parse_toml(std::string_view text);

struct NamedModel {
  std::string name;
  ModelConfig config;
};

struct RunConfig {
  GridHouseOptions dataset;
  std::vector<NamedModel> models;  // trained in this order
  Aggregation aggregation = Aggregation::norm_sort;
  RidgeOptions ridge;
  bool node_level = true;
  std::string out_dir = "graphprobe-out";
  std::string embedding_format = "csv";  // csv | binary

  /// Grid-House corpus of 2000 graphs and the seven-model roster:
  /// GCN, GIN (control, L2, dropout) and GAT.
  static RunConfig defaults();

  /// Unknown sections or keys are rejected with a ParameterError.
  static RunConfig from_toml(std::string_view text);
  static RunConfig load(const std::string& path);

  /// Canonical form; the config hash is computed from it.
  nlohmann::ordered_json to_json() const;
  std::string hash() const;

  const NamedModel& model(std::string_view name) const;
  void validate() const;
};

/// Seven-variant roster with the given seed.
std::vector<NamedModel> default_roster(std::uint64_t seed);

}  // namespace graphprobe
