#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphprobe/graph.hpp"
#include "graphprobe/rng.hpp"

namespace graphprobe {

inline constexpr std::string_view kDatasetSchema = "graphprobe-v1";

enum class Split { train, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct Dataset {
  std::vector<Graph> graphs;
  std::vector<Split> split;
  std::uint64_t seed = 0;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();

  std::size_t size() const { return graphs.size(); }
  std::size_t count(Split s) const;
  int max_nodes() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// --- node features ---------------------------------------------------------

enum class FeatureKind { degree, constant };

FeatureKind parse_feature_kind(std::string_view s);
std::string_view to_string(FeatureKind k);

/// Row v holds the degree of v (or 1 for constant features) repeated across
/// `dim` columns and scaled by 1/dim.
Matrix build_features(const Graph& g, int dim, FeatureKind kind = FeatureKind::degree);

/// Fill features for every graph that has none.
void ensure_features(Dataset& d, int dim, FeatureKind kind = FeatureKind::degree);

// --- generators --------------------------------------------------------------

/// Barabasi-Albert preferential attachment: a star on m+1 nodes, then every
/// new node links to m distinct existing nodes drawn proportionally to degree.
Graph generate_ba(int n, int m, Rng& rng);

/// Square 0-1-2-3 with roof node 4 joined to 0 and 1.
Graph make_house();

/// 3x3 lattice, node r*3+c.
Graph make_grid3x3();

/// Disjoint union plus one bridge between a uniform base node and a uniform
/// motif node.
Graph attach(const Graph& base, const Graph& motif, Rng& rng);

struct GridHouseOptions {
  int count = 2000;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  int ba_m = 1;
  // Inclusive BA base-size ranges per composition.
  int grid_min = 6, grid_max = 21;
  int house_min = 7, house_max = 22;
  int both_min = 1, both_max = 16;
  int min_base = 2;
  int wl_iterations = 3;
  int max_attempts_per_graph = 200;
  int feature_dim = 10;
  FeatureKind features = FeatureKind::degree;
};

class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, std::size_t achieved)
      : std::runtime_error(what), achieved_(achieved) {}
  std::size_t achieved() const { return achieved_; }

 private:
  std::size_t achieved_;
};

/// Grid-House corpus: class 1 = BA + grid + house, class 0 = BA + grid or
/// BA + house (half each). Isomorphic duplicates are regenerated, classes are
/// balanced, and the split is stratified by class. Pure function of options.
Dataset generate_grid_house(const GridHouseOptions& options);

// --- persistence -------------------------------------------------------------

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_dataset(const Dataset& d, std::ostream& out);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace graphprobe
