#include "graphprobe/artifacts.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace graphprobe {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

nlohmann::ordered_json ArtifactHeader::to_json() const {
  json j = {{"schema", schema}, {"config_hash", config_hash}, {"seed", seed}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

ArtifactHeader ArtifactHeader::from_json(const nlohmann::ordered_json& j) {
  ArtifactHeader h;
  h.schema = j.at("schema").get<std::string>();
  h.config_hash = j.value("config_hash", "");
  h.seed = j.value("seed", std::uint64_t{0});
  for (const auto& [k, v] : j.items()) {
    if (k != "schema" && k != "config_hash" && k != "seed") h.extra[k] = v;
  }
  return h;
}

void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& write) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path partial = path.string() + ".partial";
  {
    std::ofstream out(partial, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + partial.string() + "'");
    write(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + partial.string() + "'");
  }
  fs::rename(partial, path);
}

void require_input(const fs::path& path, const std::string& what, const std::string& producer) {
  if (!fs::exists(path)) {
    throw MissingInputError(what + " '" + path.string() + "' not found; produce it with `graphprobe " + producer +
                            "`");
  }
}

ArtifactHeader read_csv_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw ParseError("missing '# {...}' provenance header", 1);
  }
  try {
    return ArtifactHeader::from_json(json::parse(line.substr(2)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad provenance header: ") + e.what(), 1);
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

double parse_double(const std::string& s, int line) {
  if (s.empty() || s == "nan") return kNaN;
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("cannot parse number '" + s + "'", line);
  }
  return v;
}

int parse_int(const std::string& s, int line) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("cannot parse integer '" + s + "'", line);
  }
  return v;
}

std::string cell(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

void check_id(const std::string& id) {
  if (id.find_first_of(",\n\r") != std::string::npos) {
    throw ContractError("graph id '" + id + "' contains a comma or newline");
  }
}

// Reads the column line and returns the columns; line numbers start at 2.
std::vector<std::string> read_columns(std::istream& in, std::span<const std::string_view> expected_prefix) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing column header", 2);
  auto cols = split_csv(line);
  for (std::size_t i = 0; i < expected_prefix.size(); ++i) {
    if (i >= cols.size() || cols[i] != expected_prefix[i]) {
      throw ParseError("unexpected column header '" + line + "'", 2);
    }
  }
  return cols;
}

}  // namespace

// --- properties ----------------------------------------------------------------

void write_properties_csv(std::ostream& out, const ArtifactHeader& header, const Dataset& data,
                          std::span<const GraphPropertyVector> rows) {
  if (rows.size() != data.size()) throw ContractError("write_properties_csv: one row per graph expected");
  out << "# " << header.to_json().dump() << "\n";
  out << "id,split,label";
  for (auto name : kGlobalPropertyNames) out << "," << name;
  out << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& g = data.graphs[i];
    check_id(g.id());
    out << g.id() << "," << to_string(data.split[i]) << "," << (g.label() ? std::to_string(*g.label()) : "");
    for (const auto& v : rows[i].values) out << "," << (v.defined ? cell(v.value) : "");
    out << "\n";
  }
}

GraphPropertyTable read_properties_csv(std::istream& in, ArtifactHeader* header) {
  auto h = read_csv_header(in);
  if (header) *header = h;
  static constexpr std::string_view prefix[] = {"id", "split", "label"};
  const auto cols = read_columns(in, prefix);
  GraphPropertyTable t;
  t.names.assign(cols.begin() + 3, cols.end());
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != cols.size()) throw ParseError("expected " + std::to_string(cols.size()) + " fields", lineno);
    t.ids.push_back(f[0]);
    std::vector<double> r;
    for (std::size_t k = 3; k < f.size(); ++k) r.push_back(parse_double(f[k], lineno));
    rows.push_back(std::move(r));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < t.names.size(); ++c) t.values(r, c) = rows[r][c];
  }
  return t;
}

void write_node_properties_csv(std::ostream& out, const ArtifactHeader& header, const NodePropertySet& props) {
  out << "# " << header.to_json().dump() << "\n";
  out << "id,node";
  for (auto name : NodePropertyTable::names) out << "," << name;
  out << "\n";
  for (std::size_t g = 0; g < props.ids.size(); ++g) {
    check_id(props.ids[g]);
    const auto& t = props.tables[g];
    for (std::size_t v = 0; v < t.degree.size(); ++v) {
      out << props.ids[g] << "," << v;
      for (std::size_t k = 0; k < NodePropertyTable::names.size(); ++k) out << "," << cell(t.column(k)[v]);
      out << "\n";
    }
  }
}

NodePropertySet read_node_properties_csv(std::istream& in, ArtifactHeader* header) {
  auto h = read_csv_header(in);
  if (header) *header = h;
  std::vector<std::string_view> prefix{"id", "node"};
  for (auto n : NodePropertyTable::names) prefix.push_back(n);
  const auto cols = read_columns(in, prefix);
  NodePropertySet set;
  std::string line;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != cols.size()) throw ParseError("expected " + std::to_string(cols.size()) + " fields", lineno);
    if (set.ids.empty() || set.ids.back() != f[0]) {
      set.ids.push_back(f[0]);
      set.tables.emplace_back();
    }
    auto& t = set.tables.back();
    if (parse_int(f[1], lineno) != static_cast<int>(t.degree.size())) {
      throw ParseError("node rows of '" + f[0] + "' are not consecutive", lineno);
    }
    std::vector<double>* columns[] = {&t.degree,      &t.local_clustering,       &t.betweenness,
                                      &t.closeness,   &t.eigenvector_centrality, &t.pagerank};
    for (std::size_t k = 0; k < 6; ++k) columns[k]->push_back(parse_double(f[2 + k], lineno));
  }
  return set;
}

// --- embeddings ----------------------------------------------------------------

EmbeddingFormat parse_embedding_format(std::string_view s) {
  if (s == "csv") return EmbeddingFormat::csv;
  if (s == "binary") return EmbeddingFormat::binary;
  throw ParameterError("unknown embedding format '" + std::string(s) + "' (expected csv or binary)");
}

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::string& file) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ParseError("truncated embedding file '" + file + "'", 0);
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

std::string layer_file(const LayerEmbeddings& layer, EmbeddingFormat format) {
  return layer.name + (format == EmbeddingFormat::csv ? ".csv" : ".bin");
}

void write_layer_csv(std::ostream& out, const ArtifactHeader& header, const EmbeddingSet& set,
                     const LayerEmbeddings& layer) {
  json h = header.to_json();
  h["layer"] = layer.name;
  out << "# " << h.dump() << "\n";
  out << "graph_id,split,node";
  for (int c = 0; c < layer.width; ++c) out << ",v" << c;
  out << "\n";
  for (std::size_t g = 0; g < layer.per_graph.size(); ++g) {
    const auto& m = layer.per_graph[g];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out << set.graph_ids[g] << "," << to_string(set.split[g]) << ",";
      out << (layer.per_node ? std::to_string(r) : std::string("-"));
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << "," << format_double(m(r, c));
      out << "\n";
    }
  }
}

void write_layer_binary(std::ostream& out, const EmbeddingSet& set, const LayerEmbeddings& layer) {
  out.write(kEmbeddingMagic, 4);
  put<std::uint32_t>(out, kEmbeddingVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.width));
  put<std::uint8_t>(out, layer.per_node ? 1 : 0);
  std::uint64_t rows = 0;
  for (const auto& m : layer.per_graph) rows += static_cast<std::uint64_t>(m.rows());
  put<std::uint64_t>(out, rows);
  for (std::size_t g = 0; g < layer.per_graph.size(); ++g) {
    const auto& m = layer.per_graph[g];
    const auto& id = set.graph_ids[g];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      put<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
      out.write(id.data(), static_cast<std::streamsize>(id.size()));
      put<std::uint8_t>(out, set.split[g] == Split::train ? 0 : 1);
      put<std::int32_t>(out, layer.per_node ? static_cast<std::int32_t>(r) : -1);
      for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
    }
  }
}

// Rows grouped by graph in file order.
struct LayerRows {
  std::vector<std::string> ids;
  std::vector<Split> split;
  std::vector<std::vector<std::vector<double>>> rows;

  void add(const std::string& id, Split s, int node, std::vector<double> values, bool per_node,
           const std::string& file) {
    if (ids.empty() || ids.back() != id) {
      ids.push_back(id);
      split.push_back(s);
      rows.emplace_back();
    }
    const int expected = per_node ? static_cast<int>(rows.back().size()) : -1;
    if (node != expected || (!per_node && !rows.back().empty())) {
      throw ParseError("rows of graph '" + id + "' out of order in '" + file + "'", 0);
    }
    rows.back().push_back(std::move(values));
  }
};

LayerRows read_layer_csv(const fs::path& path, int width, bool per_node) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("embedding file '" + path.string() + "' not found");
  read_csv_header(in);
  std::string line;
  std::getline(in, line);
  LayerRows out;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (static_cast<int>(f.size()) != width + 3) {
      throw ParseError("expected " + std::to_string(width + 3) + " fields in '" + path.string() + "'", lineno);
    }
    std::vector<double> values(width);
    for (int c = 0; c < width; ++c) values[c] = parse_double(f[3 + c], lineno);
    const int node = f[2] == "-" ? -1 : parse_int(f[2], lineno);
    out.add(f[0], parse_split(f[1]), node, std::move(values), per_node, path.string());
  }
  return out;
}

LayerRows read_layer_binary(const fs::path& path, int width, bool per_node) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("embedding file '" + path.string() + "' not found");
  const std::string file = path.string();
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw ParseError("'" + file + "' is not a graphprobe embedding file", 0);
  }
  const auto version = take<std::uint32_t>(in, file);
  if (version != kEmbeddingVersion) {
    throw VersionError("embedding file '" + file + "' has version " + std::to_string(version) + ", expected " +
                       std::to_string(kEmbeddingVersion));
  }
  const auto w = take<std::uint32_t>(in, file);
  const auto pn = take<std::uint8_t>(in, file);
  if (static_cast<int>(w) != width || (pn != 0) != per_node) {
    throw ParseError("'" + file + "' disagrees with layers.json", 0);
  }
  const auto rows = take<std::uint64_t>(in, file);
  LayerRows out;
  for (std::uint64_t r = 0; r < rows; ++r) {
    const auto len = take<std::uint16_t>(in, file);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw ParseError("truncated embedding file '" + file + "'", 0);
    const auto s = take<std::uint8_t>(in, file);
    const auto node = take<std::int32_t>(in, file);
    std::vector<double> values(width);
    for (int c = 0; c < width; ++c) values[c] = take<double>(in, file);
    out.add(id, s == 0 ? Split::train : Split::test, node, std::move(values), per_node, file);
  }
  return out;
}

}  // namespace

void write_embeddings(const fs::path& dir, const EmbeddingSet& set, const ArtifactHeader& header,
                      EmbeddingFormat format) {
  fs::create_directories(dir);
  for (const auto& id : set.graph_ids) check_id(id);
  json manifest = header.to_json();
  manifest["max_nodes"] = set.max_nodes;
  manifest["format"] = format == EmbeddingFormat::csv ? "csv" : "binary";
  json layers = json::array();
  for (const auto& layer : set.layers) {
    const auto file = layer_file(layer, format);
    write_atomically(dir / file, [&](std::ostream& out) {
      if (format == EmbeddingFormat::csv) {
        write_layer_csv(out, header, set, layer);
      } else {
        write_layer_binary(out, set, layer);
      }
    });
    layers.push_back({{"name", layer.name}, {"per_node", layer.per_node}, {"width", layer.width}, {"file", file}});
  }
  manifest["layers"] = layers;
  write_atomically(dir / "layers.json", [&](std::ostream& out) { out << manifest.dump(2) << "\n"; });
}

EmbeddingSet read_embeddings(const fs::path& dir, ArtifactHeader* header) {
  const auto manifest_path = dir / "layers.json";
  require_input(manifest_path, "embeddings", "train --embeddings <dir>");
  std::ifstream in(manifest_path);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("layers.json: ") + e.what(), 0);
  }
  auto h = ArtifactHeader::from_json(manifest);
  if (h.schema != kDatasetSchema) throw VersionError("embeddings schema '" + h.schema + "' is not supported");
  if (header) *header = h;
  const auto format = parse_embedding_format(manifest.at("format").get<std::string>());
  EmbeddingSet set;
  set.max_nodes = manifest.at("max_nodes").get<int>();
  bool first = true;
  for (const auto& entry : manifest.at("layers")) {
    LayerEmbeddings layer;
    layer.name = entry.at("name").get<std::string>();
    layer.per_node = entry.at("per_node").get<bool>();
    layer.width = entry.at("width").get<int>();
    const auto path = dir / entry.at("file").get<std::string>();
    LayerRows rows = format == EmbeddingFormat::csv ? read_layer_csv(path, layer.width, layer.per_node)
                                                    : read_layer_binary(path, layer.width, layer.per_node);
    if (first) {
      set.graph_ids = rows.ids;
      set.split = rows.split;
      first = false;
    } else if (rows.ids != set.graph_ids) {
      throw ParseError("layer '" + layer.name + "' lists different graphs than the first layer", 0);
    }
    for (const auto& g : rows.rows) {
      Matrix m(static_cast<Eigen::Index>(g.size()), layer.width);
      for (std::size_t r = 0; r < g.size(); ++r) {
        for (int c = 0; c < layer.width; ++c) m(r, c) = g[r][c];
      }
      layer.per_graph.push_back(std::move(m));
    }
    set.layers.push_back(std::move(layer));
  }
  return set;
}

// --- probes and histories --------------------------------------------------------

void write_probes_csv(std::ostream& out, const ArtifactHeader& header, std::span<const ProbeResult> results) {
  out << "# " << header.to_json().dump() << "\n";
  out << "layer,property,r2_train,r2_test,status,lambda,n_train,n_test,n_dropped\n";
  auto opt = [](const std::optional<double>& v) { return v && std::isfinite(*v) ? format_double(*v) : std::string(); };
  for (const auto& r : results) {
    out << r.layer << "," << r.property << "," << opt(r.r2_train) << "," << opt(r.r2_test) << ","
        << to_string(r.status) << "," << opt(r.lambda) << "," << r.n_train << "," << r.n_test << "," << r.n_dropped
        << "\n";
  }
}

std::vector<ProbeResult> read_probes_csv(std::istream& in, ArtifactHeader* header) {
  auto h = read_csv_header(in);
  if (header) *header = h;
  static constexpr std::string_view prefix[] = {"layer", "property", "r2_train", "r2_test", "status",
                                                "lambda", "n_train", "n_test", "n_dropped"};
  read_columns(in, prefix);
  std::vector<ProbeResult> out;
  std::string line;
  int lineno = 2;
  auto opt = [&](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return parse_double(s, lineno);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 9) throw ParseError("expected 9 fields", lineno);
    ProbeResult r;
    r.layer = f[0];
    r.property = f[1];
    r.r2_train = opt(f[2]);
    r.r2_test = opt(f[3]);
    r.status = parse_probe_status(f[4]);
    r.lambda = opt(f[5]);
    r.n_train = parse_int(f[6], lineno);
    r.n_test = parse_int(f[7], lineno);
    r.n_dropped = parse_int(f[8], lineno);
    out.push_back(std::move(r));
  }
  return out;
}

void write_history_csv(std::ostream& out, const ArtifactHeader& header, const TrainingHistory& history) {
  out << "# " << header.to_json().dump() << "\n";
  out << "epoch,loss,train_accuracy,test_accuracy\n";
  for (std::size_t e = 0; e < history.loss.size(); ++e) {
    out << e << "," << format_double(history.loss[e]) << "," << format_double(history.train_accuracy[e]) << ","
        << format_double(history.test_accuracy[e]) << "\n";
  }
}

}  // namespace graphprobe
