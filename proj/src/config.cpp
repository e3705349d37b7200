#include "graphprobe/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace graphprobe {

namespace {

using json = nlohmann::ordered_json;

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* section = &root;
    while (pos_ < text_.size()) {
      skip_blank();
      if (pos_ >= text_.size()) break;
      const char c = text_[pos_];
      if (c == '\n') {
        ++pos_;
        ++line_;
      } else if (c == '#') {
        skip_comment();
      } else if (c == '[') {
        section = &open_section(root);
        end_of_line();
      } else {
        const std::string key = parse_key();
        skip_blank();
        expect('=');
        skip_blank();
        json value = parse_value();
        if (section->contains(key)) fail("duplicate key '" + key + "'");
        (*section)[key] = std::move(value);
        end_of_line();
      }
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParameterError("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_blank() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
  }

  void skip_comment() {
    while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }

  // Whitespace, newlines and comments inside arrays.
  void skip_space_in_array() {
    for (;;) {
      skip_blank();
      if (pos_ < text_.size() && text_[pos_] == '#') skip_comment();
      if (pos_ < text_.size() && text_[pos_] == '\n') {
        ++pos_;
        ++line_;
        continue;
      }
      return;
    }
  }

  void end_of_line() {
    skip_blank();
    if (pos_ < text_.size() && text_[pos_] == '#') skip_comment();
    if (pos_ < text_.size() && text_[pos_] != '\n') fail("unexpected text after value");
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  static bool bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
  }

  std::string parse_key() {
    if (pos_ < text_.size() && text_[pos_] == '"') return parse_string();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && bare_char(text_[pos_])) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  json& open_section(json& root) {
    expect('[');
    json* node = &root;
    for (;;) {
      skip_blank();
      const std::string part = parse_key();
      if (!node->contains(part)) (*node)[part] = json::object();
      node = &(*node)[part];
      if (!node->is_object()) fail("'" + part + "' is both a value and a section");
      skip_blank();
      if (pos_ < text_.size() && text_[pos_] == '.') {
        ++pos_;
        continue;
      }
      break;
    }
    expect(']');
    return *node;
  }

  std::string parse_string() {
    expect('"');
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\n') fail("unterminated string");
      if (c == '\\') {
        if (pos_ >= text_.size()) fail("unterminated string");
        const char e = text_[pos_++];
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    expect('"');
    return out;
  }

  json parse_value() {
    if (pos_ >= text_.size()) fail("missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') {
      ++pos_;
      json arr = json::array();
      skip_space_in_array();
      while (pos_ < text_.size() && text_[pos_] != ']') {
        arr.push_back(parse_value());
        skip_space_in_array();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          skip_space_in_array();
        } else {
          break;
        }
      }
      expect(']');
      return arr;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (bare_char(text_[pos_]) || text_[pos_] == '.' || text_[pos_] == '+')) ++pos_;
    std::string token(text_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char ch : token) {
      if (ch != '_') digits += ch;
    }
    if (digits.empty()) fail("missing value");
    const bool is_float = digits.find_first_of(".eE") != std::string::npos &&
                          digits.find_first_not_of("0123456789+-.eE") == std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        const double v = std::stod(digits, &used);
        if (used == digits.size()) return v;
      } else if (digits[0] == '-') {
        const long long v = std::stoll(digits, &used);
        if (used == digits.size()) return v;
      } else {
        const unsigned long long v = std::stoull(digits, &used);
        if (used == digits.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + token + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ParameterError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParameterError("config: '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

ModelConfig model_from_keys(const json& keys, const json& training, std::uint64_t seed, const std::string& where) {
  if (!keys.contains("arch")) throw ParameterError("config: " + where + " needs an 'arch'");
  const Arch arch = parse_arch(get<std::string>(keys, "arch", "", where));
  json merged = ModelConfig::defaults(arch).to_json();
  merged["seed"] = seed;
  std::set<std::string> allowed;
  for (const auto& [k, v] : merged.items()) allowed.insert(k);
  for (const json* layer : {&training, &keys}) {
    for (const auto& [k, v] : layer->items()) {
      if (!allowed.count(k)) throw ParameterError("config: unknown key '" + k + "' in " + where);
      merged[k] = v;
    }
  }
  try {
    return ModelConfig::from_json(merged);
  } catch (const nlohmann::json::exception&) {
    throw ParameterError("config: " + where + " has a value of the wrong type");
  }
}

}  // namespace

nlohmann::ordered_json parse_toml(std::string_view text) { return TomlParser(text).parse(); }

std::vector<NamedModel> default_roster(std::uint64_t seed) {
  auto make = [seed](const char* name, Arch arch, double wd, double dropout) {
    NamedModel m{name, ModelConfig::defaults(arch)};
    m.config.weight_decay = wd;
    m.config.dropout = dropout;
    m.config.seed = seed;
    return m;
  };
  return {
      make("gcn_control", Arch::gcn, 0.0, 0.0), make("gcn_l2", Arch::gcn, 1e-4, 0.0),
      make("gcn_dropout", Arch::gcn, 0.0, 0.2), make("gin_control", Arch::gin, 0.0, 0.0),
      make("gin_l2", Arch::gin, 1e-2, 0.0),     make("gin_dropout", Arch::gin, 0.0, 0.2),
      make("gat", Arch::gat, 0.0, 0.0),
  };
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.models = default_roster(c.dataset.seed);
  return c;
}

RunConfig RunConfig::from_toml(std::string_view text) {
  const json root = parse_toml(text);
  reject_unknown(root, {"seed", "dataset", "training", "models", "probe", "output"}, "the top level");
  RunConfig c = defaults();
  const auto seed = get<std::uint64_t>(root, "seed", 0, "the top level");
  c.dataset.seed = seed;
  c.ridge.seed = seed;

  const json empty = json::object();
  const json& ds = root.contains("dataset") ? root["dataset"] : empty;
  reject_unknown(ds,
                 {"count", "seed", "test_fraction", "feature_dim", "features", "ba_m", "grid_min", "grid_max",
                  "house_min", "house_max", "both_min", "both_max", "min_base", "wl_iterations",
                  "max_attempts_per_graph"},
                 "[dataset]");
  auto& d = c.dataset;
  d.count = get(ds, "count", d.count, "[dataset]");
  d.seed = get(ds, "seed", d.seed, "[dataset]");
  d.test_fraction = get(ds, "test_fraction", d.test_fraction, "[dataset]");
  d.feature_dim = get(ds, "feature_dim", d.feature_dim, "[dataset]");
  if (ds.contains("features")) d.features = parse_feature_kind(get<std::string>(ds, "features", "", "[dataset]"));
  d.ba_m = get(ds, "ba_m", d.ba_m, "[dataset]");
  d.grid_min = get(ds, "grid_min", d.grid_min, "[dataset]");
  d.grid_max = get(ds, "grid_max", d.grid_max, "[dataset]");
  d.house_min = get(ds, "house_min", d.house_min, "[dataset]");
  d.house_max = get(ds, "house_max", d.house_max, "[dataset]");
  d.both_min = get(ds, "both_min", d.both_min, "[dataset]");
  d.both_max = get(ds, "both_max", d.both_max, "[dataset]");
  d.min_base = get(ds, "min_base", d.min_base, "[dataset]");
  d.wl_iterations = get(ds, "wl_iterations", d.wl_iterations, "[dataset]");
  d.max_attempts_per_graph = get(ds, "max_attempts_per_graph", d.max_attempts_per_graph, "[dataset]");

  const json& training = root.contains("training") ? root["training"] : empty;
  if (!training.is_object()) throw ParameterError("config: [training] must be a section");
  const json& models = root.contains("models") ? root["models"] : empty;
  if (!models.is_object()) throw ParameterError("config: [models] must hold [models.<name>] sections");
  if (models.empty()) {
    model_from_keys({{"arch", "gcn"}}, training, seed, "[training]").validate();
    std::vector<NamedModel> roster;
    for (const auto& m : default_roster(seed)) {
      json keys = {{"arch", to_string(m.config.arch)},
                   {"weight_decay", m.config.weight_decay},
                   {"dropout", m.config.dropout}};
      roster.push_back({m.name, model_from_keys(keys, training, seed, "[training]")});
    }
    c.models = std::move(roster);
  } else {
    c.models.clear();
    for (const auto& [name, keys] : models.items()) {
      if (!keys.is_object()) throw ParameterError("config: models." + name + " must be a section");
      c.models.push_back({name, model_from_keys(keys, training, seed, "[models." + name + "]")});
    }
  }

  const json& probe = root.contains("probe") ? root["probe"] : empty;
  reject_unknown(probe, {"aggregation", "lambdas", "folds", "seed", "node_level"}, "[probe]");
  if (probe.contains("aggregation")) c.aggregation = parse_aggregation(get<std::string>(probe, "aggregation", "", "[probe]"));
  c.ridge.lambdas = get(probe, "lambdas", c.ridge.lambdas, "[probe]");
  c.ridge.folds = get(probe, "folds", c.ridge.folds, "[probe]");
  c.ridge.seed = get(probe, "seed", c.ridge.seed, "[probe]");
  c.node_level = get(probe, "node_level", c.node_level, "[probe]");

  const json& output = root.contains("output") ? root["output"] : empty;
  reject_unknown(output, {"dir", "embedding_format"}, "[output]");
  c.out_dir = get(output, "dir", c.out_dir, "[output]");
  c.embedding_format = get(output, "embedding_format", c.embedding_format, "[output]");

  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_toml(ss.str());
}

void RunConfig::validate() const {
  if (dataset.count < 2) throw ParameterError("config: dataset.count must be >= 2");
  if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
    throw ParameterError("config: dataset.test_fraction must be in (0, 1)");
  }
  if (dataset.feature_dim < 1) throw ParameterError("config: dataset.feature_dim must be >= 1");
  if (models.empty()) throw ParameterError("config: no models");
  std::set<std::string> names;
  for (const auto& m : models) {
    if (m.name.empty()) throw ParameterError("config: empty model name");
    if (!names.insert(m.name).second) throw ParameterError("config: duplicate model '" + m.name + "'");
    m.config.validate();
    if (m.config.input_dim != dataset.feature_dim) {
      throw ParameterError("config: model '" + m.name + "' input_dim differs from dataset.feature_dim");
    }
  }
  if (ridge.lambdas.empty()) throw ParameterError("config: probe.lambdas is empty");
  for (double l : ridge.lambdas) {
    if (!(l >= 0.0)) throw ParameterError("config: probe.lambdas must be >= 0");
  }
  if (ridge.folds < 2) throw ParameterError("config: probe.folds must be >= 2");
  if (embedding_format != "csv" && embedding_format != "binary") {
    throw ParameterError("config: output.embedding_format must be csv or binary");
  }
}

nlohmann::ordered_json RunConfig::to_json() const {
  json j;
  j["dataset"] = {
      {"count", dataset.count},
      {"seed", dataset.seed},
      {"test_fraction", dataset.test_fraction},
      {"feature_dim", dataset.feature_dim},
      {"features", to_string(dataset.features)},
      {"ba_m", dataset.ba_m},
      {"grid", {dataset.grid_min, dataset.grid_max}},
      {"house", {dataset.house_min, dataset.house_max}},
      {"both", {dataset.both_min, dataset.both_max}},
      {"min_base", dataset.min_base},
      {"wl_iterations", dataset.wl_iterations},
      {"max_attempts_per_graph", dataset.max_attempts_per_graph},
  };
  json ms = json::array();
  for (const auto& m : models) ms.push_back({{"name", m.name}, {"config", m.config.to_json()}});
  j["models"] = ms;
  j["probe"] = {{"aggregation", to_string(aggregation)},
                {"lambdas", ridge.lambdas},
                {"folds", ridge.folds},
                {"seed", ridge.seed},
                {"node_level", node_level}};
  j["output"] = {{"embedding_format", embedding_format}};
  return j;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_string(to_json().dump())));
  return buf;
}

const NamedModel& RunConfig::model(std::string_view name) const {
  for (const auto& m : models) {
    if (m.name == name) return m;
  }
  std::string known;
  for (const auto& m : models) known += (known.empty() ? "" : ", ") + m.name;
  throw ParameterError("no model named '" + std::string(name) + "' (known: " + known + ")");
}

}  // namespace graphprobe
