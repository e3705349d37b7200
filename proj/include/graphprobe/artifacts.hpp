#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphprobe/models.hpp"
#include "graphprobe/probe.hpp"
#include "graphprobe/properties.hpp"

namespace graphprobe {

/// Provenance stamped on every artifact. CSV files carry it as a first line
/// "# {json}"; JSON files as top-level keys.
struct ArtifactHeader {
  std::string schema{kDatasetSchema};
  std::string config_hash;
  std::uint64_t seed = 0;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  static ArtifactHeader from_json(const nlohmann::ordered_json& j);
};

/// Raised when an input artifact is absent; names the command producing it.
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to `path.partial` and renames onto `path` once `write` returns.
/// On an exception the `.partial` file is left behind and the error rethrown.
void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& write);

void require_input(const std::filesystem::path& path, const std::string& what, const std::string& producer);

/// Reads "# {json}" from the first line of a CSV artifact.
ArtifactHeader read_csv_header(std::istream& in);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

// --- properties ----------------------------------------------------------------

void write_properties_csv(std::ostream& out, const ArtifactHeader& header, const Dataset& data,
                          std::span<const GraphPropertyVector> rows);
GraphPropertyTable read_properties_csv(std::istream& in, ArtifactHeader* header = nullptr);

void write_node_properties_csv(std::ostream& out, const ArtifactHeader& header, const NodePropertySet& props);
NodePropertySet read_node_properties_csv(std::istream& in, ArtifactHeader* header = nullptr);

// --- embeddings ----------------------------------------------------------------

enum class EmbeddingFormat { csv, binary };
EmbeddingFormat parse_embedding_format(std::string_view s);

/// Binary layer file: "GPEB", u32 version, u32 width, u8 per_node, u64 rows,
/// then per row u16 id length, id bytes, u8 split (0 train, 1 test), i32 node
/// (-1 for pooled layers) and `width` float64 values. Little endian.
inline constexpr char kEmbeddingMagic[4] = {'G', 'P', 'E', 'B'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

/// One file per layer plus layers.json (header, max_nodes, layer list).
void write_embeddings(const std::filesystem::path& dir, const EmbeddingSet& set, const ArtifactHeader& header,
                      EmbeddingFormat format);
EmbeddingSet read_embeddings(const std::filesystem::path& dir, ArtifactHeader* header = nullptr);

// --- probes and histories --------------------------------------------------------

void write_probes_csv(std::ostream& out, const ArtifactHeader& header, std::span<const ProbeResult> results);
std::vector<ProbeResult> read_probes_csv(std::istream& in, ArtifactHeader* header = nullptr);

void write_history_csv(std::ostream& out, const ArtifactHeader& header, const TrainingHistory& history);

}  // namespace graphprobe
