#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdrc/experiment.hpp"

namespace tdrc {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

// ---- configuration -------------------------------------------------------

Json to_json(const ExperimentConfig& cfg);
/// Unknown keys are errors; missing keys keep their defaults.
ExperimentConfig config_from_json(const Json& j);

std::string serialize_config(const ExperimentConfig& cfg);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

/// Dot paths of every settable field, e.g. "laser.delta_f".
std::vector<std::string> config_keys();

/// Applies `key=value` (value parsed as JSON, else taken as a string). Throws
/// UsageError for unknown keys, listing the valid ones.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Presets: "theta-small", "theta-large", "full" (theta-small with
/// 256-trial averaging and 2048 probe averages).
ExperimentConfig preset_config(const std::string& name, std::uint64_t master_seed = 1);

/// FNV-1a over the canonical serialization with output_dir blanked, as 16
/// hex digits.
std::string config_hash(const ExperimentConfig& cfg);
std::string hash_hex(std::uint64_t h);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t file_hash(const std::filesystem::path& path);

// ---- dataset -------------------------------------------------------------

inline constexpr int kProtocolLength = 4501;

struct SantaFeSeries {
  std::vector<long> values;
  VectorXd normalized;  // min-max over the first `train` values
  std::string source;   // file path or "synthetic"
  std::uint64_t hash = 0;

  std::size_t length() const { return values.size(); }
};

/// Min-max scaling with statistics from values[0, train).
VectorXd normalize_series(const std::vector<long>& values, int train);

/// One integer per line, blank lines ignored.
SantaFeSeries load_santafe(const std::filesystem::path& path, int train = 3000,
                           int min_length = kProtocolLength);

/// Chaotic stand-in: intensity of the solitary laser with strong feedback
/// (coherence-collapse regime), low-passed, sampled and quantized to 0..255.
SantaFeSeries synthetic_santafe(std::size_t length, std::uint64_t seed, int train = 3000);

/// `explicit_path` if set; otherwise the first of $TDRC_DATA_DIR/santafe.txt,
/// ./data/santafe.txt and <source dir>/data/santafe.txt that exists.
std::optional<std::filesystem::path> find_santafe(const std::string& explicit_path);

// ---- files ---------------------------------------------------------------

/// 32-byte little-endian header ("TDRC", u32 version, u64 count, f64 dt,
/// 8 reserved zero bytes) followed by f64 samples.
void write_trace_binary(const std::filesystem::path& path, const VectorXd& trace, double dt);
struct TraceFile {
  VectorXd samples;
  double dt = 0.0;
  std::uint32_t version = 0;
};
TraceFile read_trace_binary(const std::filesystem::path& path);
void write_trace_csv(const std::filesystem::path& path, const VectorXd& trace, double dt);

void write_weights_csv(const std::filesystem::path& path, const VectorXd& w);

// ---- CLI -----------------------------------------------------------------

/// Entry point shared by the tdrc executable and tests. Returns the process
/// exit code; failures also write `error.json` to the output directory when
/// one is known.
int run_cli(int argc, const char* const* argv);

}  // namespace tdrc
