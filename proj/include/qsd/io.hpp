#pragma once

#include "qsd/analysis.hpp"
#include "qsd/chain.hpp"
#include "qsd/schemes.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qsd {

inline constexpr std::string_view kToolVersion = "1.0.0";

/// Chain text format: first line d+1, then d+1 rows of d+1 whitespace-separated numbers.
/// Throws ParseError with the offending line.
Matrix parse_chain_text(std::string_view text);

Matrix load_chain_file(const std::filesystem::path& path);

/// Preset name or path to a chain file.
Matrix resolve_chain_argument(const std::string& arg);

/// Fully resolved contents of a config file. Every field a run depends on is
/// explicit here, so `resolved_json` alone reproduces the run.
struct RunConfig {
  std::string name = "compare";  // label carried into summary outputs
  Matrix chain;
  std::string chain_source;
  std::vector<Scheme> schemes;  // first entry drives run/clt
  std::int64_t horizon_n = 1;
  GrowthSchedule growth = GrowthSchedule::constant(1);
  double gamma_star = 1.0;
  std::vector<int> initial_states;  // a(n) entries
  std::vector<int> uniform_pool;    // non-empty when drawn via uniform_from
  std::uint64_t seed = 0;
  std::int64_t reps = 1;
  std::int64_t stride = 1;
  int parallelism = 1;
  std::string output_dir = "out";
  std::optional<CltVariant> variant;

  SchemeConfig scheme_config(Scheme scheme) const;
  nlohmann::json resolved_json() const;
};

/// Parses a config (or a manifest's resolved_config). Relative chain file
/// paths resolve against base_dir. Throws ConfigError naming the field.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

/// Reads a config file; a manifest (object with "resolved_config") is accepted too.
RunConfig load_config(const std::filesystem::path& path);

CltVariant variant_from_string(std::string_view name, double zeta);
std::string variant_to_string(const CltVariant& v);

nlohmann::json manifest_json(std::string_view command, const std::string& config_path, const RunConfig& cfg,
                             const std::vector<std::filesystem::path>& outputs, double wall_clock_seconds);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace qsd
