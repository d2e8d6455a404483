#include "qsd/io.hpp"

#include "qsd/error.hpp"
#include "qsd/presets.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace qsd {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& msg) {
  throw Error(Errc::ConfigError, field + ": " + msg);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

template <class T>
T get_field(const json& j, const char* field) {
  try {
    return j.at(field).get<T>();
  } catch (const json::exception& e) {
    config_error(field, e.what());
  }
}

std::int64_t get_count(const json& j, const char* field, std::int64_t fallback, std::int64_t min_value) {
  if (!j.contains(field)) return fallback;
  const auto& v = j.at(field);
  if (!v.is_number_integer()) config_error(field, "must be an integer");
  const auto x = v.get<std::int64_t>();
  if (x < min_value) config_error(field, "must be >= " + std::to_string(min_value));
  return x;
}

Matrix matrix_from_json(const json& rows, const std::string& field) {
  if (!rows.is_array() || rows.empty()) config_error(field, "must be a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      config_error(field, "row " + std::to_string(i) + " must have " + std::to_string(n) + " entries");
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) config_error(field, "entry (" + std::to_string(i) + "," + std::to_string(k) + ") is not a number");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

GrowthSchedule growth_from_json(const json& g) {
  if (!g.is_object()) config_error("growth", "must be an object with a kind");
  const auto kind = get_field<std::string>(g, "kind");
  try {
    if (kind == "power") return GrowthSchedule::power(get_field<double>(g, "zeta"));
    if (kind == "constant") return GrowthSchedule::constant(get_field<std::int64_t>(g, "a"));
  } catch (const Error& e) {
    config_error("growth", e.what());
  }
  config_error("growth.kind", "expected 'power' or 'constant', got '" + kind + "'");
}

json growth_to_json(const GrowthSchedule& g) {
  if (g.kind() == GrowthSchedule::Kind::power) return {{"kind", "power"}, {"zeta", g.zeta()}};
  return {{"kind", "constant"}, {"a", g.constant_count()}};
}

}  // namespace

Matrix parse_chain_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  auto fail = [&](const std::string& msg) -> void {
    throw Error(Errc::ParseError, "line " + std::to_string(line_no) + ": " + msg);
  };

  if (!next_line()) throw Error(Errc::ParseError, "chain file is empty");
  long size = 0;
  {
    std::istringstream ls(line);
    std::string extra;
    if (!(ls >> size) || (ls >> extra) || size < 2) fail("first line must be the matrix size d+1 >= 2");
  }
  Matrix p(size, size);
  for (long i = 0; i < size; ++i) {
    if (!next_line()) fail("expected " + std::to_string(size) + " rows, found " + std::to_string(i));
    std::istringstream ls(line);
    std::string tok;
    long k = 0;
    while (ls >> tok) {
      if (k >= size) fail("row " + std::to_string(i) + " has more than " + std::to_string(size) + " entries");
      try {
        std::size_t used = 0;
        p(i, k) = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        fail("row " + std::to_string(i) + ": '" + tok + "' is not a number");
      }
      ++k;
    }
    if (k != size) fail("row " + std::to_string(i) + " has " + std::to_string(k) + " entries, expected " + std::to_string(size));
  }
  if (next_line()) fail("unexpected content after the last row");
  return p;
}

Matrix load_chain_file(const std::filesystem::path& path) { return parse_chain_text(read_file(path)); }

Matrix resolve_chain_argument(const std::string& arg) {
  if (is_preset(arg)) return preset_matrix(arg);
  return load_chain_file(arg);
}

CltVariant variant_from_string(std::string_view name, double zeta) {
  if (name == "algI") return AlgI{};
  if (name == "algII") return AlgII{zeta};
  if (name == "algII_beta") return AlgIIBeta{zeta};
  throw Error(Errc::ConfigError, "variant: expected algI, algII or algII_beta, got '" + std::string(name) + "'");
}

std::string variant_to_string(const CltVariant& v) {
  if (std::holds_alternative<AlgI>(v)) return "algI";
  if (std::holds_alternative<AlgII>(v)) return "algII";
  return "algII_beta";
}

SchemeConfig RunConfig::scheme_config(Scheme scheme) const {
  SchemeConfig cfg;
  cfg.scheme = scheme;
  cfg.horizon_n = horizon_n;
  cfg.growth = growth;
  cfg.steps = StepSchedule(gamma_star);
  cfg.initial_states = (scheme == Scheme::single || scheme == Scheme::branching)
                           ? std::vector<int>{initial_states.front()}
                           : initial_states;
  cfg.seed = seed;
  cfg.trace_stride = stride;
  return cfg;
}

json RunConfig::resolved_json() const {
  json schemes_json = json::array();
  for (Scheme s : schemes) schemes_json.push_back(std::string(to_string(s)));
  json j = {{"name", name},
            {"chain", {{"matrix", matrix_json(chain)}, {"source", chain_source}}},
            {"schemes", schemes_json},
            {"horizon", horizon_n},
            {"growth", growth_to_json(growth)},
            {"gamma_star", gamma_star},
            {"initial_states", initial_states},
            {"seed", seed},
            {"reps", reps},
            {"stride", stride},
            {"parallelism", parallelism},
            {"output_dir", output_dir}};
  if (!uniform_pool.empty()) j["uniform_pool"] = uniform_pool;
  if (variant) {
    j["variant"] = variant_to_string(*variant);
    if (const auto* v = std::get_if<AlgII>(&*variant)) j["zeta"] = v->zeta;
    if (const auto* v = std::get_if<AlgIIBeta>(&*variant)) j["zeta"] = v->zeta;
  }
  return j;
}

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::ConfigError, "config: top level must be an object");
  RunConfig cfg;
  if (j.contains("name")) cfg.name = get_field<std::string>(j, "name");

  if (!j.contains("chain")) config_error("chain", "missing");
  const auto& chain = j.at("chain");
  if (chain.is_string()) {
    const auto name = chain.get<std::string>();
    if (is_preset(name)) {
      cfg.chain = preset_matrix(name);
    } else {
      cfg.chain = load_chain_file(std::filesystem::path(name).is_absolute() ? std::filesystem::path(name) : base_dir / name);
    }
    cfg.chain_source = name;
  } else if (chain.is_object() && chain.contains("matrix")) {
    cfg.chain = matrix_from_json(chain.at("matrix"), "chain.matrix");
    cfg.chain_source = chain.value("source", std::string("inline"));
  } else if (chain.is_object() && chain.contains("preset")) {
    cfg.chain_source = get_field<std::string>(chain, "preset");
    cfg.chain = preset_matrix(cfg.chain_source);
  } else if (chain.is_object() && chain.contains("file")) {
    cfg.chain_source = get_field<std::string>(chain, "file");
    const std::filesystem::path p(cfg.chain_source);
    cfg.chain = load_chain_file(p.is_absolute() ? p : base_dir / p);
  } else {
    config_error("chain", "expected a preset name, a file path, or an object with matrix/preset/file");
  }
  const AbsorbingChain validated = AbsorbingChain::validate(cfg.chain);

  if (j.contains("schemes")) {
    if (!j.at("schemes").is_array() || j.at("schemes").empty()) config_error("schemes", "must be a non-empty array");
    for (const auto& s : j.at("schemes")) cfg.schemes.push_back(scheme_from_string(s.get<std::string>()));
  } else if (j.contains("scheme")) {
    cfg.schemes.push_back(scheme_from_string(get_field<std::string>(j, "scheme")));
  } else {
    config_error("scheme", "missing");
  }

  cfg.horizon_n = get_count(j, "horizon", 0, 1);
  if (cfg.horizon_n == 0) config_error("horizon", "missing");
  if (!j.contains("growth")) config_error("growth", "missing");
  cfg.growth = growth_from_json(j.at("growth"));
  if (!j.contains("gamma_star") || !j.at("gamma_star").is_number()) config_error("gamma_star", "missing or not a number");
  cfg.gamma_star = j.at("gamma_star").get<double>();
  if (!(cfg.gamma_star > 0.0)) config_error("gamma_star", "must be positive");

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) config_error("seed", "must be an integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  cfg.reps = get_count(j, "reps", 1, 1);
  cfg.stride = get_count(j, "stride", 1, 1);
  cfg.parallelism = static_cast<int>(get_count(j, "parallelism", 1, 1));
  if (j.contains("output_dir")) cfg.output_dir = get_field<std::string>(j, "output_dir");

  const std::int64_t particles = cfg.growth.a(cfg.horizon_n);
  if (!j.contains("initial_states")) config_error("initial_states", "missing");
  const auto& init = j.at("initial_states");
  if (init.is_number_integer()) {
    cfg.initial_states.assign(static_cast<std::size_t>(particles), init.get<int>());
  } else if (init.is_array()) {
    cfg.initial_states = init.get<std::vector<int>>();
    // Present in resolved configs whose states came from a uniform draw.
    if (j.contains("uniform_pool")) cfg.uniform_pool = j.at("uniform_pool").get<std::vector<int>>();
    // A single entry serves the one-particle schemes.
    const bool one_particle_only = std::all_of(cfg.schemes.begin(), cfg.schemes.end(), [](Scheme s) {
      return s == Scheme::single || s == Scheme::branching;
    });
    if (static_cast<std::int64_t>(cfg.initial_states.size()) != particles && !one_particle_only) {
      config_error("initial_states", "expected a(n) = " + std::to_string(particles) + " entries, got " +
                                         std::to_string(cfg.initial_states.size()));
    }
    if (cfg.initial_states.empty()) config_error("initial_states", "must be non-empty");
  } else if (init.is_object() && (init.contains("uniform_from") || init.contains("uniform-from"))) {
    const auto& pool = init.contains("uniform_from") ? init.at("uniform_from") : init.at("uniform-from");
    if (!pool.is_array() || pool.empty()) config_error("initial_states", "uniform_from must be a non-empty list");
    cfg.uniform_pool = pool.get<std::vector<int>>();
    cfg.initial_states = draw_initial_states(cfg.uniform_pool, particles, cfg.seed);
  } else {
    config_error("initial_states", "expected a list, a state, or {\"uniform_from\": [...]}");
  }
  for (int s : cfg.initial_states) {
    if (s < 1 || s > validated.d()) {
      config_error("initial_states", "state " + std::to_string(s) + " outside 1.." + std::to_string(validated.d()));
    }
  }

  if (j.contains("variant")) {
    double zeta = cfg.growth.kind() == GrowthSchedule::Kind::power ? cfg.growth.zeta() : 0.0;
    if (j.contains("zeta")) zeta = get_field<double>(j, "zeta");
    cfg.variant = variant_from_string(get_field<std::string>(j, "variant"), zeta);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  if (j.is_object() && j.contains("resolved_config")) return parse_config(j.at("resolved_config"), base);
  return parse_config(j, base);
}

json manifest_json(std::string_view command, const std::string& config_path, const RunConfig& cfg,
                   const std::vector<std::filesystem::path>& outputs, double wall_clock_seconds) {
  json outs = json::array();
  for (const auto& p : outputs) outs.push_back(p.string());
  return {{"tool", "qsd"},
          {"version", std::string(kToolVersion)},
          {"command", std::string(command)},
          {"config_path", config_path},
          {"chain_source", cfg.chain_source},
          {"master_seed", cfg.seed},
          {"outputs", outs},
          {"wall_clock_seconds", wall_clock_seconds},
          {"resolved_config", cfg.resolved_json()}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
  f << text;
}

}  // namespace qsd
