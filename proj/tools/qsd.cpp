#include "qsd/analysis.hpp"
#include "qsd/error.hpp"
#include "qsd/io.hpp"
#include "qsd/presets.hpp"
#include "qsd/schemes.hpp"
#include "qsd/theory.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> reps;
  std::optional<std::int64_t> stride;
  std::optional<int> parallelism;
  std::optional<std::string> out;
  std::optional<std::string> variant;
  std::optional<double> zeta;

  void add_to(CLI::App* cmd, bool with_variant) {
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--reps", reps, "Number of replications")->check(CLI::PositiveNumber);
    cmd->add_option("--stride", stride, "Trace every stride-th movement batch")->check(CLI::PositiveNumber);
    cmd->add_option("--parallelism", parallelism, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", out, "Output directory");
    if (with_variant) {
      cmd->add_option("--variant", variant, "algI, algII or algII_beta");
      cmd->add_option("--zeta", zeta, "Growth exponent for the algII variants");
    }
  }

  void apply(qsd::RunConfig& cfg) const {
    if (seed) {
      cfg.seed = *seed;
      // The uniform draw is keyed by the master seed.
      if (!cfg.uniform_pool.empty()) {
        cfg.initial_states = qsd::draw_initial_states(cfg.uniform_pool, cfg.growth.a(cfg.horizon_n), cfg.seed);
      }
    }
    if (reps) cfg.reps = *reps;
    if (stride) cfg.stride = *stride;
    if (parallelism) cfg.parallelism = *parallelism;
    if (out) cfg.output_dir = *out;
    if (variant || zeta) {
      const std::string name = variant ? *variant : (cfg.variant ? qsd::variant_to_string(*cfg.variant) : "algI");
      double z = 0.0;
      if (zeta) {
        z = *zeta;
      } else if (cfg.variant && !std::holds_alternative<qsd::AlgI>(*cfg.variant)) {
        z = std::visit([](const auto& v) {
          if constexpr (requires { v.zeta; }) return v.zeta;
          return 0.0;
        }, *cfg.variant);
      } else if (cfg.growth.kind() == qsd::GrowthSchedule::Kind::power) {
        z = cfg.growth.zeta();
      }
      cfg.variant = qsd::variant_from_string(name, z);
    }
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_manifest(const std::string& command, const std::string& config_path, const qsd::RunConfig& cfg,
                    std::vector<fs::path> outputs, const Stopwatch& clock) {
  const fs::path path = fs::path(cfg.output_dir) / "manifest.json";
  outputs.push_back(path);
  const json m = qsd::manifest_json(command, config_path, cfg, outputs, clock.seconds());
  qsd::write_text(path, m.dump(2) + "\n");
}

std::string run_trace_csv(const qsd::RunResult& run, const qsd::Distribution& theta_star) {
  std::string out = "moves,tv";
  for (int x = 1; x <= theta_star.d(); ++x) out += ",theta_" + std::to_string(x);
  out += "\n";
  for (const auto& p : run.trace) {
    out += std::to_string(p.moves) + "," + fmt17(qsd::tv_distance(p.estimate, theta_star));
    for (int x = 0; x < p.estimate.d(); ++x) out += "," + fmt17(p.estimate[x]);
    out += "\n";
  }
  return out;
}

void cmd_run(const qsd::RunConfig& cfg, const std::string& config_path, const Stopwatch& clock) {
  const qsd::AbsorbingChain chain = qsd::AbsorbingChain::validate(cfg.chain);
  const qsd::Scheme scheme = cfg.schemes.front();
  const qsd::SchemeConfig sc = cfg.scheme_config(scheme);
  const qsd::RunResult run = qsd::run_scheme(chain, sc);
  const qsd::Distribution theta_star = qsd::exact_qsd(chain).theta_star;

  const fs::path dir(cfg.output_dir);
  const fs::path trace = dir / "trace.csv";
  const fs::path estimate = dir / "estimate.json";
  qsd::write_text(trace, run_trace_csv(run, theta_star));
  const json est = {{"scheme", std::string(qsd::to_string(scheme))},
                    {"estimate", qsd::vector_json(run.estimate.weights())},
                    {"theta_star", qsd::vector_json(theta_star.weights())},
                    {"tv", qsd::tv_distance(run.estimate, theta_star)},
                    {"moves_used", run.moves_used},
                    {"steps", run.steps},
                    {"seed", cfg.seed}};
  qsd::write_text(estimate, est.dump(2) + "\n");
  write_manifest("run", config_path, cfg, {trace, estimate}, clock);
}

qsd::ComparisonSetup comparison_setup(const qsd::RunConfig& cfg) {
  qsd::ComparisonSetup s;
  s.name = cfg.name;
  s.chain = cfg.chain;
  s.growth = cfg.growth;
  s.n = cfg.horizon_n;
  s.gamma_star = cfg.gamma_star;
  s.initial_states = cfg.initial_states;
  s.schemes = cfg.schemes;
  s.R = cfg.reps;
  s.master_seed = cfg.seed;
  s.parallelism = cfg.parallelism;
  return s;
}

void cmd_compare(const std::string& command, const qsd::RunConfig& cfg, const std::string& config_path,
                 const Stopwatch& clock) {
  const auto result = qsd::run_comparison(comparison_setup(cfg));
  const auto written = qsd::write_comparison(result, cfg.output_dir);
  write_manifest(command, config_path, cfg, written, clock);
}

qsd::RunConfig experiment_config(const std::string& which) {
  qsd::ComparisonSetup s;
  if (which == "one") {
    s = qsd::experiment_one_setup();
  } else if (which == "two") {
    s = qsd::experiment_two_setup();
  } else {
    throw qsd::Error(qsd::Errc::ConfigError, "experiment: expected 'one' or 'two', got '" + which + "'");
  }
  qsd::RunConfig cfg;
  cfg.name = s.name;
  cfg.chain = s.chain;
  cfg.chain_source = "paper-10state";
  cfg.schemes = s.schemes;
  cfg.horizon_n = s.n;
  cfg.growth = s.growth;
  cfg.gamma_star = s.gamma_star;
  cfg.initial_states = s.initial_states;
  if (which == "one") cfg.uniform_pool = {4, 5, 6};
  cfg.seed = s.master_seed;
  cfg.reps = s.R;
  cfg.parallelism = s.parallelism;
  cfg.output_dir = "experiment-" + which;
  return cfg;
}

void cmd_clt(const qsd::RunConfig& cfg, const std::string& config_path, const Stopwatch& clock) {
  const qsd::AbsorbingChain chain = qsd::AbsorbingChain::validate(cfg.chain);
  const qsd::CltVariant variant = cfg.variant.value_or(qsd::AlgI{});
  const bool alg_one = std::holds_alternative<qsd::AlgI>(variant);
  const qsd::Scheme scheme = alg_one ? qsd::Scheme::interacting : qsd::Scheme::branching;
  qsd::SchemeConfig sc = cfg.scheme_config(scheme);
  sc.trace_stride = std::max<std::int64_t>(sc.trace_stride, movement_budget(sc));
  const auto reps = qsd::replicate(chain, sc, cfg.reps, cfg.seed, cfg.parallelism,
                                   alg_one ? std::span<const int>() : std::span<const int>(cfg.initial_states));
  const qsd::CltReport report = qsd::clt_report(chain, reps, variant);
  const fs::path path = fs::path(cfg.output_dir) / "clt_report.json";
  qsd::write_text(path, qsd::to_json(report).dump(2) + "\n");
  write_manifest("clt", config_path, cfg, {path}, clock);
}

void dispatch_manifest_command(const std::string& command, const qsd::RunConfig& cfg, const std::string& path,
                               const Stopwatch& clock) {
  if (command == "run") {
    cmd_run(cfg, path, clock);
  } else if (command == "clt") {
    cmd_clt(cfg, path, clock);
  } else {
    cmd_compare(command, cfg, path, clock);
  }
}

json exact_json(const qsd::QsdSolution& s) {
  return {{"theta_star", qsd::vector_json(s.theta_star.weights())},
          {"lambda", s.lambda},
          {"residual", s.residual},
          {"iterations", s.iterations}};
}

json theory_json(const qsd::CltTheory& t, double gamma_star, const qsd::CltVariant& variant) {
  json j = {{"L", t.L},
            {"inverse_L", t.gamma_star_min},
            {"gamma_star", gamma_star},
            {"variant", qsd::variant_to_string(variant)},
            {"theta_star", qsd::vector_json(t.theta_star.weights())},
            {"grad_h", qsd::matrix_json(t.grad_h)},
            {"U_star", qsd::matrix_json(t.U_star)},
            {"V", qsd::matrix_json(t.V)},
            {"source_scale", t.source_scale},
            {"coefficient", t.coefficient},
            {"lyapunov_residual", t.residual}};
  if (const auto* v = std::get_if<qsd::AlgII>(&variant)) j["zeta"] = v->zeta;
  if (const auto* v = std::get_if<qsd::AlgIIBeta>(&variant)) j["zeta"] = v->zeta;
  return j;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Quasi-stationary distribution estimation for absorbing Markov chains"};
  app.set_version_flag("--version", std::string(qsd::kToolVersion));
  app.require_subcommand(1);

  std::string chain_arg;
  auto* exact = app.add_subcommand("exact", "Exact QSD of a chain file or preset");
  exact->add_option("chain", chain_arg, "Chain file or preset name")->required();

  double gamma_star = qsd::kPaperGammaStar;
  std::string variant_name = "algI";
  double zeta = 0.0;
  bool force = false;
  auto* theory = app.add_subcommand("theory", "Stability constant and CLT covariance");
  theory->add_option("chain", chain_arg, "Chain file or preset name")->required();
  theory->add_option("--gamma-star", gamma_star, "Step-size constant")->capture_default_str();
  theory->add_option("--variant", variant_name, "algI, algII or algII_beta")->capture_default_str();
  theory->add_option("--zeta", zeta, "Growth exponent for the algII variants")->capture_default_str();
  theory->add_flag("--force", force, "Skip the gamma_star > 1/L check");

  std::string config_path;
  Overrides run_over, compare_over, clt_over, exp_over, rerun_over;
  auto* run = app.add_subcommand("run", "Run one scheme from a config file");
  run->add_option("config", config_path, "Config file or manifest")->required();
  run_over.add_to(run, false);

  auto* compare = app.add_subcommand("compare", "Replicated comparison of the configured schemes");
  compare->add_option("config", config_path, "Config file or manifest")->required();
  compare_over.add_to(compare, false);

  auto* clt = app.add_subcommand("clt", "Empirical CLT covariance against the theoretical one");
  clt->add_option("config", config_path, "Config file or manifest")->required();
  clt_over.add_to(clt, true);

  std::string which;
  auto* experiment = app.add_subcommand("experiment", "Ten-state comparison experiments");
  experiment->add_option("which", which, "one or two")->required()->check(CLI::IsMember({"one", "two"}));
  exp_over.add_to(experiment, false);

  auto* rerun = app.add_subcommand("rerun", "Repeat the command recorded in a manifest");
  rerun->add_option("manifest", config_path, "Manifest written by an earlier command")->required();
  rerun->add_option("--out", rerun_over.out, "Output directory");
  rerun->add_option("--parallelism", rerun_over.parallelism, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const Stopwatch clock;
  if (exact->parsed()) {
    const auto chain = qsd::AbsorbingChain::validate(qsd::resolve_chain_argument(chain_arg));
    std::cout << exact_json(qsd::exact_qsd(chain)).dump(2) << "\n";
  } else if (theory->parsed()) {
    const auto chain = qsd::AbsorbingChain::validate(qsd::resolve_chain_argument(chain_arg));
    const auto variant = qsd::variant_from_string(variant_name, zeta);
    const auto t = qsd::clt_covariance(chain, gamma_star, variant, !force);
    std::cout << theory_json(t, gamma_star, variant).dump(2) << "\n";
  } else if (run->parsed()) {
    auto cfg = qsd::load_config(config_path);
    run_over.apply(cfg);
    cmd_run(cfg, config_path, clock);
  } else if (compare->parsed()) {
    auto cfg = qsd::load_config(config_path);
    compare_over.apply(cfg);
    cmd_compare("compare", cfg, config_path, clock);
  } else if (clt->parsed()) {
    auto cfg = qsd::load_config(config_path);
    clt_over.apply(cfg);
    cmd_clt(cfg, config_path, clock);
  } else if (experiment->parsed()) {
    auto cfg = experiment_config(which);
    exp_over.apply(cfg);
    cmd_compare("experiment " + which, cfg, "", clock);
  } else if (rerun->parsed()) {
    json manifest;
    try {
      std::ifstream f(config_path);
      if (!f) throw qsd::Error(qsd::Errc::IoError, "cannot read " + config_path);
      manifest = json::parse(f);
    } catch (const json::exception& e) {
      throw qsd::Error(qsd::Errc::ParseError, config_path + ": " + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("command") || !manifest.contains("resolved_config")) {
      throw qsd::Error(qsd::Errc::ConfigError, "manifest: missing command or resolved_config");
    }
    auto cfg = qsd::parse_config(manifest.at("resolved_config"), fs::path(config_path).parent_path());
    rerun_over.apply(cfg);
    dispatch_manifest_command(manifest.at("command").get<std::string>(), cfg, config_path, clock);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const qsd::Error& e) {
    std::cerr << "error [" << qsd::to_string(e.code()) << "]: " << e.what() << "\n";
    return qsd::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
