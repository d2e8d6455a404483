#pragma once

#include "qsd/chain.hpp"
#include "qsd/schemes.hpp"
#include "qsd/theory.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace qsd {

/// Half the l1 distance. Throws DimensionMismatch.
double tv_distance(const Distribution& p, const Distribution& q);

struct ReplicationSet {
  SchemeConfig config;  // template; per-replication seeds (and starts) differ
  std::int64_t R = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<int> starts;  // first initial state of each replication
  std::vector<RunResult> results;
};

/// Runs R seeded replications on `parallelism` workers; replication r uses
/// derive_seed(master_seed, r). When `start_pool` is nonempty and the scheme
/// starts from a single particle, replication r starts from the pool entry at
/// the evenly spaced rank (r + 1/2) |pool| / R of the sorted pool, so starts
/// are proportionate to the pool.
ReplicationSet replicate(const AbsorbingChain& chain, const SchemeConfig& config, std::int64_t R,
                         std::uint64_t master_seed, int parallelism = 1,
                         std::span<const int> start_pool = {});

struct ConvergencePoint {
  std::int64_t moves = 0;
  double mean_tv = 0.0;
  double median_tv = 0.0;
};

struct ConvergenceTrace {
  std::vector<ConvergencePoint> points;
};

/// Mean and median TV to theta_star at each recorded trace point. Every run
/// must share the same grid of movement counts (GridMismatch otherwise).
ConvergenceTrace aggregate_trace(const ReplicationSet& reps, const Distribution& theta_star);

/// Same aggregation evaluated on an explicit movement grid: the value at M is
/// the latest snapshot of each run taken after at most M movements.
ConvergenceTrace aggregate_on_grid(const ReplicationSet& reps, const Distribution& theta_star,
                                   std::span<const std::int64_t> grid);

struct CltReport {
  std::string variant;
  std::int64_t R = 0;
  std::int64_t steps = 0;  // index of the estimate the scaling refers to
  double gamma_star = 0.0;
  double sigma_n = 0.0;
  Vector scaled_mean;
  Matrix empirical_cov;
  Matrix theoretical_V;
  double frobenius_rel_error = 0.0;  // tangent-projected
  double standard_error = 0.0;
  double mean_norm_over_se = 0.0;
  bool degenerate = false;  // all scaled errors coincide
  double L = 0.0;
  double lyapunov_residual = 0.0;
};

/// sqrt(a(m)/gamma_m) for the algI/algII variants; the beta_m scaling
/// (gamma_m (1/m) sum_k 1/a(k))^(-1/2) for algII_beta.
double clt_scaling(const GrowthSchedule& growth, const StepSchedule& steps, std::int64_t m,
                   const CltVariant& variant);

/// Empirical covariance of the scaled errors against the theoretical Lyapunov solution.
/// algI pairs with the interacting scheme, algII / algII_beta with branching.
CltReport clt_report(const AbsorbingChain& chain, const ReplicationSet& reps, const CltVariant& variant);

struct LinearGrowth {
  double a_star = 1.0;  // a(n) = max(1, floor(a_star n))
};
using IidGrowth = std::variant<GrowthSchedule, LinearGrowth>;

struct IidDemoReport {
  bool linear = false;
  std::int64_t n = 0;
  std::int64_t particles = 0;
  std::int64_t R = 0;
  Distribution stationary;
  Vector target;  // 0, or alpha_star under linear growth
  Vector scaled_mean;
  Vector standard_error;
  Vector z;  // (scaled_mean - target) / standard_error, componentwise
  double max_abs_z = 0.0;
  Matrix empirical_cov;
  Matrix U;  // asymptotic covariance of the scaled statistic
};

/// a(n) iid K0-chains from x0 (1-based), n steps each; the centered doubly
/// averaged occupation measure scaled by sqrt(a(n) n).
IidDemoReport iid_clt_demo(const Matrix& k0, int x0, const IidGrowth& growth, std::int64_t n,
                           std::int64_t R, std::uint64_t master_seed, int parallelism = 1);

struct SchemeSummary {
  Scheme scheme = Scheme::single;
  ConvergenceTrace trace;
  double final_mean_tv = 0.0;
  double final_median_tv = 0.0;
  std::int64_t moves_used = 0;
  std::uint64_t seed = 0;
  SchemeConfig config;
};

struct ComparisonSetup {
  std::string name;
  Matrix chain;
  GrowthSchedule growth = GrowthSchedule::constant(1);
  std::int64_t n = 1;
  double gamma_star = 1.0;
  std::vector<int> initial_states;  // a(n) entries; single-particle schemes draw from them
  std::vector<Scheme> schemes;
  std::int64_t R = 1;
  std::uint64_t master_seed = 0;
  int parallelism = 1;
};

struct ComparisonResult {
  ComparisonSetup setup;
  Distribution theta_star;
  std::vector<std::int64_t> grid;
  std::vector<SchemeSummary> schemes;
};

/// Runs every scheme with a shared movement budget n a(n) and aggregates TV
/// traces on the grid {j a(n) : j = 0..n}.
ComparisonResult run_comparison(const ComparisonSetup& setup);

/// Initial states drawn once, uniformly from `pool`, keyed by the master seed.
std::vector<int> draw_initial_states(std::span<const int> pool, std::int64_t count, std::uint64_t master_seed);

inline constexpr std::int64_t kDefaultTraceReps = 50;
inline constexpr std::int64_t kDefaultCltReps = 1000;
inline constexpr double kPaperGammaStar = 4.17;

ComparisonSetup experiment_one_setup(std::int64_t R = kDefaultTraceReps, std::uint64_t master_seed = 1,
                                     int parallelism = 1);
ComparisonSetup experiment_two_setup(std::int64_t R = kDefaultTraceReps, std::uint64_t master_seed = 1,
                                     int parallelism = 1);

/// Writes one `<scheme>.csv` per scheme plus summary.json into dir; returns the paths written.
std::vector<std::filesystem::path> write_comparison(const ComparisonResult& result,
                                                    const std::filesystem::path& dir);

std::vector<std::filesystem::path> experiment_one(const std::filesystem::path& dir,
                                                  std::int64_t R = kDefaultTraceReps,
                                                  std::uint64_t master_seed = 1, int parallelism = 1);
std::vector<std::filesystem::path> experiment_two(const std::filesystem::path& dir,
                                                  std::int64_t R = kDefaultTraceReps,
                                                  std::uint64_t master_seed = 1, int parallelism = 1);

/// CSV with header `moves,mean_tv,median_tv`, doubles at 17 significant digits.
std::string trace_csv(const ConvergenceTrace& trace);

nlohmann::json to_json(const CltReport& report);
nlohmann::json to_json(const IidDemoReport& report);
nlohmann::json summary_json(const ComparisonResult& result);
nlohmann::json matrix_json(const Matrix& m);
nlohmann::json vector_json(const Vector& v);

}  // namespace qsd
