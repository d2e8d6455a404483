#include "qsd/analysis.hpp"

#include "qsd/error.hpp"
#include "qsd/kernels.hpp"
#include "qsd/presets.hpp"
#include "qsd/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace qsd {

namespace {

// Runs job(r) for r in [0, count) on a small worker pool. Each job writes
// only its own output slot, so the result is independent of scheduling.
template <class Job>
void parallel_for(std::int64_t count, int parallelism, Job&& job) {
  const int workers = static_cast<int>(std::clamp<std::int64_t>(parallelism, 1, std::max<std::int64_t>(count, 1)));
  if (workers == 1) {
    for (std::int64_t r = 0; r < count; ++r) job(r);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::int64_t r = next++; r < count; r = next++) {
        try {
          job(r);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

double median(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

ConvergencePoint summarize(std::int64_t moves, std::vector<double> tvs) {
  double sum = 0.0;
  for (double t : tvs) sum += t;
  const double mean = sum / static_cast<double>(tvs.size());
  return {moves, mean, median(std::move(tvs))};
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* variant_name(const CltVariant& v) {
  if (std::holds_alternative<AlgI>(v)) return "algI";
  if (std::holds_alternative<AlgII>(v)) return "algII";
  return "algII_beta";
}

Matrix sample_covariance(const std::vector<Vector>& xs, const Vector& mean) {
  const auto d = mean.size();
  Matrix cov = Matrix::Zero(d, d);
  if (xs.size() < 2) return cov;
  for (const auto& x : xs) {
    const Vector c = x - mean;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(xs.size() - 1);
  return 0.5 * (cov + cov.transpose());
}

Vector sample_mean(const std::vector<Vector>& xs) {
  Vector m = Vector::Zero(xs.front().size());
  for (const auto& x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

}  // namespace

double tv_distance(const Distribution& p, const Distribution& q) {
  if (p.d() != q.d()) throw Error(Errc::DimensionMismatch, "tv_distance: distributions differ in dimension");
  return std::min(1.0, 0.5 * (p.weights() - q.weights()).lpNorm<1>());
}

ReplicationSet replicate(const AbsorbingChain& chain, const SchemeConfig& config, std::int64_t R,
                         std::uint64_t master_seed, int parallelism, std::span<const int> start_pool) {
  if (R < 1) throw Error(Errc::ConfigError, "reps: must be >= 1");
  ReplicationSet set{config, R, master_seed, {}, {}, {}};
  set.seeds.resize(static_cast<std::size_t>(R));
  set.starts.resize(static_cast<std::size_t>(R));
  set.results.resize(static_cast<std::size_t>(R), RunResult{Distribution(Vector::Ones(1)), 0, 0, {}});

  std::vector<int> pool(start_pool.begin(), start_pool.end());
  std::sort(pool.begin(), pool.end());
  const bool single_start = config.scheme == Scheme::single || config.scheme == Scheme::branching;

  std::vector<SchemeConfig> configs(static_cast<std::size_t>(R), config);
  for (std::int64_t r = 0; r < R; ++r) {
    auto& cfg = configs[static_cast<std::size_t>(r)];
    cfg.seed = derive_seed(master_seed, static_cast<std::uint64_t>(r));
    if (single_start && !pool.empty()) {
      const auto rank = static_cast<std::size_t>((static_cast<double>(r) + 0.5) * static_cast<double>(pool.size()) /
                                                 static_cast<double>(R));
      cfg.initial_states = {pool[std::min(rank, pool.size() - 1)]};
    }
    validate_config(chain, cfg);
    set.seeds[static_cast<std::size_t>(r)] = cfg.seed;
    set.starts[static_cast<std::size_t>(r)] = cfg.initial_states.empty() ? 0 : cfg.initial_states.front();
  }
  parallel_for(R, parallelism, [&](std::int64_t r) {
    set.results[static_cast<std::size_t>(r)] = run_scheme(chain, configs[static_cast<std::size_t>(r)]);
  });
  return set;
}

ConvergenceTrace aggregate_trace(const ReplicationSet& reps, const Distribution& theta_star) {
  if (reps.results.empty()) throw Error(Errc::GridMismatch, "aggregate_trace: no replications");
  const auto& first = reps.results.front().trace;
  for (const auto& run : reps.results) {
    if (run.trace.size() != first.size()) throw Error(Errc::GridMismatch, "aggregate_trace: trace lengths differ");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (run.trace[i].moves != first[i].moves) {
        throw Error(Errc::GridMismatch, "aggregate_trace: trace movement grids differ");
      }
    }
  }
  ConvergenceTrace out;
  out.points.reserve(first.size());
  std::vector<double> tvs(reps.results.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    for (std::size_t r = 0; r < reps.results.size(); ++r) {
      tvs[r] = tv_distance(reps.results[r].trace[i].estimate, theta_star);
    }
    out.points.push_back(summarize(first[i].moves, tvs));
  }
  return out;
}

ConvergenceTrace aggregate_on_grid(const ReplicationSet& reps, const Distribution& theta_star,
                                   std::span<const std::int64_t> grid) {
  if (reps.results.empty()) throw Error(Errc::GridMismatch, "aggregate_on_grid: no replications");
  if (!std::is_sorted(grid.begin(), grid.end())) throw Error(Errc::GridMismatch, "aggregate_on_grid: grid not sorted");
  const std::size_t R = reps.results.size();
  std::vector<std::vector<double>> tv(grid.size(), std::vector<double>(R));
  for (std::size_t r = 0; r < R; ++r) {
    const auto& trace = reps.results[r].trace;
    if (trace.empty() || trace.front().moves != 0) {
      throw Error(Errc::GridMismatch, "aggregate_on_grid: trace lacks the initial snapshot");
    }
    std::size_t cursor = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      while (cursor + 1 < trace.size() && trace[cursor + 1].moves <= grid[g]) ++cursor;
      tv[g][r] = tv_distance(trace[cursor].estimate, theta_star);
    }
  }
  ConvergenceTrace out;
  for (std::size_t g = 0; g < grid.size(); ++g) out.points.push_back(summarize(grid[g], std::move(tv[g])));
  return out;
}

double clt_scaling(const GrowthSchedule& growth, const StepSchedule& steps, std::int64_t m,
                   const CltVariant& variant) {
  if (m < 1) throw Error(Errc::ConfigError, "clt_scaling: step index must be >= 1");
  if (std::holds_alternative<AlgIIBeta>(variant)) {
    double harmonic = 0.0;
    for (std::int64_t k = 1; k <= m; ++k) harmonic += 1.0 / static_cast<double>(growth.a(k));
    return 1.0 / std::sqrt(steps.gamma(m) * harmonic / static_cast<double>(m));
  }
  return std::sqrt(static_cast<double>(growth.a(m)) / steps.gamma(m));
}

CltReport clt_report(const AbsorbingChain& chain, const ReplicationSet& reps, const CltVariant& variant) {
  const Scheme scheme = reps.config.scheme;
  const bool alg_one = std::holds_alternative<AlgI>(variant);
  if (alg_one && scheme != Scheme::interacting) {
    throw Error(Errc::ConfigError, "variant: algI pairs with the interacting scheme");
  }
  if (!alg_one && scheme != Scheme::branching) {
    throw Error(Errc::ConfigError, "variant: algII variants pair with the branching scheme");
  }
  if (reps.results.empty()) throw Error(Errc::ConfigError, "clt_report: no replications");

  const double gamma_star = reps.config.steps.gamma_star();
  const CltTheory theory = clt_covariance(chain, gamma_star, variant);
  const std::int64_t m = reps.results.front().steps;
  // Algorithm I runs a population of a(n) fixed for the whole array row.
  const GrowthSchedule growth =
      alg_one ? GrowthSchedule::constant(particle_count(reps.config)) : reps.config.growth;
  const double sigma = clt_scaling(growth, reps.config.steps, m, variant);

  std::vector<Vector> scaled;
  scaled.reserve(reps.results.size());
  for (const auto& run : reps.results) {
    scaled.push_back(sigma * (run.estimate.weights() - theory.theta_star.weights()));
  }
  const bool all_equal = std::all_of(scaled.begin(), scaled.end(), [&](const Vector& x) { return x == scaled.front(); });
  const Vector mean = all_equal ? scaled.front() : sample_mean(scaled);
  const Matrix cov = all_equal ? Matrix::Zero(mean.size(), mean.size()) : sample_covariance(scaled, mean);

  const int d = chain.d();
  const Matrix proj = tangent_projector(d);
  const Matrix cov_t = proj * cov * proj;
  const Matrix v_t = proj * theory.V * proj;
  const double v_norm = v_t.norm();

  CltReport rep;
  rep.variant = variant_name(variant);
  rep.R = reps.R;
  rep.steps = m;
  rep.gamma_star = gamma_star;
  rep.sigma_n = sigma;
  rep.scaled_mean = mean;
  rep.empirical_cov = cov;
  rep.theoretical_V = theory.V;
  rep.frobenius_rel_error = v_norm > 0.0 ? (cov_t - v_t).norm() / v_norm : cov_t.norm();
  rep.standard_error = std::sqrt(std::max(0.0, cov_t.trace()) / static_cast<double>(scaled.size()));
  const double mean_norm = (proj * mean).norm();
  if (rep.standard_error > 0.0) {
    rep.mean_norm_over_se = mean_norm / rep.standard_error;
  } else {
    rep.mean_norm_over_se = mean_norm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  rep.degenerate = d > 1 && all_equal;
  rep.L = theory.L;
  rep.lyapunov_residual = theory.residual;
  return rep;
}

IidDemoReport iid_clt_demo(const Matrix& k0, int x0, const IidGrowth& growth, std::int64_t n, std::int64_t R,
                           std::uint64_t master_seed, int parallelism) {
  if (n < 1 || R < 1) throw Error(Errc::ConfigError, "iid_clt_demo: n and R must be >= 1");
  const auto d = static_cast<int>(k0.rows());
  const bool linear = std::holds_alternative<LinearGrowth>(growth);
  std::int64_t particles = 0;
  double a_star = 0.0;
  if (linear) {
    a_star = std::get<LinearGrowth>(growth).a_star;
    if (!(a_star > 0.0)) throw Error(Errc::ConfigError, "iid_clt_demo: a_star must be positive");
    particles = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(a_star * static_cast<double>(n))));
  } else {
    particles = std::get<GrowthSchedule>(growth).a(n);
  }
  // Validates K0 (irreducible, x0 in range) before any simulation.
  const Vector alpha = iid_alpha_star(k0, x0, linear ? a_star : 0.0);
  const Distribution pi = stationary(k0);
  const Matrix q = centered_poisson(k0, pi.weights());

  std::vector<double> cdf(static_cast<std::size_t>(d) * d);
  for (int x = 0; x < d; ++x) {
    double acc = 0.0;
    for (int y = 0; y < d; ++y) {
      acc += k0(x, y);
      cdf[static_cast<std::size_t>(x) * d + y] = acc;
    }
  }

  const auto backend = kernels::active_backend();
  const double scale = std::sqrt(static_cast<double>(particles) * static_cast<double>(n));
  const double total = static_cast<double>(particles) * static_cast<double>(n);
  std::vector<Vector> scaled(static_cast<std::size_t>(R));
  parallel_for(R, parallelism, [&](std::int64_t r) {
    const PhiloxKey key = PhiloxKey::from_seed(derive_seed(master_seed, static_cast<std::uint64_t>(r)));
    std::vector<std::int32_t> states(static_cast<std::size_t>(particles), x0 - 1);
    std::vector<double> scratch(states.size());
    std::vector<std::int64_t> counts(static_cast<std::size_t>(d), 0);
    for (std::int64_t k = 0; k < n; ++k) {
      kernels::advance(backend, cdf, d, key, static_cast<std::uint64_t>(k), 0, 0, states, scratch);
      for (auto s : states) ++counts[static_cast<std::size_t>(s)];
    }
    Vector stat(d);
    for (int x = 0; x < d; ++x) stat[x] = scale * (static_cast<double>(counts[static_cast<std::size_t>(x)]) / total - pi[static_cast<std::size_t>(x)]);
    scaled[static_cast<std::size_t>(r)] = std::move(stat);
  });

  IidDemoReport rep{linear, n, particles, R, pi, alpha, {}, {}, {}, 0.0, {}, Matrix::Zero(d, d)};
  rep.scaled_mean = sample_mean(scaled);
  rep.empirical_cov = sample_covariance(scaled, rep.scaled_mean);
  rep.standard_error = (rep.empirical_cov.diagonal() / static_cast<double>(R)).cwiseSqrt();
  rep.z = Vector::Zero(d);
  for (int x = 0; x < d; ++x) {
    const double diff = rep.scaled_mean[x] - rep.target[x];
    if (rep.standard_error[x] > 0.0) {
      rep.z[x] = diff / rep.standard_error[x];
    } else if (diff != 0.0) {
      rep.z[x] = std::numeric_limits<double>::infinity();
    }
  }
  rep.max_abs_z = rep.z.cwiseAbs().maxCoeff();
  for (int w = 0; w < d; ++w) rep.U += pi[static_cast<std::size_t>(w)] * noise_F(k0, q, w);
  rep.U = 0.5 * (rep.U + rep.U.transpose());
  return rep;
}

std::vector<int> draw_initial_states(std::span<const int> pool, std::int64_t count, std::uint64_t master_seed) {
  if (pool.empty()) throw Error(Errc::ConfigError, "initial_states: uniform_from pool is empty");
  const PhiloxKey key = PhiloxKey::from_seed(splitmix64(master_seed ^ 0x1A2B3C4D5E6F7788ull));
  std::vector<int> out(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const double u = philox_uniform(key, static_cast<std::uint32_t>(i), 0, 0);
    out[static_cast<std::size_t>(i)] = pool[unit_to_index(u, static_cast<std::uint32_t>(pool.size()))];
  }
  return out;
}

ComparisonResult run_comparison(const ComparisonSetup& setup) {
  const AbsorbingChain chain = AbsorbingChain::validate(setup.chain);
  const Distribution theta_star = exact_qsd(chain).theta_star;
  const std::int64_t particles = setup.growth.a(setup.n);
  if (static_cast<std::int64_t>(setup.initial_states.size()) != particles) {
    throw Error(Errc::ConfigError, "initial_states: comparison needs a(n) = " + std::to_string(particles) + " entries");
  }

  ComparisonResult result{setup, theta_star, {}, {}};
  for (std::int64_t j = 0; j <= setup.n; ++j) result.grid.push_back(j * particles);

  for (Scheme scheme : setup.schemes) {
    SchemeConfig cfg;
    cfg.scheme = scheme;
    cfg.horizon_n = setup.n;
    cfg.growth = setup.growth;
    cfg.steps = StepSchedule(setup.gamma_star);
    const bool single_start = scheme == Scheme::single || scheme == Scheme::branching;
    cfg.initial_states = single_start ? std::vector<int>{setup.initial_states.front()} : setup.initial_states;
    // Batches of one movement are thinned to the shared grid spacing a(n).
    cfg.trace_stride = (scheme == Scheme::single || scheme == Scheme::fleming_viot) ? particles : 1;

    const ReplicationSet reps = replicate(chain, cfg, setup.R, setup.master_seed, setup.parallelism,
                                          single_start ? std::span<const int>(setup.initial_states)
                                                       : std::span<const int>());
    SchemeSummary summary;
    summary.scheme = scheme;
    summary.trace = aggregate_on_grid(reps, theta_star, result.grid);
    std::vector<double> final_tv;
    for (const auto& run : reps.results) final_tv.push_back(tv_distance(run.estimate, theta_star));
    const ConvergencePoint fin = summarize(reps.results.front().moves_used, final_tv);
    summary.final_mean_tv = fin.mean_tv;
    summary.final_median_tv = fin.median_tv;
    summary.moves_used = reps.results.front().moves_used;
    summary.seed = setup.master_seed;
    summary.config = cfg;
    result.schemes.push_back(std::move(summary));
  }
  return result;
}

namespace {

const std::vector<Scheme> kAllSchemes{Scheme::single, Scheme::independent, Scheme::interacting,
                                      Scheme::branching, Scheme::fleming_viot};

}  // namespace

ComparisonSetup experiment_one_setup(std::int64_t R, std::uint64_t master_seed, int parallelism) {
  ComparisonSetup s;
  s.name = "experiment-one";
  s.chain = paper_ten_state();
  s.growth = GrowthSchedule::power(0.75);
  s.n = 1000;
  s.gamma_star = kPaperGammaStar;
  const std::vector<int> pool{4, 5, 6};
  s.initial_states = draw_initial_states(pool, s.growth.a(s.n), master_seed);
  s.schemes = kAllSchemes;
  s.R = R;
  s.master_seed = master_seed;
  s.parallelism = parallelism;
  return s;
}

ComparisonSetup experiment_two_setup(std::int64_t R, std::uint64_t master_seed, int parallelism) {
  ComparisonSetup s;
  s.name = "experiment-two";
  s.chain = paper_ten_state();
  s.growth = GrowthSchedule::power(0.5);
  s.n = 2000;
  s.gamma_star = kPaperGammaStar;
  s.initial_states.assign(static_cast<std::size_t>(s.growth.a(s.n)), 5);
  s.schemes = kAllSchemes;
  s.R = R;
  s.master_seed = master_seed;
  s.parallelism = parallelism;
  return s;
}

std::string trace_csv(const ConvergenceTrace& trace) {
  std::string out = "moves,mean_tv,median_tv\n";
  for (const auto& p : trace.points) {
    out += std::to_string(p.moves) + "," + format_double(p.mean_tv) + "," + format_double(p.median_tv) + "\n";
  }
  return out;
}

nlohmann::json vector_json(const Vector& v) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

nlohmann::json matrix_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

nlohmann::json to_json(const CltReport& r) {
  return {{"variant", r.variant},
          {"reps", r.R},
          {"steps", r.steps},
          {"gamma_star", r.gamma_star},
          {"sigma_n", r.sigma_n},
          {"scaled_mean", vector_json(r.scaled_mean)},
          {"empirical_cov", matrix_json(r.empirical_cov)},
          {"theoretical_V", matrix_json(r.theoretical_V)},
          {"frobenius_rel_error", r.frobenius_rel_error},
          {"standard_error", r.standard_error},
          {"mean_norm_over_se", r.mean_norm_over_se},
          {"degenerate", r.degenerate},
          {"L", r.L},
          {"lyapunov_residual", r.lyapunov_residual}};
}

nlohmann::json to_json(const IidDemoReport& r) {
  return {{"growth", r.linear ? "linear" : "sublinear"},
          {"n", r.n},
          {"particles", r.particles},
          {"reps", r.R},
          {"stationary", vector_json(r.stationary.weights())},
          {"target", vector_json(r.target)},
          {"scaled_mean", vector_json(r.scaled_mean)},
          {"standard_error", vector_json(r.standard_error)},
          {"z", vector_json(r.z)},
          {"max_abs_z", r.max_abs_z},
          {"empirical_cov", matrix_json(r.empirical_cov)},
          {"U", matrix_json(r.U)}};
}

nlohmann::json summary_json(const ComparisonResult& result) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& s : result.schemes) {
    nlohmann::json params = {{"experiment", result.setup.name},
                             {"horizon", result.setup.n},
                             {"particles", result.setup.growth.a(result.setup.n)},
                             {"gamma_star", result.setup.gamma_star},
                             {"reps", result.setup.R},
                             {"stride", s.config.trace_stride}};
    if (result.setup.growth.kind() == GrowthSchedule::Kind::power) {
      params["growth"] = {{"kind", "power"}, {"zeta", result.setup.growth.zeta()}};
    } else {
      params["growth"] = {{"kind", "constant"}, {"a", result.setup.growth.constant_count()}};
    }
    out[std::string(to_string(s.scheme))] = {{"final_mean_tv", s.final_mean_tv},
                                             {"final_median_tv", s.final_median_tv},
                                             {"moves_used", s.moves_used},
                                             {"seed", s.seed},
                                             {"params", params}};
  }
  return out;
}

std::vector<std::filesystem::path> write_comparison(const ComparisonResult& result,
                                                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto write = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::IoError, "cannot write " + path.string());
    f << text;
    written.push_back(path);
  };
  for (const auto& s : result.schemes) {
    write(dir / (std::string(to_string(s.scheme)) + ".csv"), trace_csv(s.trace));
  }
  write(dir / "summary.json", summary_json(result).dump(2) + "\n");
  return written;
}

std::vector<std::filesystem::path> experiment_one(const std::filesystem::path& dir, std::int64_t R,
                                                  std::uint64_t master_seed, int parallelism) {
  return write_comparison(run_comparison(experiment_one_setup(R, master_seed, parallelism)), dir);
}

std::vector<std::filesystem::path> experiment_two(const std::filesystem::path& dir, std::int64_t R,
                                                  std::uint64_t master_seed, int parallelism) {
  return write_comparison(run_comparison(experiment_two_setup(R, master_seed, parallelism)), dir);
}

}  // namespace qsd
