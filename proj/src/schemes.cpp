#include "qsd/schemes.hpp"

#include "qsd/error.hpp"
#include "qsd/kernels.hpp"
#include "qsd/rng.hpp"

#include <sstream>

namespace qsd {

namespace {

// Draw purposes; together with (seed, lane, step) they address every uniform.
constexpr std::uint32_t kMove = 0;
constexpr std::uint32_t kReplicate = 1;
constexpr std::uint32_t kPick = 0;
constexpr std::uint32_t kFvMove = 1;
constexpr std::uint32_t kRelocate = 2;

constexpr std::int64_t kFvBlock = 4096;

Vector empirical(std::span<const std::int32_t> states, int d) {
  Vector w = Vector::Zero(d);
  for (auto s : states) w[s] += 1.0;
  return w / static_cast<double>(states.size());
}

// Cumulative rows of K[theta] for every live state.
void kernel_cdf(const AbsorbingChain& chain, const Vector& theta, std::vector<double>& cdf) {
  const int d = chain.d();
  cdf.resize(static_cast<std::size_t>(d) * d);
  for (int x = 0; x < d; ++x) {
    double acc = 0.0;
    const double out = chain.absorption()[x];
    for (int y = 0; y < d; ++y) {
      acc += chain.live()(x, y) + out * theta[y];
      cdf[static_cast<std::size_t>(x) * d + y] = acc;
    }
  }
}

// Cumulative row of K[theta] out of state x, written to dst[0..d).
void kernel_row_cdf(const AbsorbingChain& chain, const Eigen::Ref<const Vector>& theta, int x, double* dst) {
  const int d = chain.d();
  double acc = 0.0;
  const double out = chain.absorption()[x];
  for (int y = 0; y < d; ++y) {
    acc += chain.live()(x, y) + out * theta[y];
    dst[y] = acc;
  }
}

class TraceRecorder {
 public:
  explicit TraceRecorder(std::int64_t stride) : stride_(stride) {}

  template <class Estimate>
  void batch_done(std::int64_t batch, std::int64_t moves, Estimate&& estimate) {
    if (batch % stride_ == 0) {
      points_.push_back({moves, Distribution(estimate())});
      last_batch_ = batch;
    }
  }

  std::vector<TracePoint> finish(std::int64_t batch, std::int64_t moves, const Distribution& final_estimate) {
    if (last_batch_ != batch) points_.push_back({moves, final_estimate});
    return std::move(points_);
  }

 private:
  std::int64_t stride_;
  std::int64_t last_batch_ = -1;
  std::vector<TracePoint> points_;
};

void convex_update(Vector& theta, double g, const Vector& target) {
  theta = (1.0 - g) * theta + g * target;
}

std::vector<std::int32_t> zero_based(const std::vector<int>& labels) {
  std::vector<std::int32_t> s(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) s[i] = labels[i] - 1;
  return s;
}

void require_scheme(const SchemeConfig& cfg, Scheme s) {
  if (cfg.scheme != s) {
    throw Error(Errc::ConfigError, std::string("scheme: expected ") + std::string(to_string(s)) + ", got " +
                                       std::string(to_string(cfg.scheme)));
  }
}

}  // namespace

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::single: return "single";
    case Scheme::independent: return "independent";
    case Scheme::interacting: return "interacting";
    case Scheme::branching: return "branching";
    case Scheme::fleming_viot: return "fleming_viot";
  }
  return "unknown";
}

Scheme scheme_from_string(std::string_view name) {
  for (Scheme s : {Scheme::single, Scheme::independent, Scheme::interacting, Scheme::branching,
                   Scheme::fleming_viot}) {
    if (name == to_string(s)) return s;
  }
  throw Error(Errc::ConfigError, "scheme: unknown scheme '" + std::string(name) + "'");
}

std::int64_t particle_count(const SchemeConfig& cfg) { return cfg.growth.a(cfg.horizon_n); }

std::int64_t expected_initial_states(const SchemeConfig& cfg) {
  return (cfg.scheme == Scheme::single || cfg.scheme == Scheme::branching) ? 1 : particle_count(cfg);
}

std::int64_t movement_budget(const SchemeConfig& cfg) {
  if (cfg.scheme == Scheme::branching) {
    const std::int64_t xi = xi_budget(cfg.growth, cfg.horizon_n);
    std::int64_t total = 0;
    for (std::int64_t i = 1; i <= xi; ++i) total += cfg.growth.a(i + 1);
    return total;
  }
  return cfg.horizon_n * particle_count(cfg);
}

void validate_config(const AbsorbingChain& chain, const SchemeConfig& cfg) {
  auto fail = [](const std::string& msg) { throw Error(Errc::ConfigError, msg); };
  if (cfg.horizon_n < 1) fail("horizon: must be >= 1");
  if (cfg.trace_stride < 1) fail("stride: must be >= 1");
  if (cfg.scheme == Scheme::branching && cfg.growth.kind() != GrowthSchedule::Kind::power) {
    fail("growth: branching requires a power growth schedule");
  }
  const std::int64_t n_particles = particle_count(cfg);
  if (n_particles < 1) fail("growth: particle count a(n) must be >= 1");
  if (cfg.scheme == Scheme::fleming_viot && n_particles < 2) {
    fail("growth: fleming_viot requires at least 2 particles, a(n) = " + std::to_string(n_particles));
  }
  if (n_particles > 0x7fffffff / (chain.d() + 1)) fail("growth: particle count too large");
  const std::int64_t want = expected_initial_states(cfg);
  if (static_cast<std::int64_t>(cfg.initial_states.size()) != want) {
    std::ostringstream os;
    os << "initial_states: scheme " << to_string(cfg.scheme) << " needs " << want << " entries, got "
       << cfg.initial_states.size();
    fail(os.str());
  }
  for (int s : cfg.initial_states) {
    if (s < 1 || s > chain.d()) {
      fail("initial_states: state " + std::to_string(s) + " outside 1.." + std::to_string(chain.d()));
    }
  }
}

int sample_row(std::span<const double> row, double u) {
  const int d = static_cast<int>(row.size());
  double acc = 0.0;
  int j = 1;
  for (int k = 0; k < d - 1; ++k) {
    acc += row[static_cast<std::size_t>(k)];
    if (acc <= u) j = k + 2;
  }
  return j;
}

RunResult run_single_stream(const AbsorbingChain& chain, const SchemeConfig& cfg, int start,
                            std::uint32_t lane, std::int64_t steps) {
  const int d = chain.d();
  const auto backend = kernels::active_backend();
  const PhiloxKey key = PhiloxKey::from_seed(cfg.seed);
  Vector theta = Distribution::point_mass(d, start).weights();
  std::int32_t state = start - 1;
  std::vector<double> cdf(static_cast<std::size_t>(d));
  double u = 0.0;

  TraceRecorder trace(cfg.trace_stride);
  trace.batch_done(0, 0, [&] { return theta; });
  for (std::int64_t k = 0; k < steps; ++k) {
    kernel_row_cdf(chain, theta, state, cdf.data());
    kernels::fill_uniforms(backend, key, static_cast<std::uint64_t>(k), kMove, lane, {&u, 1});
    std::int32_t row = 0;
    kernels::sample_rows(backend, cdf, d, {&u, 1}, {&row, 1});
    state = row;
    const double g = cfg.steps.gamma(k + 1);
    theta *= (1.0 - g);
    theta[state] += g;
    trace.batch_done(k + 1, k + 1, [&] { return theta; });
  }
  Distribution est(theta);
  auto points = trace.finish(steps, steps, est);
  return RunResult{std::move(est), steps, steps, std::move(points)};
}

RunResult run_single(const AbsorbingChain& chain, const SchemeConfig& cfg) {
  require_scheme(cfg, Scheme::single);
  validate_config(chain, cfg);
  return run_single_stream(chain, cfg, cfg.initial_states[0], 0, movement_budget(cfg));
}

RunResult run_interacting(const AbsorbingChain& chain, const SchemeConfig& cfg) {
  require_scheme(cfg, Scheme::interacting);
  validate_config(chain, cfg);
  const int d = chain.d();
  const auto backend = kernels::active_backend();
  const PhiloxKey key = PhiloxKey::from_seed(cfg.seed);
  const std::int64_t n = cfg.horizon_n;
  const auto count = static_cast<std::int64_t>(cfg.initial_states.size());

  std::vector<std::int32_t> states = zero_based(cfg.initial_states);
  std::vector<double> scratch(states.size());
  std::vector<double> cdf;
  Vector theta = empirical(states, d);

  TraceRecorder trace(cfg.trace_stride);
  trace.batch_done(0, 0, [&] { return theta; });
  for (std::int64_t k = 0; k < n; ++k) {
    kernel_cdf(chain, theta, cdf);
    kernels::advance(backend, cdf, d, key, static_cast<std::uint64_t>(k), kMove, 0, states, scratch);
    convex_update(theta, cfg.steps.gamma(k + 1), empirical(states, d));
    trace.batch_done(k + 1, (k + 1) * count, [&] { return theta; });
  }
  Distribution est(theta);
  auto points = trace.finish(n, n * count, est);
  return RunResult{std::move(est), n * count, n, std::move(points)};
}

RunResult run_independent(const AbsorbingChain& chain, const SchemeConfig& cfg) {
  require_scheme(cfg, Scheme::independent);
  validate_config(chain, cfg);
  const int d = chain.d();
  const auto backend = kernels::active_backend();
  const PhiloxKey key = PhiloxKey::from_seed(cfg.seed);
  const std::int64_t n = cfg.horizon_n;
  const auto copies = static_cast<std::int64_t>(cfg.initial_states.size());

  // Column i holds the occupation estimate of copy i.
  Matrix thetas = Matrix::Zero(d, copies);
  std::vector<std::int32_t> states = zero_based(cfg.initial_states);
  for (std::int64_t i = 0; i < copies; ++i) thetas(states[static_cast<std::size_t>(i)], i) = 1.0;
  std::vector<std::int32_t> rows(states.size());
  std::vector<double> scratch(states.size());
  std::vector<double> cdf(static_cast<std::size_t>(copies) * d);
  auto mean = [&] { return Vector(thetas.rowwise().mean()); };

  TraceRecorder trace(cfg.trace_stride);
  trace.batch_done(0, 0, mean);
  for (std::int64_t k = 0; k < n; ++k) {
    for (std::int64_t i = 0; i < copies; ++i) {
      kernel_row_cdf(chain, thetas.col(i), states[static_cast<std::size_t>(i)],
                     cdf.data() + static_cast<std::size_t>(i) * d);
      rows[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
    }
    kernels::advance(backend, cdf, d, key, static_cast<std::uint64_t>(k), kMove, 0, rows, scratch);
    states = rows;
    const double g = cfg.steps.gamma(k + 1);
    thetas *= (1.0 - g);
    for (std::int64_t i = 0; i < copies; ++i) thetas(states[static_cast<std::size_t>(i)], i) += g;
    trace.batch_done(k + 1, (k + 1) * copies, mean);
  }
  Distribution est(mean());
  auto points = trace.finish(n, n * copies, est);
  return RunResult{std::move(est), n * copies, n, std::move(points)};
}

RunResult run_branching(const AbsorbingChain& chain, const SchemeConfig& cfg) {
  require_scheme(cfg, Scheme::branching);
  validate_config(chain, cfg);
  const int d = chain.d();
  const auto backend = kernels::active_backend();
  const PhiloxKey key = PhiloxKey::from_seed(cfg.seed);
  const GrowthSchedule& growth = cfg.growth;
  const std::int64_t horizon = xi_budget(growth, cfg.horizon_n);

  std::vector<std::int32_t> states{static_cast<std::int32_t>(cfg.initial_states[0] - 1)};
  std::vector<double> scratch;
  std::vector<double> cdf;
  Vector theta = Distribution::point_mass(d, cfg.initial_states[0]).weights();
  std::int64_t moves = 0;

  TraceRecorder trace(cfg.trace_stride);
  trace.batch_done(0, 0, [&] { return theta; });
  for (std::int64_t m = 0; m < horizon; ++m) {
    // states holds the a(m+1) particles alive going into this step.
    const auto live = static_cast<std::int64_t>(states.size());
    if (live != growth.a(m + 1)) throw Error(Errc::ConfigError, "branching: population left the schedule");
    kernel_cdf(chain, theta, cdf);
    if (growth.a(m + 2) == live + 1) {
      // The newborn's first position is drawn from the parent's pre-move row, at its own lane.
      const double u = philox_uniform(key, 0, kReplicate, static_cast<std::uint64_t>(m));
      const std::uint32_t parent = unit_to_index(u, static_cast<std::uint32_t>(live));
      states.push_back(states[parent]);
    }
    scratch.resize(states.size());
    kernels::advance(backend, cdf, d, key, static_cast<std::uint64_t>(m), kMove, 0, states, scratch);
    moves += static_cast<std::int64_t>(states.size());
    // The estimate averages the particles that were alive before the step.
    convex_update(theta, cfg.steps.gamma(m + 1),
                  empirical(std::span<const std::int32_t>(states).first(static_cast<std::size_t>(live)), d));
    trace.batch_done(m + 1, moves, [&] { return theta; });
  }
  Distribution est(theta);
  auto points = trace.finish(horizon, moves, est);
  return RunResult{std::move(est), moves, horizon, std::move(points)};
}

RunResult run_fleming_viot(const AbsorbingChain& chain, const SchemeConfig& cfg) {
  require_scheme(cfg, Scheme::fleming_viot);
  validate_config(chain, cfg);
  const int d = chain.d();
  const auto backend = kernels::active_backend();
  const PhiloxKey key = PhiloxKey::from_seed(cfg.seed);
  const auto count = static_cast<std::int64_t>(cfg.initial_states.size());
  const std::int64_t ticks = cfg.horizon_n * count;

  // Rows of the full chain out of each live state, over columns {0, 1..d}.
  const int width = d + 1;
  std::vector<double> cdf(static_cast<std::size_t>(d) * width);
  for (int x = 0; x < d; ++x) {
    double acc = 0.0;
    for (int y = 0; y < width; ++y) {
      acc += chain.full()(x + 1, y);
      cdf[static_cast<std::size_t>(x) * width + y] = acc;
    }
  }

  std::vector<std::int32_t> states = zero_based(cfg.initial_states);
  Vector counts = Vector::Zero(d);
  for (auto s : states) counts[s] += 1.0;
  auto measure = [&] { return Vector(counts / static_cast<double>(count)); };

  std::vector<double> pick(kFvBlock), move(kFvBlock), relocate(kFvBlock);
  const auto n_u32 = static_cast<std::uint32_t>(count);
  TraceRecorder trace(cfg.trace_stride);
  trace.batch_done(0, 0, measure);
  for (std::int64_t block_start = 0; block_start < ticks; block_start += kFvBlock) {
    const auto len = static_cast<std::size_t>(std::min(kFvBlock, ticks - block_start));
    const auto block = static_cast<std::uint64_t>(block_start / kFvBlock);
    kernels::fill_uniforms(backend, key, block, kPick, 0, std::span(pick).first(len));
    kernels::fill_uniforms(backend, key, block, kFvMove, 0, std::span(move).first(len));
    kernels::fill_uniforms(backend, key, block, kRelocate, 0, std::span(relocate).first(len));
    for (std::size_t t = 0; t < len; ++t) {
      const std::uint32_t i = unit_to_index(pick[t], n_u32);
      const std::int32_t from = states[i];
      std::int32_t col = from;
      kernels::scalar::sample_rows(cdf, width, std::span(move).subspan(t, 1), {&col, 1});
      std::int32_t to = col - 1;
      if (col == 0) {
        // Absorbed: jump onto a uniformly chosen other particle.
        std::uint32_t j = unit_to_index(relocate[t], n_u32 - 1);
        if (j >= i) ++j;
        to = states[j];
      }
      counts[from] -= 1.0;
      counts[to] += 1.0;
      states[i] = to;
      const std::int64_t done = block_start + static_cast<std::int64_t>(t) + 1;
      trace.batch_done(done, done, measure);
    }
  }
  Distribution est(measure());
  auto points = trace.finish(ticks, ticks, est);
  return RunResult{std::move(est), ticks, ticks, std::move(points)};
}

RunResult run_scheme(const AbsorbingChain& chain, const SchemeConfig& cfg) {
  switch (cfg.scheme) {
    case Scheme::single: return run_single(chain, cfg);
    case Scheme::independent: return run_independent(chain, cfg);
    case Scheme::interacting: return run_interacting(chain, cfg);
    case Scheme::branching: return run_branching(chain, cfg);
    case Scheme::fleming_viot: return run_fleming_viot(chain, cfg);
  }
  throw Error(Errc::ConfigError, "scheme: unknown");
}

}  // namespace qsd
