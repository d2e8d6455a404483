#include "doctest.h"

#include "qsd/analysis.hpp"
#include "qsd/error.hpp"
#include "qsd/presets.hpp"
#include "qsd/rng.hpp"
#include "qsd/theory.hpp"
#include "support/random_chains.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace qsd;

namespace {

SchemeConfig interacting_config(std::int64_t n, std::int64_t particles, int start) {
  SchemeConfig cfg;
  cfg.scheme = Scheme::interacting;
  cfg.horizon_n = n;
  cfg.growth = GrowthSchedule::constant(particles);
  cfg.steps = StepSchedule(3.0);
  cfg.initial_states.assign(static_cast<std::size_t>(particles), start);
  return cfg;
}

bool identical(const ReplicationSet& a, const ReplicationSet& b) {
  if (a.seeds != b.seeds || a.starts != b.starts || a.results.size() != b.results.size()) return false;
  for (std::size_t r = 0; r < a.results.size(); ++r) {
    const auto& x = a.results[r];
    const auto& y = b.results[r];
    if (x.estimate.weights() != y.estimate.weights() || x.trace.size() != y.trace.size()) return false;
    for (std::size_t i = 0; i < x.trace.size(); ++i) {
      if (x.trace[i].estimate.weights() != y.trace[i].estimate.weights()) return false;
    }
  }
  return true;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("total variation") {
  const Distribution p((Vector(2) << 0.5, 0.5).finished());
  const Distribution q((Vector(2) << 0.75, 0.25).finished());
  CHECK(tv_distance(p, p) == 0.0);
  CHECK(tv_distance(Distribution::point_mass(2, 1), Distribution::point_mass(2, 2)) == 1.0);
  CHECK(tv_distance(p, q) == doctest::Approx(0.25));
  CHECK_THROWS_AS(tv_distance(p, Distribution::uniform(3)), Error);
}

TEST_CASE("replications are ordered and independent of the worker count") {
  const auto chain = AbsorbingChain::validate(paper_ten_state());
  auto cfg = interacting_config(100, 6, 5);
  cfg.trace_stride = 10;
  const auto one = replicate(chain, cfg, 13, 99, 1);
  const auto again = replicate(chain, cfg, 13, 99, 1);
  const auto eight = replicate(chain, cfg, 13, 99, 8);
  CHECK(identical(one, again));
  CHECK(identical(one, eight));
  for (std::int64_t r = 0; r < 13; ++r) CHECK(one.seeds[static_cast<std::size_t>(r)] == derive_seed(99, static_cast<std::uint64_t>(r)));

  const auto single = replicate(chain, cfg, 1, 99, 1);
  SchemeConfig direct = cfg;
  direct.seed = derive_seed(99, 0);
  CHECK(run_scheme(chain, direct).estimate.weights() == single.results.front().estimate.weights());
}

TEST_CASE("single-particle starts are spread proportionately over the pool") {
  const auto chain = AbsorbingChain::validate(paper_ten_state());
  SchemeConfig cfg;
  cfg.scheme = Scheme::single;
  cfg.horizon_n = 5;
  cfg.growth = GrowthSchedule::constant(2);
  cfg.steps = StepSchedule(4.17);
  cfg.initial_states = {4};
  const std::vector<int> pool{6, 4, 4, 5, 4, 6};
  const auto reps = replicate(chain, cfg, 60, 1, 1, pool);
  CHECK(std::count(reps.starts.begin(), reps.starts.end(), 4) == 30);
  CHECK(std::count(reps.starts.begin(), reps.starts.end(), 5) == 10);
  CHECK(std::count(reps.starts.begin(), reps.starts.end(), 6) == 20);
}

TEST_CASE("trace aggregation") {
  const auto chain = AbsorbingChain::validate(paper_three_state());
  const Distribution theta = exact_qsd(chain).theta_star;
  auto cfg = interacting_config(20, 3, 1);
  cfg.trace_stride = 5;
  const auto reps = replicate(chain, cfg, 1, 4, 1);
  const auto trace = aggregate_trace(reps, theta);
  REQUIRE(trace.points.size() == reps.results.front().trace.size());
  for (std::size_t i = 0; i < trace.points.size(); ++i) {
    const double tv = tv_distance(reps.results.front().trace[i].estimate, theta);
    CHECK(trace.points[i].mean_tv == tv);
    CHECK(trace.points[i].median_tv == tv);
  }

  const auto one = AbsorbingChain::validate(testing::one_state());
  const auto flat = aggregate_trace(replicate(one, interacting_config(20, 3, 1), 4, 4, 1), Distribution::uniform(1));
  for (const auto& p : flat.points) CHECK(p.mean_tv == 0.0);

  ReplicationSet mixed = replicate(chain, cfg, 2, 4, 1);
  mixed.results[1].trace.pop_back();
  try {
    aggregate_trace(mixed, theta);
    FAIL("accepted mismatched grids");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::GridMismatch);
  }
}

TEST_CASE("grid aggregation takes the latest snapshot") {
  const auto chain = AbsorbingChain::validate(paper_three_state());
  const Distribution theta = exact_qsd(chain).theta_star;
  auto cfg = interacting_config(20, 3, 1);
  cfg.trace_stride = 2;
  const auto reps = replicate(chain, cfg, 3, 4, 1);
  const std::vector<std::int64_t> grid{0, 7, 12, 60};
  const auto trace = aggregate_on_grid(reps, theta, grid);
  REQUIRE(trace.points.size() == 4);
  // Snapshots sit at 0, 6, 12, ...; 7 movements resolves to the one at 6.
  std::vector<double> tvs;
  for (const auto& run : reps.results) tvs.push_back(tv_distance(run.trace[1].estimate, theta));
  CHECK(trace.points[1].mean_tv == doctest::Approx((tvs[0] + tvs[1] + tvs[2]) / 3.0));
  std::sort(tvs.begin(), tvs.end());
  CHECK(trace.points[1].median_tv == tvs[1]);
  CHECK(trace.points[3].moves == 60);
}

TEST_CASE("CLT report bookkeeping") {
  const auto chain = AbsorbingChain::validate(paper_three_state());
  auto cfg = interacting_config(200, 4, 1);
  const auto reps = replicate(chain, cfg, 20, 3, 1);
  const auto report = clt_report(chain, reps, AlgI{});
  CHECK(report.sigma_n == std::sqrt(4.0 / StepSchedule(3.0).gamma(200)));
  CHECK(report.steps == 200);
  CHECK(report.variant == "algI");
  CHECK_FALSE(report.degenerate);
  CHECK(report.lyapunov_residual <= 1e-10);

  ReplicationSet same = reps;
  for (auto& r : same.results) r = reps.results.front();
  const auto flat = clt_report(chain, same, AlgI{});
  CHECK(flat.degenerate);
  CHECK(flat.empirical_cov.norm() == 0.0);

  const auto one = AbsorbingChain::validate(testing::one_state());
  const auto trivial = clt_report(one, replicate(one, interacting_config(50, 2, 1), 5, 1, 1), AlgI{});
  CHECK(trivial.scaled_mean.norm() == 0.0);
  CHECK(trivial.theoretical_V.norm() == 0.0);
}

TEST_CASE("CLT scaling for the branching variants") {
  const auto g = GrowthSchedule::power(0.3);
  const StepSchedule s(3.0);
  CHECK(clt_scaling(g, s, 500, AlgII{0.3}) == std::sqrt(static_cast<double>(a_of(g, 500)) / s.gamma(500)));
  double inv = 0.0;
  for (std::int64_t k = 1; k <= 500; ++k) inv += 1.0 / static_cast<double>(a_of(g, k));
  CHECK(clt_scaling(g, s, 500, AlgIIBeta{0.3}) == doctest::Approx(1.0 / std::sqrt(s.gamma(500) * inv / 500.0)));
}

TEST_CASE("iid demo with a rank-one kernel has no drift") {
  const Matrix k0 = (Matrix(2, 2) << 0.3, 0.7, 0.3, 0.7).finished();
  const auto lin = iid_clt_demo(k0, 1, LinearGrowth{1.0}, 60, 200, 5, 1);
  CHECK(lin.linear);
  CHECK(lin.target.norm() <= 1e-14);
  CHECK(lin.max_abs_z <= 3.5);
  const auto sub = iid_clt_demo(k0, 1, GrowthSchedule::constant(1), 400, 400, 5, 1);
  CHECK(sub.scaled_mean.norm() <= 3.0 * sub.standard_error.norm());
}

TEST_CASE("comparison budgets and outputs") {
  auto setup = experiment_two_setup(1, 3, 1);
  CHECK(setup.growth.a(setup.n) == 44);
  const auto result = run_comparison(setup);
  CHECK(result.grid.size() == 2001);
  CHECK(result.grid.back() == 88000);
  for (const auto& s : result.schemes) {
    CHECK(s.trace.points.size() == result.grid.size());
    if (s.scheme != Scheme::branching) CHECK(s.moves_used == 88000);
  }
  CHECK(experiment_one_setup().growth.a(1000) == 177);
  for (int s : experiment_one_setup().initial_states) CHECK((s >= 4 && s <= 6));

  const auto dir = std::filesystem::temp_directory_path() / "qsd_unit_compare";
  std::filesystem::remove_all(dir);
  const auto written = write_comparison(result, dir);
  CHECK(written.size() == 6);
  const std::string csv = slurp(dir / "interacting.csv");
  CHECK(csv.rfind("moves,mean_tv,median_tv\n0,", 0) == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary.at("interacting").at("moves_used") == 88000);
  CHECK(summary.at("single").contains("final_median_tv"));
}

TEST_CASE("uniform initial-state draw") {
  const std::vector<int> pool{4, 5, 6};
  const auto a = draw_initial_states(pool, 177, 1);
  CHECK(a == draw_initial_states(pool, 177, 1));
  CHECK(a != draw_initial_states(pool, 177, 2));
  const std::set<int> seen(a.begin(), a.end());
  CHECK(seen == std::set<int>{4, 5, 6});
  CHECK_THROWS_AS(draw_initial_states(std::vector<int>{}, 3, 1), Error);
}

TEST_CASE("csv doubles round-trip") {
  ConvergenceTrace t;
  t.points.push_back({5, 0.1, 1.0 / 3.0});
  const std::string csv = trace_csv(t);
  const auto comma = csv.rfind(',');
  CHECK(std::stod(csv.substr(comma + 1)) == 1.0 / 3.0);
}

}

TEST_SUITE("analysis") {

TEST_CASE("interacting scheme on the ten-state chain") {
  auto setup = experiment_one_setup(50, 11, 1);
  setup.schemes = {Scheme::interacting};
  const auto result = run_comparison(setup);
  const auto& trace = result.schemes.front().trace.points;
  CHECK(result.schemes.front().final_median_tv < 0.05);
  // Mean TV trends down: compare quarters of the run.
  const std::size_t q = trace.size() / 4;
  CHECK(trace[0].mean_tv > trace[q].mean_tv);
  CHECK(trace[q].mean_tv > trace[2 * q].mean_tv);
  CHECK(trace[2 * q].mean_tv > trace.back().mean_tv);
}

}
