#pragma once

#include "qsd/chain.hpp"
#include "qsd/schedule.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace qsd {

enum class Scheme { single, independent, interacting, branching, fleming_viot };

std::string_view to_string(Scheme s);
/// Throws ConfigError on an unknown name.
Scheme scheme_from_string(std::string_view name);

struct SchemeConfig {
  Scheme scheme = Scheme::interacting;
  std::int64_t horizon_n = 1;
  GrowthSchedule growth = GrowthSchedule::constant(1);
  StepSchedule steps = StepSchedule(1.0);
  std::vector<int> initial_states;  // labels in 1..d
  std::uint64_t seed = 0;
  std::int64_t trace_stride = 1;    // snapshot every stride-th movement batch
};

/// a(horizon_n): population of the multi-particle schemes.
std::int64_t particle_count(const SchemeConfig& cfg);

/// Number of initial states the scheme expects.
std::int64_t expected_initial_states(const SchemeConfig& cfg);

/// Particle movements the scheme consumes: n a(n), or the branching partial sum up to xi(n).
std::int64_t movement_budget(const SchemeConfig& cfg);

/// Throws ConfigError naming the offending field.
void validate_config(const AbsorbingChain& chain, const SchemeConfig& cfg);

struct TracePoint {
  std::int64_t moves = 0;
  Distribution estimate;
};

struct RunResult {
  Distribution estimate;
  std::int64_t moves_used = 0;
  std::int64_t steps = 0;  // recursion steps taken (the index of the final estimate)
  std::vector<TracePoint> trace;
};

/// Smallest 1-based index j with cumulative sum of row through j exceeding u;
/// the final cumulative sum is taken as 1.
int sample_row(std::span<const double> row, double u);

RunResult run_single(const AbsorbingChain& chain, const SchemeConfig& cfg);
RunResult run_independent(const AbsorbingChain& chain, const SchemeConfig& cfg);
RunResult run_interacting(const AbsorbingChain& chain, const SchemeConfig& cfg);
RunResult run_branching(const AbsorbingChain& chain, const SchemeConfig& cfg);
RunResult run_fleming_viot(const AbsorbingChain& chain, const SchemeConfig& cfg);

/// Dispatches on cfg.scheme.
RunResult run_scheme(const AbsorbingChain& chain, const SchemeConfig& cfg);

/// One reinforced single-particle recursion driven by draw lane `lane`, for
/// `steps` steps from `start`. Copy i of the independent scheme is exactly
/// run_single_stream(..., lane = i, steps = n).
RunResult run_single_stream(const AbsorbingChain& chain, const SchemeConfig& cfg, int start,
                            std::uint32_t lane, std::int64_t steps);

}  // namespace qsd
