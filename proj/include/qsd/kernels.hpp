#pragma once

#include "qsd/rng.hpp"

#include <cstdint>
#include <span>
#include <string_view>

namespace qsd::kernels {

enum class Backend { scalar, avx2 };

std::string_view to_string(Backend b);

/// True when the AVX2 variant was compiled in and the CPU reports AVX2.
bool avx2_available();

/// Backend used by the simulation engines. Defaults to the widest available
/// variant; QSD_FORCE_SCALAR=1 in the environment pins the scalar reference.
Backend active_backend();

/// Overrides the active backend (throws ConfigError if unavailable). Intended for tests.
void set_active_backend(Backend b);

/// out[i] = philox_uniform(key, first_lane + i, purpose, step).
void fill_uniforms(Backend b, PhiloxKey key, std::uint64_t step, std::uint32_t purpose,
                   std::uint32_t first_lane, std::span<double> out);

/// Inverse-CDF moves: rows[i] <- smallest column j with cdf[rows[i]*d + j] > u[i],
/// taking the last column as 1. cdf is row-major with rows of width d; the
/// caller picks the row per entry (the current state for a shared kernel,
/// the entry index for per-particle rows). Everything is 0-based.
void sample_rows(Backend b, std::span<const double> cdf, int d, std::span<const double> u,
                 std::span<std::int32_t> rows);

/// fill_uniforms followed by sample_rows, with the draw for rows[i] at lane first_lane + i.
/// scratch must hold at least rows.size() doubles.
void advance(Backend b, std::span<const double> cdf, int d, PhiloxKey key, std::uint64_t step,
             std::uint32_t purpose, std::uint32_t first_lane, std::span<std::int32_t> rows,
             std::span<double> scratch);

namespace scalar {
void fill_uniforms(PhiloxKey key, std::uint64_t step, std::uint32_t purpose, std::uint32_t first_lane,
                   std::span<double> out);
void sample_rows(std::span<const double> cdf, int d, std::span<const double> u,
                 std::span<std::int32_t> rows);
}  // namespace scalar

namespace avx2 {
void fill_uniforms(PhiloxKey key, std::uint64_t step, std::uint32_t purpose, std::uint32_t first_lane,
                   std::span<double> out);
void sample_rows(std::span<const double> cdf, int d, std::span<const double> u,
                 std::span<std::int32_t> rows);
}  // namespace avx2

}  // namespace qsd::kernels
