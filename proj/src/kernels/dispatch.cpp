#include "qsd/kernels.hpp"

#include "qsd/error.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace qsd::kernels {

namespace {

Backend detect() {
  if (const char* env = std::getenv("QSD_FORCE_SCALAR"); env && std::strcmp(env, "0") != 0) {
    return Backend::scalar;
  }
  return avx2_available() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& active() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

std::string_view to_string(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

bool avx2_available() {
#if defined(QSD_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() { return active().load(std::memory_order_relaxed); }

void set_active_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_available()) throw Error(Errc::ConfigError, "AVX2 backend unavailable");
  active().store(b, std::memory_order_relaxed);
}

void fill_uniforms(Backend b, PhiloxKey key, std::uint64_t step, std::uint32_t purpose,
                   std::uint32_t first_lane, std::span<double> out) {
#if defined(QSD_HAVE_AVX2)
  if (b == Backend::avx2) return avx2::fill_uniforms(key, step, purpose, first_lane, out);
#endif
  (void)b;
  scalar::fill_uniforms(key, step, purpose, first_lane, out);
}

void sample_rows(Backend b, std::span<const double> cdf, int d, std::span<const double> u,
                 std::span<std::int32_t> states) {
#if defined(QSD_HAVE_AVX2)
  if (b == Backend::avx2) return avx2::sample_rows(cdf, d, u, states);
#endif
  (void)b;
  scalar::sample_rows(cdf, d, u, states);
}

void advance(Backend b, std::span<const double> cdf, int d, PhiloxKey key, std::uint64_t step,
             std::uint32_t purpose, std::uint32_t first_lane, std::span<std::int32_t> states,
             std::span<double> scratch) {
  auto u = scratch.first(states.size());
  fill_uniforms(b, key, step, purpose, first_lane, u);
  sample_rows(b, cdf, d, u, states);
}

}  // namespace qsd::kernels
