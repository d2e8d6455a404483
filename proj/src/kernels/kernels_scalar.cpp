#include "qsd/kernels.hpp"

namespace qsd::kernels::scalar {

void fill_uniforms(PhiloxKey key, std::uint64_t step, std::uint32_t purpose, std::uint32_t first_lane,
                   std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = philox_uniform(key, first_lane + static_cast<std::uint32_t>(i), purpose, step);
  }
}

void sample_rows(std::span<const double> cdf, int d, std::span<const double> u,
                 std::span<std::int32_t> states) {
  for (std::size_t i = 0; i < states.size(); ++i) {
    const double* row = cdf.data() + static_cast<std::ptrdiff_t>(states[i]) * d;
    std::int32_t j = 0;
    for (int k = 0; k < d - 1; ++k) j += row[k] <= u[i] ? 1 : 0;
    states[i] = j;
  }
}

}  // namespace qsd::kernels::scalar
