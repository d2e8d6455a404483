#include "qsd/schedule.hpp"

#include "qsd/error.hpp"

#include <algorithm>
#include <cmath>

namespace qsd {

StepSchedule::StepSchedule(double gamma_star) : gamma_star_(gamma_star) {
  if (!(gamma_star > 0.0) || !std::isfinite(gamma_star)) {
    throw Error(Errc::ConfigError, "gamma_star must be a positive finite number");
  }
  n_star_ = static_cast<std::int64_t>(std::floor(gamma_star)) + 1;
}

GrowthSchedule GrowthSchedule::constant(std::int64_t a) {
  if (a < 1) throw Error(Errc::ConfigError, "constant particle count must be >= 1");
  return GrowthSchedule(Kind::constant, a, 0.0);
}

GrowthSchedule GrowthSchedule::power(double zeta) {
  if (!(zeta > 0.0 && zeta < 1.0)) throw Error(Errc::ConfigError, "power growth exponent must lie in (0,1)");
  return GrowthSchedule(Kind::power, 0, zeta);
}

std::int64_t GrowthSchedule::a(std::int64_t m) const {
  if (kind_ == Kind::constant) return count_;
  if (m <= 1) return 1;
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(std::pow(static_cast<double>(m), zeta_))));
}

std::int64_t b_of(const GrowthSchedule& growth, std::int64_t j) {
  if (growth.kind() != GrowthSchedule::Kind::power) {
    throw Error(Errc::ConfigError, "b_of requires a power growth schedule");
  }
  if (j < 1) throw Error(Errc::ConfigError, "b_of requires j >= 1");
  if (j == 1) return 0;
  // Start near j^(1/zeta) and walk to the first m with a(m) = j.
  auto m = static_cast<std::int64_t>(std::ceil(std::pow(static_cast<double>(j), 1.0 / growth.zeta())));
  while (m > 1 && growth.a(m - 1) >= j) --m;
  while (growth.a(m) < j) ++m;
  return m;
}

std::int64_t xi_budget(const GrowthSchedule& growth, std::int64_t n) {
  if (growth.kind() != GrowthSchedule::Kind::power) {
    throw Error(Errc::ConfigError, "xi_budget requires a power growth schedule");
  }
  if (n < 1) throw Error(Errc::ConfigError, "xi_budget requires n >= 1");
  const std::int64_t target = n * growth.a(n);
  std::int64_t total = 0;
  std::int64_t k = 0;
  while (total < target) {
    ++k;
    total += growth.a(k + 1);
  }
  return k;
}

}  // namespace qsd
