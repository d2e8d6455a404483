#pragma once

#include <cstdint>

namespace qsd {

/// gamma_{k+1} = gamma_star / (k + N_star), N_star = floor(gamma_star) + 1.
class StepSchedule {
 public:
  explicit StepSchedule(double gamma_star);

  double gamma_star() const { return gamma_star_; }
  std::int64_t n_star() const { return n_star_; }

  /// Step size gamma_k for k >= 1.
  double gamma(std::int64_t k) const {
    return gamma_star_ / static_cast<double>(k - 1 + n_star_);
  }

 private:
  double gamma_star_;
  std::int64_t n_star_;
};

/// Particle-count law: a constant population or a(m) = max(1, floor(m^zeta)).
class GrowthSchedule {
 public:
  enum class Kind { constant, power };

  static GrowthSchedule constant(std::int64_t a);
  static GrowthSchedule power(double zeta);

  Kind kind() const { return kind_; }
  std::int64_t constant_count() const { return count_; }
  double zeta() const { return zeta_; }

  std::int64_t a(std::int64_t m) const;

 private:
  GrowthSchedule(Kind kind, std::int64_t count, double zeta) : kind_(kind), count_(count), zeta_(zeta) {}

  Kind kind_;
  std::int64_t count_;
  double zeta_;
};

inline double gamma(const StepSchedule& steps, std::int64_t k) { return steps.gamma(k); }
inline std::int64_t a_of(const GrowthSchedule& growth, std::int64_t m) { return growth.a(m); }

/// Time at which the j-th particle appears: b(1) = 0, and for j >= 2 the
/// first m with a(m) = j. Power schedules only.
std::int64_t b_of(const GrowthSchedule& growth, std::int64_t j);

/// Minimal k with sum_{i=1}^k a(i+1) >= n a(n). Power schedules only.
std::int64_t xi_budget(const GrowthSchedule& growth, std::int64_t n);

}  // namespace qsd
