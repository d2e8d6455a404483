#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace qsd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Finite Markov chain on {0, 1..d} with 0 absorbing and 1..d a single
/// irreducible class from which absorption is possible.
///
/// Only constructible through validate(); every instance satisfies the
/// standing assumptions, so downstream code never rechecks them.
class AbsorbingChain {
 public:
  /// Throws Error with NonStochasticRow, NotAbsorbing, Reducible or NoAbsorption.
  static AbsorbingChain validate(const Matrix& p);

  int d() const { return static_cast<int>(p_.rows()) - 1; }
  const Matrix& full() const { return p_; }
  /// The substochastic block over the live states 1..d.
  const Matrix& live() const { return live_; }
  /// Absorption probabilities P[x,0] for x = 1..d.
  const Vector& absorption() const { return absorption_; }

 private:
  AbsorbingChain(Matrix p);

  Matrix p_;
  Matrix live_;
  Vector absorption_;
};

/// Probability vector over the live states.
class Distribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  /// Throws ConfigError unless entries are >= 0 and sum to 1 within kSumTolerance.
  explicit Distribution(Vector weights);

  static Distribution point_mass(int d, int state);  // state is 1-based
  static Distribution uniform(int d);

  int d() const { return static_cast<int>(w_.size()); }
  const Vector& weights() const { return w_; }
  double operator[](std::size_t i) const { return w_[static_cast<Eigen::Index>(i)]; }

 private:
  Vector w_;
};

/// Vector in the tangent space of the simplex (components sum to zero).
class TangentVector {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit TangentVector(Vector components);

  const Vector& components() const { return c_; }

 private:
  Vector c_;
};

/// True when every live state reaches every other through the given
/// nonnegative matrix (reachability closure over nonzero entries).
bool is_irreducible(const Matrix& m);

}  // namespace qsd
