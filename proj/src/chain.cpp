#include "qsd/chain.hpp"

#include "qsd/error.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace qsd {

namespace {

constexpr double kRowTolerance = 1e-9;

}  // namespace

bool is_irreducible(const Matrix& m) {
  const auto n = m.rows();
  if (n == 0) return false;
  // Strong connectivity: everything reachable from node 0 forward and backward.
  auto reach_all = [&](bool forward) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    Eigen::Index count = 1;
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      for (Eigen::Index y = 0; y < n; ++y) {
        const double w = forward ? m(x, y) : m(y, x);
        if (w > 0.0 && !seen[static_cast<std::size_t>(y)]) {
          seen[static_cast<std::size_t>(y)] = 1;
          ++count;
          stack.push_back(y);
        }
      }
    }
    return count == n;
  };
  return reach_all(true) && reach_all(false);
}

AbsorbingChain::AbsorbingChain(Matrix p) : p_(std::move(p)) {
  const int n = d();
  live_ = p_.bottomRightCorner(n, n);
  absorption_ = p_.col(0).tail(n);
}

AbsorbingChain AbsorbingChain::validate(const Matrix& p) {
  if (p.rows() != p.cols() || p.rows() < 2) {
    std::ostringstream os;
    os << "transition matrix must be square of size d+1 >= 2, got " << p.rows() << "x" << p.cols();
    throw Error(Errc::ParseError, os.str());
  }
  for (Eigen::Index x = 0; x < p.rows(); ++x) {
    for (Eigen::Index y = 0; y < p.cols(); ++y) {
      if (!(p(x, y) >= 0.0) || !std::isfinite(p(x, y))) {
        std::ostringstream os;
        os << "row " << x << ": entry " << y << " is negative or not finite (" << p(x, y) << ")";
        throw Error(Errc::NonStochasticRow, os.str());
      }
    }
    const double sum = p.row(x).sum();
    if (std::abs(sum - 1.0) > kRowTolerance) {
      std::ostringstream os;
      os.precision(17);
      os << "row " << x << " sums to " << sum << ", expected 1";
      throw Error(Errc::NonStochasticRow, os.str());
    }
  }
  if (p(0, 0) != 1.0) {
    throw Error(Errc::NotAbsorbing, "state 0 is not absorbing: P[0,0] != 1");
  }
  const auto n = p.rows() - 1;
  if (!is_irreducible(p.bottomRightCorner(n, n))) {
    throw Error(Errc::Reducible, "live states 1..d do not form a single irreducible class");
  }
  if (!(p.col(0).tail(n).maxCoeff() > 0.0)) {
    throw Error(Errc::NoAbsorption, "no live state can reach the absorbing state in one step");
  }
  // Row sums are only checked to 1e-9 on input; renormalize so downstream
  // kernels are stochastic to machine precision.
  Matrix q = p;
  for (Eigen::Index x = 0; x < q.rows(); ++x) q.row(x) /= q.row(x).sum();
  return AbsorbingChain(std::move(q));
}

Distribution::Distribution(Vector weights) : w_(std::move(weights)) {
  if (w_.size() < 1) throw Error(Errc::ConfigError, "distribution must have at least one entry");
  for (Eigen::Index i = 0; i < w_.size(); ++i) {
    if (!(w_[i] >= 0.0)) {
      std::ostringstream os;
      os << "distribution entry " << i + 1 << " is negative (" << w_[i] << ")";
      throw Error(Errc::ConfigError, os.str());
    }
  }
  if (std::abs(w_.sum() - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "distribution sums to " << w_.sum();
    throw Error(Errc::ConfigError, os.str());
  }
}

Distribution Distribution::point_mass(int d, int state) {
  if (state < 1 || state > d) throw Error(Errc::ConfigError, "state index out of range 1..d");
  Vector w = Vector::Zero(d);
  w[state - 1] = 1.0;
  return Distribution(std::move(w));
}

Distribution Distribution::uniform(int d) { return Distribution(Vector::Constant(d, 1.0 / d)); }

TangentVector::TangentVector(Vector components) : c_(std::move(components)) {
  if (std::abs(c_.sum()) > kSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "tangent vector components sum to " << c_.sum();
    throw Error(Errc::ConfigError, os.str());
  }
}

}  // namespace qsd
