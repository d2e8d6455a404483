#include "qsd/theory.hpp"

#include "qsd/error.hpp"
#include "qsd/lyapunov.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace qsd {

namespace {

constexpr long kPowerIterationCap = 1'000'000;

Matrix kernel_from(const AbsorbingChain& chain, const Vector& nu) {
  return chain.live() + chain.absorption() * nu.transpose();
}

// Solves pi (K - I) = 0, sum(pi) = 1 without projecting back onto the simplex,
// so it is also usable at points of the affine hull.
Vector stationary_raw(const Matrix& kernel) {
  const auto d = kernel.rows();
  if (d == 1) return Vector::Ones(1);
  Matrix a = kernel.transpose() - Matrix::Identity(d, d);
  a.row(d - 1).setOnes();
  Vector b = Vector::Zero(d);
  b[d - 1] = 1.0;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw Error(Errc::SingularSystem, "stationarity system is singular");
  return lu.solve(b);
}

Vector drift_raw(const AbsorbingChain& chain, const Vector& nu) {
  return stationary_raw(kernel_from(chain, nu)) - nu;
}

Matrix pseudo_inverse_basis(int d) {
  const Matrix b = tangent_basis(d);
  return (b.transpose() * b).inverse() * b.transpose();
}

}  // namespace

QsdSolution exact_qsd(const AbsorbingChain& chain, double tol) {
  if (!(tol > 0.0)) throw Error(Errc::ConfigError, "exact_qsd tolerance must be positive");
  const Matrix& live = chain.live();
  const int d = chain.d();
  if (d == 1) return QsdSolution{Distribution(Vector::Ones(1)), live(0, 0), 0.0, 0};

  // Seed with the dense eigensolver's Perron vector, then polish by power
  // iteration on (P° + lambda I), which is primitive even when P° is periodic.
  Vector theta;
  {
    Eigen::EigenSolver<Matrix> es(live.transpose());
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i) {
      if (es.eigenvalues()[i].real() > es.eigenvalues()[best].real()) best = i;
    }
    theta = es.eigenvectors().col(best).real().cwiseAbs();
    if (!(theta.sum() > 0.0) || !theta.allFinite()) theta = Vector::Constant(d, 1.0 / d);
    theta /= theta.sum();
  }

  double lambda = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  long it = 0;
  for (;; ++it) {
    const Vector next = live.transpose() * theta;
    lambda = next.sum();
    residual = (next - lambda * theta).lpNorm<Eigen::Infinity>();
    if (residual <= tol) break;
    if (it >= kPowerIterationCap) {
      std::ostringstream os;
      os << "power iteration stalled at residual " << residual << " after " << it << " iterations";
      throw Error(Errc::NoConvergence, os.str());
    }
    theta = next + lambda * theta;
    theta /= theta.sum();
  }
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw Error(Errc::NoConvergence, "Perron eigenvalue outside (0,1)");
  }
  return QsdSolution{Distribution(theta), lambda, residual, it};
}

Matrix kernel_K(const AbsorbingChain& chain, const Distribution& nu) {
  if (nu.d() != chain.d()) throw Error(Errc::DimensionMismatch, "distribution dimension differs from chain");
  return kernel_from(chain, nu.weights());
}

Distribution stationary(const Matrix& kernel) {
  Vector pi = stationary_raw(kernel);
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    if (pi[i] < 0.0) {
      if (pi[i] < -1e-10) throw Error(Errc::SingularSystem, "stationary solve produced a negative mass");
      pi[i] = 0.0;
    }
  }
  pi /= pi.sum();
  return Distribution(std::move(pi));
}

Distribution invariant_pi(const AbsorbingChain& chain, const Distribution& nu) {
  return stationary(kernel_K(chain, nu));
}

TangentVector drift_h(const AbsorbingChain& chain, const Distribution& nu) {
  Vector h = invariant_pi(chain, nu).weights() - nu.weights();
  h.array() -= h.sum() / static_cast<double>(h.size());
  return TangentVector(std::move(h));
}

Matrix centered_poisson(const Matrix& kernel, const Vector& pi) {
  const auto d = kernel.rows();
  const Matrix pi_rows = Vector::Ones(d) * pi.transpose();
  Eigen::FullPivLU<Matrix> lu(Matrix::Identity(d, d) - kernel + pi_rows);
  if (!lu.isInvertible()) throw Error(Errc::SingularSystem, "fundamental matrix is singular");
  return lu.inverse() - pi_rows;
}

Matrix poisson_Q(const AbsorbingChain& chain, const Distribution& nu) {
  const Matrix k = kernel_K(chain, nu);
  return centered_poisson(k, stationary(k).weights());
}

Matrix tangent_basis(int d) {
  Matrix b = Matrix::Zero(d, d - 1);
  for (int j = 0; j < d - 1; ++j) {
    b(j, j) = 1.0;
    b(d - 1, j) = -1.0;
  }
  return b;
}

Matrix tangent_projector(int d) {
  return Matrix::Identity(d, d) - Matrix::Constant(d, d, 1.0 / d);
}

Matrix restrict_to_tangent(const Matrix& m) {
  const int d = static_cast<int>(m.rows());
  return pseudo_inverse_basis(d) * m * tangent_basis(d);
}

Matrix jacobian_h(const AbsorbingChain& chain, const Distribution& theta, JacobianMode mode,
                  double fd_step) {
  const int d = chain.d();
  if (theta.d() != d) throw Error(Errc::DimensionMismatch, "distribution dimension differs from chain");
  if (d == 1) return Matrix::Zero(1, 1);

  if (mode == JacobianMode::analytic) {
    // Differentiating pi K[nu] = pi along a tangent v gives
    // dpi (I - K) = (pi . p0) v^T, solved by dpi = (pi . p0) v^T Q.
    const Matrix k = kernel_K(chain, theta);
    const Vector pi = stationary(k).weights();
    const Matrix q = centered_poisson(k, pi);
    const double outflow = pi.dot(chain.absorption());
    return (outflow * q.transpose() - Matrix::Identity(d, d)) * tangent_projector(d);
  }

  if (!(fd_step > 0.0)) throw Error(Errc::ConfigError, "finite-difference step must be positive");
  const Matrix basis = tangent_basis(d);
  Matrix directional(d, d - 1);
  for (int j = 0; j < d - 1; ++j) {
    const Vector step = fd_step * basis.col(j);
    directional.col(j) = (drift_raw(chain, theta.weights() + step) -
                          drift_raw(chain, theta.weights() - step)) / (2.0 * fd_step);
  }
  return directional * pseudo_inverse_basis(d);
}

Stability stability_L(const AbsorbingChain& chain) {
  const int d = chain.d();
  if (d == 1) return Stability{std::numeric_limits<double>::infinity(), 0.0};
  const Distribution theta = exact_qsd(chain).theta_star;
  const Matrix jt = restrict_to_tangent(jacobian_h(chain, theta));
  const double max_re = jt.eigenvalues().real().maxCoeff();
  const double L = -max_re;
  if (!(L > 0.0)) {
    std::ostringstream os;
    os << "Jacobian at the QSD is not Hurwitz on the tangent space (max real part " << max_re << ")";
    throw Error(Errc::NotHurwitz, os.str());
  }
  return Stability{L, 1.0 / L};
}

Matrix noise_F(const Matrix& kernel, const Matrix& q, int z) {
  const Matrix kq = kernel * q;
  const Vector kz = kernel.row(z).transpose();
  const Vector drift = kq.row(z).transpose();
  return q.transpose() * kz.asDiagonal() * q - drift * drift.transpose();
}

Matrix noise_F(const AbsorbingChain& chain, const Distribution& theta, int z) {
  if (z < 1 || z > chain.d()) throw Error(Errc::ConfigError, "state index out of range 1..d");
  const Matrix k = kernel_K(chain, theta);
  const Matrix q = centered_poisson(k, stationary(k).weights());
  Matrix f = noise_F(k, q, z - 1);
  return 0.5 * (f + f.transpose());
}

Matrix u_star(const AbsorbingChain& chain) {
  const int d = chain.d();
  const Distribution theta = exact_qsd(chain).theta_star;
  const Matrix k = kernel_K(chain, theta);
  const Matrix q = centered_poisson(k, stationary(k).weights());
  Matrix u = Matrix::Zero(d, d);
  for (int w = 0; w < d; ++w) u += theta[static_cast<std::size_t>(w)] * noise_F(k, q, w);
  return 0.5 * (u + u.transpose());
}

CltTheory clt_covariance(const AbsorbingChain& chain, double gamma_star, const CltVariant& variant,
                         bool enforce_threshold) {
  if (!(gamma_star > 0.0)) throw Error(Errc::ConfigError, "gamma_star must be positive");
  const int d = chain.d();
  const Stability stab = stability_L(chain);
  if (enforce_threshold && d > 1 && !(gamma_star > stab.gamma_star_min)) {
    std::ostringstream os;
    os.precision(17);
    os << "gamma_star = " << gamma_star << " does not exceed 1/L = " << stab.gamma_star_min;
    throw Error(Errc::BelowThreshold, os.str());
  }

  double scale = 1.0;
  double coefficient = 1.0 / gamma_star;
  auto check_zeta = [](double zeta) {
    if (!(zeta >= 0.0 && zeta < 1.0)) throw Error(Errc::ConfigError, "zeta must lie in [0, 1)");
  };
  if (const auto* v = std::get_if<AlgII>(&variant)) {
    check_zeta(v->zeta);
    coefficient = (1.0 + v->zeta) / gamma_star;
  } else if (const auto* v = std::get_if<AlgIIBeta>(&variant)) {
    check_zeta(v->zeta);
    scale = 1.0 - v->zeta;
    coefficient = (1.0 + v->zeta) / gamma_star;
  }

  const QsdSolution qsd = exact_qsd(chain);
  CltTheory out{qsd.theta_star, Matrix::Zero(d, d), stab.L, stab.gamma_star_min,
                Matrix::Zero(d, d), Matrix::Zero(d, d), scale, coefficient, 0.0};
  if (d == 1) return out;

  out.grad_h = jacobian_h(chain, qsd.theta_star);
  out.U_star = u_star(chain);

  // Both U_star and the solution live on the tangent space; solve there and lift.
  const Matrix basis = tangent_basis(d);
  const Matrix pinv = pseudo_inverse_basis(d);
  const Matrix source = scale * (pinv * out.U_star * pinv.transpose());
  const Matrix vt = lyapunov_solve(source, pinv * out.grad_h * basis, coefficient);
  Matrix v = basis * vt * basis.transpose();
  out.V = 0.5 * (v + v.transpose());
  out.residual = lyapunov_residual(scale * out.U_star, out.grad_h, coefficient, out.V);
  return out;
}

Vector iid_alpha_star(const Matrix& k0, int x0, double a_star) {
  if (k0.rows() != k0.cols() || k0.rows() < 1) throw Error(Errc::DimensionMismatch, "K0 must be square");
  if (x0 < 1 || x0 > k0.rows()) throw Error(Errc::ConfigError, "x0 out of range 1..d");
  if (!is_irreducible(k0)) throw Error(Errc::Reducible, "K0 is not irreducible");
  const Vector pi = stationary(k0).weights();
  const Matrix kq = k0 * centered_poisson(k0, pi);
  const Vector from_x0 = kq.row(x0 - 1).transpose();
  const Vector averaged = kq.transpose() * pi;
  return a_star * (from_x0 - averaged);
}

}  // namespace qsd
