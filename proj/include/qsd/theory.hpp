#pragma once

#include "qsd/chain.hpp"

#include <variant>

namespace qsd {

struct QsdSolution {
  Distribution theta_star;
  double lambda = 0.0;
  double residual = 0.0;
  long iterations = 0;
};

/// Left Perron pair of the live block, normalized onto the simplex.
/// Throws NoConvergence if the residual does not reach tol within the budget.
QsdSolution exact_qsd(const AbsorbingChain& chain, double tol = 1e-12);

/// K[nu]_{x,y} = P_{x,y} + P_{x,0} nu(y): absorbed mass is redistributed by nu.
Matrix kernel_K(const AbsorbingChain& chain, const Distribution& nu);

/// Stationary distribution of a stochastic matrix via the normalized linear system.
/// Throws SingularSystem.
Distribution stationary(const Matrix& kernel);

Distribution invariant_pi(const AbsorbingChain& chain, const Distribution& nu);

TangentVector drift_h(const AbsorbingChain& chain, const Distribution& nu);

/// Centered solution of the Poisson equation for a stochastic kernel:
/// (I - K) Q = Q (I - K) = I - Pi, Pi Q = Q Pi = 0, where every row of Pi is pi.
Matrix centered_poisson(const Matrix& kernel, const Vector& pi);

Matrix poisson_Q(const AbsorbingChain& chain, const Distribution& nu);

enum class JacobianMode { analytic, finite_difference };

/// Jacobian of h on the simplex, as a d x d matrix acting on tangent vectors
/// and annihilating the all-ones direction. Both row and column sums vanish.
Matrix jacobian_h(const AbsorbingChain& chain, const Distribution& theta,
                  JacobianMode mode = JacobianMode::analytic, double fd_step = 1e-6);

/// Basis {e_1 - e_d, ..., e_{d-1} - e_d} of the tangent space, as a d x (d-1) matrix.
Matrix tangent_basis(int d);

/// Expresses a d x d operator that preserves the tangent space in tangent coordinates.
Matrix restrict_to_tangent(const Matrix& m);

/// Orthogonal projector onto the tangent space.
Matrix tangent_projector(int d);

struct Stability {
  double L = 0.0;               // +inf for d = 1
  double gamma_star_min = 0.0;  // 1/L, 0 for d = 1
};

/// Throws NotHurwitz when the tangent Jacobian at the QSD has an eigenvalue with real part >= 0.
Stability stability_L(const AbsorbingChain& chain);

/// Conditional covariance of the one-step Poisson noise started from z (1-based).
Matrix noise_F(const AbsorbingChain& chain, const Distribution& theta, int z);

/// Same quantity for an explicit kernel/Poisson pair; z is 0-based.
Matrix noise_F(const Matrix& kernel, const Matrix& q, int z);

Matrix u_star(const AbsorbingChain& chain);

struct AlgI {};
struct AlgII {
  double zeta = 0.0;
};
struct AlgIIBeta {
  double zeta = 0.0;
};
using CltVariant = std::variant<AlgI, AlgII, AlgIIBeta>;

struct CltTheory {
  Distribution theta_star;
  Matrix grad_h;
  double L = 0.0;
  double gamma_star_min = 0.0;
  Matrix U_star;
  Matrix V;
  double source_scale = 1.0;  // multiplier on U_star in the Lyapunov source term
  double coefficient = 0.0;   // multiplier on V
  double residual = 0.0;      // Frobenius residual of the Lyapunov equation
};

/// Limiting covariance of the scaled estimation error.
/// Throws BelowThreshold when gamma_star <= 1/L unless enforce_threshold is
/// false; the Lyapunov solve still throws NotStable if it has no stable solution.
CltTheory clt_covariance(const AbsorbingChain& chain, double gamma_star, const CltVariant& variant,
                         bool enforce_threshold = true);

/// Asymptotic mean of the scaled iid occupation statistic when a(n) ~ a_star n.
Vector iid_alpha_star(const Matrix& k0, int x0, double a_star);

}  // namespace qsd
