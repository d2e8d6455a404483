#pragma once

#include "qsd/chain.hpp"

namespace qsd {

/// Solves U + A V + V A^T + c V = 0 for V.
///
/// Bartels-Stewart on the complex Schur form of A. The operator is
/// required to be stable: every eigenvalue of A + (c/2) I must have a
/// negative real part, otherwise NotStable is thrown.
Matrix lyapunov_solve(const Matrix& u, const Matrix& a, double c);

/// Frobenius norm of U + A V + V A^T + c V.
double lyapunov_residual(const Matrix& u, const Matrix& a, double c, const Matrix& v);

}  // namespace qsd
