#include "qsd/lyapunov.hpp"

#include "qsd/error.hpp"

#include <Eigen/Eigenvalues>

#include <complex>
#include <sstream>

namespace qsd {

Matrix lyapunov_solve(const Matrix& u, const Matrix& a, double c) {
  const auto n = a.rows();
  if (a.cols() != n || u.rows() != n || u.cols() != n) {
    throw Error(Errc::DimensionMismatch, "lyapunov_solve: U and A must be square of equal size");
  }
  if (n == 0) return Matrix(0, 0);

  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  using CVector = Eigen::VectorXcd;

  Eigen::ComplexSchur<Matrix> schur(a);
  const CMatrix& t = schur.matrixT();
  const CMatrix& z = schur.matrixU();

  double max_re = t(0, 0).real();
  for (Eigen::Index i = 1; i < n; ++i) max_re = std::max(max_re, t(i, i).real());
  if (!(max_re + 0.5 * c < 0.0)) {
    std::ostringstream os;
    os << "A + (c/2) I is not Hurwitz: max real part " << max_re + 0.5 * c;
    throw Error(Errc::NotStable, os.str());
  }

  // With A = Z T Z^H and Y = Z^H V Z: T Y + Y T^H + c Y = -Z^H U Z.
  // T^H is lower triangular, so columns of Y resolve from the last one back.
  const CMatrix rhs = -(z.adjoint() * u.cast<Complex>() * z);
  CMatrix y = CMatrix::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    CVector b = rhs.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) b -= std::conj(t(j, k)) * y.col(k);
    CMatrix shifted = t;
    shifted.diagonal().array() += std::conj(t(j, j)) + c;
    y.col(j) = shifted.triangularView<Eigen::Upper>().solve(b);
  }
  return (z * y * z.adjoint()).real();
}

double lyapunov_residual(const Matrix& u, const Matrix& a, double c, const Matrix& v) {
  return (u + a * v + v * a.transpose() + c * v).norm();
}

}  // namespace qsd
