#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "msk/errors.hpp"

namespace msk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Matrix sym(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Largest |eigenvalue| over the full (possibly complex) spectrum.
inline double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("spectral_radius needs a square matrix");
  if (a.rows() == 1) return std::abs(a(0, 0));
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw EigenFailure("eigenvalue iteration failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Largest real part over the spectrum.
inline double spectral_abscissa(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("spectral_abscissa needs a square matrix");
  if (a.rows() == 1) return a(0, 0);
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw EigenFailure("eigenvalue iteration failed");
  return es.eigenvalues().real().maxCoeff();
}

/// All eigenvalues of a symmetric matrix, ascending.
inline Vector symmetric_eigenvalues(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw EigenFailure("self-adjoint eigensolver failed");
  return es.eigenvalues();
}

inline double sup_norm(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }
inline double sup_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace msk
