#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "msk/errors.hpp"
#include "msk/linalg.hpp"
#include "msk/model.hpp"
#include "msk/rs_solver.hpp"

namespace msk {

/// Coefficient bundles of the cavity linear system:
///   b_s(2) = beta^2 (1 - q_s^2)
///   b_s(1) = beta^2 q_s (1 - q_s)
///   b_s(0) = beta^2 (qhat_s - q_s^2)
/// with B(i) = diag(b(i)), Theta(i) = beta^{-2} B(i) Lambda^{-1} and
/// Bhat(i) = B(i) Delta^2 Lambda.
struct CavityCoefficients {
  Vector b0, b1, b2;            // diagonals of B(i)
  Vector theta0, theta1, theta2;  // diagonals of Theta(i)
  Matrix Bhat0, Bhat1, Bhat2;

  const Vector& b(int i) const { return i == 0 ? b0 : (i == 1 ? b1 : b2); }
  const Vector& theta(int i) const { return i == 0 ? theta0 : (i == 1 ? theta1 : theta2); }
  const Matrix& Bhat(int i) const { return i == 0 ? Bhat0 : (i == 1 ? Bhat1 : Bhat2); }
};

inline CavityCoefficients cavity_coefficients(const SpeciesStructure& s, const RsSolution& sol,
                                              double beta) {
  const double b2 = beta * beta;
  CavityCoefficients c;
  c.b2 = b2 * (1.0 - sol.q.array().square()).matrix();
  c.b1 = b2 * (sol.q.array() * (1.0 - sol.q.array())).matrix();
  c.b0 = b2 * (sol.qhat.array() - sol.q.array().square()).matrix();
  // Theta(i) = beta^{-2} B(i) Lambda^{-1}; the beta^2 cancels algebraically,
  // so the moment form below stays finite at beta = 0.
  const Vector inv_lambda = s.lambda.cwiseInverse();
  c.theta2 = ((1.0 - sol.q.array().square()) * inv_lambda.array()).matrix();
  c.theta1 = ((sol.q.array() * (1.0 - sol.q.array())) * inv_lambda.array()).matrix();
  c.theta0 = ((sol.qhat.array() - sol.q.array().square()) * inv_lambda.array()).matrix();
  const Matrix dl = s.delta2_lambda();
  c.Bhat2 = c.b2.asDiagonal() * dl;
  c.Bhat1 = c.b1.asDiagonal() * dl;
  c.Bhat0 = c.b0.asDiagonal() * dl;
  return c;
}

/// The constant 3x3 integer matrices of the cavity system (rows and columns
/// indexed by 0,1,2): C(k) pairwise commute, and V upper-triangularizes all
/// three simultaneously, T(k) = V C(k) V^{-1}. V has determinant 2, so its
/// inverse is exact in halves: V^{-1} = Vinv_num / 2.
struct ConstantMatrices {
  Eigen::Matrix3i C0, C1, C2;
  Eigen::Matrix3i V;
  Eigen::Matrix3i T0, T1, T2;
  Eigen::Matrix3i Vinv_num;  // V^{-1} = Vinv_num / Vinv_den
  int Vinv_den = 2;

  const Eigen::Matrix3i& C(int k) const { return k == 0 ? C0 : (k == 1 ? C1 : C2); }
  const Eigen::Matrix3i& T(int k) const { return k == 0 ? T0 : (k == 1 ? T1 : T2); }
};

inline ConstantMatrices constant_matrices() {
  ConstantMatrices m;
  m.C0 << 10, -8, 1,
           6, -3, 0,
           3,  0, 0;
  m.C1 << -8,  4, 0,
          -3, -2, 1,
           0, -4, 0;
  m.C2.setIdentity();
  m.V << -3,  2, 0,
          3, -4, 1,
          1, -2, 1;
  m.T0 << 3, -3, 0,
          0,  3, 0,
          0,  0, 1;
  m.T1 << -4,  2,  0,
           0, -4,  0,
           0,  0, -2;
  m.T2.setIdentity();
  m.Vinv_num << -2, -2, 2,
                -2, -3, 3,
                -2, -4, 6;
  return m;
}

namespace detail {

inline Matrix lyapunov_kronecker(const Matrix& A, const Matrix& C) {
  const int m = static_cast<int>(A.rows());
  const Matrix I = Matrix::Identity(m, m);
  Matrix phi(m * m, m * m);
  // phi(A) = (A (x) I + I (x) A) / 2 acting on column-stacked matrices
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i)
      phi.block(i * m, j * m, m, m) = 0.5 * (A(i, j) * I + (i == j ? A : Matrix::Zero(m, m)));
  Eigen::Map<const Vector> cvec(C.data(), m * m);
  Eigen::FullPivLU<Matrix> lu(phi);
  if (!lu.isInvertible()) throw NotStable("phi(A) singular; A is not stable");
  Vector xvec = lu.solve(Vector(-cvec));
  Eigen::Map<Matrix> X(xvec.data(), m, m);
  return sym(X);
}

/// Integral backend: X = int_0^inf e^{tA/2} C e^{tA'/2} dt, truncated where
/// the exponential decay envelope drops below 1e-14 and integrated by
/// composite Gauss-Legendre panels with a panel-doubling check.
inline Matrix lyapunov_integral(const Matrix& A, const Matrix& C, double abscissa) {
  const double t_star = 2.0 * std::log(1e14) / (-abscissa);
  // 8-point Gauss-Legendre on [0,1]
  static const double gx[8] = {0.01985507175123188, 0.10166676129318664,
                               0.2372337950418355,  0.40828267875217505,
                               0.5917173212478249,  0.7627662049581645,
                               0.8983332387068134,  0.9801449282487681};
  static const double gw[8] = {0.05061426814518813, 0.11119051722668723,
                               0.15685332293894364, 0.18134189168918099,
                               0.18134189168918099, 0.15685332293894364,
                               0.11119051722668723, 0.05061426814518813};
  const auto integrate = [&](int panels) {
    Matrix acc = Matrix::Zero(A.rows(), A.cols());
    const double hstep = t_star / panels;
    for (int p = 0; p < panels; ++p) {
      const double t0 = p * hstep;
      for (int k = 0; k < 8; ++k) {
        const double t = t0 + gx[k] * hstep;
        const Matrix E = (0.5 * t * A).exp();
        acc += (gw[k] * hstep) * (E * C * E.transpose());
      }
    }
    return acc;
  };
  int panels = 16;
  Matrix x = integrate(panels);
  for (int round = 0; round < 6; ++round) {
    const Matrix x2 = integrate(2 * panels);
    if (sup_norm(Matrix(x2 - x)) <= 1e-12 * std::max(1.0, sup_norm(x2))) return sym(x2);
    x = x2;
    panels *= 2;
  }
  return sym(x);
}

}  // namespace detail

enum class LyapunovBackend { Both, Kronecker, Integral };

/// Unique symmetric X with sym(A X) = -C for a stable A. Solved by two
/// independent backends (Kronecker vectorization and the truncated integral
/// formula) which must agree to 1e-8 in sup norm.
inline Matrix solve_lyapunov(const Matrix& A, const Matrix& C,
                             LyapunovBackend backend = LyapunovBackend::Both) {
  if (A.rows() != A.cols() || C.rows() != C.cols() || A.rows() != C.rows())
    throw DimensionMismatch("solve_lyapunov: A and C must be square of equal size");
  const double absc = spectral_abscissa(A);
  if (!(absc < 0.0))
    throw NotStable("spectral abscissa " + std::to_string(absc) + " >= 0");
  if (backend == LyapunovBackend::Kronecker) return detail::lyapunov_kronecker(A, sym(C));
  if (backend == LyapunovBackend::Integral) return detail::lyapunov_integral(A, sym(C), absc);
  const Matrix xk = detail::lyapunov_kronecker(A, sym(C));
  const Matrix xi = detail::lyapunov_integral(A, sym(C), absc);
  const double gap = sup_norm(Matrix(xk - xi));
  if (gap > 1e-8)
    throw BackendDisagreement("Lyapunov backends differ by " + std::to_string(gap));
  return xk;
}

enum class SigmaSource { ClosedForm, LyapunovIntegral };

/// Asymptotic overlap variance-covariance matrices Sigma(i) = lim N*U(i),
/// together with the V-basis intermediates:
///   Sigmahat(2) =  Sigma(0) - 2 Sigma(1) + Sigma(2)
///   Sigmahat(1) = 3 Sigma(0) - 4 Sigma(1) + Sigma(2)
///   Sigmahat(0) = -3 Sigma(0) + 2 Sigma(1)
struct OverlapCovariance {
  Matrix Sigma0, Sigma1, Sigma2;
  Matrix Sigmahat0, Sigmahat1, Sigmahat2;
  double rho_gamma = 0.0;       // rho(Gamma Delta^2 Lambda)
  double absc_gamma_p = 0.0;    // max Re spec(Gamma' Delta^2 Lambda)
  SigmaSource source = SigmaSource::ClosedForm;
};

namespace detail {

inline void check_stability(const SpeciesStructure& s, const RsSolution& sol, double beta,
                            double& rho_gamma, double& absc_gamma_p) {
  const Matrix dl = s.delta2_lambda();
  rho_gamma = spectral_radius(Matrix(sol.gamma.asDiagonal() * dl));
  absc_gamma_p = spectral_abscissa(Matrix(sol.gamma_p.asDiagonal() * dl));
  const double b2 = beta * beta;
  if (!(b2 * rho_gamma < 1.0))
    throw StabilityViolated("beta^2 rho(Gamma Delta^2 Lambda) = " +
                            std::to_string(b2 * rho_gamma) + " >= 1");
  if (!(b2 * absc_gamma_p < 1.0))
    throw StabilityViolated("beta^2 max Re spec(Gamma' Delta^2 Lambda) = " +
                            std::to_string(b2 * absc_gamma_p) + " >= 1");
}

/// Gamma_d (I - beta^2 Delta^2 Lambda Gamma_d)^{-1} Lambda^{-1}, symmetrized,
/// with a condition-number gate: near-singularity IS the AT-side breakdown.
inline Matrix resolvent_block(const SpeciesStructure& s, const Vector& gamma_d, double beta) {
  const int m = s.m;
  const Matrix M = Matrix::Identity(m, m) -
                   beta * beta * s.delta2_lambda() * Matrix(gamma_d.asDiagonal());
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& sv = svd.singularValues();
  if (sv(m - 1) <= 0.0 || sv(0) / sv(m - 1) > 1e12)
    throw StabilityViolated("I - beta^2 Delta^2 Lambda Gamma block is numerically singular");
  const Matrix r = gamma_d.asDiagonal() * M.inverse() *
                   Matrix(s.lambda.cwiseInverse().asDiagonal());
  return sym(r);
}

}  // namespace detail

/// Closed-form solve of the asymptotic covariance system:
///   Sigmahat(2) = Gamma  (I - beta^2 Delta^2 Lambda Gamma )^{-1} Lambda^{-1}
///   Sigmahat(1) = Gamma' (I - beta^2 Delta^2 Lambda Gamma')^{-1} Lambda^{-1}
/// and Sigmahat(0) from the continuous Lyapunov equation
///   sym((I - beta^2 Gamma' Delta^2 Lambda) Sigmahat(0))
///       = beta^2 sym(Gamma'' Delta^2 Lambda Sigmahat(1)) + Gamma'' Lambda^{-1}.
/// The 3x3 V-basis inversion is exact (integer numerators over 2).
inline OverlapCovariance sigma_closed_form(const SpeciesStructure& s, const RsSolution& sol,
                                           double beta) {
  OverlapCovariance out;
  detail::check_stability(s, sol, beta, out.rho_gamma, out.absc_gamma_p);
  const int m = s.m;
  const double b2 = beta * beta;
  const Matrix dl = s.delta2_lambda();

  out.Sigmahat2 = detail::resolvent_block(s, sol.gamma, beta);
  out.Sigmahat1 = detail::resolvent_block(s, sol.gamma_p, beta);
  const Matrix A = -(Matrix::Identity(m, m) - b2 * sol.GammaP() * dl);
  const Matrix C = b2 * sym(Matrix(sol.GammaPP() * dl * out.Sigmahat1)) +
                   Matrix(sol.gamma_pp.asDiagonal() * Matrix(s.lambda.cwiseInverse().asDiagonal()));
  out.Sigmahat0 = solve_lyapunov(A, C);

  const ConstantMatrices cm = constant_matrices();
  const auto hat = [&](int l) -> const Matrix& {
    return l == 0 ? out.Sigmahat0 : (l == 1 ? out.Sigmahat1 : out.Sigmahat2);
  };
  Matrix* sigma[3] = {&out.Sigma0, &out.Sigma1, &out.Sigma2};
  for (int i = 0; i < 3; ++i) {
    Matrix acc = Matrix::Zero(m, m);
    for (int l = 0; l < 3; ++l)
      acc += (static_cast<double>(cm.Vinv_num(i, l)) / cm.Vinv_den) * hat(l);
    *sigma[i] = acc;
  }
  out.source = SigmaSource::ClosedForm;
  return out;
}

/// Same system solved entirely through the Lyapunov solver (all three hat
/// blocks), cross-validating the resolvent forms.
inline OverlapCovariance sigma_lyapunov(const SpeciesStructure& s, const RsSolution& sol,
                                        double beta) {
  OverlapCovariance out;
  detail::check_stability(s, sol, beta, out.rho_gamma, out.absc_gamma_p);
  const int m = s.m;
  const double b2 = beta * beta;
  const Matrix dl = s.delta2_lambda();
  const Matrix inv_lambda = Matrix(s.lambda.cwiseInverse().asDiagonal());

  const Matrix A2 = -(Matrix::Identity(m, m) - b2 * sol.Gamma() * dl);
  out.Sigmahat2 = solve_lyapunov(A2, Matrix(sol.Gamma() * inv_lambda));
  const Matrix A1 = -(Matrix::Identity(m, m) - b2 * sol.GammaP() * dl);
  out.Sigmahat1 = solve_lyapunov(A1, Matrix(sol.GammaP() * inv_lambda));
  const Matrix C0 = b2 * sym(Matrix(sol.GammaPP() * dl * out.Sigmahat1)) +
                    Matrix(sol.GammaPP() * inv_lambda);
  out.Sigmahat0 = solve_lyapunov(A1, C0);

  const ConstantMatrices cm = constant_matrices();
  const auto hat = [&](int l) -> const Matrix& {
    return l == 0 ? out.Sigmahat0 : (l == 1 ? out.Sigmahat1 : out.Sigmahat2);
  };
  Matrix* sigma[3] = {&out.Sigma0, &out.Sigma1, &out.Sigma2};
  for (int i = 0; i < 3; ++i) {
    Matrix acc = Matrix::Zero(m, m);
    for (int l = 0; l < 3; ++l)
      acc += (static_cast<double>(cm.Vinv_num(i, l)) / cm.Vinv_den) * hat(l);
    *sigma[i] = acc;
  }
  out.source = SigmaSource::LyapunovIntegral;
  return out;
}

/// Residuals of the finite-N cavity system for measured U(i):
///   r_i = U(i) - sum_{j,k} C_{ij}(k) sym(Bhat(k) U(j)) - Theta(i)/N.
/// The neglected remainder is O(N^{-3/2}), which bounds these when the
/// U(i) come from the true Gibbs measure.
inline std::array<Matrix, 3> finite_n_residual(const SpeciesStructure& s, const RsSolution& sol,
                                               double beta, const Matrix& U0, const Matrix& U1,
                                               const Matrix& U2, int N) {
  const std::array<const Matrix*, 3> U = {&U0, &U1, &U2};
  for (const Matrix* u : U)
    if (u->rows() != s.m || u->cols() != s.m)
      throw DimensionMismatch("finite_n_residual: U(i) must be m x m");
  const CavityCoefficients cc = cavity_coefficients(s, sol, beta);
  const ConstantMatrices cm = constant_matrices();
  std::array<Matrix, 3> r;
  for (int i = 0; i < 3; ++i) {
    Matrix acc = *U[i];
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        acc -= static_cast<double>(cm.C(k)(i, j)) * sym(Matrix(cc.Bhat(k) * (*U[j])));
    acc -= Matrix(cc.theta(i).asDiagonal()) / static_cast<double>(N);
    r[i] = acc;
  }
  return r;
}

}  // namespace msk
