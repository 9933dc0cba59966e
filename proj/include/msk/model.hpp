#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "msk/errors.hpp"
#include "msk/linalg.hpp"

namespace msk {

/// Static description of the species structure: m species, ratio vector
/// lambda (diagonal of Lambda) and the symmetric coupling-variance matrix
/// delta2. Immutable after construction; all member helpers are const.
struct SpeciesStructure {
  int m = 0;
  Vector lambda;   // length m, entries in (0,1), sums to 1
  Matrix delta2;   // m x m, symmetric, entrywise >= 0, invertible

  Matrix Lambda() const { return Matrix(lambda.asDiagonal()); }
  Vector lambda_sqrt() const { return lambda.cwiseSqrt(); }
  /// Delta^2 * Lambda, the matrix whose spectral radius fixes beta_c.
  Matrix delta2_lambda() const { return delta2 * lambda.asDiagonal(); }
  /// Lambda * Delta^2 * Lambda, the kernel of the quadratic form Q.
  Matrix lambda_delta2_lambda() const {
    return lambda.asDiagonal() * delta2 * lambda.asDiagonal();
  }
  /// Lambda^{1/2} Delta^2 Lambda^{1/2}, symmetric and similar to Delta^2*Lambda.
  Matrix sym_core() const {
    return lambda_sqrt().asDiagonal() * delta2 * lambda_sqrt().asDiagonal();
  }
};

/// Inverse temperature and external field.
struct ModelParams {
  double beta = 0.0;  // >= 0 (0 is the decoupled limit)
  double h = 0.0;     // >= 0
};

enum class Definiteness { PositiveDefinite, Indefinite };

struct DefinitenessClass {
  Definiteness tag = Definiteness::PositiveDefinite;
  int alpha = 1;  // 1 + [delta2 indefinite]
};

namespace detail {
constexpr double kSymTol = 1e-12;
constexpr double kRatioTol = 1e-12;
constexpr double kSingularRatio = 1e-10;  // min singular value vs max
constexpr double kEigenPositiveRatio = 1e-10;  // eigenvalue > ratio * rho counts positive
}  // namespace detail

inline void validate_params(const ModelParams& p) {
  if (!(p.beta >= 0.0) || !std::isfinite(p.beta))
    throw BadParams("beta must be a finite nonnegative real");
  if (!(p.h >= 0.0) || !std::isfinite(p.h))
    throw BadParams("h must be a finite nonnegative real");
}

/// Checks every structural invariant; throws the error naming the first
/// violated one. Ratios are rejected, never renormalized.
inline void validate_structure(const SpeciesStructure& s) {
  if (s.m < 1) throw BadRatios("species count must be >= 1");
  if (s.lambda.size() != s.m)
    throw DimensionMismatch("lambda has length " + std::to_string(s.lambda.size()) +
                            ", expected " + std::to_string(s.m));
  if (s.delta2.rows() != s.m || s.delta2.cols() != s.m)
    throw DimensionMismatch("delta2 must be m x m");

  for (int i = 0; i < s.m; ++i) {
    const double l = s.lambda(i);
    if (!(l > 0.0 && l < 1.0) && !(s.m == 1 && l == 1.0))
      throw BadRatios("lambda_" + std::to_string(i + 1) + " = " + std::to_string(l) +
                      " outside (0,1)");
  }
  if (std::abs(s.lambda.sum() - 1.0) > detail::kRatioTol)
    throw BadRatios("species ratios sum to " + std::to_string(s.lambda.sum()));

  for (int i = 0; i < s.m; ++i)
    for (int j = i + 1; j < s.m; ++j)
      if (std::abs(s.delta2(i, j) - s.delta2(j, i)) > detail::kSymTol)
        throw AsymmetricMatrix("delta2(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                               ") != delta2(" + std::to_string(j + 1) + "," + std::to_string(i + 1) + ")");
  if ((s.delta2.array() < 0.0).any()) throw NegativeEntry("delta2 has a negative entry");
  if (s.delta2.cwiseAbs().maxCoeff() == 0.0) throw SingularMatrix("delta2 is identically zero");

  Eigen::JacobiSVD<Matrix> svd(s.delta2);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= detail::kSingularRatio * sv(0))
    throw SingularMatrix("delta2 singular value ratio " +
                         std::to_string(sv(sv.size() - 1) / sv(0)));
}

/// alpha = 1 for positive-definite delta2, 2 otherwise. Eigenvalues below
/// kEigenPositiveRatio * rho are treated as nonpositive; exact zeros are
/// already excluded by the invertibility check in validate_structure.
inline DefinitenessClass classify_definiteness(const SpeciesStructure& s) {
  const Vector ev = symmetric_eigenvalues(sym(s.delta2));
  const double rho = ev.cwiseAbs().maxCoeff();
  DefinitenessClass c;
  if (ev(0) > detail::kEigenPositiveRatio * rho) {
    c.tag = Definiteness::PositiveDefinite;
    c.alpha = 1;
  } else {
    c.tag = Definiteness::Indefinite;
    c.alpha = 2;
  }
  return c;
}

inline bool is_positive_definite(const SpeciesStructure& s) {
  return classify_definiteness(s).tag == Definiteness::PositiveDefinite;
}

/// Q(x) = x^T Lambda Delta^2 Lambda x.
inline double quad_form_Q(const SpeciesStructure& s, const Vector& x) {
  if (x.size() != s.m) throw DimensionMismatch("quad_form_Q: vector length != m");
  return x.dot(s.lambda_delta2_lambda() * x);
}

/// |Lambda^{1/2} Delta^2 Lambda^{1/2}| via spectral decomposition:
/// eigenvalues replaced by their absolute values. Symmetric positive-definite
/// for every valid structure.
inline Matrix matrix_abs_V(const SpeciesStructure& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s.sym_core());
  if (es.info() != Eigen::Success) throw EigenFailure("spectral decomposition failed");
  Matrix v = es.eigenvectors() * es.eigenvalues().cwiseAbs().asDiagonal() *
             es.eigenvectors().transpose();
  return sym(v);
}

/// P(x) = x^T Lambda^{1/2} V Lambda^{1/2} x with V = matrix_abs_V; >= 0,
/// coincides with Q when delta2 is positive-definite.
inline double quad_form_P(const SpeciesStructure& s, const Vector& x) {
  if (x.size() != s.m) throw DimensionMismatch("quad_form_P: vector length != m");
  const Vector y = s.lambda_sqrt().asDiagonal() * x;
  return y.dot(matrix_abs_V(s) * y);
}

}  // namespace msk
