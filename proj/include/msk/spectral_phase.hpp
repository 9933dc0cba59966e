#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "msk/errors.hpp"
#include "msk/linalg.hpp"
#include "msk/model.hpp"
#include "msk/rs_solver.hpp"

namespace msk {

enum class PhaseRegion {
  ProvedRS_Thm1,
  ProvedRS_ZeroField,
  BelowATUnproven,
  RSBCertified,
  IndefiniteConjecturalRSB,
  Unknown
};

inline const char* to_string(PhaseRegion r) {
  switch (r) {
    case PhaseRegion::ProvedRS_Thm1: return "ProvedRS_Thm1";
    case PhaseRegion::ProvedRS_ZeroField: return "ProvedRS_ZeroField";
    case PhaseRegion::BelowATUnproven: return "BelowATUnproven";
    case PhaseRegion::RSBCertified: return "RSBCertified";
    case PhaseRegion::IndefiniteConjecturalRSB: return "IndefiniteConjecturalRSB";
    case PhaseRegion::Unknown: return "Unknown";
  }
  return "?";
}

struct PhasePoint {
  double beta = 0.0, h = 0.0;
  double beta_c = 0.0;
  double beta_0 = 0.0;                      // beta_c / sqrt(4 alpha)
  double beta_at = std::numeric_limits<double>::quiet_NaN();
  PhaseRegion region = PhaseRegion::Unknown;
  std::optional<Vector> rsb_witness;        // present iff region == RSBCertified
  bool conjectural = false;                 // indefinite AT-side statements only
  bool unique_certified = false;
};

/// beta_c = rho(Delta^2 Lambda)^{-1/2}.
inline double beta_c(const SpeciesStructure& s) {
  const double rho = spectral_radius(s.delta2_lambda());
  if (!(rho > 0.0)) throw ZeroSpectralRadius("rho(Delta^2 Lambda) = 0");
  return 1.0 / std::sqrt(rho);
}

inline double beta_0(const SpeciesStructure& s) {
  return beta_c(s) / std::sqrt(4.0 * classify_definiteness(s).alpha);
}

namespace detail {

/// rho(Gamma Delta^2 Lambda) with the self-check against the symmetric
/// similarity Gamma^{1/2} Lambda^{1/2} Delta^2 Lambda^{1/2} Gamma^{1/2};
/// the two spectra must agree to 1e-10.
inline double rho_gamma_core(const SpeciesStructure& s, const Vector& gamma) {
  const double rho = spectral_radius(Matrix(gamma.asDiagonal() * s.delta2_lambda()));
  if ((gamma.array() > 0.0).all()) {
    const Vector gs = gamma.cwiseSqrt();
    const double rho_sym =
        spectral_radius(Matrix(gs.asDiagonal() * s.sym_core() * gs.asDiagonal()));
    if (std::abs(rho - rho_sym) > 1e-10 + 1e-12 * std::abs(rho))
      throw EigenFailure("nonsymmetric and symmetric-similarity spectra disagree: " +
                         std::to_string(rho) + " vs " + std::to_string(rho_sym));
  }
  return rho;
}

}  // namespace detail

/// beta_AT(h) = rho(Gamma Delta^2 Lambda)^{-1/2} at the solved point.
/// The saturated-field edge gamma == 0 is reported as +infinity.
inline double beta_at(const SpeciesStructure& s, const RsSolution& sol) {
  const double rho = detail::rho_gamma_core(s, sol.gamma);
  if (rho <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(rho);
}

/// Both spectral quantities entering the conjectured indefinite-case RSB
/// condition, and whether beta^2 * max{...} exceeds 1. CONJECTURAL: the
/// inequality is a reported condition, not a proved phase boundary.
struct IndefiniteCondition {
  double rho_gamma = 0.0;          // rho(Gamma Delta^2 Lambda)
  double abscissa_gamma_p = 0.0;   // max Re spec(Gamma' Delta^2 Lambda)
  bool exceeds = false;            // beta^2 * max of the two > 1
};

inline IndefiniteCondition indefinite_condition(const SpeciesStructure& s,
                                                const RsSolution& sol) {
  IndefiniteCondition c;
  c.rho_gamma = detail::rho_gamma_core(s, sol.gamma);
  c.abscissa_gamma_p = spectral_abscissa(Matrix(sol.gamma_p.asDiagonal() * s.delta2_lambda()));
  const double b2 = sol.params.beta * sol.params.beta;
  c.exceeds = b2 * std::max(c.rho_gamma, c.abscissa_gamma_p) > 1.0;
  return c;
}

/// Hessian of the 1-RSB perturbation at the fixed point, valid for
/// positive-definite Delta^2:
///   HV = beta^2 Lambda (beta^2 Delta^2 Lambda Gamma Delta^2 - Delta^2) Lambda,
/// symmetrized to remove round-off skew.
inline Matrix hv_matrix(const SpeciesStructure& s, const RsSolution& sol, double beta) {
  if (!is_positive_definite(s))
    throw NotPositiveDefinite("HV formula requires positive-definite delta2");
  const double b2 = beta * beta;
  const Matrix L = s.Lambda();
  const Matrix inner =
      b2 * s.delta2 * L * sol.Gamma() * s.delta2 - s.delta2;
  return sym(Matrix(b2 * L * inner * L));
}

/// RSB witness constructed along the Perron direction: with u the top unit
/// eigenvector of Gamma^{1/2} Lambda^{1/2} Delta^2 Lambda^{1/2} Gamma^{1/2},
/// x = Lambda^{-1/2} Gamma^{1/2} u satisfies
///   x^T HV x / beta^2 = rho (beta^2 rho - 1),   rho = rho(Gamma Delta^2 Lambda),
/// so a nonnegative witness exists exactly above the AT line.
struct RsbCertificate {
  Vector witness;                  // entrywise >= 0
  double quad_form = 0.0;          // x^T HV x
  double quad_form_normalized = 0.0;  // x^T HV x / beta^2 = rho(beta^2 rho - 1)
};

inline std::optional<RsbCertificate> rsb_certificate(const SpeciesStructure& s,
                                                     const RsSolution& sol, double beta) {
  if (!is_positive_definite(s))
    throw NotPositiveDefinite("RSB certificate requires positive-definite delta2");
  const Vector gs = sol.gamma.cwiseSqrt();
  const Matrix M = gs.asDiagonal() * s.sym_core() * gs.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  if (es.info() != Eigen::Success) throw EigenFailure("Perron eigenvector solve failed");
  Vector u = es.eigenvectors().col(s.m - 1);
  int imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  if (u(imax) < 0.0) u = -u;
  if ((u.array() < -1e-10).any())
    throw EigenFailure("Perron eigenvector has a negative entry");
  u = u.cwiseMax(0.0);

  RsbCertificate cert;
  cert.witness = s.lambda_sqrt().cwiseInverse().asDiagonal() * (gs.asDiagonal() * u);
  const Matrix hv = hv_matrix(s, sol, beta);
  cert.quad_form = cert.witness.dot(hv * cert.witness);
  cert.quad_form_normalized = cert.quad_form / (beta * beta);
  if (cert.quad_form > 0.0) return cert;
  return std::nullopt;
}

/// Exponential-moment bound on the centered overlap quadratic form:
/// det(I - (2 eta + 4 alpha beta^2) V)^{-1/2} when 2 eta < beta_c^2 - 4 alpha beta^2,
/// +infinity otherwise (the bound is not asserted there).
inline double concentration_bound(const SpeciesStructure& s, const ModelParams& p, double eta) {
  const int alpha = classify_definiteness(s).alpha;
  const double bc2 = 1.0 / spectral_radius(s.delta2_lambda());
  const double shift = 4.0 * alpha * p.beta * p.beta;
  if (!(2.0 * eta < bc2 - shift)) return std::numeric_limits<double>::infinity();
  const Matrix M = Matrix::Identity(s.m, s.m) - (2.0 * eta + shift) * matrix_abs_V(s);
  const Vector ev = symmetric_eigenvalues(M);
  if ((ev.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(ev.prod());
}

/// Region classification, applied in priority order. Solver failures mark
/// the point Unknown rather than propagating.
inline PhasePoint classify_phase(const SpeciesStructure& s, const ModelParams& p,
                                 SolverOptions opt = {}) {
  validate_structure(s);
  validate_params(p);
  PhasePoint pt;
  pt.beta = p.beta;
  pt.h = p.h;
  pt.beta_c = beta_c(s);
  pt.beta_0 = beta_0(s);
  const bool pd = is_positive_definite(s);

  RsSolution sol;
  try {
    sol = solve_auto(s, p, opt);
  } catch (const Error&) {
    pt.region = PhaseRegion::Unknown;
    return pt;
  }
  pt.unique_certified = sol.unique_certified;
  pt.beta_at = beta_at(s, sol);

  if (p.beta < pt.beta_0) {
    pt.region = PhaseRegion::ProvedRS_Thm1;
    return pt;
  }
  if (p.h == 0.0 && p.beta < pt.beta_c) {
    pt.region = PhaseRegion::ProvedRS_ZeroField;
    return pt;
  }
  if (pd) {
    const auto cert = rsb_certificate(s, sol, p.beta);
    if (cert) {
      pt.region = PhaseRegion::RSBCertified;
      pt.rsb_witness = cert->witness;
      // the certificate presumes the solved point is the relevant critical
      // point; flag the conclusion when uniqueness is not certified
      pt.conjectural = !sol.unique_certified;
      return pt;
    }
    pt.region = PhaseRegion::BelowATUnproven;
    return pt;
  }
  const auto cond = indefinite_condition(s, sol);
  if (cond.exceeds) {
    pt.region = PhaseRegion::IndefiniteConjecturalRSB;
    pt.conjectural = true;
    return pt;
  }
  pt.region = PhaseRegion::BelowATUnproven;
  pt.conjectural = true;  // the indefinite AT side is conjectural either way
  return pt;
}

}  // namespace msk
