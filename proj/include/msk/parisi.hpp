#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "msk/errors.hpp"
#include "msk/linalg.hpp"
#include "msk/model.hpp"
#include "msk/quadrature.hpp"
#include "msk/rs_solver.hpp"

namespace msk {

/// Discrete order-parameter sequences for the k-level functional:
///   0 = zeta_0 < zeta_1 < ... < zeta_k < zeta_{k+1} = 1
///   0 = q_0^s <= q_1^s <= ... <= q_{k+2}^s = 1   per species.
/// zeta holds all k+2 values; qseq is m x (k+3), one column per level.
struct ParisiSequences {
  int k = 0;
  Vector zeta;       // length k+2
  Matrix qseq;       // m x (k+3)

  static ParisiSequences make(int k, const Vector& zeta_full, const Matrix& qseq) {
    ParisiSequences s;
    s.k = k;
    s.zeta = zeta_full;
    s.qseq = qseq;
    s.validate();
    return s;
  }

  void validate() const {
    if (k < 0) throw InvalidSequence("k must be >= 0");
    if (zeta.size() != k + 2) throw InvalidSequence("zeta must have length k+2");
    if (zeta(0) != 0.0) throw InvalidSequence("zeta_0 must be 0");
    if (zeta(k + 1) != 1.0) throw InvalidSequence("zeta_{k+1} must be 1");
    for (int l = 0; l + 1 < zeta.size(); ++l)
      if (!(zeta(l) < zeta(l + 1)))
        throw InvalidSequence("zeta must be strictly increasing");
    if (qseq.cols() != k + 3) throw InvalidSequence("qseq must have k+3 columns");
    for (int s = 0; s < qseq.rows(); ++s) {
      if (qseq(s, 0) != 0.0) throw InvalidSequence("q_0 must be 0");
      if (qseq(s, k + 2) != 1.0) throw InvalidSequence("q_{k+2} must be 1");
      for (int l = 0; l + 1 < qseq.cols(); ++l)
        if (qseq(s, l) > qseq(s, l + 1) + 1e-15)
          throw InvalidSequence("q sequence must be nondecreasing (species " +
                                std::to_string(s + 1) + ")");
    }
  }
};

namespace detail {

// zeta below this is treated as the plain-expectation limit of
// (1/zeta) log E exp(zeta X).
constexpr double kZetaPlainExpectation = 1e-8;

/// Backward recursion for one species. coef[l] multiplies eta_{l+1}; level
/// k+2 is log cosh. Works for any positive zeta values (the diagnostics
/// differentiate through zeta = 1), ordering is the caller's business.
class ParisiRecursion {
 public:
  ParisiRecursion(const Vector& zeta, const std::vector<double>& coef, int nodes)
      : zeta_(zeta), coef_(coef) {
    rules_.resize(coef.size());
    for (size_t l = 0; l < coef.size(); ++l)
      if (coef[l] > 0.0) rules_[l] = gaussian_rule(coef[l], nodes);
  }

  double eval(int level, double y) const {
    if (level == static_cast<int>(coef_.size())) return log_cosh(y);
    const double c = coef_[level];
    if (c == 0.0) return eval(level + 1, y);  // duplicate-q level collapses
    const GaussianRule& r = rules_[level];
    const double z = zeta_(level);
    if (z < kZetaPlainExpectation) {
      double acc = 0.0;
      for (size_t i = 0; i < r.x.size(); ++i)
        acc += r.w[i] * eval(level + 1, y + c * r.x[i]);
      return acc;
    }
    // (1/z) log E exp(z X), log-sum-exp stabilized
    std::vector<double> vals(r.x.size());
    double vmax = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < r.x.size(); ++i) {
      vals[i] = z * eval(level + 1, y + c * r.x[i]);
      vmax = std::max(vmax, vals[i]);
    }
    double acc = 0.0;
    for (size_t i = 0; i < r.x.size(); ++i) acc += r.w[i] * std::exp(vals[i] - vmax);
    return (vmax + std::log(acc)) / z;
  }

 private:
  const Vector& zeta_;
  const std::vector<double>& coef_;
  std::vector<GaussianRule> rules_;
};

/// Functional evaluation without the ordering checks on zeta; used both by
/// the public evaluator (after validation) and by the 1-RSB diagnostics
/// that differentiate through zeta_1 = 1.
inline double parisi_value_raw(const SpeciesStructure& s, const ModelParams& p,
                               const Vector& zeta, const Matrix& qseq, int nodes) {
  const int levels = static_cast<int>(zeta.size());      // k+2
  const int ncols = static_cast<int>(qseq.cols());        // k+3
  const Matrix ldl = s.lambda_delta2_lambda();
  const Matrix dl = s.delta2_lambda();

  std::vector<double> Q(ncols);
  Matrix Qs(s.m, ncols);
  for (int l = 0; l < ncols; ++l) {
    const Vector ql = qseq.col(l);
    Q[l] = 0.5 * ql.dot(ldl * ql);
    Qs.col(l) = dl * ql;
  }

  double total = M_LN2;
  for (int sp = 0; sp < s.m; ++sp) {
    std::vector<double> coef(levels);
    for (int l = 0; l < levels; ++l) {
      const double inc = Qs(sp, l + 1) - Qs(sp, l);
      if (inc < 0.0) {
        if (inc > -1e-14) { coef[l] = 0.0; continue; }
        throw NegativeIncrement("species " + std::to_string(sp + 1) + ", level " +
                                std::to_string(l) + ": field-variance increment " +
                                std::to_string(inc) + " < 0");
      }
      coef[l] = p.beta * std::sqrt(inc);
    }
    ParisiRecursion rec(zeta, coef, nodes);
    total += s.lambda(sp) * rec.eval(0, p.h);
  }
  for (int l = 1; l < levels; ++l) total -= 0.5 * p.beta * p.beta * zeta(l) * (Q[l + 1] - Q[l]);
  return total;
}

}  // namespace detail

/// k-level functional over validated sequences; cost nodes^{k+2} per species,
/// so k is capped at 3.
inline double evaluate_parisi(const SpeciesStructure& s, const ModelParams& p,
                              const ParisiSequences& seqs, int nodes_per_level = 32) {
  validate_structure(s);
  validate_params(p);
  seqs.validate();
  if (seqs.qseq.rows() != s.m) throw DimensionMismatch("qseq rows != m");
  if (seqs.k > 3) throw DimensionTooLarge("k <= 3 (cost grows as nodes^{k+2})");
  return detail::parisi_value_raw(s, p, seqs.zeta, seqs.qseq, nodes_per_level);
}

/// Replica-symmetric functional
///   log 2 + sum_s lambda_s E log cosh(beta eta sqrt((Delta^2 Lambda q)_s) + h)
///         + (beta^2/4) (1-q)^T Lambda Delta^2 Lambda (1-q).
inline double evaluate_rs_functional(const SpeciesStructure& s, const ModelParams& p,
                                     const Vector& q, int nodes = kDefaultGhNodes) {
  if (q.size() != s.m) throw DimensionMismatch("q length != m");
  const Vector Q = s.delta2_lambda() * q;
  double total = M_LN2;
  for (int i = 0; i < s.m; ++i) {
    if (Q(i) < 0.0) throw NegativeVariance("(Delta^2 Lambda q)_s < 0");
    total += s.lambda(i) *
             gauss_hermite_expect(log_cosh, p.h, p.beta * std::sqrt(Q(i)), nodes);
  }
  const Vector one_minus_q = Vector::Ones(s.m) - q;
  total += 0.25 * p.beta * p.beta * quad_form_Q(s, one_minus_q);
  return total;
}

/// Gradient of the RS functional:
/// dP/dq_t = (beta^2/2) [Lambda Delta^2 Lambda (q - Phi(q))]_t.
inline Vector rs_functional_gradient(const SpeciesStructure& s, const ModelParams& p,
                                     const Vector& q, int nodes = kDefaultGhNodes) {
  const Vector Q = s.delta2_lambda() * q;
  Vector phi(s.m);
  for (int i = 0; i < s.m; ++i) {
    if (Q(i) < 0.0) throw NegativeVariance("(Delta^2 Lambda q)_s < 0");
    phi(i) = expected_tanh2(p, Q(i), nodes);
  }
  return 0.5 * p.beta * p.beta * (s.lambda_delta2_lambda() * (q - phi));
}

/// Free-energy law-of-large-numbers and CLT parameters at the solved point.
/// b_h covers h > 0; the h = 0 pair (cN_linear, cN_logdet) describes
/// c_N = N * cN_linear + cN_logdet, and b_zero the limiting variance of
/// log Z_N. The h = 0 fields require beta < beta_c and are NaN otherwise.
struct CltParams {
  double rs_value = 0.0;
  double b_h = 0.0;
  double cN_linear = std::numeric_limits<double>::quiet_NaN();
  double cN_logdet = std::numeric_limits<double>::quiet_NaN();
  double b_zero = std::numeric_limits<double>::quiet_NaN();
};

inline CltParams rs_value(const SpeciesStructure& s, const ModelParams& p,
                          const RsSolution& sol) {
  CltParams out;
  const Vector one_minus_q = Vector::Ones(s.m) - sol.q;
  out.rs_value = M_LN2 + s.lambda.dot(sol.logcosh_mean) +
                 0.25 * p.beta * p.beta * quad_form_Q(s, one_minus_q);
  out.b_h = s.lambda.dot(sol.logcosh_var) - 0.5 * p.beta * p.beta * quad_form_Q(s, sol.q);
  if (p.h == 0.0) {
    const Vector ev = symmetric_eigenvalues(s.sym_core());  // = spec(Delta^2 Lambda), real
    const double b2 = p.beta * p.beta;
    if ((1.0 - b2 * ev.array() > 0.0).all()) {
      const double logdet = (1.0 - b2 * ev.array()).log().sum();
      out.cN_linear = M_LN2 + 0.25 * b2 * quad_form_Q(s, Vector::Ones(s.m));
      out.cN_logdet = 0.25 * logdet;
      out.b_zero = 0.5 * (-logdet - b2 * s.delta2_lambda().trace());
    }
  }
  return out;
}

inline CltParams rs_value(const SpeciesStructure& s, const ModelParams& p,
                          SolverOptions opt = {}) {
  return rs_value(s, p, solve_auto(s, p, opt));
}

/// One-step RSB perturbation diagnostics around the fixed point q*:
/// V(p) = d/dzeta of the k=1 functional with levels (q*, p) at zeta = 1,
/// computed by central finite differences (with one Richardson step), its
/// forward-difference gradient and Hessian in p at p = q*, and the closed
/// Hessian formula beta^2 Lambda (beta^2 Delta^2 Lambda Gamma Delta^2 - Delta^2) Lambda.
struct OneRsbDiagnostics {
  double V = 0.0;
  Vector gradV;
  Matrix hessV_numeric;
  Matrix hessV_formula;
};

namespace detail {

inline double onersb_value(const SpeciesStructure& s, const ModelParams& p, const Vector& q1,
                           const Vector& q2, double zeta1, int nodes) {
  Vector zeta(3);
  zeta << 0.0, zeta1, 1.0;
  Matrix qseq(s.m, 4);
  qseq.col(0).setZero();
  qseq.col(1) = q1;
  qseq.col(2) = q2;
  qseq.col(3).setOnes();
  return parisi_value_raw(s, p, zeta, qseq, nodes);
}

}  // namespace detail

inline OneRsbDiagnostics onersb_perturbation(const SpeciesStructure& s, const ModelParams& p,
                                             const Vector& q_star, const Vector& pvec,
                                             double fd_step = 1e-4, int nodes = 32) {
  if (!is_positive_definite(s))
    throw NotPositiveDefinite("1-RSB perturbation requires positive-definite delta2");
  if (q_star.size() != s.m || pvec.size() != s.m)
    throw DimensionMismatch("q_star and p must have length m");
  if (fd_step < 1e-7) throw StepTooSmall("fd_step below rounding-noise floor");
  for (int i = 0; i < s.m; ++i)
    if (pvec(i) < q_star(i) - 1e-12 || pvec(i) > 1.0)
      throw BadParams("p must satisfy q*_s <= p_s <= 1");

  // Normalization: the plain zeta-derivative of the k=1 functional carries
  // half the curvature of the closed Hessian formula (checked analytically
  // in the scalar case), so V is defined as twice that derivative; the
  // zero-value and zero-gradient statements at p = q* are scale-invariant.
  const auto V_of = [&](const Vector& pv) {
    const auto D = [&](double dz) {
      return (detail::onersb_value(s, p, q_star, pv, 1.0 + dz, nodes) -
              detail::onersb_value(s, p, q_star, pv, 1.0 - dz, nodes)) /
             (2.0 * dz);
    };
    // wider zeta step: the Richardson-refined truncation is O(dz^4) while
    // rounding noise scales like 1/dz, and this V feeds second differences
    const double dz = 10.0 * fd_step;
    return 2.0 * (4.0 * D(0.5 * dz) - D(dz)) / 3.0;  // Richardson
  };

  OneRsbDiagnostics out;
  out.V = V_of(pvec);

  // forward differences (central would step below the p >= q* cone)
  const double v0_at_qstar = V_of(q_star);
  const auto grad_at = [&](double d) {
    Vector g(s.m);
    for (int t = 0; t < s.m; ++t) {
      Vector pp = q_star;
      pp(t) += d;
      g(t) = (V_of(pp) - v0_at_qstar) / d;
    }
    return g;
  };
  const Vector g1 = grad_at(fd_step);
  const Vector g2 = grad_at(0.5 * fd_step);
  out.gradV = 2.0 * g2 - g1;  // Richardson for the O(d) forward-difference error

  const double hd = 10.0 * fd_step;  // second differences need the larger step
  const auto hess_at = [&](double d) {
    Matrix h(s.m, s.m);
    std::vector<double> vt(s.m);
    for (int t = 0; t < s.m; ++t) {
      Vector pp = q_star;
      pp(t) += d;
      vt[t] = V_of(pp);
    }
    for (int t = 0; t < s.m; ++t) {
      for (int u = t; u < s.m; ++u) {
        Vector pp = q_star;
        pp(t) += d;
        pp(u) += d;
        const double vtu = V_of(pp);
        h(t, u) = h(u, t) = (vtu - vt[t] - vt[u] + v0_at_qstar) / (d * d);
      }
    }
    return h;
  };
  const Matrix h1 = hess_at(hd);
  const Matrix h2 = hess_at(0.5 * hd);
  out.hessV_numeric = 2.0 * h2 - h1;

  // closed form at q*: needs Gamma there
  Vector gamma(s.m);
  const Vector Q = s.delta2_lambda() * q_star;
  for (int i = 0; i < s.m; ++i) gamma(i) = moment_bundle(p, Q(i), kDefaultGhNodes).gamma;
  const double b2 = p.beta * p.beta;
  const Matrix L = s.Lambda();
  out.hessV_formula =
      sym(Matrix(b2 * L * (b2 * s.delta2 * L * Matrix(gamma.asDiagonal()) * s.delta2 -
                           s.delta2) * L));
  return out;
}

}  // namespace msk
