#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "msk/errors.hpp"
#include "msk/linalg.hpp"
#include "msk/model.hpp"
#include "msk/quadrature.hpp"

namespace msk {

enum class SolveMethod { Picard, Newton, Monotone2Species, GridScan };

inline const char* to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::Picard: return "picard";
    case SolveMethod::Newton: return "newton";
    case SolveMethod::Monotone2Species: return "monotone2species";
    case SolveMethod::GridScan: return "gridscan";
  }
  return "?";
}

/// A solved replica-symmetric fixed point together with the moment
/// diagonals used downstream:
///   gamma    = E sech^4                    (diagonal of Gamma)
///   gamma_p  = 1 - 4q + 3qhat              (diagonal of Gamma')
///   gamma_pp = 2q + q^2 - 3qhat            (diagonal of Gamma'')
struct RsSolution {
  SpeciesStructure structure;
  ModelParams params;
  Vector q;         // fixed point, in [0,1]^m
  Vector Qvec;      // Delta^2 Lambda q
  Vector qhat;      // E tanh^4 per species
  Vector gamma, gamma_p, gamma_pp;
  Vector logcosh_mean, logcosh_var;
  double residual = 0.0;  // sup_s |q_s - E tanh^2(...)|, re-checked at 2x nodes
  bool unique_certified = false;
  SolveMethod method = SolveMethod::Picard;
  int iterations = 0;

  Matrix Gamma() const { return Matrix(gamma.asDiagonal()); }
  Matrix GammaP() const { return Matrix(gamma_p.asDiagonal()); }
  Matrix GammaPP() const { return Matrix(gamma_pp.asDiagonal()); }
};

struct SolverOptions {
  double tol = 1e-12;
  int max_iter = 10000;
  int nodes = kDefaultGhNodes;
  // damping <= 0 selects the default rule: 1.0 below 0.9*beta_c, 0.5 above.
  double damping = -1.0;
};

namespace detail {

inline Vector species_field(const SpeciesStructure& s, const Vector& q) {
  Vector Q = s.delta2_lambda() * q;
  for (int i = 0; i < s.m; ++i) {
    if (Q(i) < 0.0) {
      if (Q(i) > -1e-14) { Q(i) = 0.0; continue; }  // round-off guard
      throw InfeasibleIterate("(Delta^2 Lambda q)_" + std::to_string(i + 1) + " = " +
                              std::to_string(Q(i)) + " < 0");
    }
  }
  return Q;
}

/// Phi_s(q) = E tanh^2(beta*eta*sqrt((Delta^2 Lambda q)_s) + h).
inline Vector fixed_point_map(const SpeciesStructure& s, const ModelParams& p,
                              const Vector& q, int nodes) {
  const Vector Q = species_field(s, q);
  Vector out(s.m);
  for (int i = 0; i < s.m; ++i) out(i) = expected_tanh2(p, Q(i), nodes);
  return out;
}

inline double residual_sup(const SpeciesStructure& s, const ModelParams& p,
                           const Vector& q, int nodes) {
  return sup_norm(Vector(q - fixed_point_map(s, p, q, nodes)));
}

inline bool certify_unique(const SpeciesStructure& s, const ModelParams& p) {
  const double beta_c = 1.0 / std::sqrt(spectral_radius(s.delta2_lambda()));
  return p.beta < beta_c;
}

inline RsSolution finalize(const SpeciesStructure& s, const ModelParams& p, const Vector& q,
                           SolveMethod method, bool certified, int iters, int nodes) {
  RsSolution sol;
  sol.structure = s;
  sol.params = p;
  sol.q = q;
  sol.Qvec = species_field(s, q);
  sol.qhat.resize(s.m);
  sol.gamma.resize(s.m);
  sol.gamma_p.resize(s.m);
  sol.gamma_pp.resize(s.m);
  sol.logcosh_mean.resize(s.m);
  sol.logcosh_var.resize(s.m);
  for (int i = 0; i < s.m; ++i) {
    const MomentBundle b = moment_bundle(p, sol.Qvec(i), nodes);
    sol.qhat(i) = b.qhat;
    sol.gamma(i) = 1.0 - 2.0 * sol.q(i) + b.qhat;
    sol.gamma_p(i) = 1.0 - 4.0 * sol.q(i) + 3.0 * b.qhat;
    sol.gamma_pp(i) = 2.0 * sol.q(i) + sol.q(i) * sol.q(i) - 3.0 * b.qhat;
    sol.logcosh_mean(i) = b.logcosh_mean;
    sol.logcosh_var(i) = b.logcosh_var;
  }
  // residual re-verified with doubled quadrature nodes
  sol.residual = std::max(residual_sup(s, p, q, nodes), residual_sup(s, p, q, 2 * nodes));
  sol.unique_certified = certified;
  sol.method = method;
  sol.iterations = iters;
  return sol;
}

inline double default_damping(const SpeciesStructure& s, const ModelParams& p) {
  const double beta_c = 1.0 / std::sqrt(spectral_radius(s.delta2_lambda()));
  return p.beta < 0.9 * beta_c ? 1.0 : 0.5;
}

}  // namespace detail

/// Default starting point: the beta = 0 root.
inline Vector default_start(const SpeciesStructure& s, const ModelParams& p) {
  const double t = std::tanh(p.h);
  return Vector::Constant(s.m, t * t);
}

/// Damped Picard iteration q <- (1-d) q + d Phi(q).
inline RsSolution solve_picard(const SpeciesStructure& s, const ModelParams& p,
                               const Vector& q0, SolverOptions opt = {}) {
  validate_structure(s);
  validate_params(p);
  if (q0.size() != s.m) throw DimensionMismatch("q0 length != m");
  const double damping = opt.damping > 0 ? opt.damping : detail::default_damping(s, p);
  Vector q = q0;
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iter; ++it) {
    const Vector phi = detail::fixed_point_map(s, p, q, opt.nodes);
    res = sup_norm(Vector(q - phi));
    if (res <= opt.tol)
      return detail::finalize(s, p, q, SolveMethod::Picard, detail::certify_unique(s, p),
                              it, opt.nodes);
    q = (1.0 - damping) * q + damping * phi;
  }
  throw NoConvergence("picard: max_iter=" + std::to_string(opt.max_iter) +
                      " reached, residual=" + std::to_string(res));
}

inline RsSolution solve_picard(const SpeciesStructure& s, const ModelParams& p,
                               SolverOptions opt = {}) {
  return solve_picard(s, p, default_start(s, p), opt);
}

/// Newton iteration on F(q) = q - Phi(q). The Jacobian of Phi follows from
/// Gaussian integration by parts: J(Phi) = beta^2 A Delta^2 Lambda with
/// a_s = (1/2) E f''(beta eta sqrt(Q_s) + h), f = tanh^2. Steps leaving
/// [0,1]^m fall back to damped Picard.
inline RsSolution solve_newton(const SpeciesStructure& s, const ModelParams& p,
                               const Vector& q0, SolverOptions opt = {}) {
  validate_structure(s);
  validate_params(p);
  if (q0.size() != s.m) throw DimensionMismatch("q0 length != m");
  Vector q = q0;
  const Matrix dl = s.delta2_lambda();
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iter; ++it) {
    const Vector Q = detail::species_field(s, q);
    Vector phi(s.m), a(s.m);
    for (int i = 0; i < s.m; ++i) {
      const MomentBundle b = moment_bundle(p, Q(i), opt.nodes);
      phi(i) = b.q;
      a(i) = b.half_fpp;
    }
    res = sup_norm(Vector(q - phi));
    if (res <= opt.tol)
      return detail::finalize(s, p, q, SolveMethod::Newton, detail::certify_unique(s, p),
                              it, opt.nodes);
    const Matrix jac = Matrix::Identity(s.m, s.m) - p.beta * p.beta * a.asDiagonal() * dl;
    Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) throw SingularJacobian("Jacobian of q - Phi(q) is singular");
    const Vector step = lu.solve(Vector(phi - q));
    const Vector qn = q + step;
    if ((qn.array() < 0.0).any() || (qn.array() > 1.0).any())
      q = q + 0.5 * (phi - q);  // damped Picard fallback keeps the box
    else
      q = qn;
  }
  throw NoConvergence("newton: max_iter=" + std::to_string(opt.max_iter) +
                      " reached, residual=" + std::to_string(res));
}

inline RsSolution solve_newton(const SpeciesStructure& s, const ModelParams& p,
                               SolverOptions opt = {}) {
  return solve_newton(s, p, default_start(s, p), opt);
}

namespace detail {

/// Bisection for a strictly decreasing continuous f with f(lo) > 0 > f(hi).
template <typename F>
double bisect_decreasing(F&& f, double lo, double hi, int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Bisection for a strictly increasing continuous f with f(lo) < y < f(hi).
template <typename F>
double bisect_increasing_inverse(F&& f, double y, double lo, double hi, int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < y) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Two-species indefinite case with h > 0, solved through the strictly
/// monotone scalar reductions of the fixed-point system: writing
/// A = Delta^2 Lambda and (Q1,Q2) = A q, the system becomes
///   Q2 = Q1 g1(Q1),  Q1 = Q2 g2(Q2),   g_i strictly decreasing,
/// so g1(Q1) g2(Q2) = 1 with Q2 = h2^{-1}(h1(Q1)) increasing
/// (h_i(x) = x^2 g_i(x) strictly increasing). One nested bisection.
/// Uniqueness holds for every beta > 0 here, so the result is certified.
inline RsSolution solve_indefinite_2species(const SpeciesStructure& s, const ModelParams& p,
                                            SolverOptions opt = {}) {
  validate_structure(s);
  validate_params(p);
  if (s.m != 2) throw NotIndefinite2x2("monotone solver requires m = 2");
  if (classify_definiteness(s).tag != Definiteness::Indefinite)
    throw NotIndefinite2x2("delta2 is positive-definite");
  if (!(p.h > 0.0)) throw ZeroField("monotone solver requires h > 0");

  const Matrix A = s.delta2_lambda();
  const Matrix Ainv = A.inverse();  // [[-a, b], [c, -d]], a,d >= 0, b,c > 0
  const double a = -Ainv(0, 0), b = Ainv(0, 1), c = Ainv(1, 0), d = -Ainv(1, 1);
  if (!(b > 0.0 && c > 0.0) || a < -1e-12 || d < -1e-12)
    throw NotIndefinite2x2("inverse of Delta^2 Lambda lacks the indefinite sign pattern");

  const auto T = [&](double x) { return expected_tanh2(p, x, opt.nodes); };
  const auto g1 = [&](double x) { return (T(x) / x + a) / b; };
  const auto g2 = [&](double x) { return (T(x) / x + d) / c; };
  const auto h2fun = [&](double x) { return (x * T(x) + d * x * x) / c; };

  const Vector Qmax2 = A * Vector::Ones(2);  // q <= 1 entrywise bounds Q
  double hi1 = std::max(Qmax2(0), Qmax2(1));
  const double lo = 1e-300;

  // h2^{-1}(h1(x)); expand the inner bracket until it encloses the target.
  const auto Q2_of_Q1 = [&](double x) {
    const double target = (x * T(x) + a * x * x) / b;  // h1(x)
    double hi = hi1;
    while (h2fun(hi) < target) hi *= 2.0;
    return detail::bisect_increasing_inverse(h2fun, target, lo, hi);
  };
  const auto root_fn = [&](double x) { return g1(x) * g2(Q2_of_Q1(x)) - 1.0; };
  while (root_fn(hi1) > 0.0) hi1 *= 2.0;  // ad/(bc) < 1 for indefinite delta2
  const double Q1 = detail::bisect_decreasing(root_fn, lo, hi1);
  const double Q2 = Q2_of_Q1(Q1);

  Vector q = Ainv * Vector(Eigen::Vector2d(Q1, Q2));
  q = q.cwiseMax(0.0).cwiseMin(1.0);
  // polish with a few Newton steps to hit the requested tolerance exactly
  try {
    SolverOptions polish = opt;
    polish.max_iter = 50;
    RsSolution sol = solve_newton(s, p, q, polish);
    sol.method = SolveMethod::Monotone2Species;
    sol.unique_certified = true;
    return sol;
  } catch (const NoConvergence&) {
    RsSolution sol = detail::finalize(s, p, q, SolveMethod::Monotone2Species, true, 0, opt.nodes);
    if (sol.residual > opt.tol)
      throw NoConvergence("monotone2species: residual " + std::to_string(sol.residual));
    return sol;
  }
}

/// Nonzero root hunt at h = 0, beta > beta_c: Picard from q0 = 0.5*1.
/// Uniqueness is unknown here, so the output is never certified. Collapse
/// to the zero root is reported as OnlyZeroFound, not as absence of roots.
inline RsSolution find_nonzero_root_h0(const SpeciesStructure& s, double beta,
                                       SolverOptions opt = {}) {
  validate_structure(s);
  const ModelParams p{beta, 0.0};
  SolverOptions o = opt;
  o.damping = 1.0;
  RsSolution sol = solve_picard(s, p, Vector::Constant(s.m, 0.5), o);
  if (sup_norm(sol.q) <= 100 * opt.tol)
    throw OnlyZeroFound("iteration collapsed to the zero root (beta <= beta_c?)");
  sol.unique_certified = false;
  return sol;
}

/// Brute-force root census on [0,1]^m (m <= 3): every local minimum of the
/// residual field below 0.1 is refined by Newton; distinct roots are
/// deduplicated at 1e-6 in sup norm and returned sorted lexicographically.
inline std::vector<RsSolution> grid_scan_roots(const SpeciesStructure& s, const ModelParams& p,
                                               int grid_per_axis, SolverOptions opt = {}) {
  validate_structure(s);
  validate_params(p);
  if (s.m > 3) throw DimensionTooLarge("grid scan supports m <= 3");
  if (grid_per_axis < 2) throw BadParams("grid_per_axis must be >= 2");

  const int g = grid_per_axis;
  const int total = static_cast<int>(std::pow(g, s.m));
  std::vector<double> res(total);
  const auto point = [&](int idx) {
    Vector q(s.m);
    for (int d = 0; d < s.m; ++d) {
      q(d) = static_cast<double>(idx % g) / (g - 1);
      idx /= g;
    }
    return q;
  };
  for (int i = 0; i < total; ++i) res[i] = detail::residual_sup(s, p, point(i), opt.nodes);

  std::vector<RsSolution> roots;
  for (int i = 0; i < total; ++i) {
    if (res[i] >= 0.1) continue;
    bool is_min = true;
    int idx = i;
    for (int d = 0; d < s.m && is_min; ++d) {
      const int coord = (idx / static_cast<int>(std::pow(g, d))) % g;
      const int stride = static_cast<int>(std::pow(g, d));
      if (coord > 0 && res[i - stride] < res[i]) is_min = false;
      if (coord < g - 1 && res[i + stride] < res[i]) is_min = false;
    }
    if (!is_min) continue;
    try {
      RsSolution sol = solve_newton(s, p, point(i), opt);
      sol.method = SolveMethod::GridScan;
      if (sol.residual <= opt.tol) roots.push_back(std::move(sol));
    } catch (const Error&) {
      // refinement failed from this basin; neighbours cover the root
    }
  }
  // dedup within 1e-6 sup norm, keep the smaller-residual representative
  std::vector<RsSolution> unique;
  for (auto& r : roots) {
    bool dup = false;
    for (auto& u : unique) {
      if (sup_norm(Vector(r.q - u.q)) < 1e-6) {
        dup = true;
        if (r.residual < u.residual) u = r;
        break;
      }
    }
    if (!dup) unique.push_back(std::move(r));
  }
  std::sort(unique.begin(), unique.end(), [](const RsSolution& x, const RsSolution& y) {
    return std::lexicographical_compare(x.q.data(), x.q.data() + x.q.size(),
                                        y.q.data(), y.q.data() + y.q.size());
  });
  return unique;
}

/// Method selection used by the CLI: the monotone solver where its
/// uniqueness result applies, Picard elsewhere, Newton as fallback.
inline RsSolution solve_auto(const SpeciesStructure& s, const ModelParams& p,
                             SolverOptions opt = {}) {
  validate_structure(s);
  validate_params(p);
  if (s.m == 2 && p.h > 0.0 &&
      classify_definiteness(s).tag == Definiteness::Indefinite)
    return solve_indefinite_2species(s, p, opt);
  try {
    return solve_picard(s, p, opt);
  } catch (const NoConvergence&) {
    return solve_newton(s, p, opt);
  }
}

}  // namespace msk
