#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "msk/errors.hpp"
#include "msk/model.hpp"

namespace msk {

/// Gauss-Hermite rule for weight exp(-x^2) on (-inf, inf):
/// int f(x) e^{-x^2} dx ~= sum w_i f(x_i), weights sum to sqrt(pi).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

inline GaussHermiteRule build_gauss_hermite(int n) {
  // Golub-Welsch: the Jacobi matrix of the Hermite recurrence has zero
  // diagonal and off-diagonal sqrt(k/2).
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(0.5 * k);
    j(k, k - 1) = b;
    j(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  if (es.info() != Eigen::Success) throw EigenFailure("Gauss-Hermite Jacobi eigensolve failed");
  GaussHermiteRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const double mu0 = std::sqrt(M_PI);  // int e^{-x^2} dx
  for (int i = 0; i < n; ++i) {
    r.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    r.weights[i] = mu0 * v0 * v0;
  }
  return r;
}

}  // namespace detail

/// Shared node table, built once per node count.
inline const GaussHermiteRule& gauss_hermite_rule(int n) {
  if (n < 1) throw BadParams("node count must be positive");
  static std::map<int, GaussHermiteRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::build_gauss_hermite(n)).first;
  return it->second;
}

constexpr int kDefaultGhNodes = 64;

/// Overflow-safe log cosh.
inline double log_cosh(double y) {
  return std::abs(y) + std::log1p(std::exp(-2.0 * std::abs(y))) - M_LN2;
}

namespace detail {

/// 16-point Gauss-Legendre rule on [-1,1], generated by Newton iteration on
/// the Legendre recurrence (no table constants to mistype).
struct GaussLegendre16 {
  double x[16];
  double w[16];
  GaussLegendre16() {
    const int n = 16;
    for (int i = 0; i < n / 2; ++i) {
      double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (t * p1 - p0) / (t * t - 1.0);
        const double step = p1 / dp;
        t -= step;
        if (std::abs(step) < 1e-16) break;
      }
      const double wt = 2.0 / ((1.0 - t * t) * dp * dp);
      x[i] = -t;
      x[n - 1 - i] = t;
      w[i] = wt;
      w[n - 1 - i] = wt;
    }
  }
};

inline const GaussLegendre16& gl16() {
  static const GaussLegendre16 rule;
  return rule;
}

}  // namespace detail

/// Quadrature rule for E f(mu + sigma*eta), eta ~ N(0,1), expressed in
/// standard-normal units: E f ~= sum_i w_i f(mu + sigma * x_i), weights
/// absorbing the Gaussian density.
///
/// Below kGhSigmaLimit the plain n-node Gauss-Hermite rule is used (it
/// converges past 1e-13 there for the tanh/log-cosh family, whose nearest
/// complex singularities sit at distance pi/2). Beyond it the pole distance
/// in scaled units shrinks like 1/sigma and Gauss-Hermite stalls, so the
/// rule switches to composite 16-point Gauss-Legendre panels over
/// [-13, 13] with panel count proportional to sigma * n. Both branches are
/// fixed, non-adaptive node sets: identical inputs give identical nodes.
struct GaussianRule {
  std::vector<double> x;
  std::vector<double> w;
};

constexpr double kGhSigmaLimit = 0.7;

inline GaussianRule gaussian_rule(double sigma, int n) {
  GaussianRule r;
  if (sigma <= kGhSigmaLimit) {
    const GaussHermiteRule& gh = gauss_hermite_rule(n);
    const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
      r.x[i] = std::sqrt(2.0) * gh.nodes[i];
      r.w[i] = gh.weights[i] * inv_sqrt_pi;
    }
    return r;
  }
  const double span = 13.0;
  const int panels =
      std::max(8, static_cast<int>(std::ceil(2.0 * span * sigma * (n / 64.0))));
  const auto& gl = detail::gl16();
  const double width = 2.0 * span / panels;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
  r.x.reserve(16 * panels);
  r.w.reserve(16 * panels);
  for (int p = 0; p < panels; ++p) {
    const double a = -span + p * width;
    for (int k = 0; k < 16; ++k) {
      const double xx = a + 0.5 * width * (gl.x[k] + 1.0);
      r.x.push_back(xx);
      r.w.push_back(0.5 * width * gl.w[k] * inv_sqrt_2pi * std::exp(-0.5 * xx * xx));
    }
  }
  return r;
}

/// E g(sigma*eta + mu) for eta ~ N(0,1), by an n-node Gauss-Hermite rule.
/// sigma = 0 is an exact point evaluation. Exact for polynomial g of degree
/// <= 2n-1.
template <typename G>
double gauss_hermite_expect(G&& g, double mu, double sigma, int nodes = kDefaultGhNodes) {
  if (!(sigma >= 0.0)) throw NegativeVariance("sigma must be >= 0");
  if (sigma == 0.0) {
    const double v = g(mu);
    if (!std::isfinite(v)) throw NonFiniteValue("integrand not finite at mu");
    return v;
  }
  const GaussianRule r = gaussian_rule(sigma, nodes);
  double acc = 0.0;
  for (size_t i = 0; i < r.x.size(); ++i) {
    const double v = g(mu + sigma * r.x[i]);
    if (!std::isfinite(v))
      throw NonFiniteValue("integrand not finite at node " + std::to_string(i));
    acc += r.w[i] * v;
  }
  return acc;
}

/// Gaussian moments of the effective single-spin field beta*eta*sqrt(Qs)+h:
///   q    = E tanh^2     qhat = E tanh^4     gamma = E sech^4
/// plus mean and variance of log cosh. Always satisfies
/// 0 <= qhat <= q <= 1 and gamma = 1 - 2q + qhat up to quadrature error.
struct MomentBundle {
  double q = 0.0;
  double qhat = 0.0;
  double gamma = 1.0;
  double logcosh_mean = 0.0;
  double logcosh_var = 0.0;
  // extra moments used by the solvers; cheap to carry along
  double tanh2_sech2 = 0.0;   // E tanh^2 sech^2
  double half_fpp = 1.0;      // (1/2) E d^2/dy^2 tanh^2(y) = E (1-2 sinh^2)/cosh^4
};

inline MomentBundle moment_bundle(const ModelParams& p, double Qs,
                                  int nodes = kDefaultGhNodes) {
  if (Qs < 0.0)
    throw NegativeVariance("species field variance (Delta^2 Lambda q)_s = " +
                           std::to_string(Qs) + " < 0");
  const double mu = p.h;
  const double sigma = p.beta * std::sqrt(Qs);
  MomentBundle b;
  if (sigma == 0.0) {
    const double t = std::tanh(mu);
    const double c = std::cosh(mu);
    const double s2 = 1.0 - t * t;  // sech^2
    b.q = t * t;
    b.qhat = t * t * t * t;
    b.gamma = s2 * s2;
    b.logcosh_mean = std::log(c);
    b.logcosh_var = 0.0;
    b.tanh2_sech2 = t * t * s2;
    b.half_fpp = (1.0 - 2.0 * std::sinh(mu) * std::sinh(mu)) * s2 * s2;
    return b;
  }
  const GaussianRule r = gaussian_rule(sigma, nodes);
  double sq = 0, sq4 = 0, sg = 0, slc = 0, slc2 = 0, sts = 0, sfpp = 0;
  for (size_t i = 0; i < r.x.size(); ++i) {
    const double y = mu + sigma * r.x[i];
    const double w = r.w[i];
    const double t = std::tanh(y);
    const double t2 = t * t;
    const double s2 = 1.0 - t2;
    const double lc = log_cosh(y);
    const double sinh2 = t2 / (s2 > 0 ? s2 : 1e-300);  // sinh^2 = tanh^2/sech^2
    sq += w * t2;
    sq4 += w * t2 * t2;
    sg += w * s2 * s2;
    slc += w * lc;
    slc2 += w * lc * lc;
    sts += w * t2 * s2;
    sfpp += w * (1.0 - 2.0 * sinh2) * s2 * s2;
  }
  b.q = sq;
  b.qhat = sq4;
  b.gamma = sg;
  b.logcosh_mean = slc;
  b.logcosh_var = std::max(0.0, slc2 - b.logcosh_mean * b.logcosh_mean);
  b.tanh2_sech2 = sts;
  b.half_fpp = sfpp;
  return b;
}

/// E tanh^2(beta*eta*sqrt(Qs)+h), the fixed-point map's scalar kernel.
inline double expected_tanh2(const ModelParams& p, double Qs, int nodes = kDefaultGhNodes) {
  if (Qs < 0.0) throw NegativeVariance("negative field variance");
  return gauss_hermite_expect([](double y) { const double t = std::tanh(y); return t * t; },
                              p.h, p.beta * std::sqrt(Qs), nodes);
}

}  // namespace msk
