#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "msk/errors.hpp"
#include "msk/linalg.hpp"
#include "msk/model.hpp"
#include "msk/parallel.hpp"
#include "msk/rng.hpp"
#include "msk/rs_solver.hpp"

namespace msk {

/// One realization of the Gaussian couplings. Stored as a full symmetric
/// matrix with zero diagonal; entry (i,j) has variance delta2_{s(i) s(j)}.
/// Fully reproducible from (seed, i, j) through the counter-based generator.
struct DisorderSample {
  int N = 0;
  std::vector<int> species_sizes;   // length m, sums to N
  std::vector<int> species_of;      // length N
  Matrix couplings;                 // symmetric, zero diagonal
  uint64_t seed = 0;
};

/// Species sizes by largest-remainder rounding of lambda_s * N.
inline std::vector<int> species_sizes_for(const SpeciesStructure& s, int N) {
  std::vector<int> sizes(s.m);
  std::vector<std::pair<double, int>> rem(s.m);
  int assigned = 0;
  for (int i = 0; i < s.m; ++i) {
    const double exact = s.lambda(i) * N;
    sizes[i] = static_cast<int>(std::floor(exact));
    rem[i] = {exact - sizes[i], i};
    assigned += sizes[i];
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int k = 0; k < N - assigned; ++k) ++sizes[rem[k % s.m].second];
  return sizes;
}

inline DisorderSample sample_disorder(const SpeciesStructure& s, int N, uint64_t seed) {
  validate_structure(s);
  if (N < s.m) throw BadSize("N must be at least the species count");
  DisorderSample d;
  d.N = N;
  d.seed = seed;
  d.species_sizes = species_sizes_for(s, N);
  for (int i = 0; i < s.m; ++i)
    if (d.species_sizes[i] == 0)
      throw BadSize("species " + std::to_string(i + 1) + " is empty at N = " + std::to_string(N));
  d.species_of.resize(N);
  int pos = 0;
  for (int sp = 0; sp < s.m; ++sp)
    for (int c = 0; c < d.species_sizes[sp]; ++c) d.species_of[pos++] = sp;
  d.couplings = Matrix::Zero(N, N);
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      const double sd = std::sqrt(s.delta2(d.species_of[i], d.species_of[j]));
      const double g = sd * gaussian_at(seed, static_cast<uint32_t>(i), static_cast<uint32_t>(j));
      d.couplings(i, j) = g;
      d.couplings(j, i) = g;
    }
  }
  return d;
}

/// Gibbs averages for one disorder realization. `exact` marks enumeration
/// output (two_point may be subsampled above N = 20, which clears it).
/// The se_* fields are filled by the MCMC estimator only.
struct GibbsEstimate {
  Vector one_point;   // <sigma_i>
  Matrix two_point;   // <sigma_i sigma_j>, symmetric, unit diagonal
  double logZ = 0.0;
  double F_N = 0.0;
  bool exact = true;
  bool has_two_point = true;
  Vector se_one_point;
  Matrix se_two_point;
  double se_logZ = 0.0;
  double tau_int = 0.0;
};

namespace detail {

struct GrayWalk {
  // state of the incremental enumeration
  std::vector<double> sigma;  // +-1
  std::vector<double> local;  // local fields L_i = sum_j g_ij sigma_j
  double S;                   // sum_{i<j} g_ij sigma_i sigma_j
  double M;                   // sum_i sigma_i

  GrayWalk(const Matrix& g, int N) {
    sigma.assign(N, 1.0);
    local.resize(N);
    for (int i = 0; i < N; ++i) local[i] = g.row(i).sum();
    S = 0.0;
    for (int i = 0; i < N; ++i) S += local[i];
    S *= 0.5;
    M = N;
  }

  void flip(const Matrix& g, int k) {
    const double sk = sigma[k];
    S -= 2.0 * sk * local[k];
    M -= 2.0 * sk;
    const int N = static_cast<int>(sigma.size());
    const double step = -2.0 * sk;
    for (int j = 0; j < N; ++j) local[j] += step * g(j, k);
    sigma[k] = -sk;
  }
};

struct StreamingLse {
  double lmax = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  void add(double e) {
    if (e <= lmax) {
      acc += std::exp(e - lmax);
    } else {
      acc = acc * std::exp(lmax - e) + 1.0;
      lmax = e;
    }
  }
  double value() const { return lmax + std::log(acc); }
};

}  // namespace detail

/// Exact Gibbs averages by full enumeration (2^N configurations, N <= 24).
/// Energies are updated by Gray-code single-spin flips and log Z accumulated
/// by a streaming log-sum-exp. At h = 0 the +-sigma symmetry halves the walk
/// and makes one_point exactly zero. For N > 20 the two-point accumulation
/// is strided (flagged non-exact); log Z stays exact.
inline GibbsEstimate exact_gibbs(const DisorderSample& d, const ModelParams& p,
                                 bool want_two_point = true) {
  validate_params(p);
  const int N = d.N;
  if (N > 24) throw TooLarge("enumeration supports N <= 24");
  const double coupling_scale = p.beta / std::sqrt(static_cast<double>(N));
  const bool half_space = (p.h == 0.0);
  const int nwalk = half_space ? N - 1 : N;
  const uint64_t steps = 1ull << nwalk;

  // pass 1: log Z
  detail::GrayWalk w1(d.couplings, N);
  detail::StreamingLse lse;
  lse.add(coupling_scale * w1.S + p.h * w1.M);
  for (uint64_t t = 1; t < steps; ++t) {
    w1.flip(d.couplings, std::countr_zero(t));
    lse.add(coupling_scale * w1.S + p.h * w1.M);
  }
  GibbsEstimate out;
  out.logZ = lse.value() + (half_space ? M_LN2 : 0.0);
  out.F_N = out.logZ / N;
  out.exact = true;
  out.has_two_point = want_two_point;
  out.one_point = Vector::Zero(N);
  if (!want_two_point) {
    out.two_point = Matrix();
    out.has_two_point = false;
    return out;
  }

  // pass 2: normalized moment accumulation
  const uint64_t stride = N > 20 ? (1ull << (N - 20)) : 1;
  if (stride > 1) out.exact = false;
  Matrix acc2 = Matrix::Zero(N, N);
  Vector acc1 = Vector::Zero(N);
  detail::GrayWalk w2(d.couplings, N);
  const double wfactor = (half_space ? 2.0 : 1.0) * static_cast<double>(stride);
  uint64_t t = 0;
  while (true) {
    if (t % stride == 0) {
      const double e = coupling_scale * w2.S + p.h * w2.M;
      const double wgt = wfactor * std::exp(e - out.logZ);
      const double* sig = w2.sigma.data();
      if (!half_space)
        for (int i = 0; i < N; ++i) acc1(i) += wgt * sig[i];
      // lower triangle, column-major contiguous writes
      for (int j = 0; j < N; ++j) {
        const double wj = wgt * sig[j];
        double* col = acc2.data() + static_cast<ptrdiff_t>(j) * N;
        for (int i = j; i < N; ++i) col[i] += wj * sig[i];
      }
    }
    if (++t >= steps) break;
    w2.flip(d.couplings, std::countr_zero(t));
  }
  out.one_point = acc1;
  out.two_point = Matrix(N, N);
  for (int i = 0; i < N; ++i) {
    out.two_point(i, i) = 1.0;
    for (int j = 0; j < i; ++j) {
      const double v = acc2(i, j);
      out.two_point(i, j) = v;
      out.two_point(j, i) = v;
    }
  }
  return out;
}

/// Single-site Metropolis with optional replica exchange across a
/// temperature ladder; log Z estimated by thermodynamic integration in beta
/// from the decoupled system. Error bars from 32-way block averaging; the
/// integrated autocorrelation time of the energy series is attached.
inline GibbsEstimate mcmc_gibbs(const DisorderSample& d, const ModelParams& p, int sweeps,
                                int n_replicas, std::vector<double> ladder = {}) {
  validate_params(p);
  const int N = d.N;
  if (sweeps < 10) throw LadderMisconfigured("need at least 10 sweeps");
  if (ladder.empty()) {
    if (n_replicas < 1) throw LadderMisconfigured("n_replicas must be >= 1");
    if (n_replicas == 1) {
      ladder = {p.beta};
    } else {
      ladder.resize(n_replicas);
      for (int r = 0; r < n_replicas; ++r)
        ladder[r] = p.beta * static_cast<double>(r) / (n_replicas - 1);
    }
  }
  if (static_cast<int>(ladder.size()) != n_replicas)
    throw LadderMisconfigured("ladder size != n_replicas");
  for (size_t r = 0; r + 1 < ladder.size(); ++r)
    if (!(ladder[r] <= ladder[r + 1])) throw LadderMisconfigured("ladder must be ascending");
  if (ladder.front() < 0.0) throw LadderMisconfigured("negative temperature point");
  if (std::abs(ladder.back() - p.beta) > 1e-12)
    throw LadderMisconfigured("ladder must end at the target beta");

  const int R = n_replicas;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(N));
  std::vector<std::vector<double>> sigma(R), local(R);
  std::vector<double> S(R), M(R);
  std::vector<PhiloxStream> rng;
  rng.reserve(R + 1);
  for (int r = 0; r <= R; ++r) rng.emplace_back(d.seed, 0x4D43u + r);

  for (int r = 0; r < R; ++r) {
    sigma[r].resize(N);
    for (int i = 0; i < N; ++i) sigma[r][i] = rng[r].uniform() < 0.5 ? -1.0 : 1.0;
    local[r].resize(N);
    for (int i = 0; i < N; ++i) {
      double acc = 0.0;
      for (int j = 0; j < N; ++j) acc += d.couplings(i, j) * sigma[r][j];
      local[r][i] = acc;
    }
    S[r] = 0.0;
    for (int i = 0; i < N; ++i) S[r] += sigma[r][i] * local[r][i];
    S[r] *= 0.5;
    M[r] = std::accumulate(sigma[r].begin(), sigma[r].end(), 0.0);
  }

  const int burn = std::max(10, sweeps / 5);
  const int measured = sweeps - burn;
  const int nblocks = std::min(32, std::max(1, measured / 4));
  Vector acc1 = Vector::Zero(N);
  Matrix acc2 = Matrix::Zero(N, N);
  std::vector<Vector> block1(nblocks, Vector::Zero(N));
  std::vector<Matrix> block2(nblocks, Matrix::Zero(N, N));
  std::vector<int> block_count(nblocks, 0);
  std::vector<double> pbar(R, 0.0);  // <P> per ladder point, P = S/sqrt(N)
  std::vector<double> energy_series;
  energy_series.reserve(measured);

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int r = 0; r < R; ++r) {
      const double br = ladder[r];
      auto& sig = sigma[r];
      auto& loc = local[r];
      for (int i = 0; i < N; ++i) {
        const double delta = -2.0 * sig[i] * (br * inv_sqrt_n * loc[i] + p.h);
        if (delta >= 0.0 || rng[r].uniform() < std::exp(delta)) {
          const double si = sig[i];
          S[r] -= 2.0 * si * loc[i];
          M[r] -= 2.0 * si;
          for (int j = 0; j < N; ++j) loc[j] -= 2.0 * si * d.couplings(j, i);
          sig[i] = -si;
        }
      }
    }
    // replica exchange between adjacent ladder points, alternating parity
    for (int r = sweep % 2; r + 1 < R; r += 2) {
      const double arg = (ladder[r] - ladder[r + 1]) * (S[r + 1] - S[r]) * inv_sqrt_n;
      if (arg >= 0.0 || rng[R].uniform() < std::exp(arg)) {
        std::swap(sigma[r], sigma[r + 1]);
        std::swap(local[r], local[r + 1]);
        std::swap(S[r], S[r + 1]);
        std::swap(M[r], M[r + 1]);
      }
    }
    if (sweep >= burn) {
      const int t = sweep - burn;
      const int blk = std::min(nblocks - 1, t * nblocks / measured);
      const auto& sig = sigma[R - 1];
      for (int i = 0; i < N; ++i) {
        acc1(i) += sig[i];
        block1[blk](i) += sig[i];
      }
      for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) {
          acc2(i, j) += sig[i] * sig[j];
          block2[blk](i, j) += sig[i] * sig[j];
        }
      ++block_count[blk];
      for (int r = 0; r < R; ++r) pbar[r] += S[r] * inv_sqrt_n;
      energy_series.push_back(S[R - 1] * inv_sqrt_n);
    }
  }

  GibbsEstimate out;
  out.exact = false;
  out.one_point = acc1 / measured;
  out.two_point = Matrix(N, N);
  for (int i = 0; i < N; ++i) {
    out.two_point(i, i) = 1.0;
    for (int j = 0; j < i; ++j) {
      const double v = acc2(i, j) / measured;
      out.two_point(i, j) = v;
      out.two_point(j, i) = v;
    }
  }

  // thermodynamic integration: log Z(beta) = N log(2 cosh h) + int_0^beta <P>_b db
  for (int r = 0; r < R; ++r) pbar[r] /= measured;
  double integral = 0.0;
  double prev_b = 0.0, prev_p = 0.0;  // <P> = 0 exactly at beta = 0
  for (int r = 0; r < R; ++r) {
    integral += 0.5 * (pbar[r] + prev_p) * (ladder[r] - prev_b);
    prev_b = ladder[r];
    prev_p = pbar[r];
  }
  out.logZ = N * (M_LN2 + log_cosh(p.h)) + integral;
  out.F_N = out.logZ / N;

  // block-averaged error bars
  out.se_one_point = Vector::Zero(N);
  out.se_two_point = Matrix::Zero(N, N);
  if (nblocks > 1) {
    for (int i = 0; i < N; ++i) {
      double mean = out.one_point(i), ss = 0.0;
      for (int b = 0; b < nblocks; ++b) {
        const double bm = block1[b](i) / block_count[b];
        ss += (bm - mean) * (bm - mean);
      }
      out.se_one_point(i) = std::sqrt(ss / (nblocks * (nblocks - 1.0)));
    }
    for (int i = 0; i < N; ++i)
      for (int j = 0; j <= i; ++j) {
        const double mean = out.two_point(i, j);
        double ss = 0.0;
        for (int b = 0; b < nblocks; ++b) {
          const double bm = block2[b](i, j) / block_count[b];
          ss += (bm - mean) * (bm - mean);
        }
        const double se = std::sqrt(ss / (nblocks * (nblocks - 1.0)));
        out.se_two_point(i, j) = se;
        out.se_two_point(j, i) = se;
      }
  }

  // integrated autocorrelation time of the pair-energy series (Sokal window)
  out.tau_int = 0.5;
  if (energy_series.size() > 16) {
    const int n = static_cast<int>(energy_series.size());
    double mean = 0.0;
    for (double e : energy_series) mean += e;
    mean /= n;
    double var = 0.0;
    for (double e : energy_series) var += (e - mean) * (e - mean);
    var /= n;
    if (var > 0.0) {
      double tau = 0.5;
      for (int lag = 1; lag < n / 4; ++lag) {
        double c = 0.0;
        for (int t = 0; t + lag < n; ++t)
          c += (energy_series[t] - mean) * (energy_series[t + lag] - mean);
        c /= (n - lag) * var;
        tau += c;
        if (lag >= 6.0 * tau) break;
      }
      out.tau_int = std::max(0.5, tau);
    }
  }
  out.se_logZ = std::abs(p.beta) * std::sqrt(2.0 * out.tau_int / std::max(1, measured));
  return out;
}

/// Overlap variance-covariance estimates from repeated disorder draws.
/// Two-replica Gibbs averages are obtained from one-replica correlations
/// through the independent-replica factorization (never by enumerating
/// replica pairs):
///   <R12 R12> block -> <s_i s_j>^2
///   <R12 R13> block -> <s_i s_j><s_i><s_j>
///   <R12 R34> block -> <s_i>^2 <s_j>^2
/// centered at the supplied theoretical fixed point q. Standard errors are
/// jackknife over disorder samples.
struct OverlapMoments {
  Matrix U0, U1, U2;
  Vector q_used;
  int n_disorder = 0;
  Matrix std_err0, std_err1, std_err2;
};

namespace detail {

struct PerSampleOverlap {
  Matrix u0, u1, u2;
};

inline PerSampleOverlap overlap_from_gibbs(const SpeciesStructure& s, const DisorderSample& d,
                                           const GibbsEstimate& g, const Vector& q) {
  const int m = s.m;
  const int N = d.N;
  Matrix S2 = Matrix::Zero(m, m), S1 = Matrix::Zero(m, m), S0 = Matrix::Zero(m, m);
  Vector r = Vector::Zero(m);
  for (int i = 0; i < N; ++i) {
    const int si = d.species_of[i];
    const double oi = g.one_point(i);
    r(si) += oi * oi;
    for (int j = 0; j < N; ++j) {
      const int sj = d.species_of[j];
      const double t = g.two_point(i, j);
      const double oj = g.one_point(j);
      S2(si, sj) += t * t;
      S1(si, sj) += t * oi * oj;
      S0(si, sj) += oi * oi * oj * oj;
    }
  }
  Vector inv_sz(m);
  for (int sp = 0; sp < m; ++sp) inv_sz(sp) = 1.0 / d.species_sizes[sp];
  r = r.cwiseProduct(inv_sz);
  const Matrix norm = inv_sz * inv_sz.transpose();
  S2 = S2.cwiseProduct(norm);
  S1 = S1.cwiseProduct(norm);
  S0 = S0.cwiseProduct(norm);

  PerSampleOverlap out;
  out.u2 = Matrix(m, m);
  out.u1 = Matrix(m, m);
  out.u0 = Matrix(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      const double c = -q(b) * r(a) - q(a) * r(b) + q(a) * q(b);
      out.u2(a, b) = S2(a, b) + c;
      out.u1(a, b) = S1(a, b) + c;
      out.u0(a, b) = S0(a, b) + c;
    }
  return out;
}

inline Matrix jackknife_se(const std::vector<Matrix>& xs, const Matrix& mean) {
  const int n = static_cast<int>(xs.size());
  Matrix se = Matrix::Zero(mean.rows(), mean.cols());
  if (n < 2) return se;
  for (const Matrix& x : xs) {
    const Matrix loo = (mean * n - x) / (n - 1);  // leave-one-out mean
    se += (loo - mean).cwiseProduct(loo - mean);
  }
  return (se * (n - 1.0) / n).cwiseSqrt();
}

}  // namespace detail

inline OverlapMoments overlap_moments(const SpeciesStructure& s, const ModelParams& p,
                                      const Vector& q, int N, int n_disorder, uint64_t seed,
                                      int threads = 0) {
  validate_structure(s);
  if (q.size() != s.m) throw DimensionMismatch("q length != m");
  const uint64_t base = splitmix64(seed);
  std::vector<detail::PerSampleOverlap> samples(n_disorder);
  parallel_for(n_disorder, threads, [&](int k) {
    const DisorderSample d = sample_disorder(s, N, splitmix64(base + k));
    const GibbsEstimate g = exact_gibbs(d, p);
    samples[k] = detail::overlap_from_gibbs(s, d, g, q);
  });
  OverlapMoments out;
  out.q_used = q;
  out.n_disorder = n_disorder;
  out.U0 = Matrix::Zero(s.m, s.m);
  out.U1 = Matrix::Zero(s.m, s.m);
  out.U2 = Matrix::Zero(s.m, s.m);
  std::vector<Matrix> x0, x1, x2;
  for (const auto& ps : samples) {
    out.U0 += ps.u0;
    out.U1 += ps.u1;
    out.U2 += ps.u2;
    x0.push_back(ps.u0);
    x1.push_back(ps.u1);
    x2.push_back(ps.u2);
  }
  out.U0 /= n_disorder;
  out.U1 /= n_disorder;
  out.U2 /= n_disorder;
  out.std_err0 = detail::jackknife_se(x0, out.U0);
  out.std_err1 = detail::jackknife_se(x1, out.U1);
  out.std_err2 = detail::jackknife_se(x2, out.U2);
  return out;
}

/// Empirical check of the exponential overlap-concentration bound:
/// nu(exp(eta N P(R12 - q))) estimated by Monte Carlo over replica pairs
/// drawn exactly from the Gibbs measure of each disorder sample, against
/// the determinant bound.
struct ConcentrationResult {
  double empirical = 0.0;
  double bound = 0.0;  // +infinity when the bound is not asserted
  double std_err = 0.0;
  double eta = 0.0;
};

inline ConcentrationResult concentration_experiment(const SpeciesStructure& s,
                                                    const ModelParams& p, double eta, int N,
                                                    int n_disorder, uint64_t seed,
                                                    int n_pairs = 256) {
  validate_structure(s);
  validate_params(p);
  if (N > 20) throw TooLarge("pair sampling supports N <= 20");

  const Vector q = solve_auto(s, p).q;
  const Matrix W = Matrix(s.lambda_sqrt().asDiagonal()) * matrix_abs_V(s) *
                   Matrix(s.lambda_sqrt().asDiagonal());

  const uint64_t base = splitmix64(seed ^ 0xC04E57ull);
  std::vector<double> per_disorder(n_disorder);
  parallel_for(n_disorder, 0, [&](int k) {
    const DisorderSample d = sample_disorder(s, N, splitmix64(base + k));
    const double coupling_scale = p.beta / std::sqrt(static_cast<double>(N));
    const uint64_t configs = 1ull << N;

    // Boltzmann weights over all configurations, indexed by the spin bitmask
    std::vector<double> logw(configs);
    detail::GrayWalk w(d.couplings, N);
    uint64_t gray = 0;
    logw[0] = coupling_scale * w.S + p.h * w.M;
    for (uint64_t t = 1; t < configs; ++t) {
      const int k2 = std::countr_zero(t);
      w.flip(d.couplings, k2);
      gray ^= (1ull << k2);
      logw[gray] = coupling_scale * w.S + p.h * w.M;
    }
    const double lmax = *std::max_element(logw.begin(), logw.end());
    std::vector<double> cdf(configs);
    double acc = 0.0;
    for (uint64_t c = 0; c < configs; ++c) {
      acc += std::exp(logw[c] - lmax);
      cdf[c] = acc;
    }
    const double total = acc;

    std::vector<uint64_t> species_mask(s.m, 0);
    for (int i = 0; i < N; ++i) species_mask[d.species_of[i]] |= (1ull << i);

    PhiloxStream rng(splitmix64(base + k), 0x504152u);
    const auto draw = [&]() {
      const double u = rng.uniform() * total;
      return static_cast<uint64_t>(
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    };
    double mean = 0.0;
    Vector rbar(s.m);
    for (int pair = 0; pair < n_pairs; ++pair) {
      const uint64_t c1 = draw(), c2 = draw();
      const uint64_t x = c1 ^ c2;  // set bits: sigma^1_i sigma^2_i = -1
      for (int sp = 0; sp < s.m; ++sp) {
        const int n_sp = d.species_sizes[sp];
        const int diff = std::popcount(x & species_mask[sp]);
        rbar(sp) = static_cast<double>(n_sp - 2 * diff) / n_sp - q(sp);
      }
      mean += std::exp(eta * N * rbar.dot(W * rbar));
    }
    per_disorder[k] = mean / n_pairs;
  });

  ConcentrationResult out;
  out.eta = eta;
  out.empirical = std::accumulate(per_disorder.begin(), per_disorder.end(), 0.0) / n_disorder;
  double ss = 0.0;
  for (double v : per_disorder) ss += (v - out.empirical) * (v - out.empirical);
  out.std_err = n_disorder > 1 ? std::sqrt(ss / (n_disorder * (n_disorder - 1.0))) : 0.0;
  // bound filled by the caller (needs spectral_phase); kept separate to
  // avoid a header cycle
  out.bound = std::numeric_limits<double>::quiet_NaN();
  return out;
}

/// Free-energy fluctuation experiment: per-disorder F_N by enumeration,
/// scaled variance N Var(F_N), and the Kolmogorov-Smirnov distance of the
/// standardized values (with the supplied theory parameters) from N(0,1).
struct CltResult {
  double mean_FN = 0.0;
  double var_scaled = 0.0;
  double se_var_scaled = 0.0;
  double se_mean = 0.0;
  double rs_value = 0.0;
  double b_theory = 0.0;
  double ks_distance = 0.0;
  int n_disorder = 0;
};

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline CltResult clt_experiment(const SpeciesStructure& s, const ModelParams& p, int N,
                                int n_disorder, uint64_t seed, double rs_theory,
                                double b_theory, int threads = 0) {
  validate_structure(s);
  validate_params(p);
  const uint64_t base = splitmix64(seed ^ 0x434C54ull);
  std::vector<double> fn(n_disorder);
  parallel_for(n_disorder, threads, [&](int k) {
    const DisorderSample d = sample_disorder(s, N, splitmix64(base + k));
    fn[k] = exact_gibbs(d, p, /*want_two_point=*/false).F_N;
  });
  CltResult out;
  out.n_disorder = n_disorder;
  out.rs_value = rs_theory;
  out.b_theory = b_theory;
  out.mean_FN = std::accumulate(fn.begin(), fn.end(), 0.0) / n_disorder;
  double ss = 0.0;
  for (double f : fn) ss += (f - out.mean_FN) * (f - out.mean_FN);
  const double var = n_disorder > 1 ? ss / (n_disorder - 1.0) : 0.0;
  out.var_scaled = N * var;
  out.se_mean = n_disorder > 1 ? std::sqrt(var / n_disorder) : 0.0;

  // jackknife SE of the scaled variance: leave-one-out variances via
  // sum_{j != k} (f_j - mean_k)^2 = ss - (f_k - mean)^2 * n/(n-1)
  if (n_disorder > 2) {
    std::vector<double> var_k(n_disorder);
    for (int k = 0; k < n_disorder; ++k) {
      const double ss_k = ss - (fn[k] - out.mean_FN) * (fn[k] - out.mean_FN) *
                                   n_disorder / (n_disorder - 1.0);
      var_k[k] = ss_k / (n_disorder - 2.0);
    }
    const double vbar = std::accumulate(var_k.begin(), var_k.end(), 0.0) / n_disorder;
    double acc = 0.0;
    for (double v : var_k) acc += (v - vbar) * (v - vbar);
    out.se_var_scaled = N * std::sqrt(acc * (n_disorder - 1.0) / n_disorder);
  }

  if (b_theory > 0.0) {
    std::vector<double> z(fn.size());
    const double scale = std::sqrt(N / b_theory);
    for (size_t i = 0; i < fn.size(); ++i) z[i] = scale * (fn[i] - rs_theory);
    std::sort(z.begin(), z.end());
    double ks = 0.0;
    const double n = static_cast<double>(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
      const double c = std_normal_cdf(z[i]);
      ks = std::max(ks, std::max(std::abs((i + 1) / n - c), std::abs(c - i / n)));
    }
    out.ks_distance = ks;
  }
  return out;
}

}  // namespace msk
