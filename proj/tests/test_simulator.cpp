#include <catch_amalgamated.hpp>

#include "msk/simulator.hpp"
#include "msk/covariance.hpp"
#include "msk/spectral_phase.hpp"
#include "oracles.hpp"

using namespace msk;

namespace {

SpeciesStructure sk1() {
  SpeciesStructure s;
  s.m = 1;
  s.lambda = Vector::Constant(1, 1.0);
  s.delta2 = Matrix::Constant(1, 1, 1.0);
  return s;
}

SpeciesStructure bipartite() {
  SpeciesStructure s;
  s.m = 2;
  s.lambda = Vector::Constant(2, 0.5);
  s.delta2 = Matrix(2, 2);
  s.delta2 << 0, 1, 1, 0;
  return s;
}

SpeciesStructure thirds() {
  SpeciesStructure s;
  s.m = 2;
  s.lambda = Vector(2);
  s.lambda << 1.0 / 3.0, 2.0 / 3.0;
  s.delta2 = Matrix(2, 2);
  s.delta2 << 1.0, 0.5, 0.5, 1.0;
  return s;
}

}  // namespace

TEST_CASE("species sizes by largest remainder") {
  REQUIRE(species_sizes_for(bipartite(), 10) == std::vector<int>{5, 5});
  REQUIRE(species_sizes_for(thirds(), 10) == std::vector<int>{3, 7});
  REQUIRE(species_sizes_for(thirds(), 9) == std::vector<int>{3, 6});
  REQUIRE_THROWS_AS(sample_disorder(thirds(), 1, 7), BadSize);
}

TEST_CASE("disorder sampling: reproducibility and variance") {
  const SpeciesStructure s = bipartite();
  const DisorderSample a = sample_disorder(s, 12, 901);
  const DisorderSample b = sample_disorder(s, 12, 901);
  REQUIRE((a.couplings - b.couplings).cwiseAbs().maxCoeff() == 0.0);
  const DisorderSample c = sample_disorder(s, 12, 902);
  REQUIRE((a.couplings - c.couplings).cwiseAbs().maxCoeff() > 0.0);

  // cross-species block has variance Delta^2_{12} = 1; within-species is 0
  REQUIRE(a.couplings(0, 1) == 0.0);  // both spins in species 1

  double ss = 0.0;
  const int draws = 20000;
  for (int k = 0; k < draws; ++k) {
    const double g = gaussian_at(12345 + k, 2, 9);
    ss += g * g;
  }
  const double var = ss / draws;
  // chi^2 concentration: 3 sigma is about 3*sqrt(2/draws)
  REQUIRE(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / draws));
}

TEST_CASE("exact enumeration at beta = 0") {
  const SpeciesStructure s = bipartite();
  const DisorderSample d = sample_disorder(s, 10, 7);
  const ModelParams p{0.0, 0.6};
  const GibbsEstimate g = exact_gibbs(d, p);
  REQUIRE(g.F_N == Catch::Approx(M_LN2 + std::log(std::cosh(0.6))).margin(1e-12));
  for (int i = 0; i < 10; ++i)
    REQUIRE(g.one_point(i) == Catch::Approx(std::tanh(0.6)).margin(1e-12));
  REQUIRE(g.exact);
}

TEST_CASE("N = 2 closed form") {
  // Z = 2 e^{beta g / sqrt 2} cosh(2h) + 2 e^{-beta g / sqrt 2}
  const SpeciesStructure s = sk1();
  DisorderSample d = sample_disorder(s, 2, 3);
  const double g12 = d.couplings(0, 1);
  const ModelParams p{0.9, 0.4};
  const GibbsEstimate g = exact_gibbs(d, p);
  const double arg = 0.9 * g12 / std::sqrt(2.0);
  const double z = 2.0 * std::exp(arg) * std::cosh(0.8) + 2.0 * std::exp(-arg);
  REQUIRE(g.logZ == Catch::Approx(std::log(z)).margin(1e-12));
}

TEST_CASE("h = 0 symmetry gives exactly zero magnetizations") {
  const SpeciesStructure s = bipartite();
  const DisorderSample d = sample_disorder(s, 12, 11);
  const GibbsEstimate g = exact_gibbs(d, ModelParams{0.7, 0.0});
  REQUIRE(sup_norm(g.one_point) == 0.0);
  REQUIRE(g.two_point(3, 3) == 1.0);
}

TEST_CASE("enumeration matches the naive oracle") {
  const SpeciesStructure s = bipartite();
  const DisorderSample d = sample_disorder(s, 10, 17);
  for (const ModelParams p : {ModelParams{0.8, 0.3}, ModelParams{1.2, 0.0}}) {
    const GibbsEstimate fast = exact_gibbs(d, p);
    const oracle::NaiveGibbs slow = oracle::naive_gibbs(d, p);
    REQUIRE(fast.logZ == Catch::Approx(slow.logZ).margin(1e-11));
    REQUIRE((fast.one_point - slow.one_point).cwiseAbs().maxCoeff() < 1e-11);
    REQUIRE((fast.two_point - slow.two_point).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("seed determinism end to end") {
  const SpeciesStructure s = bipartite();
  const ModelParams p{0.5, 0.2};
  const DisorderSample d1 = sample_disorder(s, 10, 99);
  const DisorderSample d2 = sample_disorder(s, 10, 99);
  const GibbsEstimate g1 = exact_gibbs(d1, p);
  const GibbsEstimate g2 = exact_gibbs(d2, p);
  REQUIRE(g1.logZ == g2.logZ);
  REQUIRE((g1.two_point - g2.two_point).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("MCMC against enumeration") {
  const SpeciesStructure s = bipartite();
  const DisorderSample d = sample_disorder(s, 14, 23);

  SECTION("weak coupling two-point battery") {
    const ModelParams p{0.1, 0.25};
    const GibbsEstimate ex = exact_gibbs(d, p);
    const GibbsEstimate mc = mcmc_gibbs(d, p, 6000, 4);
    int outliers = 0;
    for (int i = 0; i < d.N; ++i)
      for (int j = 0; j < i; ++j) {
        const double se = std::max(mc.se_two_point(i, j), 1e-6);
        if (std::abs(mc.two_point(i, j) - ex.two_point(i, j)) > 3 * se) ++outliers;
      }
    // 3-sigma outliers should be rare among the 91 entries
    REQUIRE(outliers <= 3);
    REQUIRE(std::abs(mc.logZ - ex.logZ) < 0.05 * d.N);
  }

  SECTION("strong field magnetizations") {
    const ModelParams p{0.6, 3.0};
    const GibbsEstimate ex = exact_gibbs(d, p);
    const GibbsEstimate mc = mcmc_gibbs(d, p, 4000, 6);
    for (int i = 0; i < d.N; ++i) {
      const double se = std::max(mc.se_one_point(i), 1e-5);
      REQUIRE(std::abs(mc.one_point(i) - ex.one_point(i)) < 4 * se + 1e-3);
    }
  }

  SECTION("beta = 0 mixes immediately") {
    const ModelParams p{0.0, 0.5};
    const GibbsEstimate mc = mcmc_gibbs(d, p, 3000, 1);
    const double t = std::tanh(0.5);
    for (int i = 0; i < d.N; ++i)
      REQUIRE(std::abs(mc.one_point(i) - t) < 4 * std::max(mc.se_one_point(i), 1e-5) + 5e-3);
    REQUIRE(mc.logZ == Catch::Approx(d.N * (M_LN2 + std::log(std::cosh(0.5)))).margin(1e-9));
  }

  SECTION("ladder validation") {
    REQUIRE_THROWS_AS(mcmc_gibbs(d, ModelParams{0.5, 0.1}, 100, 2, {0.5, 0.2}),
                      LadderMisconfigured);
    REQUIRE_THROWS_AS(mcmc_gibbs(d, ModelParams{0.5, 0.1}, 100, 3, {0.0, 0.5}),
                      LadderMisconfigured);
    REQUIRE_THROWS_AS(mcmc_gibbs(d, ModelParams{0.5, 0.1}, 2, 2), LadderMisconfigured);
  }
}

TEST_CASE("overlap moments") {
  SECTION("h = 0: U1 and U0 vanish exactly") {
    const SpeciesStructure s = bipartite();
    const ModelParams p{0.5, 0.0};
    const OverlapMoments om = overlap_moments(s, p, Vector::Zero(2), 10, 8, 5);
    REQUIRE(sup_norm(om.U0) == 0.0);
    REQUIRE(sup_norm(om.U1) == 0.0);
    REQUIRE(sup_norm(om.U2) > 0.0);
  }

  SECTION("beta = 0 independent spins: U2 = diag((1-q^2)/n_s) exactly") {
    const SpeciesStructure s = thirds();
    const double h = 0.4;
    const double q = std::tanh(h) * std::tanh(h);
    const ModelParams p{0.0, h};
    const OverlapMoments om = overlap_moments(s, p, Vector::Constant(2, q), 12, 3, 77);
    const auto sizes = species_sizes_for(s, 12);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const double expect = a == b ? (1.0 - q * q) / sizes[a] : 0.0;
        REQUIRE(om.U2(a, b) == Catch::Approx(expect).margin(1e-12));
      }
  }

  SECTION("SK at h = 0: N*U2 approaches 1/(1-beta^2)") {
    const SpeciesStructure s = sk1();
    const ModelParams p{0.25, 0.0};
    const int N = 14;
    const OverlapMoments om = overlap_moments(s, p, Vector::Zero(1), N, 400, 1234);
    const double sigma2 = 1.0 / (1.0 - 0.0625);
    // the deterministic finite-size term is ~ -0.08/N here; allow for it
    const double band = 3.0 * N * om.std_err2(0, 0) + 0.15 / N;
    REQUIRE(std::abs(N * om.U2(0, 0) - sigma2) < band);
  }
}

TEST_CASE("concentration experiment") {
  const SpeciesStructure s = sk1();

  SECTION("eta = 0 gives exactly 1") {
    const ConcentrationResult r =
        concentration_experiment(s, ModelParams{0.2, 0.3}, 0.0, 10, 4, 5);
    REQUIRE(r.empirical == Catch::Approx(1.0).margin(1e-15));
  }

  SECTION("the bound holds inside the proved regime") {
    const ModelParams p{0.15, 0.3};
    const double eta = 0.2 * (1.0 - 4 * p.beta * p.beta) / 2.0;
    ConcentrationResult r = concentration_experiment(s, p, eta, 12, 40, 2024);
    r.bound = concentration_bound(s, p, eta);
    REQUIRE(std::isfinite(r.bound));
    REQUIRE(r.empirical <= r.bound * (1.0 + 3.0 * r.std_err / r.empirical));
  }

  SECTION("beta = 0 independent-spin case stays below the bound") {
    const ModelParams p{0.0, 0.2};
    const double eta = 0.08;
    ConcentrationResult r = concentration_experiment(s, p, eta, 12, 30, 31);
    r.bound = concentration_bound(s, p, eta);
    REQUIRE(r.empirical <= r.bound * (1.0 + 3.0 * r.std_err / r.empirical) + 1e-12);
  }
}

TEST_CASE("clt experiment basics") {
  const SpeciesStructure s = sk1();

  SECTION("beta = 0 is deterministic") {
    const ModelParams p{0.0, 0.5};
    const CltResult r = clt_experiment(s, p, 10, 12, 3, M_LN2 + std::log(std::cosh(0.5)), 0.0);
    REQUIRE(r.var_scaled == Catch::Approx(0.0).margin(1e-24));
    REQUIRE(r.mean_FN == Catch::Approx(M_LN2 + std::log(std::cosh(0.5))).margin(1e-12));
  }

  SECTION("deterministic reruns") {
    const ModelParams p{0.4, 0.5};
    const CltResult a = clt_experiment(s, p, 10, 20, 9, 1.0, 0.02);
    const CltResult b = clt_experiment(s, p, 10, 20, 9, 1.0, 0.02);
    REQUIRE(a.mean_FN == b.mean_FN);
    REQUIRE(a.var_scaled == b.var_scaled);
  }
}

TEST_CASE("enumeration guards") {
  const SpeciesStructure s = sk1();
  REQUIRE_THROWS_AS(exact_gibbs(sample_disorder(s, 25, 1), ModelParams{0.1, 0.0}), TooLarge);
  REQUIRE_THROWS_AS(concentration_experiment(s, ModelParams{0.1, 0.1}, 0.01, 21, 2, 2),
                    TooLarge);
}
