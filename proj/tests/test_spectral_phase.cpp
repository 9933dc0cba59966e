#include <catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "msk/spectral_phase.hpp"
#include "msk/rng.hpp"
#include "oracles.hpp"

using namespace msk;

namespace {

SpeciesStructure bipartite() {
  SpeciesStructure s;
  s.m = 2;
  s.lambda = Vector::Constant(2, 0.5);
  s.delta2 = Matrix(2, 2);
  s.delta2 << 0, 1, 1, 0;
  return s;
}

SpeciesStructure sk1() {
  SpeciesStructure s;
  s.m = 1;
  s.lambda = Vector::Constant(1, 1.0);
  s.delta2 = Matrix::Constant(1, 1, 1.0);
  return s;
}

SpeciesStructure two_species_pd() {
  SpeciesStructure s;
  s.m = 2;
  s.lambda = Vector(2);
  s.lambda << 0.6, 0.4;
  s.delta2 = Matrix(2, 2);
  s.delta2 << 2, 1, 1, 1.5;
  return s;
}

}  // namespace

TEST_CASE("spectral radius and abscissa") {
  Matrix a(2, 2);
  a << 0, 0.5, 0.5, 0;
  REQUIRE(spectral_radius(a) == Catch::Approx(0.5).margin(1e-14));
  REQUIRE(spectral_radius(Matrix::Identity(3, 3)) == Catch::Approx(1.0).margin(1e-14));
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = -3;
  d(1, 1) = 2;
  REQUIRE(spectral_radius(d) == Catch::Approx(3.0).margin(1e-14));

  Matrix rot(2, 2);
  rot << 0, -1, 1, 0;  // eigenvalues +-i
  REQUIRE(spectral_abscissa(rot) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(spectral_abscissa(d) == Catch::Approx(2.0).margin(1e-13));
  Matrix neg = Matrix::Zero(2, 2);
  neg(0, 0) = -1;
  neg(1, 1) = -2;
  REQUIRE(spectral_abscissa(neg) == Catch::Approx(-1.0).margin(1e-13));
}

TEST_CASE("abscissa of Gamma' Delta^2 Lambda cross-checked with a complex eigensolver") {
  const SpeciesStructure s = two_species_pd();
  const ModelParams p{0.5, 0.6};
  const RsSolution sol = solve_auto(s, p);
  const Matrix a = sol.gamma_p.asDiagonal() * s.delta2_lambda();
  Eigen::ComplexEigenSolver<Matrix> es(a);
  double expect = -1e300;
  for (int i = 0; i < a.rows(); ++i) expect = std::max(expect, es.eigenvalues()(i).real());
  REQUIRE(spectral_abscissa(a) == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("beta_c golden values") {
  REQUIRE(beta_c(bipartite()) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
  REQUIRE(beta_c(sk1()) == 1.0);  // rho = 1 exactly

  const SpeciesStructure s = two_species_pd();
  const double l1 = 0.6, l2 = 0.4, d11 = 2.0, d22 = 1.5;
  const double rho =
      0.5 * (l1 * d11 + l2 * d22 +
             std::sqrt((l1 * d11 - l2 * d22) * (l1 * d11 - l2 * d22) + 4 * l1 * l2));
  REQUIRE(beta_c(s) == Catch::Approx(1.0 / std::sqrt(rho)).margin(1e-12));
}

TEST_CASE("beta_AT") {
  SECTION("h = 0 below beta_c reduces to beta_c") {
    for (const auto& s : {sk1(), bipartite(), two_species_pd()}) {
      const RsSolution sol = solve_picard(s, ModelParams{0.5 * beta_c(s), 0.0});
      REQUIRE(beta_at(s, sol) == Catch::Approx(beta_c(s)).margin(1e-10));
    }
  }

  SECTION("2-species positive-definite closed form") {
    const SpeciesStructure s = two_species_pd();
    const ModelParams p{0.5, 0.4};
    const RsSolution sol = solve_auto(s, p, SolverOptions{1e-13, 20000});
    const double g1 = sol.gamma(0), g2 = sol.gamma(1);
    const double l1 = 0.6, l2 = 0.4, d11 = 2.0, d22 = 1.5;
    const double rho =
        0.5 * (l1 * g1 * d11 + l2 * g2 * d22 +
               std::sqrt((l1 * g1 * d11 - l2 * g2 * d22) * (l1 * g1 * d11 - l2 * g2 * d22) +
                         4 * l1 * l2 * g1 * g2));
    REQUIRE(beta_at(s, sol) == Catch::Approx(1.0 / std::sqrt(rho)).margin(1e-11));
  }

  SECTION("m = 1 scalar") {
    const SpeciesStructure s = sk1();
    const ModelParams p{0.5, 0.3};
    const RsSolution sol = solve_auto(s, p);
    REQUIRE(beta_at(s, sol) == Catch::Approx(1.0 / std::sqrt(sol.gamma(0))).margin(1e-12));
  }
}

TEST_CASE("indefinite condition on the bipartite model") {
  const SpeciesStructure s = bipartite();

  SECTION("symmetric solution gives gamma/2 and |gamma'|/2") {
    const ModelParams p{1.2, 0.5};
    const RsSolution sol = solve_indefinite_2species(s, p);
    const auto c = indefinite_condition(s, sol);
    REQUIRE(c.rho_gamma == Catch::Approx(sol.gamma(0) / 2.0).margin(1e-11));
    REQUIRE(c.abscissa_gamma_p == Catch::Approx(std::abs(sol.gamma_p(0)) / 2.0).margin(1e-11));
  }

  SECTION("h = 0 below beta_c: Gamma = Gamma' = I") {
    const ModelParams p{0.8, 0.0};
    const RsSolution sol = solve_picard(s, p);
    const auto c = indefinite_condition(s, sol);
    REQUIRE(c.rho_gamma == Catch::Approx(spectral_radius(s.delta2_lambda())).margin(1e-12));
    REQUIRE(c.abscissa_gamma_p == Catch::Approx(0.5).margin(1e-12));
    REQUIRE_FALSE(c.exceeds);
  }

  SECTION("large field flips |gamma'| above gamma") {
    // gamma' < -gamma eventually as h grows
    bool flipped = false;
    for (double h = 0.5; h < 6.0; h += 0.25) {
      const RsSolution sol = solve_indefinite_2species(s, ModelParams{1.2, h});
      if (std::abs(sol.gamma_p(0)) > sol.gamma(0)) {
        flipped = true;
        break;
      }
    }
    REQUIRE(flipped);
  }
}

TEST_CASE("hv_matrix") {
  SECTION("scalar sign matches beta^2 gamma - 1") {
    const SpeciesStructure s = sk1();
    for (double beta : {0.4, 0.9, 1.3}) {
      const ModelParams p{beta, 0.3};
      const RsSolution sol = solve_auto(s, p, SolverOptions{1e-12, 40000});
      const Matrix hv = hv_matrix(s, sol, beta);
      const double expect = beta * beta * (beta * beta * sol.gamma(0) - 1.0);
      REQUIRE(hv(0, 0) == Catch::Approx(expect).margin(1e-10));
    }
  }

  SECTION("beta = 0 gives the zero matrix") {
    const SpeciesStructure s = two_species_pd();
    const RsSolution sol = solve_auto(s, ModelParams{0.0, 0.4});
    REQUIRE(sup_norm(hv_matrix(s, sol, 0.0)) == 0.0);
  }

  SECTION("indefinite structures are rejected") {
    const RsSolution sol = solve_indefinite_2species(bipartite(), ModelParams{1.0, 0.3});
    REQUIRE_THROWS_AS(hv_matrix(bipartite(), sol, 1.0), NotPositiveDefinite);
  }
}

TEST_CASE("rsb_certificate") {
  const SpeciesStructure s = two_species_pd();
  const double h = 0.4;

  SECTION("witness appears exactly above the AT line, with the proof identity") {
    for (double beta : {0.9, 1.1, 1.3, 1.6}) {
      const RsSolution sol = solve_auto(s, ModelParams{beta, h}, SolverOptions{1e-12, 40000});
      const double bat = beta_at(s, sol);
      const auto cert = rsb_certificate(s, sol, beta);
      REQUIRE(cert.has_value() == (beta > bat));
      if (cert) {
        const double rho = 1.0 / (bat * bat);
        REQUIRE(cert->quad_form_normalized ==
                Catch::Approx(rho * (beta * beta * rho - 1.0)).margin(1e-8));
        REQUIRE((cert->witness.array() > 0).all());
      }
    }
  }

  SECTION("witness agrees with rejection sampling over the nonnegative cone") {
    const double beta = 1.4;
    const RsSolution sol = solve_auto(s, ModelParams{beta, h}, SolverOptions{1e-12, 40000});
    const Matrix hv = hv_matrix(s, sol, beta);
    const auto cert = rsb_certificate(s, sol, beta);
    PhiloxStream rng(31337, 0);
    double best = -1e300;
    for (int t = 0; t < 20000; ++t) {
      Vector x(2);
      x << rng.uniform(), rng.uniform();
      const double n = x.norm();
      if (n < 1e-9) continue;
      best = std::max(best, x.dot(hv * x) / (n * n));
    }
    REQUIRE(cert.has_value() == (best > 0.0));
  }
}

TEST_CASE("concentration bound") {
  SECTION("eta -> 0 at beta = 0 approaches 1") {
    const double b = concentration_bound(bipartite(), ModelParams{0.0, 0.0}, -1e-12);
    REQUIRE(b == Catch::Approx(1.0).margin(1e-10));
  }

  SECTION("finite value matches a direct determinant computation") {
    const SpeciesStructure s = bipartite();
    const ModelParams p{0.3, 0.2};
    const double eta = 0.05;
    const double bound = concentration_bound(s, p, eta);
    const int alpha = 2;
    const double c = 2 * eta + 4 * alpha * p.beta * p.beta;
    const Matrix m = Matrix::Identity(2, 2) - c * matrix_abs_V(s);
    REQUIRE(bound == Catch::Approx(1.0 / std::sqrt(m.determinant())).margin(1e-12));
    REQUIRE(std::isfinite(bound));
  }

  SECTION("boundary case is reported as infinite") {
    const SpeciesStructure s = sk1();
    const ModelParams p{0.2, 0.0};
    const double bc2 = 1.0;
    const double eta = 0.5 * (bc2 - 4 * p.beta * p.beta);  // exactly at the edge
    REQUIRE(std::isinf(concentration_bound(s, p, eta)));
  }
}

TEST_CASE("phase classification") {
  SECTION("deep high-temperature pd point") {
    const SpeciesStructure s = two_species_pd();
    const PhasePoint pt = classify_phase(s, ModelParams{0.2 * beta_c(s), 0.5});
    REQUIRE(pt.region == PhaseRegion::ProvedRS_Thm1);
    REQUIRE_FALSE(pt.conjectural);
  }

  SECTION("zero-field window for the bipartite model") {
    const SpeciesStructure s = bipartite();
    const PhasePoint pt = classify_phase(s, ModelParams{0.9 * beta_c(s), 0.0});
    REQUIRE(pt.region == PhaseRegion::ProvedRS_ZeroField);
  }

  SECTION("pd point above the AT line is certified RSB") {
    const SpeciesStructure s = two_species_pd();
    const PhasePoint pt = classify_phase(s, ModelParams{1.5, 0.4});
    REQUIRE(pt.region == PhaseRegion::RSBCertified);
    REQUIRE(pt.rsb_witness.has_value());
    REQUIRE((pt.rsb_witness->array() >= 0).all());
  }

  SECTION("indefinite conjectural region is flagged") {
    const SpeciesStructure s = bipartite();
    const PhasePoint pt = classify_phase(s, ModelParams{1.9, 0.05});
    REQUIRE((pt.region == PhaseRegion::IndefiniteConjecturalRSB ||
             pt.region == PhaseRegion::BelowATUnproven));
    REQUIRE(pt.conjectural);
  }
}

TEST_CASE("phase invariants") {
  PhiloxStream rng(404, 0);
  for (const auto& s : {sk1(), bipartite(), two_species_pd()}) {
    REQUIRE(beta_0(s) < beta_c(s));
    for (int t = 0; t < 6; ++t) {
      const ModelParams p{(0.2 + 0.55 * rng.uniform()) * beta_c(s), rng.uniform()};
      const RsSolution sol = solve_auto(s, p, SolverOptions{1e-11, 40000});
      // rho(Gamma D2 L) <= rho(D2 L), hence beta_AT >= beta_c
      REQUIRE(beta_at(s, sol) >= beta_c(s) - 1e-10);
      if (is_positive_definite(s)) {
        const Matrix dl = s.delta2_lambda();
        const double absc = spectral_abscissa(Matrix(sol.gamma_p.asDiagonal() * dl));
        const double rho = spectral_radius(Matrix(sol.gamma.asDiagonal() * dl));
        REQUIRE(absc <= rho + 1e-10);
      }
    }
  }
}
