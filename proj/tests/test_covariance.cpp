#include <catch_amalgamated.hpp>

#include "msk/covariance.hpp"
#include "msk/spectral_phase.hpp"
#include "msk/rng.hpp"

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

TEST_CASE("cavity coefficients") {
  SECTION("h = 0 fixed point: only b(2) survives") {
    const SpeciesStructure s = bipartite();
    const ModelParams p{0.8, 0.0};
    const RsSolution sol = solve_picard(s, p);
    const CavityCoefficients c = cavity_coefficients(s, sol, p.beta);
    REQUIRE(sup_norm(Vector(c.b2 - Vector::Constant(2, 0.64))) < 1e-12);
    REQUIRE(sup_norm(c.b1) < 1e-12);
    REQUIRE(sup_norm(c.b0) < 1e-12);
  }

  SECTION("beta = 0: all b and Bhat vanish") {
    const SpeciesStructure s = two_species_pd();
    const RsSolution sol = solve_auto(s, ModelParams{0.0, 0.5});
    const CavityCoefficients c = cavity_coefficients(s, sol, 0.0);
    REQUIRE(sup_norm(c.b0) == 0.0);
    REQUIRE(sup_norm(c.b1) == 0.0);
    REQUIRE(sup_norm(c.b2) == 0.0);
    REQUIRE(sup_norm(c.Bhat0) == 0.0);
    REQUIRE(sup_norm(c.Bhat2) == 0.0);
  }

  SECTION("gamma reconstruction and Theta/Bhat definitions") {
    const SpeciesStructure s = two_species_pd();
    const ModelParams p{0.45, 0.3};
    const RsSolution sol = solve_auto(s, p, SolverOptions{1e-13, 20000});
    const CavityCoefficients c = cavity_coefficients(s, sol, p.beta);
    const double b2 = p.beta * p.beta;
    for (int i = 0; i < s.m; ++i) {
      // gamma_s = beta^{-2} (b(0) - 2 b(1) + b(2))
      REQUIRE(std::abs((c.b0(i) - 2 * c.b1(i) + c.b2(i)) / b2 - sol.gamma(i)) < 1e-12);
      // Theta(i) = beta^{-2} B(i) Lambda^{-1}
      REQUIRE(std::abs(c.theta2(i) - c.b2(i) / b2 / s.lambda(i)) < 1e-12);
      REQUIRE(std::abs(c.theta1(i) - c.b1(i) / b2 / s.lambda(i)) < 1e-12);
      REQUIRE(std::abs(c.theta0(i) - c.b0(i) / b2 / s.lambda(i)) < 1e-12);
    }
    REQUIRE(sup_norm(Matrix(c.Bhat1 - Matrix(c.b1.asDiagonal()) * s.delta2_lambda())) < 1e-14);
  }
}

TEST_CASE("constant matrices: exact integer algebra") {
  const ConstantMatrices cm = constant_matrices();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      REQUIRE((cm.C(a) * cm.C(b) - cm.C(b) * cm.C(a)).cwiseAbs().maxCoeff() == 0);
  for (int k = 0; k < 3; ++k)
    REQUIRE((cm.V * cm.C(k) - cm.T(k) * cm.V).cwiseAbs().maxCoeff() == 0);
  REQUIRE((cm.C2 - Eigen::Matrix3i::Identity()).cwiseAbs().maxCoeff() == 0);
  REQUIRE((cm.T2 - Eigen::Matrix3i::Identity()).cwiseAbs().maxCoeff() == 0);
  REQUIRE((cm.V * cm.Vinv_num - 2 * Eigen::Matrix3i::Identity()).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("Lyapunov solver") {
  SECTION("A = -I, C = I gives X = I to machine precision") {
    const Matrix I = Matrix::Identity(4, 4);
    REQUIRE(sup_norm(Matrix(solve_lyapunov(-I, I) - I)) < 1e-14);
  }

  SECTION("decoupled diagonal case") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = -1;
    a(1, 1) = -2;
    const Matrix x = solve_lyapunov(a, Matrix::Identity(2, 2));
    REQUIRE(x(0, 0) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(x(1, 1) == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(std::abs(x(0, 1)) < 1e-12);
  }

  SECTION("random stable battery: residual and backend agreement") {
    PhiloxStream rng(808, 0);
    for (int t = 0; t < 120; ++t) {
      const int m = 1 + rng.below(6);
      Matrix r(m, m), c(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          r(i, j) = 2 * rng.uniform() - 1;
          c(i, j) = 2 * rng.uniform() - 1;
        }
      const Matrix C = sym(c);
      const Matrix A = r - (spectral_abscissa(r) + 0.3 + rng.uniform()) * Matrix::Identity(m, m);
      const Matrix x = solve_lyapunov(A, C);
      REQUIRE(sup_norm(Matrix(sym(Matrix(A * x)) + C)) < 1e-10);
      const Matrix xi = solve_lyapunov(A, C, LyapunovBackend::Integral);
      REQUIRE(sup_norm(Matrix(x - xi)) < 1e-8);
    }
  }

  SECTION("unstable input is rejected") {
    Matrix a = Matrix::Identity(2, 2);
    REQUIRE_THROWS_AS(solve_lyapunov(a, Matrix::Identity(2, 2)), NotStable);
    a(0, 0) = -1;
    a(1, 1) = 0.0;  // abscissa exactly 0
    REQUIRE_THROWS_AS(solve_lyapunov(a, Matrix::Identity(2, 2)), NotStable);
  }
}

TEST_CASE("sigma closed form") {
  SECTION("h = 0: Sigma0 = Sigma1 = 0 and Sigma2 is the bare resolvent") {
    for (const auto& s : {sk1(), bipartite(), two_species_pd()}) {
      const ModelParams p{0.6 * beta_c(s), 0.0};
      const RsSolution sol = solve_picard(s, p);
      const OverlapCovariance c = sigma_closed_form(s, sol, p.beta);
      REQUIRE(sup_norm(c.Sigma0) < 1e-9);
      REQUIRE(sup_norm(c.Sigma1) < 1e-9);
      const Matrix expect =
          (Matrix::Identity(s.m, s.m) - p.beta * p.beta * s.delta2_lambda()).inverse() *
          Matrix(s.lambda.cwiseInverse().asDiagonal());
      REQUIRE(sup_norm(Matrix(c.Sigma2 - expect)) < 1e-9);
    }
  }

  SECTION("SK scalar value 1/(1 - beta^2)") {
    const SpeciesStructure s = sk1();
    const ModelParams p{0.5, 0.0};
    const OverlapCovariance c = sigma_closed_form(s, solve_picard(s, p), p.beta);
    REQUIRE(c.Sigma2(0, 0) == Catch::Approx(4.0 / 3.0).margin(1e-12));
  }

  SECTION("substitution into both defining lines") {
    PhiloxStream rng(909, 0);
    for (const auto& s : {sk1(), bipartite(), two_species_pd()}) {
      for (int t = 0; t < 4; ++t) {
        const ModelParams p{(0.15 + 0.5 * rng.uniform()) * beta_c(s), 0.6 * rng.uniform()};
        const RsSolution sol = solve_auto(s, p, SolverOptions{1e-12, 40000});
        const OverlapCovariance c = sigma_closed_form(s, sol, p.beta);
        const double b2 = p.beta * p.beta;
        const Matrix I = Matrix::Identity(s.m, s.m);
        const Matrix invL = Matrix(s.lambda.cwiseInverse().asDiagonal());
        const Matrix dl = s.delta2_lambda();
        const Matrix hat2 = c.Sigma0 - 2 * c.Sigma1 + c.Sigma2;
        const Matrix hat1 = 3 * c.Sigma0 - 4 * c.Sigma1 + c.Sigma2;
        REQUIRE(sup_norm(Matrix(sym(Matrix((I - b2 * sol.Gamma() * dl) * hat2)) -
                                sol.Gamma() * invL)) < 1e-9);
        REQUIRE(sup_norm(Matrix(sym(Matrix((I - b2 * sol.GammaP() * dl) * hat1)) -
                                sol.GammaP() * invL)) < 1e-9);
        // the hat blocks recombine to the stored intermediates
        REQUIRE(sup_norm(Matrix(hat2 - c.Sigmahat2)) < 1e-10);
        REQUIRE(sup_norm(Matrix(hat1 - c.Sigmahat1)) < 1e-10);
        // Sigmahat2 is symmetric positive-definite under stability
        REQUIRE(sup_norm(Matrix(c.Sigmahat2 - c.Sigmahat2.transpose())) < 1e-12);
        REQUIRE(symmetric_eigenvalues(c.Sigmahat2)(0) > 0.0);
      }
    }
  }

  SECTION("closed form agrees with the all-Lyapunov route") {
    const SpeciesStructure s = two_species_pd();
    const ModelParams p{0.5, 0.4};
    const RsSolution sol = solve_auto(s, p, SolverOptions{1e-12, 40000});
    const OverlapCovariance a = sigma_closed_form(s, sol, p.beta);
    const OverlapCovariance b = sigma_lyapunov(s, sol, p.beta);
    REQUIRE(sup_norm(Matrix(a.Sigma0 - b.Sigma0)) < 1e-8);
    REQUIRE(sup_norm(Matrix(a.Sigma1 - b.Sigma1)) < 1e-8);
    REQUIRE(sup_norm(Matrix(a.Sigma2 - b.Sigma2)) < 1e-8);
    REQUIRE(a.source == SigmaSource::ClosedForm);
    REQUIRE(b.source == SigmaSource::LyapunovIntegral);
  }

  SECTION("breakdown at and above the AT line is reported") {
    const SpeciesStructure s = two_species_pd();
    const double beta = 1.4;
    const RsSolution sol = solve_auto(s, ModelParams{beta, 0.4}, SolverOptions{1e-12, 40000});
    REQUIRE(beta > beta_at(s, sol));
    REQUIRE_THROWS_AS(sigma_closed_form(s, sol, beta), StabilityViolated);
  }
}

TEST_CASE("finite-N residual") {
  const SpeciesStructure s = two_species_pd();
  const ModelParams p{0.4, 0.3};
  const RsSolution sol = solve_auto(s, p, SolverOptions{1e-12, 40000});

  SECTION("U = 0 leaves exactly -Theta(i)/N") {
    const int N = 50;
    const Matrix z = Matrix::Zero(2, 2);
    const auto r = finite_n_residual(s, sol, p.beta, z, z, z, N);
    const CavityCoefficients c = cavity_coefficients(s, sol, p.beta);
    REQUIRE(sup_norm(Matrix(r[0] + Matrix(c.theta0.asDiagonal()) / N)) < 1e-14);
    REQUIRE(sup_norm(Matrix(r[1] + Matrix(c.theta1.asDiagonal()) / N)) < 1e-14);
    REQUIRE(sup_norm(Matrix(r[2] + Matrix(c.theta2.asDiagonal()) / N)) < 1e-14);
  }

  SECTION("the asymptotic solution satisfies the finite-N system") {
    const OverlapCovariance c = sigma_closed_form(s, sol, p.beta);
    for (int N : {20, 200}) {
      const auto r = finite_n_residual(s, sol, p.beta, c.Sigma0 / N, c.Sigma1 / N,
                                       c.Sigma2 / N, N);
      for (const auto& m : r) REQUIRE(sup_norm(m) < 1e-12);
    }
  }

  SECTION("dimension mismatch is rejected") {
    const Matrix bad = Matrix::Zero(3, 3);
    REQUIRE_THROWS_AS(finite_n_residual(s, sol, p.beta, bad, bad, bad, 10), DimensionMismatch);
  }
}
