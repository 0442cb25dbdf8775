#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "pqlab/solver.hpp"

using namespace pqlab;

namespace {

ScalarField affine(const Grid& g, double c, const std::vector<double>& b) {
  return ScalarField::sample(g, [&](std::span<const double> x) {
    double s = c;
    for (std::size_t i = 0; i < b.size(); ++i) s += b[i] * x[i];
    return s;
  });
}

// Boundary values of `data`, zero in the interior.
ScalarField boundary_only(const ScalarField& data) {
  const Grid& g = data.grid();
  std::vector<double> w(data.values().begin(), data.values().end());
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!g.on_boundary(k)) w[k] = 0.0;
  }
  return ScalarField(g, std::move(w));
}

}  // namespace

TEST(Coefficients, ValidatesInput) {
  const Grid g(2, 1.0, 0.5);
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 1.0, 0.0, 2.0;
  EXPECT_THROW(EllipticCoefficients::constant(g, a, 1.0, 3.0), std::invalid_argument);
  EXPECT_THROW(EllipticCoefficients::constant(g, Eigen::MatrixXd::Identity(3, 3), 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(EllipticCoefficients::constant(g, Eigen::MatrixXd::Identity(2, 2), 2.0, 1.0), std::invalid_argument);
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(2, 2) * 4.0;
  EXPECT_EQ(EllipticCoefficients::constant(g, d, 1.0, 5.0).spot_check(1), 0u);
  EXPECT_GT(EllipticCoefficients::constant(g, d, 1.0, 2.0).spot_check(1), 0u);
}

TEST(SolveLinear, ReproducesAffineData) {
  const Grid g(3, 1.0, 0.125);
  const ScalarField exact = affine(g, 0.5, {1.0, -2.0, 0.25});
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  a(0, 1) = a(1, 0) = 0.3;
  auto [u, rep] = solve_linear(EllipticCoefficients::constant(g, a, 0.5, 1.5), boundary_only(exact), ScalarField(g, 0.0), 1e-11);
  double err = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) err = std::max(err, std::abs(u[k] - exact[k]));
  EXPECT_LT(err, 1e-9);
  EXPECT_LE(rep.residual, std::max(1e-11, rep.residual_floor));
}

// The quadratic x_n^2 + 1 - Lambda |x'|^2 solves the anisotropic equation
// exactly, and the scheme has no truncation error on quadratics.
TEST(SolveLinear, ExactOnAnisotropicQuadratic) {
  const Grid g(3, 1.0, 1.0 / 16);
  const double L = 50.0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  a(2, 2) = 2.0 * L;
  const ScalarField exact = ScalarField::sample(g, [&](std::span<const double> x) {
    return x[2] * x[2] + 1.0 - L * (x[0] * x[0] + x[1] * x[1]);
  });
  const EllipticCoefficients A = EllipticCoefficients::constant(g, a, 1.0, 2.0 * L);
  EXPECT_LT(linear_residual(A, exact, ScalarField(g, 0.0)), 1e-9 * L);
  auto [u, rep] = solve_linear(A, boundary_only(exact), ScalarField(g, 0.0), 1e-10);
  double err = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) err = std::max(err, std::abs(u[k] - exact[k]));
  EXPECT_LT(err, 1e-9 * L);
}

TEST(SolveLinear, SecondOrderOnPoisson) {
  // -Lap u = 2 pi^2 sin(pi x) sin(pi y) on [-1,1]^2 with zero data.
  std::vector<double> errs;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    const Grid g(2, 1.0, h);
    const double pi = std::numbers::pi;
    const ScalarField f = ScalarField::sample(g, [&](std::span<const double> x) {
      return 2.0 * pi * pi * std::sin(pi * x[0]) * std::sin(pi * x[1]);
    });
    auto [u, rep] = solve_linear(EllipticCoefficients::constant(g, Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0),
                                 ScalarField(g, 0.0), f, 1e-12);
    double err = 0.0;
    g.for_each_node([&](std::size_t k, std::span<const double> x) {
      err = std::max(err, std::abs(u[k] - std::sin(pi * x[0]) * std::sin(pi * x[1])));
    });
    errs.push_back(err);
  }
  EXPECT_NEAR(errs[0] / errs[1], 4.0, 0.3);
  EXPECT_NEAR(errs[1] / errs[2], 4.0, 0.2);
}

TEST(SolveLinear, RejectsBadInput) {
  const Grid g(2, 1.0, 0.25);
  const Grid other(2, 1.0, 0.5);
  const auto A = EllipticCoefficients::constant(g, Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0);
  EXPECT_THROW(solve_linear(A, ScalarField(g, 0.0), ScalarField(g, 0.0), 0.0), std::invalid_argument);
  EXPECT_THROW(solve_linear(A, ScalarField(g, 0.0), ScalarField(other, 0.0), 1e-8), std::invalid_argument);
}

// F = |z|^2/2 is the Dirichlet energy, so the nonlinear path must agree with
// the linear solve for a = I.
TEST(Minimize, QuadraticEnergyMatchesLinearSolve) {
  const Grid g(2, 1.0, 1.0 / 16);
  const ScalarField data = ScalarField::sample(g, [](std::span<const double> x) { return x[0] * x[1] + x[0]; });
  const ScalarField f = ScalarField::sample(g, [](std::span<const double> x) { return 1.0 + x[1]; });
  const ModelIntegrand F(PQParams{0.5, 1.0, 2.0, 2.0, 0.0}, 0.5, 0.0);
  MinimizationProblem<ModelIntegrand> prob{F, f, data, std::nullopt};
  MinimizeOptions opt;
  opt.tol = 1e-11;
  auto [u, rep] = minimize(prob, opt);
  auto [v, lrep] = solve_linear(EllipticCoefficients::constant(g, Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0), data, f, 1e-11);
  double diff = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) diff = std::max(diff, std::abs(u[k] - v[k]));
  EXPECT_LT(diff, 1e-9);
  EXPECT_LE(rep.residual, 1e-11);
}

TEST(Minimize, AffineDataGivesConstantGradient) {
  const Grid g(3, 1.0, 0.125);
  const std::vector<double> b = {0.6, -0.8, 0.0};
  const ScalarField data = affine(g, 0.0, b);
  const ModelIntegrand F(PQParams{1.0, 10.0, 1.8, 2.6, 0.2}, 1.0, 1.0);
  // Nodes outside the ball keep the data; the free nodes start from a bumped guess.
  const ScalarField start = ScalarField::sample(g, [&](std::span<const double> x) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return b[0] * x[0] + b[1] * x[1] + 0.3 * std::max(0.0, 1.0 - r2);
  });
  MinimizationProblem<ModelIntegrand> prob{F, ScalarField(g, 0.0), start, BallRegion::centered(3, 1.0)};
  auto [u, rep] = minimize(prob);
  const double s = sup_norm_ball(gradient(u), BallRegion::centered(3, 0.5));
  EXPECT_NEAR(s, 1.0, 1e-8);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(u[k], data[k], 1e-9);
}

TEST(Minimize, EnergyHistoryNonIncreasing) {
  const Grid g(2, 1.0, 1.0 / 16);
  const ScalarField data = ScalarField::sample(g, [](std::span<const double> x) { return std::sin(3 * x[0]) + x[1] * x[1]; });
  const ModelIntegrand F(PQParams{1.0, 10.0, 2.0, 3.0, 0.1}, 1.0, 1.0);
  MinimizationProblem<ModelIntegrand> prob{F, ScalarField(g, 1.0), boundary_only(data), std::nullopt};
  auto [u, rep] = minimize(prob);
  ASSERT_GE(rep.energy_history.size(), 2u);
  for (std::size_t i = 1; i < rep.energy_history.size(); ++i) {
    EXPECT_LE(rep.energy_history[i], rep.energy_history[i - 1] + 1e-12 * std::abs(rep.energy_history[i - 1]));
  }
  EXPECT_NEAR(discrete_energy(prob, u), rep.energy, 1e-12 * std::abs(rep.energy));
  EXPECT_LE(euler_lagrange_residual(u, prob), 1e-10);
  MinimizeOptions bad;
  bad.tol = -1.0;
  EXPECT_THROW(minimize(prob, bad), std::invalid_argument);
}

TEST(BilinearForm, Symmetric) {
  const Grid g(2, 1.0, 0.125);
  const auto A = EllipticCoefficients::constant(g, Eigen::MatrixXd::Identity(2, 2) * 2.0, 1.0, 2.0);
  const ScalarField v = ScalarField::sample(g, [](std::span<const double> x) { return x[0] * x[0] - x[1]; });
  const ScalarField w = ScalarField::sample(g, [](std::span<const double> x) { return std::cos(x[0] + 2 * x[1]); });
  EXPECT_NEAR(bilinear_form(A, v, w), bilinear_form(A, w, v), 1e-12);
}

TEST(Subsolution, SignOfLaplacianDecides) {
  const Grid g(2, 1.0, 0.0625);
  const auto A = EllipticCoefficients::constant(g, Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0);
  std::vector<ScalarField> cutoffs;
  for (double r : {0.3, 0.6, 0.9}) cutoffs.push_back(tent_cutoff(g, 0.5 * r, r));
  const ScalarField convex = ScalarField::sample(g, [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; });
  const ScalarField concave = ScalarField::sample(g, [](std::span<const double> x) { return -x[0] * x[0] - x[1] * x[1]; });
  EXPECT_TRUE(verify_subsolution(convex, A, cutoffs).passed);
  EXPECT_FALSE(verify_subsolution(concave, A, cutoffs).passed);
  EXPECT_THROW(verify_subsolution(convex, A, {ScalarField(g, 1.0)}), std::invalid_argument);
}

TEST(Caccioppoli, TermsVanishAboveSup) {
  const Grid g(2, 1.0, 0.125);
  const ScalarField v = ScalarField::sample(g, [](std::span<const double> x) { return 1.0 - x[0] * x[0]; });
  const CaccioppoliTerms t = caccioppoli_terms(v, ScalarField(g, 1.0), 2.0, tent_cutoff(g, 0.25, 0.75));
  EXPECT_EQ(t.lhs, 0.0);
  EXPECT_EQ(t.energy, 0.0);
  EXPECT_EQ(t.forcing, 0.0);
}

TEST(Caccioppoli, EstimatedConstantsSatisfyInequality) {
  const Grid g(3, 1.0, 0.125);
  const double L = 10.0;
  const ScalarField v = ScalarField::sample(g, [&](std::span<const double> x) {
    return x[2] * x[2] + 1.0 - L * (x[0] * x[0] + x[1] * x[1]);
  });
  CaccioppoliOptions opt;
  opt.cm_values = {std::sqrt(8.0)};
  const CaccioppoliEstimate est = estimate_caccioppoli_constants(v, ScalarField(g, 0.0), {0.0, 0.5}, opt);
  EXPECT_FALSE(est.saturated);
  EXPECT_GE(est.M1, 1.0);
  EXPECT_LE(est.worst_ratio, 1.0 + 1e-12);
  opt.fixed_M1 = 2.0 * est.M1;
  EXPECT_DOUBLE_EQ(estimate_caccioppoli_constants(v, ScalarField(g, 0.0), {0.0, 0.5}, opt).M1, 2.0 * est.M1);
}

TEST(Tent, ValuesAndSupport) {
  const Grid g(2, 1.0, 0.25);
  const ScalarField t = tent_cutoff(g, 0.25, 0.75);
  g.for_each_node([&](std::size_t k, std::span<const double> x) {
    const double r = std::hypot(x[0], x[1]);
    if (r <= 0.25) {
      EXPECT_DOUBLE_EQ(t[k], 1.0);
    }
    if (r >= 0.75) {
      EXPECT_DOUBLE_EQ(t[k], 0.0);
    }
    EXPECT_GE(t[k], 0.0);
    EXPECT_LE(t[k], 1.0);
  });
  EXPECT_THROW(tent_cutoff(g, 0.5, 0.5), std::invalid_argument);
}
