#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "pqlab/grid.hpp"

using namespace pqlab;

namespace {

double ball_volume(int n, double r) {
  return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0) * std::pow(r, n);
}

ScalarField random_field(const Grid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> v(g.size());
  for (double& x : v) x = U(rng);
  return ScalarField(g, std::move(v));
}

}  // namespace

TEST(Grid, RejectsBadShapes) {
  EXPECT_THROW(Grid(0, 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(Grid(5, 1.0, 0.5), std::invalid_argument);
  EXPECT_THROW(Grid(2, 1.0, 0.3), std::invalid_argument);
  EXPECT_THROW(Grid(2, 1.0, -0.5), std::invalid_argument);
  EXPECT_NO_THROW(Grid(2, 1.0, 0.25));
}

TEST(Grid, NodeLayout) {
  const Grid g(3, 1.0, 0.5);
  EXPECT_EQ(g.nodes_per_axis(), 5u);
  EXPECT_EQ(g.size(), 125u);
  EXPECT_DOUBLE_EQ(g.coord(0), -1.0);
  EXPECT_DOUBLE_EQ(g.coord(4), 1.0);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.125);
  std::size_t boundary = 0;
  for (std::size_t k = 0; k < g.size(); ++k) boundary += g.on_boundary(k);
  EXPECT_EQ(boundary, 125u - 27u);
}

TEST(Grid, ForEachNodeMatchesPoint) {
  const Grid g(3, 1.0, 0.25);
  std::size_t expected = 0;
  double y[3];
  g.for_each_node([&](std::size_t k, std::span<const double> x) {
    ASSERT_EQ(k, expected++);
    g.point(k, y);
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x[i], y[i]);
  });
  EXPECT_EQ(expected, g.size());
}

TEST(ScalarField, RejectsNonFinite) {
  const Grid g(1, 1.0, 0.5);
  EXPECT_THROW(ScalarField(g, std::nan("")), std::invalid_argument);
  EXPECT_THROW(ScalarField(g, std::vector<double>{0, 0, INFINITY, 0, 0}), std::invalid_argument);
  EXPECT_THROW(ScalarField(g, std::vector<double>{0, 0}), std::invalid_argument);
}

// Second-order stencils are exact on quadratics, boundary layer included.
TEST(Gradient, ExactOnQuadratics) {
  const Grid g(3, 1.0, 0.125);
  const ScalarField u = ScalarField::sample(g, [](std::span<const double> x) {
    return 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[0] + x[1] * x[2] - 3.0 * x[2] * x[2];
  });
  const VectorField du = gradient(u);
  double err = 0.0;
  g.for_each_node([&](std::size_t k, std::span<const double> x) {
    err = std::max(err, std::abs(du.component(k, 0) - (2.0 + x[0])));
    err = std::max(err, std::abs(du.component(k, 1) - (-1.0 + x[2])));
    err = std::max(err, std::abs(du.component(k, 2) - (x[1] - 6.0 * x[2])));
  });
  EXPECT_LT(err, 1e-12);
}

// Lattice-point counting: the error is at most about perimeter * h, not monotone in h.
TEST(Quadrature, BallVolumeWithinLatticeBound) {
  for (int n : {2, 3}) {
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
      if (n == 3 && h < 1.0 / 32) continue;
      const Grid g(n, 1.0, h);
      const double vol = integrate_ball(ScalarField(g, 1.0), BallRegion::centered(n, 0.8));
      EXPECT_LT(std::abs(vol - ball_volume(n, 0.8)), n * ball_volume(n, 0.8) / 0.8 * h);
    }
  }
}

TEST(Quadrature, ThinShellSphereArea) {
  const Grid g(3, 1.0, 1.0 / 64);
  const double area = sphere_integral(ScalarField(g, 1.0), 0.5);
  EXPECT_NEAR(area / (4.0 * std::numbers::pi * 0.25), 1.0, 0.03);
  EXPECT_THROW(sphere_integral(ScalarField(g, 1.0), 0.999), std::invalid_argument);
}

TEST(Quadrature, BallMustFitInBox) {
  const Grid g(2, 1.0, 0.25);
  EXPECT_THROW(integrate_ball(ScalarField(g, 1.0), BallRegion::centered(2, 1.5)), std::invalid_argument);
  EXPECT_THROW(integrate_ball(ScalarField(g, 1.0), BallRegion{{0.5, 0.0}, 0.75}), std::invalid_argument);
  EXPECT_THROW(integrate_ball(ScalarField(g, 1.0), BallRegion::centered(3, 0.5)), std::invalid_argument);
}

TEST(Truncation, MatchesPointwiseDefinition) {
  const Grid g(2, 1.0, 0.125);
  const ScalarField u = random_field(g, 7);
  const ScalarField w = truncate_above(u, 0.3);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_DOUBLE_EQ(w[k], std::max(u[k] - 0.3, 0.0));
}

// Property: the superlevel measure is a non-increasing function of the level
// and agrees with a direct count.
TEST(Truncation, SuperlevelMeasureMonotone) {
  for (unsigned seed = 1; seed <= 20; ++seed) {
    const Grid g(2, 1.0, 0.125);
    const ScalarField u = random_field(g, seed);
    const BallRegion B = BallRegion::centered(2, 1.0);
    double prev = INFINITY;
    for (double k = -1.0; k <= 1.0; k += 0.1) {
      const double m = superlevel_measure(u, k, B);
      EXPECT_LE(m, prev);
      prev = m;
      std::size_t count = 0;
      g.for_each_node([&](std::size_t i, std::span<const double> x) {
        if (x[0] * x[0] + x[1] * x[1] <= 1.0 + 1e-12 && u[i] > k) ++count;
      });
      EXPECT_DOUBLE_EQ(m, count * g.cell_volume());
    }
  }
}

TEST(Norms, SupAndGradientSup) {
  const Grid g(2, 1.0, 0.125);
  const ScalarField u = ScalarField::sample(g, [](std::span<const double> x) { return 3.0 * x[0] - 4.0 * x[1]; });
  EXPECT_NEAR(sup_norm_ball(gradient(u), BallRegion::centered(2, 0.5)), 5.0, 1e-12);
  double best = -INFINITY;
  g.for_each_node([&](std::size_t k, std::span<const double> x) {
    if (x[0] * x[0] + x[1] * x[1] <= 0.25) best = std::max(best, u[k]);
  });
  EXPECT_DOUBLE_EQ(sup_ball(u, BallRegion::centered(2, 0.5)), best);
  EXPECT_LE(best, 2.5);
  const double w = w12_norm(ScalarField(g, 1.0), BallRegion::centered(2, 1.0));
  EXPECT_NEAR(w * w, integrate_ball(ScalarField(g, 1.0), BallRegion::centered(2, 1.0)), 1e-12);
}
