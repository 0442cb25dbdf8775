#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "pqlab/counterexample.hpp"

using namespace pqlab;

namespace {

// Nested adaptive quadrature of weight(r) (v_+)^2 over the quarter disc,
// splitting the inner integral at the zero set of v.
double l2_squared_nested(int n, double L) {
  using boost::math::quadrature::gauss_kronrod;
  const CylindricalProfile prof(n, L);
  auto inner = [&](double x) {
    const double rmax = std::sqrt(std::max(0.0, 1.0 - x * x));
    const double rzero = std::min(rmax, std::sqrt((1.0 + x * x) / L));
    auto g = [&](double r) {
      const double v = std::max(0.0, prof.value(r, x));
      return prof.weight(r) * v * v;
    };
    return rzero > 0.0 ? gauss_kronrod<double, 61>::integrate(g, 0.0, rzero, 10, 1e-13) : 0.0;
  };
  const double kink = L > 1.0 ? std::sqrt((L - 1.0) / (L + 1.0)) : 0.0;
  double s = gauss_kronrod<double, 61>::integrate(inner, kink, 1.0, 10, 1e-12);
  if (kink > 0.0) s += gauss_kronrod<double, 61>::integrate(inner, 0.0, kink, 10, 1e-12);
  return 2.0 * s;
}

}  // namespace

TEST(Profile, RejectsBadParameters) {
  EXPECT_THROW(CylindricalProfile(2, 10.0), std::invalid_argument);
  EXPECT_THROW(CylindricalProfile(3, 0.0), std::invalid_argument);
  EXPECT_THROW(counterexample_ratio(3, 0.5), std::invalid_argument);
}

TEST(Profile, SupOnQuarterBall) {
  for (double L : {1.0, 10.0, 1e4}) EXPECT_DOUBLE_EQ(CylindricalProfile(3, L).sup_on_ball(0.25), 1.0 + 1.0 / 16);
}

TEST(Profile, L2MassMatchesNestedQuadrature) {
  for (int n : {3, 4, 6}) {
    for (double L : {1.0, 7.0, 1e3}) {
      const double a = CylindricalProfile(n, L).positive_l2_squared(16);
      const double b = l2_squared_nested(n, L);
      EXPECT_NEAR(a, b, 1e-8 * b) << "n=" << n << " Lambda=" << L;
    }
  }
}

TEST(Ratio, SlopeApproachesPrediction) {
  const std::vector<double> Ls = {1e3, 1e4, 1e5};
  for (int n : {4, 5}) {
    std::vector<double> r;
    for (double L : Ls) r.push_back(counterexample_ratio(n, L).ratio);
    EXPECT_NEAR(loglog_slope(Ls, r), 0.25 * (n - 1), 0.01);
  }
}

TEST(Pde, ExplicitFieldIsDiscreteSolution) {
  for (int n : {3, 4}) {
    for (double L : {10.0, 1e3}) {
      EXPECT_LE(counterexample_pde_check(n, L, 0.125), 1e-10 * L);
      EXPECT_GT(counterexample_pde_check(n, L, 0.125, 1.01), 1e-3);
    }
  }
  EXPECT_THROW(counterexample_pde_check(5, 10.0, 0.25), std::invalid_argument);
}

TEST(Slope, ExactOnPowerLaw) {
  const std::vector<double> x = {1.0, 2.0, 5.0, 11.0};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 0.75));
  EXPECT_NEAR(loglog_slope(x, y), 0.75, 1e-14);
  EXPECT_THROW(loglog_slope({1.0}, {1.0}), std::invalid_argument);
}
