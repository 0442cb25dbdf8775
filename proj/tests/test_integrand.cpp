#include <cmath>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "pqlab/integrand.hpp"

using namespace pqlab;

namespace {

std::vector<double> random_point(std::mt19937& rng, int n, double scale) {
  std::uniform_real_distribution<double> U(-scale, scale);
  std::vector<double> z(static_cast<std::size_t>(n));
  for (double& c : z) c = U(rng);
  return z;
}

}  // namespace

TEST(ModelIntegrand, DerivativesMatchFiniteDifferences) {
  const ModelIntegrand F(PQParams{1.0, 10.0, 1.7, 2.6, 0.3}, 1.0, 0.5);
  std::mt19937 rng(3);
  const double d = 1e-6;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> z = random_point(rng, 3, 2.0);
    const Eigen::VectorXd g = eval_dF(F, z);
    const Eigen::MatrixXd H = eval_d2F(F, z);
    for (int i = 0; i < 3; ++i) {
      std::vector<double> zp = z, zm = z;
      zp[i] += d;
      zm[i] -= d;
      EXPECT_NEAR(g(i), (eval_F(F, zp) - eval_F(F, zm)) / (2 * d), 1e-6 * (1 + std::abs(g(i))));
      const Eigen::VectorXd col = (eval_dF(F, zp) - eval_dF(F, zm)) / (2 * d);
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(H(j, i), col(j), 1e-5 * (1 + std::abs(H(j, i))));
    }
  }
}

TEST(ModelIntegrand, OriginBehaviour) {
  const ModelIntegrand quad(PQParams{0.5, 1.0, 2.0, 2.0, 0.0}, 0.5, 0.0);
  const std::vector<double> zero(3, 0.0);
  EXPECT_TRUE(eval_d2F(quad, zero).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  const ModelIntegrand sing(PQParams{1.0, 1.0, 1.5, 1.5, 0.0}, 1.0, 0.0);
  EXPECT_TRUE(sing.singular_at_origin());
  EXPECT_THROW(eval_d2F(sing, zero), std::domain_error);
  EXPECT_FALSE(ModelIntegrand(PQParams{1.0, 1.0, 1.5, 1.5, 0.1}, 1.0, 0.0).singular_at_origin());
}

TEST(ModelIntegrand, RejectsBadParameters) {
  EXPECT_THROW(ModelIntegrand(PQParams{1.0, 1.0, 2.0, 1.5, 0.0}, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ModelIntegrand(PQParams{2.0, 1.0, 2.0, 2.0, 0.0}, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ModelIntegrand(PQParams{1.0, 1.0, 2.0, 2.0, 1.5}, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ModelIntegrand(PQParams{1.0, 1.0, 2.0, 2.0, 0.0}, -1.0, 1.0), std::invalid_argument);
}

// cp (mu^2+s^2)^{p/2} + cq (mu^2+s^2)^{q/2} with p = 2, q = 3 meets the
// structural bounds with nu = 1, Lambda = 6 and breaks them with Lambda = 1.
TEST(Assumption, ModelSatisfiesStructuralBounds) {
  std::mt19937 rng(11);
  std::vector<AssumptionSample> samples;
  for (int i = 0; i < 500; ++i) {
    const double scale = std::pow(10.0, -2.0 + 4.0 * i / 500.0);
    samples.push_back({random_point(rng, 3, scale), random_point(rng, 3, 1.0)});
  }
  const PQParams ok{1.0, 6.0, 2.0, 3.0, 0.5};
  const ModelIntegrand F(ok, 1.0, 1.0);
  const AssumptionReport rep = verify_assumption(F, ok, samples);
  EXPECT_TRUE(rep.passed()) << "worst line " << rep.worst_line << " margin " << rep.worst_margin;
  PQParams tight = ok;
  tight.Lambda = 1.0;
  EXPECT_FALSE(verify_assumption(F, tight, samples).passed());
}

TEST(GrowthEnvelope, IntegratedEnvelopeMatchesQuadrature) {
  using boost::math::quadrature::gauss_kronrod;
  for (double p : {1.3, 2.0, 3.7}) {
    const GrowthEnvelope env(PQParams{0.7, 2.0, p, p + 0.5, 0.4}, 0.1);
    for (double t : {0.5, 1.0, 3.0, 10.0}) {
      const double T = 0.25;
      const double ref = gauss_kronrod<double, 31>::integrate([&](double s) { return env.g1(s) * s; }, T, t, 15, 1e-14);
      EXPECT_NEAR(env.G_T(t, T), ref, 1e-12 * std::max(1.0, ref));
    }
    EXPECT_EQ(env.G_T(0.1, 0.25), 0.0);
  }
}

TEST(GrowthEnvelope, SingularAtOriginForSmallP) {
  const GrowthEnvelope env(PQParams{1.0, 1.0, 1.5, 2.0, 0.0}, 0.0);
  EXPECT_THROW(env.g1(0.0), std::domain_error);
  EXPECT_THROW(env.g1(-1.0), std::invalid_argument);
  EXPECT_GT(env.g1(1e-3), 0.0);
}

TEST(GrowthEnvelope, RatioBoundsHold) {
  for (double p : {1.5, 2.0, 2.5}) {
    for (double mu : {0.0, 0.5, 1.0}) {
      const GrowthEnvelope env(PQParams{1.0, 3.0, p, 1.3 * p, mu}, 0.5);
      const RatioBoundReport rep = ratio_bound_check(env, 0.5, 1e4);
      EXPECT_TRUE(rep.first_holds) << "p=" << p << " mu=" << mu;
      EXPECT_TRUE(rep.second_holds) << "p=" << p << " mu=" << mu;
      EXPECT_LE(rep.c1_needed, rep.c1_formula * (1.0 + 1e-12));
    }
  }
}

TEST(Penalty, DerivativesConsistent) {
  for (double p : {1.4, 2.0, 3.0}) {
    for (double s : {0.1, 0.7, 2.0}) {
      const double d = 1e-6;
      const RadialDerivs r = lp_penalty(p, s);
      EXPECT_NEAR(r.d1, (lp_penalty(p, s + d).value - lp_penalty(p, s - d).value) / (2 * d), 1e-7);
      EXPECT_NEAR(r.d2, (lp_penalty(p, s + d).d1 - lp_penalty(p, s - d).d1) / (2 * d), 1e-6);
      EXPECT_NEAR(r.d1_over_s, r.d1 / s, 1e-12);
    }
  }
}

TEST(Regularization, SmoothIntegrandIsLeftAlone) {
  const ModelIntegrand F(PQParams{1.0, 1.0, 1.5, 2.0, 1.0}, 1.0, 1.0);
  const RegularizedIntegrand R(F, 0.1, 1.0);
  EXPECT_FALSE(R.smoothed());
  const RegularizationReport rep = check_regularization(R, 3, 500);
  EXPECT_EQ(rep.sup_diff, 0.0);
  EXPECT_TRUE(rep.convex);
}

TEST(Regularization, GluedIntegrandIsConvexAndConverges) {
  const ModelIntegrand F(PQParams{1.0, 1.0, 1.5, 1.8, 0.0}, 1.0, 1.0);
  double prev = INFINITY;
  for (double eps : {0.08, 0.04, 0.02}) {
    const RegularizedIntegrand R = regularize(F, eps, 1.0);
    ASSERT_TRUE(R.smoothed());
    const RegularizationReport rep = check_regularization(R, 3, 2000);
    EXPECT_TRUE(rep.convex);
    EXPECT_GT(rep.min_net_eigenvalue, 0.0);
    EXPECT_LT(rep.sup_diff, prev);
    prev = rep.sup_diff;
    // Beyond the glue region F~ equals F.
    for (double s : {0.34, 0.5, 0.9}) EXPECT_DOUBLE_EQ(R.tilde_radial(s).value, F.radial(s).value);
  }
}

TEST(Regularization, TableMatchesDirectQuadrature) {
  const ModelIntegrand F(PQParams{1.0, 1.0, 1.5, 1.5, 0.0}, 1.0, 0.0);
  const RegularizedIntegrand R(F, 0.05, 1.0);
  for (double s : {0.0, 0.003, 0.02, 0.05, 0.07}) {
    const RadialDerivs a = R.tilde_radial(s);
    const RadialDerivs b = R.mollified_direct(s);
    EXPECT_NEAR(a.value, b.value, 1e-9);
    EXPECT_NEAR(a.d1, b.d1, 5e-6);
    EXPECT_NEAR(a.d2, b.d2, 1e-4 * std::max(1.0, std::abs(b.d2)));
  }
}

TEST(Regularization, Eps0IsAdmissible) {
  const ModelIntegrand F(PQParams{1.0, 1.0, 1.5, 1.8, 0.0}, 1.0, 1.0);
  const double e0 = find_eps0(F, 1.0, 1.0, 3, 500);
  EXPECT_GT(e0, 0.0);
  EXPECT_NO_THROW(regularize(F, e0, 1.0));
  EXPECT_THROW(RegularizedIntegrand(F, 0.0, 1.0), std::invalid_argument);
}

TEST(Forcing, LargeCapLeavesBoundedForcingUnchanged) {
  const Grid g(2, 1.0, 0.25);
  const ScalarField f = ScalarField::sample(g, [](std::span<const double> x) { return 3.0 * x[0]; });
  const ScalarField same = truncate_forcing(f, 10.0);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(same[k], f[k]);
  const ScalarField cut = truncate_forcing(f, 1.0);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_LE(std::abs(cut[k]), 1.0);
  EXPECT_THROW(truncate_forcing(f, 0.0), std::invalid_argument);
}
