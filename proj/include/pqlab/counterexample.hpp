#pragma once

// The explicit high-contrast solution v(x) = x_n^2 + 1 - Lambda |x'|^2 of
// -div(a grad v) = 0 with a = diag(1, ..., 1, (n-1) Lambda), and the ratio of
// its sup over B_{1/4} to its L^2 mass on B_1.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include "pqlab/degiorgi.hpp"
#include "pqlab/errors.hpp"
#include "pqlab/grid.hpp"
#include "pqlab/solver.hpp"

namespace pqlab {

struct CylindricalProfile {
  int n = 3;
  double Lambda = 1.0;

  CylindricalProfile(int n_, double Lambda_) : n(n_), Lambda(Lambda_) {
    if (n < 3) throw std::invalid_argument("CylindricalProfile: n must be >= 3");
    if (!(Lambda > 0.0)) throw std::invalid_argument("CylindricalProfile: Lambda must be > 0");
  }

  /// v at r = |x'|, x_n.
  double value(double r, double xn) const { return xn * xn + 1.0 - Lambda * r * r; }

  /// v at a point of R^n.
  double at(std::span<const double> x) const {
    double r2 = 0.0;
    for (int i = 0; i + 1 < n; ++i) r2 += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    const double xn = x[static_cast<std::size_t>(n - 1)];
    return xn * xn + 1.0 - Lambda * r2;
  }

  /// |S^{n-2}| r^{n-2}: the weight of the (r, x_n) reduction.
  double weight(double r) const { return unit_sphere_area(n - 1) * std::pow(r, n - 2); }

  /// Integral of (v_+)^2 over B_1 with `panels` Gauss panels per smooth piece in x_n.
  /// The radial integral is a polynomial in the cutoff radius and is done exactly.
  double positive_l2_squared(int panels) const {
    using boost::math::quadrature::gauss;
    const double m = n - 2;
    auto slice = [&](double x) {
      const double A = 1.0 + x * x;
      const double R = std::min(std::sqrt(std::max(0.0, 1.0 - x * x)), std::sqrt(A / Lambda));
      return A * A * std::pow(R, m + 1) / (m + 1) - 2.0 * A * Lambda * std::pow(R, m + 3) / (m + 3) +
             Lambda * Lambda * std::pow(R, m + 5) / (m + 5);
    };
    // Kink where the ball boundary meets the zero set of v.
    std::vector<double> cuts = {0.0, 1.0};
    if (Lambda > 1.0) cuts.insert(cuts.begin() + 1, std::sqrt((Lambda - 1.0) / (Lambda + 1.0)));
    double s = 0.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double w = (cuts[c + 1] - cuts[c]) / panels;
      for (int j = 0; j < panels; ++j) {
        s += gauss<double, 20>::integrate(slice, cuts[c] + j * w, cuts[c] + (j + 1) * w);
      }
    }
    return 2.0 * unit_sphere_area(n - 1) * s;  // symmetric in x_n
  }

  /// Sup of v_+ over B_radius, scanned on the reduced quarter disc (r, x_n) with
  /// r, x_n >= 0, r^2 + x_n^2 <= radius^2.
  double sup_on_ball(double radius, int resolution = 256) const {
    double best = 0.0;
    for (int i = 0; i <= resolution; ++i) {
      const double th = 0.5 * std::numbers::pi * i / resolution;
      for (int j = 0; j <= resolution; ++j) {
        const double rad = radius * j / resolution;
        best = std::max(best, value(rad * std::cos(th), rad * std::sin(th)));
      }
    }
    return best;
  }
};

struct CounterexampleRatio {
  double sup = 0.0;
  double l2 = 0.0;
  double ratio = 0.0;
  int panels = 0;
};

/// ||v_+||_{L^inf(B_{1/4})} / ||v_+||_{L^2(B_1)}. The x_n quadrature doubles
/// its panel count from `panels` until consecutive L^2 values agree to 0.1%.
inline CounterexampleRatio counterexample_ratio(int n, double Lambda, int panels = 4) {
  if (n < 3) throw std::invalid_argument("counterexample_ratio: n must be >= 3");
  if (!(Lambda >= 1.0)) throw std::invalid_argument("counterexample_ratio: Lambda must be >= 1");
  if (panels < 1) throw std::invalid_argument("counterexample_ratio: panels must be >= 1");
  const CylindricalProfile prof(n, Lambda);
  double prev = prof.positive_l2_squared(panels);
  for (int level = 0; level < 12; ++level) {
    panels *= 2;
    const double cur = prof.positive_l2_squared(panels);
    if (std::abs(cur - prev) <= 1e-3 * std::abs(cur)) {
      CounterexampleRatio r;
      r.sup = prof.sup_on_ball(0.25);
      r.l2 = std::sqrt(cur);
      r.ratio = r.sup / r.l2;
      r.panels = panels;
      return r;
    }
    prev = cur;
  }
  throw ConvergenceError("counterexample_ratio: quadrature did not settle under doubling");
}

/// The coefficient field a = diag(1, ..., 1, last) on the grid; last defaults to (n-1) Lambda.
inline EllipticCoefficients counterexample_coefficients(const Grid& g, double Lambda, double last_factor = 1.0) {
  const int n = g.dim();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  a(n - 1, n - 1) = (n - 1) * Lambda * last_factor;
  return EllipticCoefficients::constant(g, a, 1.0, std::max(1.0, a(n - 1, n - 1)));
}

inline ScalarField counterexample_field(const Grid& g, double Lambda) {
  const CylindricalProfile prof(g.dim(), Lambda);
  return ScalarField::sample(g, [&](std::span<const double> x) { return prof.at(x); });
}

/// Discrete residual of -div(a grad v) = 0 at interior nodes of the grid
/// [-1,1]^n with spacing h. last_factor scales a's last entry (1 = exact).
inline double counterexample_pde_check(int n, double Lambda, double h, double last_factor = 1.0) {
  if (n != 3 && n != 4) throw std::invalid_argument("counterexample_pde_check: n must be 3 or 4");
  const Grid g(n, 1.0, h);
  const EllipticCoefficients a = counterexample_coefficients(g, Lambda, last_factor);
  return linear_residual(a, counterexample_field(g, Lambda), ScalarField(g, 0.0));
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more matching points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace pqlab
