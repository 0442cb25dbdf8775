#pragma once

// Level-set iteration constants and driver, the explicit L-infinity bound,
// optimal radial cutoffs, the hole-filling constant, exponent algebra for the
// Lipschitz estimate, and a zonal estimate of the Sobolev constant on spheres.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "pqlab/grid.hpp"
#include "pqlab/rearrangement.hpp"

namespace pqlab {

// ---------------------------------------------------------------- exponents

/// Sphere Sobolev exponent: 2(n-1)/(n-3) for n >= 4, 2 + 2/kappa for n = 3.
inline double two_star(int n, double kappa) {
  if (n < 3) throw std::invalid_argument("two_star: n must be >= 3");
  if (n == 3) {
    if (!(kappa > 0.0 && kappa < 0.5)) throw std::invalid_argument("two_star: kappa must lie in (0, 1/2)");
    return 2.0 + 2.0 / kappa;
  }
  return 2.0 * (n - 1) / (n - 3);
}

/// 2n/(n-2).
inline double two_star_n(int n) {
  if (n < 3) throw std::invalid_argument("two_star_n: n must be >= 3");
  return 2.0 * n / (n - 2);
}

inline double iteration_alpha(int n, double kappa) { return 0.5 + two_star(n, kappa) / 4.0; }

/// Solves (2 tau)^{2*/2 - 1} = 2^{-alpha}.
inline double tau(int n, double kappa) {
  const double s = two_star(n, kappa);
  return 0.5 * std::pow(2.0, -iteration_alpha(n, kappa) / (0.5 * s - 1.0));
}

/// max{kappa, (n-3)/2} = 1/(2*/2 - 1).
inline double contrast_exponent(int n, double kappa) {
  return n == 3 ? kappa : std::max(kappa, 0.5 * (n - 3));
}

/// Contrast exponent m of the subsolution sup bound: (n-1)/4 for n >= 4, (1+kappa)/2 for n = 3.
inline double subsolution_exponent(int n, double kappa) { return 0.5 * (1.0 + contrast_exponent(n, kappa)); }

struct IterationConstants {
  int n = 3;
  double kappa = 0.25;
  double c1 = 1.0;
  double c2 = 1.0;
  double cm = 2.0;
  double M1 = 1.0;
  double M2 = 0.0;
  double k0 = 0.0;

  void validate() const {
    if (n < 3) throw std::invalid_argument("IterationConstants: n must be >= 3");
    if (!(kappa > 0.0 && kappa < 0.5)) throw std::invalid_argument("IterationConstants: kappa must lie in (0, 1/2)");
    if (!(c1 >= 1.0) || !(c2 >= 1.0)) throw std::invalid_argument("IterationConstants: c1, c2 must be >= 1");
    if (!(cm > 0.0)) throw std::invalid_argument("IterationConstants: c_m must be > 0");
    if (!(M1 >= 1.0)) throw std::invalid_argument("IterationConstants: M1 must be >= 1");
    if (!(M2 >= 0.0) || !(k0 >= 0.0)) throw std::invalid_argument("IterationConstants: M2, k0 must be >= 0");
  }

  double star() const { return two_star(n, kappa); }
  double star_n() const { return two_star_n(n); }
  double alpha() const { return iteration_alpha(n, kappa); }
  double tau() const { return pqlab::tau(n, kappa); }
};

struct DeltaParts {
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
  bool d2_saturated = false;  // demanded omega level exceeds the range: condition holds for every increment
  double total() const { return d1 + d2 + d3; }
};

/// Level increments for step ell >= 1. omega_profile is the rearrangement of
/// f on B_1 (may be null when f vanishes).
inline DeltaParts delta_parts(int ell, double J0, double J_prev, const IterationConstants& C,
                              const StepProfile* omega_profile) {
  if (ell < 1) throw std::invalid_argument("delta_parts: ell must be >= 1");
  if (!(J0 > 0.0)) throw std::invalid_argument("delta_parts: J0 must be > 0");
  const double s = C.star();
  const double sn = C.star_n();
  const double t = C.tau();
  const double e = 1.0 / (0.5 * s - 1.0);
  DeltaParts d;
  d.d1 = std::pow(std::pow(2.0, C.alpha()) * 3.0 * C.c1 * C.cm * C.M1 * std::pow(t, -0.5 * s), e) * J0 *
         std::pow(2.0, -ell);
  d.d3 = std::pow(3.0 * C.c2 / t, C.n / sn) * std::pow(t, ell - 1) * J0;
  if (C.M2 > 0.0 && J_prev > 0.0 && omega_profile) {
    const double y = std::pow(t, ell) * J0 / (3.0 * C.cm * C.M2);
    const OmegaInverse inv = omega_inverse(*omega_profile, y);
    if (inv.saturated) {
      d.d2_saturated = true;
    } else if (inv.t > 0.0) {
      d.d2 = std::pow(C.c2 / inv.t, 1.0 / sn) * J_prev;
    }
  }
  return d;
}

struct IterationRow {
  int ell = 0;
  double k = 0.0;
  double sigma = 1.0;
  DeltaParts delta;
  double J = 0.0;
  double target = 0.0;
  bool measured = true;
  bool pass = true;
  bool below_noise = false;  // J below the noise floor 10 h J0
};

struct IterationResult {
  std::vector<IterationRow> rows;  // row 0 holds k0, J0
  double J0 = 0.0;
  double bound = 0.0;        // k0 + sum of increments
  double tail_estimate = 0.0;
  bool finite = true;
  bool all_pass = true;          // J_ell <= tau^ell J0 for every measured ell
  bool pass_above_noise = true;  // same, ignoring rows below the noise floor
  int saturated_steps = 0;
};

/// Runs the level-set iteration on v over B_1 -> B_{1/2}. Stops when the
/// increment falls below 1e-12 J0; reports a non-finite result if ell_max is
/// reached first.
inline IterationResult run_iteration(const ScalarField& v, const ScalarField& f, const IterationConstants& C,
                                     int ell_max = 200) {
  C.validate();
  const Grid& g = v.grid();
  detail::require_same_grid(g, f.grid(), "run_iteration");
  const BallRegion B1 = BallRegion::centered(g.dim(), 1.0);
  detail::require_ball_in_box(g, B1, "run_iteration");
  if (g.dim() != C.n) throw std::invalid_argument("run_iteration: grid dimension differs from constants");
  const double t = C.tau();
  const double noise = 10.0 * g.spacing();

  const WeightedSamples fs = samples_from_field(f, B1);
  const StepProfile prof = rearrange(fs);
  const bool f_zero = prof.levels.front() == 0.0;

  IterationResult res;
  double k = C.k0;
  res.J0 = w12_norm(truncate_above(v, k), B1);
  IterationRow r0;
  r0.k = k;
  r0.J = res.J0;
  r0.target = res.J0;
  res.rows.push_back(r0);
  if (res.J0 == 0.0) {
    res.bound = k;
    return res;
  }
  double J_prev = res.J0;
  double sum = 0.0;
  bool done = false;
  for (int ell = 1; ell <= ell_max; ++ell) {
    IterationRow row;
    row.ell = ell;
    row.sigma = 0.5 + std::pow(2.0, -(ell + 1));
    row.delta = delta_parts(ell, res.J0, J_prev, C, f_zero ? nullptr : &prof);
    if (row.delta.d2_saturated) ++res.saturated_steps;
    sum += row.delta.total();
    k = C.k0 + sum;
    row.k = k;
    row.target = std::pow(t, ell) * res.J0;
    if (J_prev > 0.0) {
      row.J = w12_norm(truncate_above(v, k), BallRegion::centered(g.dim(), row.sigma));
    } else {
      row.J = 0.0;
      row.measured = false;
    }
    row.pass = row.J <= row.target;
    row.below_noise = row.J < noise * res.J0;
    if (row.measured) {
      res.all_pass = res.all_pass && row.pass;
      if (!row.below_noise) res.pass_above_noise = res.pass_above_noise && row.pass;
    }
    J_prev = row.J;
    const DeltaParts last = row.delta;
    res.rows.push_back(row);
    if (!std::isfinite(sum)) break;
    if (last.total() < 1e-12 * res.J0) {
      res.tail_estimate = last.d1 + last.d3 * t / (1.0 - t);
      done = true;
      break;
    }
  }
  res.finite = done && std::isfinite(sum);
  res.bound = res.finite ? C.k0 + sum : std::numeric_limits<double>::infinity();
  return res;
}

/// CSV trace: ell,k,sigma,delta1,delta2,delta3,J,target,pass
inline void write_trace_csv(std::ostream& out, const IterationResult& res) {
  const auto old = out.precision(17);
  out << "ell,k,sigma,delta1,delta2,delta3,J,target,pass\n";
  for (const auto& r : res.rows) {
    out << r.ell << ',' << r.k << ',' << r.sigma << ',' << r.delta.d1 << ',' << r.delta.d2 << ',' << r.delta.d3
        << ',' << r.J << ',' << r.target << ',' << (r.pass ? 1 : 0) << '\n';
  }
  out.precision(old);
}

// ------------------------------------------------------- closed-form bound

struct LinftyBound {
  double J0_bound = 0.0;         // bound on ||(v-k0)_+||_{W^{1,2}(B_1)} from one cutoff step
  double level_part = 0.0;       // K_J * J0_bound: increments driven by J0
  double forcing_part = 0.0;     // bound on the sum of the forcing-driven increments
  double bound = 0.0;            // k0 + level_part + forcing_part, bounds sup over B_{1/2}
  double m1_exponent = 0.0;      // 1 + max{kappa, (n-3)/2}
  double subsolution_exponent = 0.0;   // m = m1_exponent / 2 in contrast variables
  double c_mass = 0.0;           // bound = k0 + c_mass M1^{m1_exponent} l2_mass + c_forcing (...) ||f||
  double c_forcing = 0.0;
};

/// Explicit right-hand side of the L-infinity estimate on B_2 -> B_{1/2}.
/// l2_mass = ||(v-k0)_+||_{L^2(B_2)}; lorentz_f = ||f||_{L^{n,1}(B_2)}.
inline LinftyBound linfty_bound(const IterationConstants& C, double l2_mass, double lorentz_f) {
  C.validate();
  if (!(l2_mass >= 0.0) || !(lorentz_f >= 0.0)) throw std::invalid_argument("linfty_bound: norms must be >= 0");
  const int n = C.n;
  const double s = C.star();
  const double sn = C.star_n();
  const double t = C.tau();
  const double e = contrast_exponent(n, C.kappa);
  LinftyBound b;
  b.m1_exponent = 1.0 + e;
  b.subsolution_exponent = 0.5 * b.m1_exponent;
  // Increments proportional to J0: sum of 2^{-ell} is 1, sum of tau^{ell-1} is 1/(1-tau).
  const double KJ = std::pow(std::pow(2.0, C.alpha()) * 3.0 * C.c1 * C.cm * C.M1 * std::pow(t, -0.5 * s), e) +
                    std::pow(3.0 * C.c2 / t, n / sn) / (1.0 - t);
  // Cutoff with eta = 1 on B_1, support in B_2, |grad eta| <= 1, plus
  // ||f||_{L^2(B_2)} <= |B_2|^{1/2-1/n} ||f||_{L^n} <= |B_2|^{1/2-1/n} n^{-(n-1)/n} ||f||_{L^{n,1}}.
  const double ball2 = std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0) * std::pow(2.0, n);
  const double f_l2 = std::pow(ball2, 0.5 - 1.0 / n) * lorentz_embedding_constant(n) * lorentz_f;
  b.J0_bound = (1.0 + C.cm * C.M1) * l2_mass + C.cm * C.M2 * f_l2;
  b.level_part = KJ * b.J0_bound;
  // Forcing increments: sum over ell of c2^{1/2*_n} tau^{ell-1} J0 / (omega^{-1})^{1/2*_n}
  // <= 3 c2^{1/2*_n} c_m M2 ||f||_{L^{n,1}} / (2 tau^2 |log tau|).
  b.forcing_part = 3.0 * std::pow(C.c2, 1.0 / sn) * C.cm * C.M2 * lorentz_f / (2.0 * t * t * std::abs(std::log(t)));
  b.bound = C.k0 + b.level_part + b.forcing_part;
  // Contrast-explicit form, using M1 >= 1.
  const double KJ1 = KJ / std::pow(C.M1, e);
  b.c_mass = KJ1 * (1.0 + C.cm);
  b.c_forcing = KJ1 * C.cm * f_l2 / std::max(lorentz_f, std::numeric_limits<double>::min()) +
                3.0 * std::pow(C.c2, 1.0 / sn) * C.cm / (2.0 * t * t * std::abs(std::log(t)));
  return b;
}

// ------------------------------------------------------------ optimal cutoff

struct CutoffResult {
  ScalarField cutoff;          // radial piecewise-linear eta on the grid (empty in radial mode)
  std::vector<double> shell_radii;   // shell boundaries rho = r_0 < ... < r_K = sigma
  std::vector<double> shell_values;  // eta at the shell boundaries
  double energy = 0.0;         // minimal shell-model energy sum a_j (d eta_j)^2 / dr
  double grid_energy = 0.0;    // int |v| |grad eta|^2 on the grid (grid mode only)
  double bound = 0.0;          // (sigma-rho)^{-(1+1/delta)} (int (int_{S_r}|v|)^delta dr)^{1/delta}
};

namespace detail {

/// Shell-model minimizer: with shell weights a_j (surface integrals of |v| at
/// shell midpoints) the energy sum a_j x_j^2 / dr under sum x_j = 1 is
/// minimized by x_j proportional to 1/a_j; zero-weight shells absorb the drop.
inline void minimize_shells(const std::vector<double>& a, double dr, double rho, double delta, CutoffResult& out) {
  const std::size_t K = a.size();
  out.shell_radii.resize(K + 1);
  for (std::size_t j = 0; j <= K; ++j) out.shell_radii[j] = rho + dr * static_cast<double>(j);
  std::vector<double> drop(K, 0.0);
  std::size_t zeros = 0;
  for (double x : a) zeros += (x == 0.0);
  if (zeros > 0) {
    for (std::size_t j = 0; j < K; ++j) drop[j] = a[j] == 0.0 ? 1.0 / static_cast<double>(zeros) : 0.0;
    out.energy = 0.0;
  } else {
    double inv_sum = 0.0;
    for (double x : a) inv_sum += 1.0 / x;
    for (std::size_t j = 0; j < K; ++j) drop[j] = (1.0 / a[j]) / inv_sum;
    out.energy = 1.0 / (dr * inv_sum);
  }
  out.shell_values.assign(K + 1, 1.0);
  for (std::size_t j = 0; j < K; ++j) out.shell_values[j + 1] = std::max(0.0, out.shell_values[j] - drop[j]);
  out.shell_values.back() = 0.0;
  double integral = 0.0;
  for (double x : a) integral += std::pow(x, delta) * dr;
  const double width = dr * static_cast<double>(K);
  out.bound = std::pow(width, -(1.0 + 1.0 / delta)) * std::pow(integral, 1.0 / delta);
}

inline double shell_profile(const CutoffResult& c, double r) {
  if (r <= c.shell_radii.front()) return 1.0;
  if (r >= c.shell_radii.back()) return 0.0;
  const auto it = std::upper_bound(c.shell_radii.begin(), c.shell_radii.end(), r);
  const std::size_t j = static_cast<std::size_t>(it - c.shell_radii.begin()) - 1;
  const double u = (r - c.shell_radii[j]) / (c.shell_radii[j + 1] - c.shell_radii[j]);
  return c.shell_values[j] + u * (c.shell_values[j + 1] - c.shell_values[j]);
}

inline void check_cutoff_args(double rho, double sigma, double delta, double h) {
  if (!(rho > 0.0 && rho < sigma)) throw std::invalid_argument("optimal_cutoff: need 0 < rho < sigma");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("optimal_cutoff: delta must lie in (0,1]");
  if (sigma - rho < 2.0 * h) throw std::invalid_argument("optimal_cutoff: degenerate shell (sigma - rho < 2h)");
}

}  // namespace detail

/// Optimal radial cutoff on the grid: shells of width ~h between rho and
/// sigma, weights from the thin-shell sphere integral of |v|.
inline CutoffResult optimal_cutoff(const ScalarField& v, double rho, double sigma, double delta) {
  const Grid& g = v.grid();
  const double h = g.spacing();
  detail::check_cutoff_args(rho, sigma, delta, h);
  const auto K = static_cast<std::size_t>(std::floor((sigma - rho) / h + 1e-9));
  const double dr = (sigma - rho) / static_cast<double>(K);
  std::vector<double> absv(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) absv[k] = std::abs(v[k]);
  const ScalarField av(g, std::move(absv));
  std::vector<double> a(K);
  for (std::size_t j = 0; j < K; ++j) a[j] = sphere_integral(av, rho + (static_cast<double>(j) + 0.5) * dr);
  CutoffResult out;
  detail::minimize_shells(a, dr, rho, delta, out);
  out.cutoff = ScalarField::sample(g, [&](std::span<const double> x) {
    double r2 = 0.0;
    for (double xi : x) r2 += xi * xi;
    return detail::shell_profile(out, std::sqrt(r2));
  });
  const VectorField ge = gradient(out.cutoff);
  double e = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) e += av[k] * ge.norm_squared(k);
  out.grid_energy = e * g.cell_volume();
  return out;
}

/// Surface area of the unit sphere S^{n-1} in R^n.
inline double unit_sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Radial mode: v depends on |x| only; shell weights |S^{n-1}| r^{n-1} |v(r)|.
inline CutoffResult optimal_cutoff_radial(const std::function<double(double)>& v_of_r, int n, double rho,
                                          double sigma, double delta, double h) {
  detail::check_cutoff_args(rho, sigma, delta, h);
  const auto K = static_cast<std::size_t>(std::floor((sigma - rho) / h + 1e-9));
  const double dr = (sigma - rho) / static_cast<double>(K);
  std::vector<double> a(K);
  for (std::size_t j = 0; j < K; ++j) {
    const double r = rho + (static_cast<double>(j) + 0.5) * dr;
    a[j] = unit_sphere_area(n) * std::pow(r, n - 1) * std::abs(v_of_r(r));
  }
  CutoffResult out;
  detail::minimize_shells(a, dr, rho, delta, out);
  return out;
}

// ------------------------------------------------------------- hole filling

struct HoleFillingBound {
  double c = 1.0;
  double bound = 0.0;
};

/// c(alpha, theta) = (1-lambda)^{-alpha} / (1 - theta lambda^{-alpha}), lambda = theta^{1/(2 alpha)}
/// (lambda = 1/2 when theta = 0), and the bound c ((sigma-rho)^{-alpha} A + B).
inline HoleFillingBound hole_filling_bound(double theta, double A, double B, double alpha, double rho, double sigma) {
  if (!(theta >= 0.0 && theta < 1.0)) throw std::invalid_argument("hole_filling_bound: theta must lie in [0,1)");
  if (!(alpha > 0.0) || !(A >= 0.0) || !(B >= 0.0)) throw std::invalid_argument("hole_filling_bound: need alpha > 0, A, B >= 0");
  if (!(rho < sigma)) throw std::invalid_argument("hole_filling_bound: need rho < sigma");
  const double lambda = theta == 0.0 ? 0.5 : std::pow(theta, 1.0 / (2.0 * alpha));
  HoleFillingBound r;
  r.c = std::pow(1.0 - lambda, -alpha) / (1.0 - theta * std::pow(lambda, -alpha));
  r.bound = r.c * (std::pow(sigma - rho, -alpha) * A + B);
  return r;
}

struct HoleFillingCheck {
  bool hypothesis_holds = true;
  bool conclusion_holds = true;
  double worst_hypothesis_margin = std::numeric_limits<double>::infinity();
  HoleFillingBound bound;
};

/// Given samples (t_i, Z(t_i)) on [rho, sigma] with t_0 = rho and t_last = sigma,
/// verifies the hypothesis on every sampled pair s < t and then Z(rho) <= bound.
inline HoleFillingCheck check_hole_filling(const std::vector<std::pair<double, double>>& Z, double theta, double A,
                                           double B, double alpha) {
  if (Z.size() < 2) throw std::invalid_argument("check_hole_filling: need at least two samples");
  HoleFillingCheck chk;
  for (std::size_t i = 0; i < Z.size(); ++i) {
    for (std::size_t j = i + 1; j < Z.size(); ++j) {
      const double s = Z[i].first, t = Z[j].first;
      if (!(t > s)) throw std::invalid_argument("check_hole_filling: sample points must increase");
      const double rhs = theta * Z[j].second + std::pow(t - s, -alpha) * A + B;
      const double margin = rhs - Z[i].second;
      chk.worst_hypothesis_margin = std::min(chk.worst_hypothesis_margin, margin);
      if (margin < -1e-12 * std::max(1.0, std::abs(rhs))) chk.hypothesis_holds = false;
    }
  }
  chk.bound = hole_filling_bound(theta, A, B, alpha, Z.front().first, Z.back().first);
  chk.conclusion_holds = Z.front().second <= chk.bound.bound * (1.0 + 1e-12);
  return chk;
}

// ---------------------------------------------------------- exponent algebra

struct ExponentSet {
  int n = 3;
  double p = 2.0, q = 2.0, kappa = 0.25;
  double M = 0.0;             // max{kappa, (n-3)/2}
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  double alpha_n = 0.0;       // NaN when the denominator is not positive
  double beta_n = 0.0;
  double m = 0.0;             // contrast exponent of the subsolution bound
  bool pqrhs = false;         // q/p < 1 + min{2/(n-1), 4(p-1)/(p(n-3))}
  bool pq = false;            // q/p < 1 + 2/(n-1)
  bool kappa_in_range = false;  // kappa < min{1/2, (2p-q)/(q-p), 2(p-1)/(q-p)}
  bool gamma_lt_one = false;
  bool gamma_tilde_lt_one = false;
  bool admissible() const { return pqrhs && kappa_in_range && gamma_lt_one && gamma_tilde_lt_one; }
};

inline ExponentSet lipschitz_exponents(int n, double p, double q, double kappa) {
  if (n < 3) throw std::invalid_argument("lipschitz_exponents: n must be >= 3");
  if (!(p > 1.0) || !(q >= p)) throw std::invalid_argument("lipschitz_exponents: need 1 < p <= q");
  if (!(kappa > 0.0 && kappa < 0.5)) throw std::invalid_argument("lipschitz_exponents: kappa must lie in (0, 1/2)");
  ExponentSet x;
  x.n = n;
  x.p = p;
  x.q = q;
  x.kappa = kappa;
  x.M = std::max(kappa, 0.5 * (n - 3));
  const double r = (q - p) / p;
  x.gamma = 0.5 * r * x.M + q / (2.0 * p);
  x.gamma_tilde = 0.5 * r * x.M + 1.0 / p;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (n >= 4) {
    const double da = (n + 1) * p - (n - 1) * q;
    const double db = 4.0 * (p - 1.0) - (q - p) * (n - 3);
    x.alpha_n = da > 0.0 ? 2.0 / da : nan;
    x.beta_n = db > 0.0 ? 4.0 / db : nan;
    x.m = 0.25 * (n - 1);
  } else {
    const double da = 2.0 * p - q - (q - p) * kappa;
    const double db = 2.0 * (p - 1.0) - (q - p) * kappa;
    x.alpha_n = da > 0.0 ? 1.0 / da : nan;
    x.beta_n = db > 0.0 ? 2.0 / db : nan;
    x.m = 0.5 * (1.0 + kappa);
  }
  const double ratio = q / p;
  const double lim_b = n == 3 ? std::numeric_limits<double>::infinity() : 4.0 * (p - 1.0) / (p * (n - 3));
  x.pq = ratio < 1.0 + 2.0 / (n - 1);
  x.pqrhs = ratio < 1.0 + std::min(2.0 / (n - 1), lim_b);
  double kmax = 0.5;
  if (q > p) kmax = std::min({0.5, (2.0 * p - q) / (q - p), 2.0 * (p - 1.0) / (q - p)});
  x.kappa_in_range = kappa < kmax;
  x.gamma_lt_one = x.gamma < 1.0;
  x.gamma_tilde_lt_one = x.gamma_tilde < 1.0;
  return x;
}

// ------------------------------------------------- Sobolev constant on spheres

/// Zonal test profile w(theta) on a sphere, theta the polar angle; returns (w, dw/dtheta).
using ZonalProfile = std::function<std::pair<double, double>(double)>;

/// Deterministic library: the constant first, then alternating
/// exp(b (cos theta - 1)) and bubbles (1 + b (1 - cos theta))^{-a} with growing b.
inline std::vector<ZonalProfile> sphere_test_library(std::size_t count, int sphere_dim) {
  std::vector<ZonalProfile> lib;
  lib.push_back([](double) { return std::pair<double, double>{1.0, 0.0}; });
  const double a = sphere_dim > 2 ? 0.5 * (sphere_dim - 2) : 0.5;
  for (std::size_t k = 0; lib.size() < count; ++k) {
    const double b = std::pow(2.0, static_cast<double>(k) / 2.0 - 2.0);
    lib.push_back([b](double th) {
      const double v = std::exp(b * (std::cos(th) - 1.0));  // scaled to stay finite
      return std::pair<double, double>{v, -b * std::sin(th) * v};
    });
    if (lib.size() >= count) break;
    lib.push_back([a, b](double th) {
      const double base = 1.0 + b * (1.0 - std::cos(th));
      const double v = std::pow(base, -a);
      return std::pair<double, double>{v, -a * std::pow(base, -a - 1.0) * b * std::sin(th)};
    });
  }
  return lib;
}

namespace detail {

/// Integral over [0, pi] of g(theta) sin^{d-1}(theta), graded panels toward both poles.
template <class Fn>
double zonal_integral(Fn&& g, int d) {
  using boost::math::quadrature::gauss;
  std::vector<double> cuts = {0.0};
  for (int k = 14; k >= 1; --k) cuts.push_back(0.5 * std::numbers::pi * std::pow(0.5, k));
  const std::size_t half = cuts.size();
  for (std::size_t i = half; i-- > 1;) cuts.push_back(std::numbers::pi - cuts[i]);
  cuts.push_back(std::numbers::pi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    s += gauss<double, 20>::integrate([&](double th) { return g(th) * std::pow(std::sin(th), d - 1); }, cuts[i], cuts[i + 1]);
  }
  return s;
}

}  // namespace detail

/// ||w||_{L^{2*}(S_r)} / ||w||_{W^{1,2}(S_r)} for a zonal profile on the sphere of radius r in R^n.
inline double sphere_sobolev_ratio(const ZonalProfile& w, int n, double exponent, double r) {
  const int d = n - 1;
  const double area = unit_sphere_area(d);  // |S^{d-1}| weights the polar angle
  const double rd = std::pow(r, d);
  const double lq = area * rd * detail::zonal_integral([&](double th) { return std::pow(std::abs(w(th).first), exponent); }, d);
  const double l2 = area * rd * detail::zonal_integral([&](double th) { const double v = w(th).first; return v * v; }, d);
  const double gr = area * rd / (r * r) * detail::zonal_integral([&](double th) { const double v = w(th).second; return v * v; }, d);
  return std::pow(lq, 1.0 / exponent) / std::sqrt(l2 + gr);
}

/// Largest ratio over the library on S_r.
inline double estimate_sphere_sobolev_constant(int n, double exponent, const std::vector<ZonalProfile>& library, double r = 1.0) {
  if (n < 3) throw std::invalid_argument("estimate_sphere_sobolev_constant: n must be >= 3");
  if (!(exponent >= 2.0)) throw std::invalid_argument("estimate_sphere_sobolev_constant: exponent must be >= 2");
  if (library.empty()) throw std::invalid_argument("estimate_sphere_sobolev_constant: empty library");
  double best = 0.0;
  for (const auto& w : library) best = std::max(best, sphere_sobolev_ratio(w, n, exponent, r));
  return best;
}

/// Sharp constant K(n) in ||u||_{L^{2n/(n-2)}(R^n)} <= K(n) ||grad u||_{L^2(R^n)}.
inline double sobolev_constant_rn(int n) {
  const double omega = unit_sphere_area(n + 1);  // |S^n|
  return std::sqrt(4.0 / (n * (n - 2.0) * std::pow(omega, 2.0 / n)));
}

struct StructuralConstants {
  double c1 = 1.0;
  double c2 = 1.0;
  double sphere_constant = 0.0;  // largest observed sphere ratio over r in {1/2, 3/4, 1}
};

/// c1 = max(1, c_S^{2*/2}) with c_S from the zonal library over radii in [1/2, 1];
/// c2 = max(1, (C_ext K(n))^{2*_n}) with an assumed extension constant C_ext.
inline StructuralConstants default_structural_constants(int n, double kappa, double extension_constant = 4.0,
                                                        std::size_t library_size = 24) {
  const double s = two_star(n, kappa);
  const auto lib = sphere_test_library(library_size, n - 1);
  StructuralConstants c;
  for (double r : {0.5, 0.75, 1.0}) c.sphere_constant = std::max(c.sphere_constant, estimate_sphere_sobolev_constant(n, s, lib, r));
  c.c1 = std::max(1.0, std::pow(c.sphere_constant, 0.5 * s));
  c.c2 = std::max(1.0, std::pow(extension_constant * sobolev_constant_rn(n), two_star_n(n)));
  return c;
}

}  // namespace pqlab
