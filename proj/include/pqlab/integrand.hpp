#pragma once

// Radial (p,q)-growth integrands F(z) = cp (mu^2+|z|^2)^{p/2} + cq (mu^2+|z|^2)^{q/2},
// structural checks against the growth/ellipticity bounds, growth envelopes,
// and the mollify-and-glue regularization F_eps = F~_eps + eps L_p.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pqlab/errors.hpp"
#include "pqlab/grid.hpp"

namespace pqlab {

struct PQParams {
  double nu = 1.0;
  double Lambda = 1.0;
  double p = 2.0;
  double q = 2.0;
  double mu = 0.0;

  void validate() const {
    if (!(nu > 0.0) || !(Lambda >= nu)) throw std::invalid_argument("PQParams: need 0 < nu <= Lambda");
    if (!(p > 1.0) || !(q >= p)) throw std::invalid_argument("PQParams: need 1 < p <= q");
    if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("PQParams: mu must lie in [0,1]");
  }
};

/// Derivatives of a radial profile phi(s): value, phi', phi'/s and phi''.
/// phi'/s is carried separately because it stays finite at s = 0.
struct RadialDerivs {
  double value = 0.0;
  double d1 = 0.0;
  double d1_over_s = 0.0;
  double d2 = 0.0;

  RadialDerivs& operator+=(const RadialDerivs& o) {
    value += o.value;
    d1 += o.d1;
    d1_over_s += o.d1_over_s;
    d2 += o.d2;
    return *this;
  }
  RadialDerivs operator*(double c) const { return {value * c, d1 * c, d1_over_s * c, d2 * c}; }
};

/// Anything that exposes its radial profile F(z) = phi(|z|).
template <class I>
concept RadialIntegrand = requires(const I& f, double s) {
  { f.radial(s) } -> std::convertible_to<RadialDerivs>;
};

namespace detail {

/// c (mu^2+s^2)^{e/2} and its radial derivatives.
inline RadialDerivs power_term(double c, double e, double mu, double s) {
  if (c == 0.0) return {};
  const double b = mu * mu + s * s;
  if (b == 0.0) {
    if (e < 2.0) throw std::domain_error("power term is singular at the origin (mu = 0, exponent < 2)");
    const double k = (e == 2.0) ? 2.0 * c : 0.0;
    return {0.0, 0.0, k, k};
  }
  const double base_pow = std::pow(b, 0.5 * e - 1.0);
  const double ratio = s * s / b;
  RadialDerivs r;
  r.value = c * base_pow * b;
  r.d1_over_s = c * e * base_pow;
  r.d1 = r.d1_over_s * s;
  r.d2 = c * e * base_pow * (1.0 + (e - 2.0) * ratio);
  return r;
}

}  // namespace detail

class ModelIntegrand {
 public:
  ModelIntegrand() = default;
  ModelIntegrand(PQParams params, double cp, double cq) : params_(params), cp_(cp), cq_(cq) {
    params_.validate();
    if (!(cp >= 0.0) || !(cq >= 0.0)) throw std::invalid_argument("ModelIntegrand: coefficients must be >= 0");
  }

  const PQParams& params() const { return params_; }
  double cp() const { return cp_; }
  double cq() const { return cq_; }

  RadialDerivs radial(double s) const {
    RadialDerivs r = detail::power_term(cp_, params_.p, params_.mu, s);
    r += detail::power_term(cq_, params_.q, params_.mu, s);
    return r;
  }

  /// True when the Hessian blows up at z = 0.
  bool singular_at_origin() const {
    return params_.mu == 0.0 && ((cp_ > 0.0 && params_.p < 2.0) || (cq_ > 0.0 && params_.q < 2.0));
  }

 private:
  PQParams params_;
  double cp_ = 1.0;
  double cq_ = 0.0;
};

inline double norm_of(std::span<const double> z) {
  double s = 0.0;
  for (double c : z) s += c * c;
  return std::sqrt(s);
}

template <RadialIntegrand I>
double eval_F(const I& f, std::span<const double> z) {
  return f.radial(norm_of(z)).value;
}

template <RadialIntegrand I>
Eigen::VectorXd eval_dF(const I& f, std::span<const double> z) {
  const RadialDerivs r = f.radial(norm_of(z));
  Eigen::VectorXd g(static_cast<Eigen::Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) g(static_cast<Eigen::Index>(i)) = r.d1_over_s * z[i];
  return g;
}

/// d2 zz^T/|z|^2 + (d1/s)(I - zz^T/|z|^2); d2 * I at the origin.
template <RadialIntegrand I>
Eigen::MatrixXd eval_d2F(const I& f, std::span<const double> z) {
  const double s = norm_of(z);
  const RadialDerivs r = f.radial(s);
  const auto n = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n) * r.d1_over_s;
  if (s > 0.0) {
    const double c = (r.d2 - r.d1_over_s) / (s * s);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) H(i, j) += c * z[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(j)];
    }
  } else {
    H = Eigen::MatrixXd::Identity(n, n) * r.d2;
  }
  return H;
}

struct AssumptionSample {
  std::vector<double> z;
  std::vector<double> xi;
};

struct AssumptionReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  int worst_line = 0;  // 1: growth of F, 2: Hessian norm, 3: Hessian lower bound
  bool passed() const { return violations == 0; }
};

/// Checks the three structural lines (two-sided growth of F, upper bound on
/// |d^2F|, lower ellipticity along xi) at every sample. Margins are relative:
/// (allowed - actual) / max(|allowed|, |actual|).
template <RadialIntegrand I>
AssumptionReport verify_assumption(const I& f, const PQParams& prm, const std::vector<AssumptionSample>& samples) {
  AssumptionReport rep;
  auto record = [&](double allowed, double actual, int line) {
    const double scale = std::max({std::abs(allowed), std::abs(actual), std::numeric_limits<double>::min()});
    const double margin = (allowed - actual) / scale;
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_line = line;
    }
    return margin >= -1e-12;
  };
  for (const auto& smp : samples) {
    const double s = norm_of(smp.z);
    if (!(s > 0.0)) throw std::invalid_argument("verify_assumption: sample z must be nonzero");
    if (smp.xi.size() != smp.z.size()) throw std::invalid_argument("verify_assumption: xi has wrong dimension");
    ++rep.samples;
    const double b = prm.mu * prm.mu + s * s;
    const double F = eval_F(f, smp.z);
    const Eigen::MatrixXd H = eval_d2F(f, smp.z);
    const Eigen::Map<const Eigen::VectorXd> xi(smp.xi.data(), static_cast<Eigen::Index>(smp.xi.size()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    const double hnorm = es.eigenvalues().cwiseAbs().maxCoeff();
    const double quad = xi.dot(H * xi);
    bool ok = true;
    ok &= record(F, prm.nu * std::pow(b, 0.5 * prm.p), 1);
    ok &= record(prm.Lambda * (std::pow(b, 0.5 * prm.q) + std::pow(b, 0.5 * prm.p)), F, 1);
    ok &= record(prm.Lambda * (std::pow(b, 0.5 * prm.q - 1.0) + std::pow(b, 0.5 * prm.p - 1.0)), hnorm, 2);
    ok &= record(quad, prm.nu * std::pow(b, 0.5 * prm.p - 1.0) * xi.squaredNorm(), 3);
    if (!ok) ++rep.violations;
  }
  return rep;
}

/// Lower and upper growth envelopes g1, g2_eps and the integrated lower envelope G_T.
class GrowthEnvelope {
 public:
  GrowthEnvelope(PQParams params, double eps) : params_(params), eps_(eps) {
    params_.validate();
    if (!(eps >= 0.0)) throw std::invalid_argument("GrowthEnvelope: eps must be >= 0");
  }

  const PQParams& params() const { return params_; }
  double eps() const { return eps_; }

  double g1(double s) const {
    check_arg(s, params_.p);
    return params_.nu * std::pow(params_.mu * params_.mu + s * s, 0.5 * (params_.p - 2.0));
  }

  double g2eps(double s) const {
    check_arg(s, std::min(params_.p, params_.q));
    const double b = params_.mu * params_.mu + s * s;
    const double L = params_.Lambda;
    return L * std::pow(b, 0.5 * (params_.p - 2.0)) + L * std::pow(b, 0.5 * (params_.q - 2.0)) +
           eps_ * L * std::pow(1.0 + s * s, 0.5 * std::min(params_.p - 2.0, 0.0));
  }

  /// Integral of g1(s) s over [T, max(t,T)] in closed form.
  double G_T(double t, double T) const {
    if (!(T > 0.0) || !(t >= 0.0)) throw std::invalid_argument("G_T: need T > 0 and t >= 0");
    if (t <= T) return 0.0;
    const double m2 = params_.mu * params_.mu;
    const double p = params_.p;
    return params_.nu / p * (std::pow(m2 + t * t, 0.5 * p) - std::pow(m2 + T * T, 0.5 * p));
  }

 private:
  void check_arg(double s, double e) const {
    if (!(s >= 0.0)) throw std::invalid_argument("growth envelope: s must be >= 0");
    if (s == 0.0 && params_.mu == 0.0 && e < 2.0) {
      throw std::domain_error("growth envelope is singular at s = 0 when mu = 0 and p < 2");
    }
  }

  PQParams params_;
  double eps_ = 0.0;
};

struct RatioBoundReport {
  double c1_formula = 0.0;  // constant assembled from the growth-envelope estimates
  double c1_needed = 0.0;   // smallest constant that works on the sampled t
  bool first_holds = true;  // g2/g1 <= c1 (G^{(q-p)/p} + 1 + eps/(mu^2+T^2)^{(p-2)/2})
  bool second_holds = true; // t <= c1 G^{1/p} + (mu^2+T^2)^{1/2}
  std::size_t points = 0;
};

/// Constant for both envelope-ratio inequalities, from
/// (x+a)^r <= max(1, 2^{r-1}) (x^r + a^r) and t^p <= (p/nu) G + (mu^2+T^2)^{p/2}.
inline double ratio_bound_constant(const GrowthEnvelope& env, double T) {
  const PQParams& P = env.params();
  const double r = (P.q - P.p) / P.p;
  const double Cr = std::max(1.0, std::pow(2.0, r - 1.0));
  const double a = std::pow(P.mu * P.mu + T * T, 0.5 * P.p);
  const double contrast = P.Lambda / P.nu;
  const double growth = contrast * std::max(Cr * std::pow(P.p / P.nu, r), Cr * std::pow(a, r) + 2.0);
  return std::max({1.0, growth, std::pow(P.p / P.nu, 1.0 / P.p)});
}

/// Evaluates both inequalities with constant c1 at t >= T; returns the
/// constant each one needs at this t.
inline std::pair<double, double> ratio_bound_needed(const GrowthEnvelope& env, double T, double t) {
  const PQParams& P = env.params();
  const double r = (P.q - P.p) / P.p;
  const double G = env.G_T(t, T);
  const double base = P.mu * P.mu + T * T;
  const double denom = (r == 0.0 ? 1.0 : std::pow(G, r)) + 1.0 + env.eps() / std::pow(base, 0.5 * (P.p - 2.0));
  const double first = env.g2eps(t) / env.g1(t) / denom;
  const double excess = t - std::sqrt(base);
  double second = 0.0;
  if (excess > 0.0) {
    second = G > 0.0 ? excess / std::pow(G, 1.0 / P.p) : std::numeric_limits<double>::infinity();
  }
  return {first, second};
}

/// Sweeps log-spaced t in [T, t_max].
inline RatioBoundReport ratio_bound_check(const GrowthEnvelope& env, double T, double t_max, std::size_t points = 400) {
  if (!(T > 0.0) || !(t_max >= T) || points < 2) throw std::invalid_argument("ratio_bound_check: bad range");
  RatioBoundReport rep;
  rep.c1_formula = ratio_bound_constant(env, T);
  const double lr = std::log(t_max / T);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = T * std::exp(lr * static_cast<double>(i) / static_cast<double>(points - 1));
    const auto [first, second] = ratio_bound_needed(env, T, t);
    rep.c1_needed = std::max({rep.c1_needed, first, second});
    rep.first_holds = rep.first_holds && first <= rep.c1_formula * (1.0 + 1e-12);
    rep.second_holds = rep.second_holds && second <= rep.c1_formula * (1.0 + 1e-12);
    ++rep.points;
  }
  return rep;
}

/// L_p(z) = |z|^2/2 for p >= 2, (1+|z|^2)^{p/2} - 1 for p in (1,2).
inline RadialDerivs lp_penalty(double p, double s) {
  if (p >= 2.0) return {0.5 * s * s, s, 1.0, 1.0};
  const double b = 1.0 + s * s;
  const double bp = std::pow(b, 0.5 * p - 1.0);
  return {bp * b - 1.0, p * bp * s, p * bp, p * bp * (1.0 + (p - 2.0) * s * s / b)};
}

namespace detail {

/// Standard bump exp(-1/(1-y^2)) on (-1,1), unnormalized.
inline double bump(double y) {
  const double a = 1.0 - y * y;
  return a > 0.0 ? std::exp(-1.0 / a) : 0.0;
}

inline double bump_derivative(double y) {
  const double a = 1.0 - y * y;
  return a > 0.0 ? bump(y) * (-2.0 * y / (a * a)) : 0.0;
}

inline constexpr int kMollifierIntervals = 4096;

inline double bump_mass() {
  static const double mass = [] {
    const int N = kMollifierIntervals;
    const double h = 2.0 / N;
    double s = 0.0;
    for (int i = 0; i <= N; ++i) {
      const double w = (i == 0 || i == N) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += w * bump(-1.0 + i * h);
    }
    return s * h / 3.0;
  }();
  return mass;
}

/// Degree-5 smoothstep: 1 below a, 0 above b, C^2.
struct Smoothstep {
  double a = 0.0;
  double b = 1.0;
  void eval(double s, double& v, double& d1, double& d2) const {
    if (s <= a) { v = 1.0; d1 = 0.0; d2 = 0.0; return; }
    if (s >= b) { v = 0.0; d1 = 0.0; d2 = 0.0; return; }
    const double L = b - a;
    const double x = (s - a) / L;
    v = 1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
    d1 = -30.0 * x * x * (1.0 - x) * (1.0 - x) / L;
    d2 = -60.0 * x * (1.0 - x) * (1.0 - 2.0 * x) / (L * L);
  }
};

}  // namespace detail

struct RegularizationReport {
  double eps = 0.0;
  double T = 0.0;
  bool smoothed = false;          // false when F~ = F
  double sup_diff = 0.0;          // sup_{|z|<=T} |F~ - F|
  double min_radial_curvature = 0.0;  // min over scanned s of min(phi'', phi'/s) for F~
  double min_net_eigenvalue = 0.0;    // min Hessian eigenvalue of F_eps on the net in B_{2T}
  bool convex = true;
};

/// F_eps = F~_eps + eps L_p with F~_eps = rho (F * phi_eps) + (1 - rho) F,
/// where the mollification acts on the even radial profile and rho is a
/// smoothstep from 1 at T/4 to 0 at T/3. When F is C^2 (mu > 0 or exponents
/// >= 2) F~_eps = F.
class RegularizedIntegrand {
 public:
  RegularizedIntegrand() = default;

  RegularizedIntegrand(ModelIntegrand base, double eps, double T)
      : base_(base), eps_(eps), T_(T), glue_{T / 4.0, T / 3.0} {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("regularize: eps must lie in (0,1]");
    if (!(T > 0.0 && T <= 1.0)) throw std::invalid_argument("regularize: T must lie in (0,1]");
    smoothed_ = base_.singular_at_origin();
    if (smoothed_) build_table();
  }

  const ModelIntegrand& base() const { return base_; }
  double eps() const { return eps_; }
  double T() const { return T_; }
  bool smoothed() const { return smoothed_; }

  /// Profile of F~_eps (without the eps L_p term).
  RadialDerivs tilde_radial(double s) const {
    if (!smoothed_ || s >= glue_.b) return base_.radial(s);
    double rv, r1, r2;
    glue_.eval(s, rv, r1, r2);
    const RadialDerivs m = mollified(s);
    if (rv == 1.0) return m;
    const RadialDerivs f = base_.radial(s);
    RadialDerivs out;
    out.value = rv * m.value + (1.0 - rv) * f.value;
    out.d1 = r1 * (m.value - f.value) + rv * m.d1 + (1.0 - rv) * f.d1;
    out.d1_over_s = out.d1 / s;
    out.d2 = r2 * (m.value - f.value) + 2.0 * r1 * (m.d1 - f.d1) + rv * m.d2 + (1.0 - rv) * f.d2;
    return out;
  }

  RadialDerivs radial(double s) const {
    RadialDerivs r = tilde_radial(s);
    r += lp_penalty(base_.params().p, s) * eps_;
    return r;
  }

  /// Direct quadrature of the mollified profile (no table), for checks.
  RadialDerivs mollified_direct(double s) const {
    const int N = detail::kMollifierIntervals;
    const double h = 2.0 * eps_ / N;
    const double mass = detail::bump_mass();
    double v = 0.0, d1 = 0.0, d2 = 0.0;
    for (int i = 0; i <= N; ++i) {
      const double y = -eps_ + i * h;
      const double w = (i == 0 || i == N) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const double x = s - y;
      const double ax = std::abs(x);
      const RadialDerivs f = (ax > 0.0 || !base_.singular_at_origin()) ? base_.radial(ax) : RadialDerivs{};
      const double fp = x >= 0.0 ? f.d1 : -f.d1;
      const double phi = detail::bump(y / eps_) / (eps_ * mass);
      const double dphi = detail::bump_derivative(y / eps_) / (eps_ * eps_ * mass);
      v += w * f.value * phi;
      d1 += w * fp * phi;
      d2 += w * fp * dphi;
    }
    return {v * h / 3.0, d1 * h / 3.0, 0.0, d2 * h / 3.0};
  }

 private:
  void build_table() {
    double s = 0.0;
    const double end = glue_.b;
    while (true) {
      nodes_.push_back(s);
      if (s >= end) break;
      s = std::min(end, s + std::max(eps_, s) / 32.0);
    }
    table_.reserve(nodes_.size());
    for (double x : nodes_) table_.push_back(mollified_direct(x));
    table_.front().d1 = 0.0;  // odd derivative vanishes at the origin by symmetry
  }

  /// Quintic Hermite interpolation of (value, d1, d2) from the table.
  void interpolate(double s, double& v, double& d1, double& d2) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s);
    std::size_t k = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
    if (k + 1 >= nodes_.size()) k = nodes_.size() - 2;
    const double a = nodes_[k], h = nodes_[k + 1] - a;
    const RadialDerivs& L = table_[k];
    const RadialDerivs& R = table_[k + 1];
    const double Y = R.value - L.value - h * L.d1 - 0.5 * h * h * L.d2;
    const double D = h * R.d1 - h * L.d1 - h * h * L.d2;
    const double S = h * h * (R.d2 - L.d2);
    const double c3 = 10.0 * Y - 4.0 * D + 0.5 * S;
    const double c4 = -15.0 * Y + 7.0 * D - S;
    const double c5 = 6.0 * Y - 3.0 * D + 0.5 * S;
    const double c2 = 0.5 * h * h * L.d2;
    const double c1 = h * L.d1;
    const double t = (s - a) / h;
    v = L.value + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))));
    d1 = (c1 + t * (2.0 * c2 + t * (3.0 * c3 + t * (4.0 * c4 + t * 5.0 * c5)))) / h;
    d2 = (2.0 * c2 + t * (6.0 * c3 + t * (12.0 * c4 + t * 20.0 * c5))) / (h * h);
  }

  RadialDerivs mollified(double s) const {
    RadialDerivs r;
    interpolate(s, r.value, r.d1, r.d2);
    if (s >= eps_ / 8.0) {
      r.d1_over_s = r.d1 / s;
    } else {
      // phi'(s)/s = mean of phi'' over [0, s]; 4-point Gauss-Legendre.
      static constexpr double x[4] = {0.0694318442029737, 0.3300094782075719, 0.6699905217924281, 0.9305681557970263};
      static constexpr double w[4] = {0.1739274225687269, 0.3260725774312731, 0.3260725774312731, 0.1739274225687269};
      double acc = 0.0;
      for (int i = 0; i < 4; ++i) {
        double v, g, c;
        interpolate(x[i] * s, v, g, c);
        acc += w[i] * c;
      }
      r.d1_over_s = acc;
    }
    return r;
  }

  ModelIntegrand base_;
  double eps_ = 1.0;
  double T_ = 1.0;
  detail::Smoothstep glue_;
  bool smoothed_ = false;
  std::vector<double> nodes_;
  std::vector<RadialDerivs> table_;
};

namespace detail {

/// Kronecker sequence in [-1,1]^n restricted to the unit ball, plus the origin.
inline std::vector<std::vector<double>> ball_net(int n, std::size_t count) {
  std::vector<double> alpha(static_cast<std::size_t>(n));
  // Generalized golden ratio: root of x^{n+1} = x + 1.
  double g = 2.0;
  for (int it = 0; it < 60; ++it) g = std::pow(1.0 + g, 1.0 / (n + 1));
  for (int i = 0; i < n; ++i) alpha[static_cast<std::size_t>(i)] = std::fmod(std::pow(1.0 / g, i + 1), 1.0);
  std::vector<std::vector<double>> pts;
  pts.push_back(std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (std::size_t k = 1; pts.size() < count; ++k) {
    std::vector<double> x(static_cast<std::size_t>(n));
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = std::fmod(0.5 + alpha[static_cast<std::size_t>(i)] * static_cast<double>(k), 1.0);
      x[static_cast<std::size_t>(i)] = 2.0 * u - 1.0;
      r2 += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    }
    if (r2 <= 1.0) pts.push_back(std::move(x));
  }
  return pts;
}

}  // namespace detail

/// Measures sup |F~ - F| on |z| <= T, the radial curvature of F~ on [0, 2T]
/// and the smallest Hessian eigenvalue of F_eps on a 10^4-point net in B_{2T}.
inline RegularizationReport check_regularization(const RegularizedIntegrand& F, int n = 3, std::size_t net_points = 10000) {
  RegularizationReport rep;
  rep.eps = F.eps();
  rep.T = F.T();
  rep.smoothed = F.smoothed();
  const double T = F.T();
  const ModelIntegrand& base = F.base();
  const std::size_t scan = 20000;
  double min_curv = std::numeric_limits<double>::infinity();
  double sup_diff = 0.0;
  for (std::size_t i = 0; i <= scan; ++i) {
    const double s = 2.0 * T * static_cast<double>(i) / scan;
    const RadialDerivs r = F.tilde_radial(s);
    min_curv = std::min({min_curv, r.d2, r.d1_over_s});
    if (s <= T) {
      const double f = s > 0.0 || !base.singular_at_origin() ? base.radial(s).value : 0.0;
      sup_diff = std::max(sup_diff, std::abs(r.value - f));
    }
  }
  rep.sup_diff = sup_diff;
  rep.min_radial_curvature = min_curv;
  double min_eig = std::numeric_limits<double>::infinity();
  for (auto x : detail::ball_net(n, net_points)) {
    for (double& c : x) c *= 2.0 * T;
    const Eigen::MatrixXd H = eval_d2F(F, x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  rep.min_net_eigenvalue = min_eig;
  // F~ convex (up to roundoff on its curvature scale) and F_eps strictly convex.
  const double scale = std::max(1.0, std::abs(F.tilde_radial(2.0 * T).d2));
  rep.convex = min_curv >= -1e-9 * scale && min_eig > 0.0;
  return rep;
}

/// Builds F_eps and enforces the convexity check.
inline RegularizedIntegrand regularize(const ModelIntegrand& F, double eps, double T, int n = 3) {
  RegularizedIntegrand R(F, eps, T);
  if (R.smoothed()) {
    const RegularizationReport rep = check_regularization(R, n);
    if (!rep.convex) throw ConvexityError("regularize: glued integrand is not convex; shrink eps");
  }
  return R;
}

/// Largest eps (halving from eps_start, then geometric bisection) for which
/// the convexity check passes.
inline double find_eps0(const ModelIntegrand& F, double T, double eps_start = 1.0, int n = 3, std::size_t net_points = 2000) {
  auto ok = [&](double e) { return check_regularization(RegularizedIntegrand(F, e, T), n, net_points).convex; };
  double good = eps_start;
  double bad = 0.0;
  while (!ok(good)) {
    bad = good;
    good *= 0.5;
    if (good < 1e-8) throw ConvexityError("find_eps0: no admissible eps above 1e-8");
  }
  if (bad == 0.0) return good;
  for (int it = 0; it < 12; ++it) {
    const double mid = std::sqrt(good * bad);
    if (ok(mid)) good = mid; else bad = mid;
  }
  return good;
}

/// Pointwise clamp of f into [-m, m].
inline ScalarField truncate_forcing(const ScalarField& f, double m) {
  if (!(m > 0.0)) throw std::invalid_argument("truncate_forcing: m must be > 0");
  std::vector<double> v(f.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(f[i], -m, m);
  return ScalarField(f.grid(), std::move(v));
}

}  // namespace pqlab
