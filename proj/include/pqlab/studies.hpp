#pragma once

// Experiment drivers behind lab_cli. Each study reads an ExperimentConfig,
// runs its sweep (entries in parallel when threads > 1, rows kept in config
// order) and returns a CSV table plus a soundness verdict.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pqlab/config.hpp"
#include "pqlab/counterexample.hpp"
#include "pqlab/degiorgi.hpp"
#include "pqlab/grid.hpp"
#include "pqlab/integrand.hpp"
#include "pqlab/rearrangement.hpp"
#include "pqlab/solver.hpp"

namespace pqlab {

struct StudyResult {
  CsvTable table;
  bool sound = true;
  std::vector<std::string> notes;  // key=value lines for stderr
};

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline double ball_volume(int n, double r) {
  return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0) * std::pow(r, n);
}

/// Smallest grid half-width that is a multiple of h and at least `reach`.
inline double snapped_half_width(double reach, double h) { return std::ceil(reach / h - 1e-9) * h; }

inline void require_dyadic(double h) {
  const double m = 1.0 / h;
  if (std::abs(m - std::round(m)) > 1e-9) throw ConfigError("h must be 1/m for an integer m");
}

/// f0 |x|^{-1/2}, evaluated at max(|x|, h/2) so the origin node is finite, then clamped at cap.
inline ScalarField lorentz_forcing(const Grid& g, double f0, double cap) {
  const double floor_r = 0.5 * g.spacing();
  return ScalarField::sample(g, [&](std::span<const double> x) {
    double r2 = 0.0;
    for (double c : x) r2 += c * c;
    return std::min(cap, f0 / std::sqrt(std::max(std::sqrt(r2), floor_r)));
  });
}

/// slope * x_1 + curvature * x_2^2.
inline ScalarField study_boundary(const Grid& g, double slope, double curvature) {
  return ScalarField::sample(g, [&](std::span<const double> x) { return slope * x[0] + curvature * x[1] * x[1]; });
}

inline double mean_over_ball(const Grid& g, const BallRegion& ball, const std::function<double(std::size_t)>& fn) {
  const double vol = integrate_ball_with(g, ball, [](std::size_t) { return 1.0; });
  return integrate_ball_with(g, ball, fn) / vol;
}

inline void finish(const ExperimentConfig& cfg) {
  const auto extra = cfg.raw.unused();
  if (!extra.empty()) {
    std::string s;
    for (const auto& k : extra) s += (s.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys for " + cfg.experiment + ": " + s);
  }
}

}  // namespace detail

// ------------------------------------------------------------ counterexample

/// ||v_+||_{L^inf(B_{1/4})} / ||v_+||_{L^2(B_1)} over n_list x lambda_list,
/// with the per-n log-log slope and, for n in {3,4}, the grid PDE residual.
inline StudyResult counterexample_study(const ExperimentConfig& cfg) {
  std::vector<double> ns = cfg.raw.list("n_list", {static_cast<double>(cfg.n)});
  const int panels = cfg.raw.integer("panels", 4);
  const double pde_h = cfg.raw.number("pde_h", 1.0 / 16.0);
  detail::finish(cfg);
  detail::require_dyadic(pde_h);
  for (double n : ns) {
    if (n != std::floor(n) || n < 3 || n > 12) throw ConfigError("n_list entries must be integers in 3..12");
  }
  for (double L : cfg.lambda_list) {
    if (!(L >= 1.0)) throw ConfigError("lambda_list entries must be >= 1");
  }
  struct Item {
    CounterexampleRatio r;
    double residual = detail::kNaN;
  };
  const std::size_t nl = cfg.lambda_list.size();
  const auto items = parallel_map<Item>(ns.size() * nl, cfg.threads, [&](std::size_t i) {
    const int n = static_cast<int>(ns[i / nl]);
    const double L = cfg.lambda_list[i % nl];
    Item it;
    it.r = counterexample_ratio(n, L, panels);
    if (n == 3 || n == 4) it.residual = counterexample_pde_check(n, L, pde_h);
    return it;
  });
  StudyResult res;
  res.table.header = {"n", "lambda", "sup_quarter_ball", "l2_unit_ball", "ratio", "panels", "slope", "predicted_slope",
                      "pde_residual", "pde_ok"};
  for (std::size_t a = 0; a < ns.size(); ++a) {
    const int n = static_cast<int>(ns[a]);
    std::vector<double> ratios;
    for (std::size_t b = 0; b < nl; ++b) ratios.push_back(items[a * nl + b].r.ratio);
    const double slope = nl >= 2 ? loglog_slope(cfg.lambda_list, ratios) : detail::kNaN;
    for (std::size_t b = 0; b < nl; ++b) {
      const Item& it = items[a * nl + b];
      const double L = cfg.lambda_list[b];
      const bool ok = std::isnan(it.residual) || it.residual <= 1e-10 * L;
      res.sound = res.sound && ok && it.r.sup >= 1.0;
      res.table.add({cell(n), cell(L), cell(it.r.sup), cell(it.r.l2), cell(it.r.ratio), cell(it.r.panels), cell(slope),
                     cell(0.25 * (n - 1)), cell(it.residual), cell(ok)});
    }
  }
  res.notes.push_back("lambda_range=" + format_cell(cfg.lambda_list.front()) + ":" + format_cell(cfg.lambda_list.back()));
  return res;
}

// ------------------------------------------------------------------ contrast

/// sup_{B_{1/2}} v_+ / (mean_{B_1} v_+^2)^{1/2} against c_bound (contrast)^m.
/// mode = analytic: the explicit solution via cylindrical quadrature (any n).
/// mode = grid (n = 3): solve_linear with a = diag(1,..,1,(n-1)Lambda) and the
/// explicit solution as Dirichlet data; isotropic = 1 replaces a by I and the
/// data by the Lambda-free harmonic 1 + x_n^2 - |x'|^2/(n-1).
inline StudyResult contrast_study(const ExperimentConfig& cfg) {
  const std::string mode = cfg.raw.text("mode", "analytic");
  const double c_bound = cfg.raw.number("c_bound", 100.0);
  const bool isotropic = cfg.raw.integer("isotropic", 0) != 0;
  const int panels = cfg.raw.integer("panels", 4);
  detail::finish(cfg);
  if (mode != "analytic" && mode != "grid") throw ConfigError("mode must be analytic or grid");
  if (mode == "grid" && cfg.n != 3) throw ConfigError("grid mode requires n = 3");
  if (cfg.n < 3) throw ConfigError("contrast study requires n >= 3");
  if (mode == "analytic" && isotropic) throw ConfigError("isotropic applies to grid mode");
  const double h = cfg.h_list.front();
  detail::require_dyadic(h);
  const int n = cfg.n;
  const double m = subsolution_exponent(n, cfg.kappa);
  struct Item {
    double contrast = 0.0, sup = 0.0, avg = 0.0;
  };
  const auto items = parallel_map<Item>(cfg.lambda_list.size(), cfg.threads, [&](std::size_t i) {
    const double L = cfg.lambda_list[i];
    Item it;
    if (mode == "analytic") {
      if (!(L >= 1.0)) throw ConfigError("analytic mode needs Lambda >= 1");
      const CounterexampleRatio r = counterexample_ratio(n, L, panels);
      it.contrast = (n - 1) * L / cfg.nu;
      it.sup = CylindricalProfile(n, L).sup_on_ball(0.5);
      it.avg = r.l2 / std::sqrt(detail::ball_volume(n, 1.0));
      return it;
    }
    const Grid g(n, 1.0, h);
    const double data_lambda = isotropic ? 1.0 / (n - 1) : L;
    const EllipticCoefficients a = counterexample_coefficients(g, data_lambda);
    ScalarField bdry = counterexample_field(g, data_lambda);
    std::vector<double> w(bdry.values().begin(), bdry.values().end());
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!g.on_boundary(k)) w[k] = 0.0;
    }
    auto [v, rep] = solve_linear(a, ScalarField(g, std::move(w)), ScalarField(g, 0.0), cfg.tol);
    it.contrast = (n - 1) * data_lambda / cfg.nu;
    if (isotropic) it.contrast = 1.0;
    it.sup = std::max(0.0, sup_ball(v, BallRegion::centered(n, 0.5)));
    const ScalarField vp = truncate_above(v, 0.0);
    it.avg = std::sqrt(detail::mean_over_ball(g, BallRegion::centered(n, 1.0), [&](std::size_t k) { return vp[k] * vp[k]; }));
    return it;
  });
  StudyResult res;
  res.table.header = {"n", "lambda", "contrast", "sup_half_ball", "l2_mean", "measured_ratio", "m", "bound_ratio",
                      "implied_c", "sound", "fitted_exponent"};
  std::vector<double> xs, ys;
  for (const auto& it : items) {
    xs.push_back(it.contrast);
    ys.push_back(it.sup / it.avg);
  }
  double fitted = detail::kNaN;
  if (xs.size() >= 2 && xs.front() != xs.back()) fitted = loglog_slope(xs, ys);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Item& it = items[i];
    const double measured = it.sup / it.avg;
    const double bound = c_bound * std::pow(it.contrast, m);
    const bool ok = measured <= bound;
    res.sound = res.sound && ok;
    res.table.add({cell(n), cell(cfg.lambda_list[i]), cell(it.contrast), cell(it.sup), cell(it.avg), cell(measured),
                   cell(m), cell(bound), cell(measured / std::pow(it.contrast, m)), cell(ok), cell(fitted)});
  }
  res.notes.push_back("mode=" + mode);
  res.notes.push_back("fitted_exponent=" + format_cell(fitted));
  return res;
}

// ------------------------------------------------------------------ de giorgi

/// Pipeline per Lambda: v from solve_linear (or the explicit field), Caccioppoli
/// constants on the grid, level-set iteration, comparison with the grid sup.
/// constants = sqrt_lambda uses M1 = sqrt(Lambda) with c_m^2 = 4(n-1); constants =
/// estimated uses the estimator's M1. M2 is the estimator's value given M1,
/// raised to m2_floor when f is nonzero.
inline StudyResult degiorgi_study(const ExperimentConfig& cfg) {
  const double h = cfg.h_list.front();
  const double f_const = cfg.raw.number("f_const", 0.0);
  const std::string source = cfg.raw.text("constants", "sqrt_lambda");
  const double cm = cfg.raw.number("cm", std::sqrt(4.0 * (cfg.n - 1)));
  const double m2_floor = cfg.raw.number("m2_floor", 1.0);
  const double k0 = cfg.raw.number("k0", 0.0);
  const int ell_max = cfg.raw.integer("ell_max", 200);
  const bool solve = cfg.raw.integer("solve", 1) != 0;
  const double ext = cfg.raw.number("extension_constant", 4.0);
  const std::vector<double> levels = cfg.raw.list("levels", {0.0, 0.25, 0.5, 0.75, 1.0});
  const std::string trace = cfg.raw.text("trace", "");
  const bool has_c1 = cfg.raw.has("c1"), has_c2 = cfg.raw.has("c2");
  const double c1_in = cfg.raw.number("c1", 1.0), c2_in = cfg.raw.number("c2", 1.0);
  detail::finish(cfg);
  if (cfg.n != 3 && cfg.n != 4) throw ConfigError("degiorgi study requires n in {3, 4}");
  if (source != "sqrt_lambda" && source != "estimated") throw ConfigError("constants must be sqrt_lambda or estimated");
  if (!(f_const >= 0.0)) throw ConfigError("f_const must be >= 0");
  detail::require_dyadic(h);
  const StructuralConstants sc = (has_c1 && has_c2) ? StructuralConstants{c1_in, c2_in, detail::kNaN}
                                                     : default_structural_constants(cfg.n, cfg.kappa, ext);
  const double c1 = has_c1 ? c1_in : sc.c1;
  const double c2 = has_c2 ? c2_in : sc.c2;
  struct Item {
    double M1e = 0, M2e = 0, M1 = 0, M2 = 0, sup = 0, l2 = 0;
    IterationResult it;
  };
  const auto items = parallel_map<Item>(cfg.lambda_list.size(), cfg.threads, [&](std::size_t i) {
    const double L = cfg.lambda_list[i];
    const Grid g(cfg.n, 1.0, h);
    const ScalarField f(g, f_const);
    ScalarField v = counterexample_field(g, L);
    if (solve) {
      std::vector<double> w(v.values().begin(), v.values().end());
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.on_boundary(k)) w[k] = 0.0;
      }
      v = solve_linear(counterexample_coefficients(g, L), ScalarField(g, std::move(w)), f, cfg.tol).first;
    }
    CaccioppoliOptions opt;
    opt.cm_values = {cm};
    Item out;
    const CaccioppoliEstimate free_fit = estimate_caccioppoli_constants(v, f, levels, opt);
    out.M1e = free_fit.M1;
    out.M1 = source == "sqrt_lambda" ? std::sqrt(L) : free_fit.M1;
    opt.fixed_M1 = out.M1;
    const CaccioppoliEstimate fit = estimate_caccioppoli_constants(v, f, levels, opt);
    out.M2e = fit.M2;
    out.M2 = f_const > 0.0 ? std::max(fit.M2, m2_floor) : fit.M2;
    IterationConstants C;
    C.n = cfg.n;
    C.kappa = cfg.kappa;
    C.c1 = c1;
    C.c2 = c2;
    C.cm = cm;
    C.M1 = out.M1;
    C.M2 = out.M2;
    C.k0 = k0;
    out.it = run_iteration(v, f, C, ell_max);
    out.sup = sup_ball(v, BallRegion::centered(cfg.n, 0.5));
    const ScalarField vp = truncate_above(v, 0.0);
    out.l2 = std::sqrt(integrate_ball_with(g, BallRegion::centered(cfg.n, 1.0), [&](std::size_t k) { return vp[k] * vp[k]; }));
    return out;
  });
  StudyResult res;
  res.table.header = {"n", "lambda", "kappa", "h", "f_const", "constants", "cm", "c1", "c2", "M1_estimated",
                      "M2_estimated", "M1", "M2", "J0", "bound", "grid_sup", "bound_over_sup", "l2_mass",
                      "bound_over_l2", "threshold", "steps", "tail_estimate", "saturated_steps", "all_pass",
                      "pass_above_noise", "finite", "sound"};
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Item& it = items[i];
    const bool sound = it.it.finite && it.it.bound >= it.sup;
    res.sound = res.sound && sound;
    res.table.add({cell(cfg.n), cell(cfg.lambda_list[i]), cell(cfg.kappa), cell(h), cell(f_const), cell(source), cell(cm),
                   cell(c1), cell(c2), cell(it.M1e), cell(it.M2e), cell(it.M1), cell(it.M2), cell(it.it.J0),
                   cell(it.it.bound), cell(it.sup), cell(it.it.bound / it.sup), cell(it.l2), cell(it.it.bound / it.l2),
                   cell(1e3 * std::pow(it.M1, 1.0 + cfg.kappa)), cell(it.it.rows.size() - 1), cell(it.it.tail_estimate),
                   cell(it.it.saturated_steps), cell(it.it.all_pass), cell(it.it.pass_above_noise), cell(it.it.finite),
                   cell(sound)});
  }
  if (!trace.empty()) {
    std::ofstream out(trace, std::ios::binary);
    if (!out) throw ConfigError("cannot write trace file " + trace);
    write_trace_csv(out, items.back().it);
  }
  res.notes.push_back("noise_floor=10h*J0");
  return res;
}

// ------------------------------------------------------------------ lipschitz

struct LipschitzRun {
  double lorentz_f = 0.0;
  double mean_energy = 0.0;
  double grad_sup = 0.0;
  double rhs = 0.0;
  SolveReport report;
};

/// Minimizes the regularized functional on B_1 with data slope*x_1 + curvature*x_2^2
/// and forcing f, then evaluates sup_{B_{1/2}} |grad u| and the three-term
/// right side with c = 1.
inline LipschitzRun lipschitz_run(const ModelIntegrand& F, const ExponentSet& ex, const Grid& g, const ScalarField& f,
                                  double slope, double curvature, double eps, double T, double tol) {
  const int n = g.dim();
  const BallRegion B1 = BallRegion::centered(n, 1.0);
  const RegularizedIntegrand Fe = regularize(F, eps, T, n);
  MinimizationProblem<RegularizedIntegrand> prob{Fe, f, detail::study_boundary(g, slope, curvature), B1};
  MinimizeOptions opt;
  opt.tol = tol;
  auto [u, rep] = minimize(prob, opt);
  LipschitzRun r;
  r.report = rep;
  const VectorField du = gradient(u);
  r.grad_sup = sup_norm_ball(du, BallRegion::centered(n, 0.5));
  r.mean_energy = detail::mean_over_ball(g, B1, [&](std::size_t k) { return eval_F(F, du.at(k)); });
  r.lorentz_f = lorentz_n1(rearrange(samples_from_field(f, B1)), n);
  const double p = F.params().p;
  const double base = r.mean_energy + std::pow(r.lorentz_f, p / (p - 1.0));
  r.rhs = std::pow(base, 1.0 / p) + std::pow(base, ex.alpha_n) + std::pow(r.lorentz_f, ex.beta_n);
  return r;
}

/// For each (p, q) in pq_list and h in the grid list: measured
/// sup_{B_{1/2}}|grad u| over the c = 1 right side. Inadmissible (p, q) are
/// rejected before any solve.
inline StudyResult lipschitz_study(const ExperimentConfig& cfg) {
  const auto pq = cfg.raw.tuples("pq_list", {{2.0, 2.4}, {1.8, 2.2}, {2.2, 2.8}});
  const double f0 = cfg.raw.number("f0", 1.0);
  const double fcap = cfg.raw.number("fcap", 20.0);
  const double slope = cfg.raw.number("slope", 1.0);
  const double curvature = cfg.raw.number("curvature", 0.25);
  const double eps = cfg.raw.number("eps", 1e-3);
  const double T = cfg.raw.number("T", 1.0);
  const double cp = cfg.raw.number("cp", 1.0);
  const double cq = cfg.raw.number("cq", 1.0);
  detail::finish(cfg);
  if (cfg.n != 3) throw ConfigError("lipschitz study requires n = 3");
  if (!(f0 >= 0.0) || !(fcap > 0.0)) throw ConfigError("need f0 >= 0 and fcap > 0");
  std::vector<ExponentSet> ex;
  for (const auto& t : pq) {
    if (t.size() != 2) throw ConfigError("pq_list entries must be p:q");
    const ExponentSet e = lipschitz_exponents(cfg.n, t[0], t[1], cfg.kappa);
    if (!e.admissible()) {
      throw ConfigError("inadmissible (p, q) = (" + format_cell(t[0]) + ", " + format_cell(t[1]) +
                        ") for n = 3, kappa = " + format_cell(cfg.kappa));
    }
    ex.push_back(e);
  }
  for (double h : cfg.h_list) detail::require_dyadic(h);
  const std::size_t nh = cfg.h_list.size();
  const auto runs = parallel_map<LipschitzRun>(pq.size() * nh, cfg.threads, [&](std::size_t i) {
    const auto& t = pq[i / nh];
    const double h = cfg.h_list[i % nh];
    const ModelIntegrand F(PQParams{cfg.nu, std::max(cfg.nu, 1.0), t[0], t[1], cfg.mu}, cp, cq);
    const Grid g(cfg.n, 1.0, h);
    return lipschitz_run(F, ex[i / nh], g, detail::lorentz_forcing(g, f0, fcap), slope, curvature, eps, T, cfg.tol);
  });
  StudyResult res;
  res.table.header = {"p", "q", "mu", "kappa", "h", "alpha_n", "beta_n", "gamma", "gamma_tilde", "lorentz_f",
                      "mean_energy", "grad_sup", "rhs", "ratio", "drift", "newton_steps", "residual", "finite"};
  for (std::size_t a = 0; a < pq.size(); ++a) {
    double prev = detail::kNaN;
    for (std::size_t b = 0; b < nh; ++b) {
      const LipschitzRun& r = runs[a * nh + b];
      const double ratio = r.grad_sup / r.rhs;
      const double drift = std::isnan(prev) ? detail::kNaN : std::abs(ratio - prev) / std::abs(prev);
      const bool finite = std::isfinite(ratio);
      res.sound = res.sound && finite;
      res.table.add({cell(pq[a][0]), cell(pq[a][1]), cell(cfg.mu), cell(cfg.kappa), cell(cfg.h_list[b]), cell(ex[a].alpha_n),
                     cell(ex[a].beta_n), cell(ex[a].gamma), cell(ex[a].gamma_tilde), cell(r.lorentz_f), cell(r.mean_energy),
                     cell(r.grad_sup), cell(r.rhs), cell(ratio), cell(drift), cell(r.report.iterations),
                     cell(r.report.residual), cell(finite)});
      prev = ratio;
    }
  }
  return res;
}

// ------------------------------------------------------------- regularization

/// Per (eps, m): sup_{|z|<=T}|F~_eps - F|, the eps L_p energy of the data, and
/// ||f - f_m||_{L^n(B)}; all three must be non-increasing down the table.
inline StudyResult regularization_study(const ExperimentConfig& cfg) {
  const std::vector<double> eps = cfg.raw.list("eps_list", {0.2, 0.1, 0.05});
  const std::vector<double> ms = cfg.raw.list("m_list", {2.0, 4.0, 8.0});
  const double T = cfg.raw.number("T", 1.0);
  const double f0 = cfg.raw.number("f0", 1.0);
  const double slope = cfg.raw.number("slope", 1.0);
  const double curvature = cfg.raw.number("curvature", 0.25);
  const double cp = cfg.raw.number("cp", 1.0);
  const double cq = cfg.raw.number("cq", 1.0);
  const bool with_eps0 = cfg.raw.integer("eps0", 1) != 0;
  detail::finish(cfg);
  if (eps.size() != ms.size()) throw ConfigError("eps_list and m_list must have equal length");
  for (std::size_t i = 1; i < eps.size(); ++i) {
    if (!(eps[i] < eps[i - 1])) throw ConfigError("eps_list must decrease");
    if (!(ms[i] > ms[i - 1])) throw ConfigError("m_list must increase");
  }
  const double h = cfg.h_list.front();
  detail::require_dyadic(h);
  const int n = cfg.n;
  const ModelIntegrand F(PQParams{cfg.nu, std::max(cfg.nu, 1.0), cfg.p, cfg.q, cfg.mu}, cp, cq);
  const Grid g(n, detail::snapped_half_width(cfg.radius + eps.front() + h, h), h);
  const BallRegion ball = BallRegion::centered(n, cfg.radius);
  const ScalarField f = detail::lorentz_forcing(g, f0, std::numeric_limits<double>::infinity());
  const ScalarField u = detail::study_boundary(g, slope, curvature);
  MinimizeOptions opt;
  opt.tol = cfg.tol;
  const auto rows = energy_convergence_study(F, f, u, ball, T, eps, ms, opt);
  const double eps0 = (with_eps0 && RegularizedIntegrand(F, eps.front(), T).smoothed()) ? find_eps0(F, T, 1.0, n) : detail::kNaN;
  StudyResult res;
  res.table.header = {"eps", "m", "sup_tilde_minus_F", "penalty_energy", "truncation_ln", "tilde_energy",
                      "regularized_energy", "reference_energy", "sup_difference", "newton_steps", "convex", "eps0",
                      "monotone"};
  double prev[3] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const RegularizationReport rep = check_regularization(RegularizedIntegrand(F, r.eps, T), n, 2000);
    const ScalarField fm = truncate_forcing(f, r.m);
    const double trunc = std::pow(integrate_ball_with(g, ball, [&](std::size_t k) {
      return std::pow(std::abs(f[k] - fm[k]), n);
    }), 1.0 / n);
    const double cols[3] = {rep.sup_diff, r.penalty_energy, trunc};
    bool mono = true;
    for (int c = 0; c < 3; ++c) {
      mono = mono && cols[c] <= prev[c] * (1.0 + 1e-12);
      prev[c] = cols[c];
    }
    res.sound = res.sound && mono && rep.convex;
    res.table.add({cell(r.eps), cell(r.m), cell(rep.sup_diff), cell(r.penalty_energy), cell(trunc), cell(r.tilde_energy),
                   cell(r.regularized_energy), cell(r.reference_energy), cell(r.sup_difference),
                   cell(r.report.iterations), cell(rep.convex), cell(eps0), cell(mono)});
  }
  return res;
}

// -------------------------------------------------------------------- lorentz

/// Rearrangement summary of samples read from `input` (value,measure CSV) or,
/// without input, of f0 |x|^{-1/2} on the grid ball of radius `radius`.
inline StudyResult lorentz_study(const ExperimentConfig& cfg) {
  const std::string input = cfg.raw.text("input", "");
  const double f0 = cfg.raw.number("f0", 1.0);
  const double fcap = cfg.raw.number("fcap", std::numeric_limits<double>::infinity());
  detail::finish(cfg);
  WeightedSamples s;
  if (!input.empty()) {
    std::ifstream in(input);
    if (!in) throw ConfigError("cannot open samples file " + input);
    s = read_samples_csv(in);
  } else {
    const double h = cfg.h_list.front();
    detail::require_dyadic(h);
    const Grid g(cfg.n, detail::snapped_half_width(cfg.radius, h), h);
    s = samples_from_field(detail::lorentz_forcing(g, f0, fcap), BallRegion::centered(cfg.n, cfg.radius));
  }
  const StepProfile prof = rearrange(s);
  const double L = lorentz_n1(prof, cfg.n);
  const double ln = std::pow(lp_norm_from_profile(prof, cfg.n), 1.0 / cfg.n);
  const double C = lorentz_embedding_constant(cfg.n);
  StudyResult res;
  res.table.header = {"n", "samples", "steps", "total_measure", "lorentz_n1", "l1", "l2", "ln", "linf",
                      "embedding_constant", "ln_le_c_lorentz"};
  const bool ok = ln <= C * L * (1.0 + 1e-12);
  res.sound = ok;
  res.table.add({cell(cfg.n), cell(s.size()), cell(prof.steps()), cell(prof.total_measure()), cell(L),
                 cell(lp_norm_from_profile(prof, 1.0)), cell(std::sqrt(lp_norm_from_profile(prof, 2.0))), cell(ln),
                 cell(prof.levels.front()), cell(C), cell(ok)});
  return res;
}

}  // namespace pqlab
