#pragma once

// Finite-difference minimization of grid energies
//   E(w) = sum_cells h^n 2^{-n} sum_corners W(g_c(w)) - sum_free h^n f w,
// where g_c is the one-sided difference vector taken from corner c along the
// cell edges meeting at c. Averaging over the 2^n corners makes the scheme
// reduce to the standard second-difference operator for diagonal
// coefficients, and the discrete divergence is the exact adjoint of g.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pqlab/errors.hpp"
#include "pqlab/grid.hpp"
#include "pqlab/integrand.hpp"

namespace pqlab {

struct SolveReport {
  int iterations = 0;          // Newton steps (1 for linear solves)
  long linear_iterations = 0;  // total CG iterations
  double residual = 0.0;       // sup-norm of the discrete Euler-Lagrange residual on free nodes
  double residual_floor = 0.0; // roundoff level of the residual evaluation (linear solves)
  double energy = 0.0;
  double seconds = 0.0;
  std::vector<double> energy_history;  // energy before each step and after the last
};

/// Symmetric n x n coefficient matrix per node (row-major), with the
/// ellipticity bounds the caller claims for it.
class EllipticCoefficients {
 public:
  EllipticCoefficients() = default;

  template <class Fn>
  EllipticCoefficients(const Grid& g, Fn&& a_of_x, double nu, double Lambda) : grid_(g), nu_(nu), Lambda_(Lambda) {
    if (!(nu > 0.0) || !(Lambda >= nu)) throw std::invalid_argument("EllipticCoefficients: need 0 < nu <= Lambda");
    const std::size_t n = static_cast<std::size_t>(g.dim());
    values_.resize(g.size() * n * n);
    g.for_each_node([&](std::size_t k, std::span<const double> x) {
      const Eigen::MatrixXd a = a_of_x(x);
      if (a.rows() != static_cast<Eigen::Index>(n) || a.cols() != static_cast<Eigen::Index>(n)) {
        throw std::invalid_argument("EllipticCoefficients: matrix has wrong size");
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double v = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (!std::isfinite(v)) throw std::invalid_argument("EllipticCoefficients: non-finite entry");
          if (v != a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))) {
            throw std::invalid_argument("EllipticCoefficients: matrix is not symmetric");
          }
          values_[k * n * n + i * n + j] = v;
        }
      }
    });
  }

  /// Constant matrix on every node.
  static EllipticCoefficients constant(const Grid& g, const Eigen::MatrixXd& a, double nu, double Lambda) {
    return EllipticCoefficients(g, [&](std::span<const double>) { return a; }, nu, Lambda);
  }

  const Grid& grid() const { return grid_; }
  double nu() const { return nu_; }
  double Lambda() const { return Lambda_; }
  const double* at(std::size_t node) const {
    const std::size_t n = static_cast<std::size_t>(grid_.dim());
    return values_.data() + node * n * n;
  }

  /// Checks the claimed bounds at every stride-th node; returns the number of failures.
  std::size_t spot_check(std::size_t stride = 97) const {
    const auto n = static_cast<Eigen::Index>(grid_.dim());
    std::size_t bad = 0;
    for (std::size_t k = 0; k < grid_.size(); k += std::max<std::size_t>(stride, 1)) {
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(at(k), n, n);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a), Eigen::EigenvaluesOnly);
      const double tol = 1e-12 * Lambda_;
      if (es.eigenvalues().minCoeff() < nu_ - tol || es.eigenvalues().maxCoeff() > Lambda_ + tol) ++bad;
    }
    return bad;
  }

 private:
  Grid grid_;
  double nu_ = 1.0;
  double Lambda_ = 1.0;
  std::vector<double> values_;
};

namespace detail {

/// Cell/corner bookkeeping and the sparse stencil layout shared by every
/// assembled operator: node couplings are 0, +-e_i and +-e_i +- e_j.
class CellLayout {
 public:
  explicit CellLayout(const Grid& g) : grid_(g), n_(g.dim()), corners_(1 << g.dim()) {
    if (g.nodes_per_axis() < 3) throw std::invalid_argument("solver: need >= 3 nodes per axis");
    for (int c = 0; c < corners_; ++c) {
      std::ptrdiff_t off = 0;
      for (int i = 0; i < n_; ++i) {
        if (c & (1 << i)) off += static_cast<std::ptrdiff_t>(g.stride(i));
      }
      corner_offset_[static_cast<std::size_t>(c)] = off;
    }
    // Slots: enumerate delta in {-1,0,1}^n with at most two nonzeros.
    std::vector<int> delta(static_cast<std::size_t>(n_), -1);
    int total = 1;
    for (int i = 0; i < n_; ++i) total *= 3;
    slot_of_code_.assign(static_cast<std::size_t>(total), -1);
    for (int code = 0; code < total; ++code) {
      int rest = code, nz = 0;
      std::ptrdiff_t off = 0;
      for (int i = 0; i < n_; ++i) {
        const int d = rest % 3 - 1;
        rest /= 3;
        if (d != 0) ++nz;
        off += d * static_cast<std::ptrdiff_t>(g.stride(i));
      }
      if (nz > 2) continue;
      if (nz == 0) {
        slot_of_code_[static_cast<std::size_t>(code)] = 0;
        continue;
      }
      slot_of_code_[static_cast<std::size_t>(code)] = static_cast<int>(flat_offsets_.size()) + 1;
      flat_offsets_.push_back(off);
    }
    flat_offsets_.insert(flat_offsets_.begin(), 0);
    for (int a = 0; a < corners_; ++a) {
      for (int b = 0; b < corners_; ++b) {
        int code = 0, mul = 1;
        for (int i = 0; i < n_; ++i) {
          const int d = ((b >> i) & 1) - ((a >> i) & 1);
          code += (d + 1) * mul;
          mul *= 3;
        }
        pair_slot_[static_cast<std::size_t>(a * corners_ + b)] = slot_of_code_[static_cast<std::size_t>(code)];
      }
    }
  }

  const Grid& grid() const { return grid_; }
  int dim() const { return n_; }
  int corners() const { return corners_; }
  int slots() const { return static_cast<int>(flat_offsets_.size()); }
  std::ptrdiff_t corner_offset(int c) const { return corner_offset_[static_cast<std::size_t>(c)]; }
  std::ptrdiff_t slot_offset(int s) const { return flat_offsets_[static_cast<std::size_t>(s)]; }
  int pair_slot(int a, int b) const { return pair_slot_[static_cast<std::size_t>(a * corners_ + b)]; }

  /// Calls fn(base) for the lower corner of every cell.
  template <class Fn>
  void for_each_cell(Fn&& fn) const {
    const std::size_t m = grid_.nodes_per_axis() - 1;
    std::array<std::size_t, kMaxGridDim> idx{};
    std::size_t cells = 1;
    for (int i = 0; i < n_; ++i) cells *= m;
    std::size_t base = 0;
    for (std::size_t c = 0; c < cells; ++c) {
      fn(base);
      for (int i = 0; i < n_; ++i) {
        if (++idx[static_cast<std::size_t>(i)] < m) {
          base += grid_.stride(i);
          break;
        }
        base -= (m - 1) * grid_.stride(i);
        idx[static_cast<std::size_t>(i)] = 0;
      }
    }
  }

  /// One-sided difference vector at corner c of the cell with lower corner base.
  void corner_gradient(std::span<const double> w, std::size_t base, int c, double* g) const {
    const double inv_h = 1.0 / grid_.spacing();
    for (int i = 0; i < n_; ++i) {
      const int hi = c | (1 << i), lo = c & ~(1 << i);
      g[i] = (w[base + static_cast<std::size_t>(corner_offset(hi))] - w[base + static_cast<std::size_t>(corner_offset(lo))]) * inv_h;
    }
  }

 private:
  Grid grid_;
  int n_;
  int corners_;
  std::array<std::ptrdiff_t, 1 << kMaxGridDim> corner_offset_{};
  std::vector<int> slot_of_code_;
  std::vector<std::ptrdiff_t> flat_offsets_;
  std::array<int, (1 << kMaxGridDim) * (1 << kMaxGridDim)> pair_slot_{};
};

/// Corner energy density W(g) = F(g) for a radial integrand.
template <RadialIntegrand I>
struct RadialModel {
  const I* F;
  int n;
  double energy(const double* g, std::size_t) const {
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) s2 += g[i] * g[i];
    return F->radial(std::sqrt(s2)).value;
  }
  /// Fills flux q = dW(g) and, when H is non-null, the Jacobian (row-major).
  void flux(const double* g, std::size_t, double* q, double* H) const {
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) s2 += g[i] * g[i];
    const double s = std::sqrt(s2);
    const RadialDerivs r = F->radial(s);
    for (int i = 0; i < n; ++i) q[i] = r.d1_over_s * g[i];
    if (!H) return;
    const double c = s > 0.0 ? (r.d2 - r.d1_over_s) / s2 : 0.0;
    const double diag = s > 0.0 ? r.d1_over_s : r.d2;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) H[i * n + j] = c * g[i] * g[j] + (i == j ? diag : 0.0);
    }
  }
};

/// W(g) = g^T a(corner) g / 2.
struct LinearModel {
  const EllipticCoefficients* a;
  int n;
  double energy(const double* g, std::size_t node) const {
    const double* A = a->at(node);
    double e = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) e += g[i] * A[i * n + j] * g[j];
    }
    return 0.5 * e;
  }
  void flux(const double* g, std::size_t node, double* q, double* H) const {
    const double* A = a->at(node);
    for (int i = 0; i < n; ++i) {
      q[i] = 0.0;
      for (int j = 0; j < n; ++j) q[i] += A[i * n + j] * g[j];
    }
    if (H) std::copy(A, A + n * n, H);
  }
};

/// Discrete problem on a fixed free-node set. All quantities are scaled by
/// h^{-n}, so the gradient equals the negative Euler-Lagrange residual
/// -div_h(dW(g)) - f at free nodes.
template <class Model>
class DiscreteProblem {
 public:
  DiscreteProblem(const CellLayout& layout, Model model, std::span<const double> f, std::vector<std::uint8_t> free)
      : L_(layout), model_(model), f_(f), free_(std::move(free)) {}

  const std::vector<std::uint8_t>& free_mask() const { return free_; }

  /// Energy scaled by h^{-n}; also returns the sum of absolute contributions
  /// (a roundoff scale for comparisons).
  double energy(std::span<const double> w, double* magnitude = nullptr) const {
    const double wc = 1.0 / L_.corners();
    double e = 0.0, mag = 0.0;
    std::array<double, kMaxGridDim> g{};
    L_.for_each_cell([&](std::size_t base) {
      for (int c = 0; c < L_.corners(); ++c) {
        L_.corner_gradient(w, base, c, g.data());
        const double v = wc * model_.energy(g.data(), base + static_cast<std::size_t>(L_.corner_offset(c)));
        e += v;
        mag += std::abs(v);
      }
    });
    for (std::size_t k = 0; k < free_.size(); ++k) {
      if (!free_[k]) continue;
      e -= f_[k] * w[k];
      mag += std::abs(f_[k] * w[k]);
    }
    if (magnitude) *magnitude = mag;
    return e;
  }

  /// Gradient (scaled) on free nodes, zero elsewhere; with assemble = true
  /// also fills the Hessian stencil coefficients.
  void gradient(std::span<const double> w, std::vector<double>& G, std::vector<double>* A) const {
    const int n = L_.dim();
    const int C = L_.corners();
    const int S = L_.slots();
    const double wc = 1.0 / C;
    const double inv_h = 1.0 / L_.grid().spacing();
    G.assign(w.size(), 0.0);
    if (A) A->assign(w.size() * static_cast<std::size_t>(S), 0.0);
    std::array<double, kMaxGridDim> g{}, q{};
    std::array<double, kMaxGridDim * kMaxGridDim> H{};
    L_.for_each_cell([&](std::size_t base) {
      for (int c = 0; c < C; ++c) {
        L_.corner_gradient(w, base, c, g.data());
        model_.flux(g.data(), base + static_cast<std::size_t>(L_.corner_offset(c)), q.data(), A ? H.data() : nullptr);
        for (int i = 0; i < n; ++i) {
          const int hi = c | (1 << i), lo = c & ~(1 << i);
          const std::size_t nhi = base + static_cast<std::size_t>(L_.corner_offset(hi));
          const std::size_t nlo = base + static_cast<std::size_t>(L_.corner_offset(lo));
          const double t = wc * q[static_cast<std::size_t>(i)] * inv_h;
          G[nhi] += t;
          G[nlo] -= t;
          if (!A) continue;
          for (int j = 0; j < n; ++j) {
            const double hij = wc * H[static_cast<std::size_t>(i * n + j)] * inv_h * inv_h;
            if (hij == 0.0) continue;
            const int jhi = c | (1 << j), jlo = c & ~(1 << j);
            (*A)[nhi * static_cast<std::size_t>(S) + static_cast<std::size_t>(L_.pair_slot(hi, jhi))] += hij;
            (*A)[nhi * static_cast<std::size_t>(S) + static_cast<std::size_t>(L_.pair_slot(hi, jlo))] -= hij;
            (*A)[nlo * static_cast<std::size_t>(S) + static_cast<std::size_t>(L_.pair_slot(lo, jhi))] -= hij;
            (*A)[nlo * static_cast<std::size_t>(S) + static_cast<std::size_t>(L_.pair_slot(lo, jlo))] += hij;
          }
        }
      }
    });
    for (std::size_t k = 0; k < G.size(); ++k) G[k] = free_[k] ? G[k] - f_[k] : 0.0;
  }

  double sup_free(const std::vector<double>& v) const {
    double m = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (free_[k]) m = std::max(m, std::abs(v[k]));
    }
    return m;
  }

  /// y = A x restricted to free rows and columns.
  void apply(const std::vector<double>& A, const std::vector<double>& x, std::vector<double>& y) const {
    const int S = L_.slots();
    y.assign(x.size(), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!free_[k]) continue;
      const double* a = A.data() + k * static_cast<std::size_t>(S);
      double s = 0.0;
      for (int j = 0; j < S; ++j) {
        const std::size_t col = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(k) + L_.slot_offset(j));
        s += a[j] * x[col];
      }
      y[k] = s;
    }
  }

  /// Jacobi-preconditioned CG for A x = b on free nodes; stops when the
  /// sup-norm residual is <= tol.
  long cg(const std::vector<double>& A, const std::vector<double>& b, std::vector<double>& x, double tol, long max_iter) const {
    const int S = L_.slots();
    const std::size_t N = b.size();
    x.assign(N, 0.0);
    std::vector<double> r = b, z(N, 0.0), p(N, 0.0), Ap(N, 0.0), dinv(N, 0.0);
    for (std::size_t k = 0; k < N; ++k) {
      if (!free_[k]) continue;
      const double d = A[k * static_cast<std::size_t>(S)];
      if (!(d > 0.0)) throw InternalError("cg: non-positive diagonal in the Newton matrix");
      dinv[k] = 1.0 / d;
      r[k] = b[k];
    }
    for (std::size_t k = 0; k < N; ++k) {
      if (!free_[k]) r[k] = 0.0;
    }
    if (sup_free(r) <= tol) return 0;
    double rz = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      z[k] = dinv[k] * r[k];
      p[k] = z[k];
      rz += r[k] * z[k];
    }
    for (long it = 1; it <= max_iter; ++it) {
      apply(A, p, Ap);
      double pAp = 0.0;
      for (std::size_t k = 0; k < N; ++k) pAp += p[k] * Ap[k];
      if (!(pAp > 0.0)) throw InternalError("cg: matrix is not positive definite");
      const double alpha = rz / pAp;
      for (std::size_t k = 0; k < N; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * Ap[k];
      }
      if (sup_free(r) <= tol) return it;
      double rz_new = 0.0;
      for (std::size_t k = 0; k < N; ++k) {
        z[k] = dinv[k] * r[k];
        rz_new += r[k] * z[k];
      }
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t k = 0; k < N; ++k) p[k] = z[k] + beta * p[k];
    }
    throw ConvergenceError("cg: no convergence within " + std::to_string(max_iter) + " iterations");
  }

 private:
  const CellLayout& L_;
  Model model_;
  std::span<const double> f_;
  std::vector<std::uint8_t> free_;
};

inline std::vector<std::uint8_t> free_nodes(const Grid& g, const std::optional<BallRegion>& region) {
  std::vector<std::uint8_t> mask(g.size(), 0);
  if (region) detail::require_ball_in_box(g, *region, "solver region");
  g.for_each_node([&](std::size_t k, std::span<const double> x) {
    if (g.on_boundary(k)) return;
    if (region) {
      double d2 = 0.0;
      for (int i = 0; i < g.dim(); ++i) {
        const double d = x[static_cast<std::size_t>(i)] - region->center[static_cast<std::size_t>(i)];
        d2 += d * d;
      }
      if (!(d2 < region->radius * region->radius)) return;
    }
    mask[k] = 1;
  });
  return mask;
}

inline long cg_cap(const Grid& g) { return std::max<long>(2000, 40 * static_cast<long>(g.nodes_per_axis()) * g.dim()); }

}  // namespace detail

/// Convex minimization problem: integrand, forcing (already truncated),
/// boundary data (a full field whose values at fixed nodes are the Dirichlet
/// data and whose values at free nodes are the initial guess) and the region
/// of free nodes (box interior, optionally intersected with an open ball).
template <RadialIntegrand I>
struct MinimizationProblem {
  I integrand;
  ScalarField forcing;
  ScalarField boundary;
  std::optional<BallRegion> region;
};

struct MinimizeOptions {
  double tol = 1e-10;
  int max_newton = 200;
};

template <RadialIntegrand I>
double discrete_energy(const MinimizationProblem<I>& prob, const ScalarField& w) {
  const Grid& g = prob.boundary.grid();
  detail::require_same_grid(g, w.grid(), "discrete_energy");
  detail::CellLayout L(g);
  detail::DiscreteProblem<detail::RadialModel<I>> dp(L, {&prob.integrand, g.dim()}, prob.forcing.values(),
                                                     detail::free_nodes(g, prob.region));
  return dp.energy(w.values()) * g.cell_volume();
}

/// Damped Newton with Armijo backtracking; stops when the sup-norm of the
/// discrete Euler-Lagrange residual on free nodes is <= tol.
template <RadialIntegrand I>
std::pair<ScalarField, SolveReport> minimize(const MinimizationProblem<I>& prob, const MinimizeOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid& g = prob.boundary.grid();
  detail::require_same_grid(g, prob.forcing.grid(), "minimize");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("minimize: tol must be > 0");
  detail::CellLayout L(g);
  detail::DiscreteProblem<detail::RadialModel<I>> dp(L, {&prob.integrand, g.dim()}, prob.forcing.values(),
                                                     detail::free_nodes(g, prob.region));
  std::vector<double> w(prob.boundary.values().begin(), prob.boundary.values().end());
  std::vector<double> G, A, delta, trial(w.size());
  SolveReport rep;
  double mag = 0.0;
  double E = dp.energy(w, &mag);
  rep.energy_history.push_back(E * g.cell_volume());
  for (int it = 0;; ++it) {
    dp.gradient(w, G, &A);
    const double res = dp.sup_free(G);
    rep.residual = res;
    if (res <= opt.tol) break;
    if (it >= opt.max_newton) throw ConvergenceError("minimize: Newton cap reached, residual " + std::to_string(res));
    std::vector<double> rhs(G.size());
    for (std::size_t k = 0; k < G.size(); ++k) rhs[k] = -G[k];
    const double inner = std::max(0.1 * opt.tol, 1e-4 * res * std::min(1.0, res));
    rep.linear_iterations += dp.cg(A, rhs, delta, inner, detail::cg_cap(g));
    double slope = 0.0;
    for (std::size_t k = 0; k < G.size(); ++k) slope += G[k] * delta[k];
    if (!(slope < 0.0)) {
      // Newton direction fails to descend only through roundoff at convergence.
      if (res <= 10.0 * opt.tol) break;
      throw InternalError("minimize: Newton direction is not a descent direction");
    }
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * mag;
    double alpha = 1.0;
    double E_new = 0.0;
    for (int ls = 0;; ++ls) {
      for (std::size_t k = 0; k < w.size(); ++k) trial[k] = w[k] + alpha * delta[k];
      E_new = dp.energy(trial, &mag);
      if (E_new <= E + 1e-4 * alpha * slope + slack) break;
      alpha *= 0.5;
      if (ls > 60) throw ConvergenceError("minimize: line search failed");
    }
    w.swap(trial);
    E = E_new;
    rep.energy_history.push_back(E * g.cell_volume());
    rep.iterations = it + 1;
  }
  rep.energy = E * g.cell_volume();
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ScalarField(g, std::move(w)), rep};
}

/// sup over free nodes of |div_h dF(grad_h u) + f|.
template <RadialIntegrand I>
double euler_lagrange_residual(const ScalarField& u, const MinimizationProblem<I>& prob) {
  const Grid& g = prob.boundary.grid();
  detail::require_same_grid(g, u.grid(), "euler_lagrange_residual");
  detail::CellLayout L(g);
  detail::DiscreteProblem<detail::RadialModel<I>> dp(L, {&prob.integrand, g.dim()}, prob.forcing.values(),
                                                     detail::free_nodes(g, prob.region));
  std::vector<double> G;
  dp.gradient(u.values(), G, nullptr);
  return dp.sup_free(G);
}

/// CG solve of -div_h(a grad_h v) = f on the box interior (optionally an
/// open ball) with Dirichlet data from boundary.
inline std::pair<ScalarField, SolveReport> solve_linear(const EllipticCoefficients& a, const ScalarField& boundary,
                                                        const ScalarField& f, double tol,
                                                        const std::optional<BallRegion>& region = std::nullopt) {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid& g = boundary.grid();
  detail::require_same_grid(g, a.grid(), "solve_linear");
  detail::require_same_grid(g, f.grid(), "solve_linear");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_linear: tol must be > 0");
  detail::CellLayout L(g);
  detail::DiscreteProblem<detail::LinearModel> dp(L, {&a, g.dim()}, f.values(), detail::free_nodes(g, region));
  std::vector<double> w(boundary.values().begin(), boundary.values().end());
  std::vector<double> G, A, delta;
  dp.gradient(w, G, &A);
  std::vector<double> rhs(G.size());
  for (std::size_t k = 0; k < G.size(); ++k) rhs[k] = -G[k];
  SolveReport rep;
  // CG's recurrence residual drifts from the true one; refine on the true
  // residual. With high contrast the residual of an exact solution is itself
  // only known to about eps * diag * |w|, so that level counts as converged.
  const auto S = static_cast<std::size_t>(L.slots());
  double diag = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) diag = std::max(diag, A[k * S]);
  for (int round = 0;; ++round) {
    rep.linear_iterations += dp.cg(A, rhs, delta, 0.5 * tol, detail::cg_cap(g));
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += delta[k];
    double wmax = 0.0;
    for (double x : w) wmax = std::max(wmax, std::abs(x));
    rep.residual_floor = 16.0 * std::numeric_limits<double>::epsilon() * diag * wmax;
    dp.gradient(w, G, nullptr);
    rep.residual = dp.sup_free(G);
    if (rep.residual <= tol || (round >= 1 && rep.residual <= rep.residual_floor)) break;
    if (round >= 4) throw ConvergenceError("solve_linear: residual " + std::to_string(rep.residual) + " above tolerance after CG");
    for (std::size_t k = 0; k < G.size(); ++k) rhs[k] = -G[k];
  }
  rep.iterations = 1;
  rep.energy = dp.energy(w) * g.cell_volume();
  rep.energy_history.push_back(rep.energy);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {ScalarField(g, std::move(w)), rep};
}

/// Sup over interior nodes of |div_h(a grad_h v) + f| (same discrete operator as solve_linear).
inline double linear_residual(const EllipticCoefficients& a, const ScalarField& v, const ScalarField& f) {
  const Grid& g = v.grid();
  detail::CellLayout L(g);
  detail::DiscreteProblem<detail::LinearModel> dp(L, {&a, g.dim()}, f.values(), detail::free_nodes(g, std::nullopt));
  std::vector<double> G;
  dp.gradient(v.values(), G, nullptr);
  return dp.sup_free(G);
}

/// Discrete bilinear form B(v, phi) = sum_cells h^n 2^{-n} sum_c (D_c phi)^T a(c) (D_c v).
inline double bilinear_form(const EllipticCoefficients& a, const ScalarField& v, const ScalarField& phi) {
  const Grid& g = v.grid();
  detail::require_same_grid(g, phi.grid(), "bilinear_form");
  detail::require_same_grid(g, a.grid(), "bilinear_form");
  detail::CellLayout L(g);
  const int n = g.dim();
  const double wc = 1.0 / L.corners();
  double s = 0.0;
  std::array<double, kMaxGridDim> gv{}, gp{};
  L.for_each_cell([&](std::size_t base) {
    for (int c = 0; c < L.corners(); ++c) {
      L.corner_gradient(v.values(), base, c, gv.data());
      L.corner_gradient(phi.values(), base, c, gp.data());
      const double* A = a.at(base + static_cast<std::size_t>(L.corner_offset(c)));
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) s += wc * gp[static_cast<std::size_t>(i)] * A[i * n + j] * gv[static_cast<std::size_t>(j)];
      }
    }
  });
  return s * g.cell_volume();
}

struct SubsolutionReport {
  std::vector<double> forms;        // B(v, phi) per cutoff
  std::vector<double> normalized;   // B(v, phi) / ||phi||_{L^2}
  double max_violation = -std::numeric_limits<double>::infinity();  // max normalized value
  bool passed = true;
};

/// Checks B(v, phi) <= tol ||phi||_{L^2} for each non-negative cutoff that
/// vanishes on the box boundary.
inline SubsolutionReport verify_subsolution(const ScalarField& v, const EllipticCoefficients& a,
                                            const std::vector<ScalarField>& cutoffs, double tol = 1e-10) {
  SubsolutionReport rep;
  const Grid& g = v.grid();
  for (const auto& phi : cutoffs) {
    detail::require_same_grid(g, phi.grid(), "verify_subsolution");
    double l2 = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
      if (phi[k] < 0.0) throw std::invalid_argument("verify_subsolution: cutoff must be >= 0");
      if (g.on_boundary(k) && phi[k] != 0.0) throw std::invalid_argument("verify_subsolution: cutoff must vanish on the boundary");
      l2 += phi[k] * phi[k];
    }
    l2 = std::sqrt(l2 * g.cell_volume());
    const double B = bilinear_form(a, v, phi);
    const double r = l2 > 0.0 ? B / l2 : 0.0;
    rep.forms.push_back(B);
    rep.normalized.push_back(r);
    rep.max_violation = std::max(rep.max_violation, r);
    if (r > tol) rep.passed = false;
  }
  return rep;
}

/// Radial piecewise-linear tent: 1 on B_rho(center), 0 outside B_sigma(center).
inline ScalarField tent_cutoff(const Grid& g, double rho, double sigma, std::span<const double> center = {}) {
  if (!(0.0 <= rho && rho < sigma)) throw std::invalid_argument("tent_cutoff: need 0 <= rho < sigma");
  std::vector<double> c(static_cast<std::size_t>(g.dim()), 0.0);
  if (!center.empty()) c.assign(center.begin(), center.end());
  return ScalarField::sample(g, [&](std::span<const double> x) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) d2 += (x[i] - c[i]) * (x[i] - c[i]);
    return std::clamp((sigma - std::sqrt(d2)) / (sigma - rho), 0.0, 1.0);
  });
}

/// The three integrals of the truncated Caccioppoli inequality for one (k, eta):
/// lhs = int |grad (v-k)_+|^2 eta^2, energy = int (v-k)_+^2 |grad eta|^2,
/// forcing = int_{v>k} eta^2 f^2. Cell-corner quadrature as in the solver.
struct CaccioppoliTerms {
  double lhs = 0.0;
  double energy = 0.0;
  double forcing = 0.0;
};

inline CaccioppoliTerms caccioppoli_terms(const ScalarField& v, const ScalarField& f, double k, const ScalarField& eta) {
  const Grid& g = v.grid();
  detail::require_same_grid(g, f.grid(), "caccioppoli_terms");
  detail::require_same_grid(g, eta.grid(), "caccioppoli_terms");
  detail::CellLayout L(g);
  const int n = g.dim();
  const double wc = 1.0 / L.corners();
  const ScalarField w = truncate_above(v, k);
  CaccioppoliTerms t;
  std::array<double, kMaxGridDim> gw{}, ge{};
  L.for_each_cell([&](std::size_t base) {
    for (int c = 0; c < L.corners(); ++c) {
      const std::size_t node = base + static_cast<std::size_t>(L.corner_offset(c));
      const double e = eta[node], wv = w[node];
      L.corner_gradient(eta.values(), base, c, ge.data());
      double ge2 = 0.0;
      for (int i = 0; i < n; ++i) ge2 += ge[static_cast<std::size_t>(i)] * ge[static_cast<std::size_t>(i)];
      t.energy += wc * wv * wv * ge2;
      if (e == 0.0) continue;
      L.corner_gradient(w.values(), base, c, gw.data());
      double gw2 = 0.0;
      for (int i = 0; i < n; ++i) gw2 += gw[static_cast<std::size_t>(i)] * gw[static_cast<std::size_t>(i)];
      t.lhs += wc * gw2 * e * e;
    }
  });
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (v[i] > k) t.forcing += eta[i] * eta[i] * f[i] * f[i];
  }
  const double vol = g.cell_volume();
  t.lhs *= vol;
  t.energy *= vol;
  t.forcing *= vol;
  return t;
}

struct CaccioppoliOptions {
  std::vector<double> cm_values;     // candidate c_m, tried in ascending order
  double lattice_ratio = 1.005;      // geometric step of the M1 and M2 lattices
  double M1_max = 1e6;
  double M2_min = 1e-6;              // smallest nonzero M2 on the lattice
  double M2_max = 1e6;
  std::vector<double> radii = {0.25, 0.4, 0.55, 0.7, 0.85, 1.0};  // tent radii, as fractions of region_radius
  double region_radius = 1.0;
  std::optional<double> fixed_M1;    // skip the M1 fit and use this value
};

struct CaccioppoliEstimate {
  double cm = 0.0;
  double M1 = 1.0;
  double M2 = 0.0;
  bool saturated = false;
  double worst_ratio = 0.0;  // max over (k, eta) of lhs / (cm^2 M1^2 energy + cm^2 M2^2 forcing)
  std::size_t pairs = 0;
};

/// Smallest lattice constants (c_m first, then M1 >= 1, then M2 >= 0) for
/// which the truncated Caccioppoli inequality holds at every supplied level
/// and every tent cutoff from the radius lattice.
inline CaccioppoliEstimate estimate_caccioppoli_constants(const ScalarField& v, const ScalarField& f,
                                                          const std::vector<double>& levels,
                                                          const CaccioppoliOptions& opt) {
  if (opt.cm_values.empty()) throw std::invalid_argument("estimate_caccioppoli_constants: empty c_m lattice");
  std::vector<CaccioppoliTerms> terms;
  for (std::size_t a = 0; a < opt.radii.size(); ++a) {
    for (std::size_t b = a + 1; b < opt.radii.size(); ++b) {
      const ScalarField eta = tent_cutoff(v.grid(), opt.radii[a] * opt.region_radius, opt.radii[b] * opt.region_radius);
      for (double k : levels) terms.push_back(caccioppoli_terms(v, f, k, eta));
    }
  }
  std::vector<double> cms = opt.cm_values;
  std::sort(cms.begin(), cms.end());
  const double lr = std::log(opt.lattice_ratio);
  auto snap_up = [&](double x, double start) {
    if (x <= start) return start;
    const double j = std::ceil(std::log(x / start) / lr - 1e-12);
    return start * std::exp(j * lr);
  };
  CaccioppoliEstimate est;
  est.pairs = terms.size();
  for (double cm : cms) {
    const double cm2 = cm * cm;
    // M1: must cover every pair without forcing mass.
    double need = 1.0;
    for (const auto& t : terms) {
      if (t.forcing > 0.0 || t.lhs <= 0.0) continue;
      need = t.energy > 0.0 ? std::max(need, std::sqrt(t.lhs / (cm2 * t.energy))) : std::numeric_limits<double>::infinity();
    }
    const double M1 = opt.fixed_M1 ? std::max(1.0, *opt.fixed_M1) : snap_up(need, 1.0);
    if (!(M1 <= opt.M1_max)) {
      est.saturated = true;
      continue;
    }
    double need2 = 0.0;
    for (const auto& t : terms) {
      const double rest = t.lhs - cm2 * M1 * M1 * t.energy;
      if (rest <= 0.0) continue;
      need2 = std::max(need2, std::sqrt(rest / (cm2 * t.forcing)));
    }
    const double M2 = need2 > 0.0 ? snap_up(need2, opt.M2_min) : 0.0;
    if (!(M2 <= opt.M2_max)) {
      est.saturated = true;
      continue;
    }
    est.cm = cm;
    est.M1 = M1;
    est.M2 = M2;
    est.saturated = false;
    for (const auto& t : terms) {
      const double rhs = cm2 * (M1 * M1 * t.energy + M2 * M2 * t.forcing);
      if (rhs > 0.0) est.worst_ratio = std::max(est.worst_ratio, t.lhs / rhs);
    }
    return est;
  }
  est.cm = cms.back();
  est.M1 = opt.M1_max;
  est.M2 = opt.M2_max;
  return est;
}

struct EnergyStudyRow {
  double eps = 0.0;
  double m = 0.0;
  double penalty_energy = 0.0;     // eps * int_{B_1} L_p(grad u)
  double tilde_energy = 0.0;       // int_{B_{1+eps}} F~_eps(grad u)
  double regularized_energy = 0.0; // int_{B_1} F_eps(grad u_m)
  double reference_energy = 0.0;   // int_{B_1} F(grad u)
  double sup_difference = 0.0;     // sup |u_m - u| over the grid
  SolveReport report;
};

/// For each (eps_m, m): minimizes the regularized functional with forcing
/// clamped at m and Dirichlet data u on the ball, then records the energy
/// columns. The reference field u stands in for its own mollification.
inline std::vector<EnergyStudyRow> energy_convergence_study(const ModelIntegrand& F, const ScalarField& f, const ScalarField& u,
                                                     const BallRegion& ball, double T, const std::vector<double>& eps_seq,
                                                     const std::vector<double>& m_seq, const MinimizeOptions& opt = {}) {
  if (eps_seq.size() != m_seq.size() || eps_seq.empty()) {
    throw std::invalid_argument("energy_convergence_study: eps and m sequences must be nonempty and equally long");
  }
  for (std::size_t i = 1; i < eps_seq.size(); ++i) {
    if (!(eps_seq[i] < eps_seq[i - 1])) throw std::invalid_argument("energy_convergence_study: eps must decrease");
  }
  const Grid& g = u.grid();
  const VectorField du = gradient(u);
  const double p = F.params().p;
  std::vector<EnergyStudyRow> rows;
  const double reference = integrate_ball_with(g, ball, [&](std::size_t k) { return eval_F(F, du.at(k)); });
  for (std::size_t i = 0; i < eps_seq.size(); ++i) {
    const double eps = eps_seq[i];
    const RegularizedIntegrand Fe = regularize(F, eps, T, g.dim());
    EnergyStudyRow row;
    row.eps = eps;
    row.m = m_seq[i];
    row.reference_energy = reference;
    row.penalty_energy = eps * integrate_ball_with(g, ball, [&](std::size_t k) {
      return lp_penalty(p, std::sqrt(du.norm_squared(k))).value;
    });
    BallRegion inflated = ball;
    inflated.radius += eps;
    row.tilde_energy = integrate_ball_with(g, inflated, [&](std::size_t k) {
      return Fe.tilde_radial(std::sqrt(du.norm_squared(k))).value;
    });
    MinimizationProblem<RegularizedIntegrand> prob{Fe, truncate_forcing(f, m_seq[i]), u, ball};
    auto [um, rep] = minimize(prob, opt);
    const VectorField dum = gradient(um);
    row.regularized_energy = integrate_ball_with(g, ball, [&](std::size_t k) { return eval_F(Fe, dum.at(k)); });
    for (std::size_t k = 0; k < g.size(); ++k) row.sup_difference = std::max(row.sup_difference, std::abs(um[k] - u[k]));
    row.report = std::move(rep);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pqlab
