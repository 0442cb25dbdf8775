#pragma once

// Uniform box grids on [-R,R]^n with node-sampled fields, ball and sphere
// quadrature, truncations and superlevel measures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pqlab {

inline constexpr int kMaxGridDim = 4;

class Grid {
 public:
  Grid() = default;

  Grid(int dim, double half_width, double spacing)
      : dim_(dim), half_width_(half_width), spacing_(spacing) {
    if (dim < 1 || dim > kMaxGridDim) {
      throw std::invalid_argument("Grid: dimension must be in 1.." +
                                  std::to_string(kMaxGridDim));
    }
    if (!(spacing > 0.0) || !(half_width > 0.0)) {
      throw std::invalid_argument("Grid: spacing and half-width must be positive");
    }
    const double cells = 2.0 * half_width / spacing;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells) || rounded < 1.0) {
      throw std::invalid_argument("Grid: 2R/h must be a positive integer");
    }
    per_axis_ = static_cast<std::size_t>(rounded) + 1;
    size_ = 1;
    for (int i = 0; i < dim; ++i) {
      stride_[i] = size_;
      size_ *= per_axis_;
    }
  }

  int dim() const { return dim_; }
  double half_width() const { return half_width_; }
  double spacing() const { return spacing_; }
  std::size_t nodes_per_axis() const { return per_axis_; }
  std::size_t size() const { return size_; }
  std::size_t stride(int axis) const { return stride_[axis]; }
  double cell_volume() const { return std::pow(spacing_, dim_); }

  double coord(std::size_t axis_index) const {
    return -half_width_ + static_cast<double>(axis_index) * spacing_;
  }

  std::size_t axis_index(std::size_t flat, int axis) const {
    return (flat / stride_[axis]) % per_axis_;
  }

  void point(std::size_t flat, std::span<double> x) const {
    for (int i = 0; i < dim_; ++i) x[i] = coord(axis_index(flat, i));
  }

  bool on_boundary(std::size_t flat) const {
    for (int i = 0; i < dim_; ++i) {
      const std::size_t a = axis_index(flat, i);
      if (a == 0 || a + 1 == per_axis_) return true;
    }
    return false;
  }

  /// Calls fn(flat_index, x) for every node in flat order; x has dim() entries.
  template <class Fn>
  void for_each_node(Fn&& fn) const {
    std::size_t idx[kMaxGridDim] = {};
    double x[kMaxGridDim];
    for (int i = 0; i < dim_; ++i) x[i] = coord(0);
    for (std::size_t flat = 0; flat < size_; ++flat) {
      fn(flat, std::span<const double>(x, static_cast<std::size_t>(dim_)));
      for (int i = 0; i < dim_; ++i) {
        if (++idx[i] < per_axis_) {
          x[i] = coord(idx[i]);
          break;
        }
        idx[i] = 0;
        x[i] = coord(0);
      }
    }
  }

  bool operator==(const Grid& o) const {
    return dim_ == o.dim_ && per_axis_ == o.per_axis_ && half_width_ == o.half_width_ &&
           spacing_ == o.spacing_;
  }

 private:
  int dim_ = 0;
  double half_width_ = 0.0;
  double spacing_ = 0.0;
  std::size_t per_axis_ = 0;
  std::size_t size_ = 0;
  std::size_t stride_[kMaxGridDim] = {};
};

class ScalarField {
 public:
  ScalarField() = default;

  explicit ScalarField(const Grid& grid, double value = 0.0)
      : grid_(grid), values_(grid.size(), value) {
    if (!std::isfinite(value)) throw std::invalid_argument("ScalarField: non-finite value");
  }

  ScalarField(const Grid& grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw std::invalid_argument("ScalarField: value count does not match grid");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw std::invalid_argument("ScalarField: non-finite value");
    }
  }

  /// Samples fn(x) at every node.
  template <class Fn>
  static ScalarField sample(const Grid& grid, Fn&& fn) {
    std::vector<double> v(grid.size());
    grid.for_each_node([&](std::size_t i, std::span<const double> x) { v[i] = fn(x); });
    return ScalarField(grid, std::move(v));
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Node-major storage: component i of node k lives at k*dim + i.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const Grid& grid)
      : grid_(grid), values_(grid.size() * static_cast<std::size_t>(grid.dim()), 0.0) {}

  const Grid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  double component(std::size_t node, int i) const {
    return values_[node * static_cast<std::size_t>(grid_.dim()) + static_cast<std::size_t>(i)];
  }
  std::span<const double> at(std::size_t node) const {
    return std::span<const double>(values_).subspan(node * static_cast<std::size_t>(dim()),
                                                    static_cast<std::size_t>(dim()));
  }
  double norm_squared(std::size_t node) const {
    double s = 0.0;
    for (double c : at(node)) s += c * c;
    return s;
  }
  std::vector<double>& mutable_values() { return values_; }

 private:
  Grid grid_;
  std::vector<double> values_;
};

struct BallRegion {
  std::vector<double> center;
  double radius = 0.0;

  static BallRegion centered(int dim, double radius) {
    return BallRegion{std::vector<double>(static_cast<std::size_t>(dim), 0.0), radius};
  }

  bool contains(std::span<const double> x) const {
    double d2 = 0.0;
    for (std::size_t i = 0; i < center.size(); ++i) {
      const double d = x[i] - center[i];
      d2 += d * d;
    }
    return d2 <= radius * radius * (1.0 + 1e-12);
  }
};

namespace detail {

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

inline void require_ball_in_box(const Grid& g, const BallRegion& ball, const char* what) {
  if (!(ball.radius > 0.0)) {
    throw std::invalid_argument(std::string(what) + ": ball radius must be positive");
  }
  if (ball.center.size() != static_cast<std::size_t>(g.dim())) {
    throw std::invalid_argument(std::string(what) + ": ball center has wrong dimension");
  }
  const double slack = 1e-9 * g.half_width();
  for (double c : ball.center) {
    if (std::abs(c) + ball.radius > g.half_width() + slack) {
      throw std::invalid_argument(std::string(what) + ": ball escapes the grid box");
    }
  }
}

}  // namespace detail

/// Central differences in the interior, one-sided second-order stencils on the
/// boundary layer.
inline VectorField gradient(const ScalarField& field) {
  const Grid& g = field.grid();
  if (g.nodes_per_axis() < 3) throw std::invalid_argument("gradient: need >= 3 nodes per axis");
  VectorField out(g);
  auto& out_v = out.mutable_values();
  const auto v = field.values();
  const double inv2h = 1.0 / (2.0 * g.spacing());
  const std::size_t last = g.nodes_per_axis() - 1;
  const auto n = static_cast<std::size_t>(g.dim());
  for (std::size_t k = 0; k < g.size(); ++k) {
    for (int i = 0; i < g.dim(); ++i) {
      const std::size_t s = g.stride(i);
      const std::size_t a = g.axis_index(k, i);
      double d;
      if (a == 0) {
        d = (-3.0 * v[k] + 4.0 * v[k + s] - v[k + 2 * s]) * inv2h;
      } else if (a == last) {
        d = (3.0 * v[k] - 4.0 * v[k - s] + v[k - 2 * s]) * inv2h;
      } else {
        d = (v[k + s] - v[k - s]) * inv2h;
      }
      out_v[k * n + static_cast<std::size_t>(i)] = d;
    }
  }
  return out;
}

/// Visits the in-ball nodes (center-in-ball rule).
template <class Fn>
void for_each_in_ball(const Grid& g, const BallRegion& ball, Fn&& fn) {
  g.for_each_node([&](std::size_t k, std::span<const double> x) {
    if (ball.contains(x)) fn(k, x);
  });
}

/// Sum of h^n * value over nodes whose center lies in the ball.
inline double integrate_ball(const ScalarField& field, const BallRegion& ball) {
  const Grid& g = field.grid();
  detail::require_ball_in_box(g, ball, "integrate_ball");
  double sum = 0.0;
  for_each_in_ball(g, ball, [&](std::size_t k, std::span<const double>) { sum += field[k]; });
  return sum * g.cell_volume();
}

/// Integral of fn(node) over the ball with the same center-in-ball rule.
template <class Fn>
double integrate_ball_with(const Grid& g, const BallRegion& ball, Fn&& fn) {
  detail::require_ball_in_box(g, ball, "integrate_ball");
  double sum = 0.0;
  for_each_in_ball(g, ball, [&](std::size_t k, std::span<const double>) { sum += fn(k); });
  return sum * g.cell_volume();
}

/// Thin-shell approximation of the surface integral over {|x - center| = r}:
/// (1/h) * sum of h^n * value over nodes with |x - center| in [r - h/2, r + h/2).
inline double sphere_integral(const ScalarField& field, double r,
                              std::span<const double> center = {}) {
  const Grid& g = field.grid();
  const double h = g.spacing();
  std::vector<double> c(static_cast<std::size_t>(g.dim()), 0.0);
  if (!center.empty()) c.assign(center.begin(), center.end());
  for (double ci : c) {
    if (std::abs(ci) + r + 0.5 * h > g.half_width() + 1e-9 * g.half_width()) {
      throw std::invalid_argument("sphere_integral: shell escapes the grid box");
    }
  }
  const double lo = r - 0.5 * h;
  const double hi = r + 0.5 * h;
  double sum = 0.0;
  std::size_t count = 0;
  g.for_each_node([&](std::size_t k, std::span<const double> x) {
    double d2 = 0.0;
    for (int i = 0; i < g.dim(); ++i) d2 += (x[i] - c[i]) * (x[i] - c[i]);
    const double d = std::sqrt(d2);
    if (d >= lo && d < hi) {
      sum += field[k];
      ++count;
    }
  });
  if (count == 0) throw std::invalid_argument("sphere_integral: empty shell");
  return sum * g.cell_volume() / h;
}

inline ScalarField truncate_above(const ScalarField& field, double k) {
  std::vector<double> v(field.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(field[i] - k, 0.0);
  return ScalarField(field.grid(), std::move(v));
}

/// h^n times the number of in-ball nodes with value > k.
inline double superlevel_measure(const ScalarField& field, double k, const BallRegion& ball) {
  const Grid& g = field.grid();
  detail::require_ball_in_box(g, ball, "superlevel_measure");
  std::size_t count = 0;
  for_each_in_ball(g, ball, [&](std::size_t i, std::span<const double>) {
    if (field[i] > k) ++count;
  });
  return static_cast<double>(count) * g.cell_volume();
}

inline double w12_norm(const ScalarField& field, const BallRegion& ball) {
  const VectorField grad = gradient(field);
  const double sq = integrate_ball_with(field.grid(), ball, [&](std::size_t k) {
    return field[k] * field[k] + grad.norm_squared(k);
  });
  return std::sqrt(sq);
}

inline double sup_ball(const ScalarField& field, const BallRegion& ball) {
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for_each_in_ball(field.grid(), ball, [&](std::size_t k, std::span<const double>) {
    best = std::max(best, field[k]);
    any = true;
  });
  if (!any) throw std::invalid_argument("sup_ball: ball contains no grid node");
  return best;
}

/// Maximum of |grad| over in-ball nodes.
inline double sup_norm_ball(const VectorField& grad, const BallRegion& ball) {
  double best = 0.0;
  bool any = false;
  for_each_in_ball(grad.grid(), ball, [&](std::size_t k, std::span<const double>) {
    best = std::max(best, std::sqrt(grad.norm_squared(k)));
    any = true;
  });
  if (!any) throw std::invalid_argument("sup_norm_ball: ball contains no grid node");
  return best;
}

}  // namespace pqlab
