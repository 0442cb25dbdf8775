#pragma once

// Non-increasing rearrangement of weighted samples as an exact step profile,
// with the closed-form integrals built on it (L^p mass, Lorentz L^{n,1} norm,
// the cumulative modulus omega and its inverse).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pqlab/grid.hpp"

namespace pqlab {

struct WeightedSample {
  double value = 0.0;
  double measure = 0.0;
};

class WeightedSamples {
 public:
  WeightedSamples() = default;

  void add(double value, double measure) {
    if (!std::isfinite(value) || value < 0.0) {
      throw std::invalid_argument("WeightedSamples: value must be finite and >= 0");
    }
    if (!std::isfinite(measure) || !(measure > 0.0)) {
      throw std::invalid_argument("WeightedSamples: measure must be finite and > 0");
    }
    items_.push_back({value, measure});
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<WeightedSample>& items() const { return items_; }

  double total_measure() const {
    double s = 0.0;
    for (const auto& it : items_) s += it.measure;
    return s;
  }

  /// Direct sum of value^p * measure.
  double power_sum(double p) const {
    double s = 0.0;
    for (const auto& it : items_) s += std::pow(it.value, p) * it.measure;
    return s;
  }

 private:
  std::vector<WeightedSample> items_;
};

/// |f| at each in-ball node with measure h^n.
inline WeightedSamples samples_from_field(const ScalarField& f, const BallRegion& ball) {
  detail::require_ball_in_box(f.grid(), ball, "samples_from_field");
  WeightedSamples s;
  const double vol = f.grid().cell_volume();
  for_each_in_ball(f.grid(), ball,
                   [&](std::size_t k, std::span<const double>) { s.add(std::abs(f[k]), vol); });
  return s;
}

/// Reads "value,measure" rows after a mandatory header line. Values are taken
/// in absolute value.
inline WeightedSamples read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("samples csv: missing header");
  WeightedSamples s;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("samples csv: row " + std::to_string(row) + " lacks a comma");
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(line.substr(0, comma), &used);
      const std::string rest = line.substr(comma + 1);
      const double m = std::stod(rest, &used);
      if (rest.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
      s.add(std::abs(v), m);
    } catch (const std::exception&) {
      throw std::invalid_argument("samples csv: bad row " + std::to_string(row));
    }
  }
  if (s.empty()) throw std::invalid_argument("samples csv: no data rows");
  return s;
}

/// Step function levels[k] on [breaks[k], breaks[k+1]); breaks[0] = 0.
struct StepProfile {
  std::vector<double> breaks;
  std::vector<double> levels;

  std::size_t steps() const { return levels.size(); }
  double total_measure() const { return breaks.empty() ? 0.0 : breaks.back(); }

  double width(std::size_t k) const { return breaks[k + 1] - breaks[k]; }

  /// f*(t), right-continuous; zero beyond the support.
  double at(double t) const {
    if (t < 0.0) throw std::invalid_argument("StepProfile::at: negative argument");
    const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    if (it == breaks.end()) return 0.0;
    const auto k = static_cast<std::size_t>(it - breaks.begin());
    return k == 0 ? levels.front() : levels[k - 1];
  }
};

inline StepProfile rearrange(const WeightedSamples& samples) {
  if (samples.empty()) throw std::invalid_argument("rearrange: empty sample set");
  std::vector<WeightedSample> sorted = samples.items();
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const WeightedSample& a, const WeightedSample& b) { return a.value > b.value; });
  StepProfile prof;
  prof.breaks.push_back(0.0);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double level = sorted[i].value;
    double mass = 0.0;
    for (; i < sorted.size() && sorted[i].value == level; ++i) mass += sorted[i].measure;
    cumulative += mass;
    prof.levels.push_back(level);
    prof.breaks.push_back(cumulative);
  }
  return prof;
}

/// Integral of (f*)^p over the support; equals the direct sum of value^p * measure.
inline double lp_norm_from_profile(const StepProfile& prof, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm_from_profile: p must be >= 1");
  double s = 0.0;
  for (std::size_t k = 0; k < prof.steps(); ++k) s += std::pow(prof.levels[k], p) * prof.width(k);
  return s;
}

/// Integral of t^{1/n} f*(t) dt/t, exact on steps.
inline double lorentz_n1(const StepProfile& prof, int n) {
  if (n < 1) throw std::invalid_argument("lorentz_n1: n must be >= 1");
  const double e = 1.0 / n;
  double s = 0.0;
  for (std::size_t k = 0; k < prof.steps(); ++k) {
    if (prof.levels[k] == 0.0) continue;
    s += prof.levels[k] * n * (std::pow(prof.breaks[k + 1], e) - std::pow(prof.breaks[k], e));
  }
  return s;
}

/// Constant in ||f||_{L^n} <= C ||f||_{L^{n,1}}, from f*(t) <= t^{-1/n} ||f||_{n,1} / n.
inline double lorentz_embedding_constant(int n) {
  return std::pow(static_cast<double>(n), -static_cast<double>(n - 1) / n);
}

namespace detail {

/// cumulative[k] = integral of (f*)^2 over [0, breaks[k]].
inline std::vector<double> cumulative_squares(const StepProfile& prof) {
  std::vector<double> c(prof.breaks.size(), 0.0);
  for (std::size_t k = 0; k < prof.steps(); ++k) {
    c[k + 1] = c[k] + prof.levels[k] * prof.levels[k] * prof.width(k);
  }
  return c;
}

}  // namespace detail

inline double omega(const StepProfile& prof, double t) {
  const double total = prof.total_measure();
  if (!(t >= 0.0) || t > total * (1.0 + 1e-14)) {
    throw std::invalid_argument("omega: t outside [0, |Omega|]");
  }
  t = std::min(t, total);
  double s = 0.0;
  for (std::size_t k = 0; k < prof.steps() && prof.breaks[k] < t; ++k) {
    const double right = std::min(prof.breaks[k + 1], t);
    s += prof.levels[k] * prof.levels[k] * (right - prof.breaks[k]);
  }
  return std::sqrt(s);
}

struct OmegaInverse {
  double t = 0.0;
  bool saturated = false;
};

/// Smallest t with omega(t) >= y, solved exactly on the piecewise-linear
/// square of omega. Saturates at |Omega| when y exceeds the range.
inline OmegaInverse omega_inverse(const StepProfile& prof, double y) {
  if (!(y >= 0.0)) throw std::invalid_argument("omega_inverse: y must be >= 0");
  if (y == 0.0) return {0.0, false};
  const std::vector<double> c = detail::cumulative_squares(prof);
  const double target = y * y;
  // Slack so that omega_inverse(omega(|Omega|)) does not saturate on roundoff.
  if (target > c.back() * (1.0 + 4e-16 * static_cast<double>(prof.steps() + 1))) return {prof.total_measure(), true};
  for (std::size_t k = 0; k < prof.steps(); ++k) {
    if (c[k + 1] >= target) {
      const double l2 = prof.levels[k] * prof.levels[k];
      const double t = prof.breaks[k] + (target - c[k]) / l2;
      return {std::min(t, prof.breaks[k + 1]), false};
    }
  }
  return {prof.total_measure(), false};
}

struct SubsetBoundReport {
  double greedy = 0.0;
  double rearranged = 0.0;
  double abs_difference = 0.0;
  bool equal = false;
};

/// Greedy maximizer of the integral of |f|^p over sets of measure <= t
/// (largest values first, fractional last cell) against the integral of
/// (f*)^p over [0, t].
inline SubsetBoundReport subset_bound_check(const WeightedSamples& samples, double p, double t) {
  const double total = samples.total_measure();
  if (!(t > 0.0) || t > total * (1.0 + 1e-14)) {
    throw std::invalid_argument("subset_bound_check: t outside (0, |Omega|]");
  }
  std::vector<WeightedSample> sorted = samples.items();
  std::sort(sorted.begin(), sorted.end(),
            [](const WeightedSample& a, const WeightedSample& b) { return a.value > b.value; });
  double left = t;
  double greedy = 0.0;
  for (const auto& s : sorted) {
    if (left <= 0.0) break;
    const double take = std::min(left, s.measure);
    greedy += std::pow(s.value, p) * take;
    left -= take;
  }
  const StepProfile prof = rearrange(samples);
  double rearranged = 0.0;
  for (std::size_t k = 0; k < prof.steps() && prof.breaks[k] < t; ++k) {
    rearranged += std::pow(prof.levels[k], p) * (std::min(prof.breaks[k + 1], t) - prof.breaks[k]);
  }
  SubsetBoundReport r;
  r.greedy = greedy;
  r.rearranged = rearranged;
  r.abs_difference = std::abs(greedy - rearranged);
  r.equal = r.abs_difference <= 1e-12 * std::max(1.0, std::abs(rearranged));
  return r;
}

}  // namespace pqlab
