#pragma once

// Worst-case risk of the path functional l = int_0^T h(t) dx_t + g(x_T) under
// a driftless nominal diffusion dx = sigma dW. The tilted value V(t, x) solves
//
//   dV/dt + theta sigma^2 h (dV/dx + h) + (sigma^2 / 2) d2V/dx2 = 0,  V(T, .) = g,
//
// i.e. a convection-diffusion equation with drift theta sigma^2 h and source
// theta sigma^2 h^2. Solved backwards with Crank-Nicolson; an Euler-Maruyama
// estimator under the drifted measure provides the independent check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "entrisk/error.hpp"
#include "entrisk/random.hpp"

namespace entrisk {

/// Right-continuous step function on [knots.front(), knots.back()].
struct PiecewiseConstant {
  std::vector<double> knots;
  std::vector<double> values;

  static PiecewiseConstant constant(double value, double horizon) {
    return {{0.0, horizon}, {value}};
  }

  void validate(const char* what) const {
    if (knots.size() < 2 || values.size() + 1 != knots.size()) {
      throw DimensionError(std::string(what) + ": need k+1 knots for k values");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) throw DomainError(std::string(what) + ": non-finite value");
      if (!(knots[i + 1] > knots[i])) {
        throw DomainError(std::string(what) + ": knots must be strictly increasing");
      }
    }
  }

  std::size_t segment(double t) const noexcept {
    const auto it = std::upper_bound(knots.begin() + 1, knots.end() - 1, t);
    return static_cast<std::size_t>(it - knots.begin()) - 1;
  }

  double operator()(double t) const noexcept { return values[segment(t)]; }

  /// int_a^b f(t)^power dt for power in {1, 2}.
  double integral(double a, double b, int power = 1) const noexcept {
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double lo = std::max(a, knots[i]);
      const double hi = std::min(b, knots[i + 1]);
      if (hi > lo) total += (hi - lo) * (power == 2 ? values[i] * values[i] : values[i]);
    }
    return total;
  }
};

struct PdeProblem {
  double sigma = 0.2;
  double theta = 0.0;
  double horizon = 1.0;
  PiecewiseConstant h = PiecewiseConstant::constant(0.0, 1.0);
  std::function<double(double)> g = [](double) { return 0.0; };
  double x_min = -1.0;
  double x_max = 1.0;
  int nx = 401;
  int nt = 400;

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("PdeProblem: sigma must be > 0");
    if (!(theta >= 0.0) || !std::isfinite(theta)) throw DomainError("PdeProblem: theta must be >= 0");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw DomainError("PdeProblem: horizon must be > 0");
    }
    if (!(x_max > x_min)) throw DomainError("PdeProblem: need x_min < x_max");
    if (nx < 4) throw ConfigurationError("PdeProblem: nx must be >= 4");
    if (nt < 1) throw ConfigurationError("PdeProblem: nt must be >= 1");
    if (!g) throw ConfigurationError("PdeProblem: terminal payoff g is not set");
    h.validate("PdeProblem.h");
    if (h.knots.front() > 0.0 || h.knots.back() < horizon) {
      throw DomainError("PdeProblem: h must cover [0, horizon]");
    }
  }
};

/// Time nodes 0 = t_0 < ... < t_n = horizon containing every breakpoint of h
/// inside (0, horizon). Steps are shared out in proportion to segment length,
/// at least one per segment, so the count can exceed `steps` when h has more
/// segments than steps.
inline std::vector<double> aligned_time_grid(const PiecewiseConstant& h, double horizon,
                                             int steps) {
  std::vector<double> cuts{0.0};
  for (double k : h.knots) {
    if (k > 0.0 && k < horizon) cuts.push_back(k);
  }
  cuts.push_back(horizon);
  const std::size_t segs = cuts.size() - 1;
  std::vector<int> alloc(segs);
  std::vector<std::pair<double, std::size_t>> remainder;
  int used = 0;
  for (std::size_t s = 0; s < segs; ++s) {
    const double exact = steps * (cuts[s + 1] - cuts[s]) / horizon;
    alloc[s] = std::max(1, static_cast<int>(std::floor(exact)));
    used += alloc[s];
    remainder.emplace_back(exact - std::floor(exact), s);
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; used < steps && r < remainder.size(); ++r, ++used) {
    ++alloc[remainder[r].second];
  }
  std::vector<double> t{0.0};
  for (std::size_t s = 0; s < segs; ++s) {
    const double dt = (cuts[s + 1] - cuts[s]) / alloc[s];
    for (int k = 1; k < alloc[s]; ++k) t.push_back(cuts[s] + dt * k);
    t.push_back(cuts[s + 1]);
  }
  return t;
}

class PdeSolution {
 public:
  PdeSolution(std::vector<double> times, std::vector<double> xs, std::vector<double> values,
              std::vector<std::string> warnings)
      : times_(std::move(times)),
        xs_(std::move(xs)),
        values_(std::move(values)),
        warnings_(std::move(warnings)) {}

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& xs() const noexcept { return xs_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  double at(std::size_t k, std::size_t i) const noexcept { return values_[k * xs_.size() + i]; }

  /// Bilinear interpolation on the (t, x) grid.
  double value_at(double t, double x) const {
    if (t < times_.front() || t > times_.back() || x < xs_.front() || x > xs_.back()) {
      throw DomainError("PdeSolution::value_at: point outside the solved domain");
    }
    const auto bracket = [](const std::vector<double>& g, double v) {
      std::size_t hi = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), v) - g.begin());
      hi = std::clamp<std::size_t>(hi, 1, g.size() - 1);
      const std::size_t lo = hi - 1;
      return std::pair{lo, (v - g[lo]) / (g[hi] - g[lo])};
    };
    const auto [k, wt] = bracket(times_, t);
    const auto [i, wx] = bracket(xs_, x);
    const double v00 = at(k, i), v01 = at(k, i + 1);
    const double v10 = at(k + 1, i), v11 = at(k + 1, i + 1);
    return (1.0 - wt) * ((1.0 - wx) * v00 + wx * v01) + wt * ((1.0 - wx) * v10 + wx * v11);
  }

 private:
  std::vector<double> times_;
  std::vector<double> xs_;
  std::vector<double> values_;
  std::vector<std::string> warnings_;
};

/// Transition density of the nominal driftless diffusion over time T.
inline double nominal_kernel(double x, double x0, double T, double sigma) {
  if (!(T > 0.0)) throw DomainError("nominal_kernel: T must be positive");
  if (!(sigma > 0.0)) throw DomainError("nominal_kernel: sigma must be positive");
  const double var = sigma * sigma * T;
  const double d = x - x0;
  return std::exp(-d * d / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// theta sigma^2 int_0^T h^2 dt: the tilted mean of int h dx, and the value of
/// the PDE at t = 0 when g = 0.
inline double drift_contribution(const PdeProblem& p) {
  return p.theta * p.sigma * p.sigma * p.h.integral(0.0, p.horizon, 2);
}

inline PdeSolution solve(const PdeProblem& p) {
  p.validate();
  const std::size_t nx = static_cast<std::size_t>(p.nx);
  const double dx = (p.x_max - p.x_min) / static_cast<double>(nx - 1);
  std::vector<double> xs(nx);
  for (std::size_t i = 0; i < nx; ++i) xs[i] = p.x_min + dx * static_cast<double>(i);
  xs.back() = p.x_max;

  const std::vector<double> times = aligned_time_grid(p.h, p.horizon, p.nt);
  const std::size_t nt = times.size() - 1;
  std::vector<double> values((nt + 1) * nx);
  for (std::size_t i = 0; i < nx; ++i) values[nt * nx + i] = p.g(xs[i]);

  std::vector<std::string> warnings;
  const double diff = 0.5 * p.sigma * p.sigma;
  const double sig2 = p.sigma * p.sigma;
  {
    double hmax = 0.0;
    for (double v : p.h.values) hmax = std::max(hmax, std::abs(v));
    const double peclet = p.theta * sig2 * hmax * dx / diff;
    if (peclet > 2.0) {
      warnings.push_back("grid Peclet number " + std::to_string(peclet) +
                         " exceeds 2; central convection may oscillate");
    }
  }

  const std::size_t m = nx - 2;  // interior unknowns 1..nx-2
  std::vector<double> lower(m), mid(m), upper(m), rhs(m), cp(m), dp(m);
  for (std::size_t n = nt; n-- > 0;) {
    const double dt = times[n + 1] - times[n];
    const double hv = p.h(0.5 * (times[n] + times[n + 1]));
    const double conv = p.theta * sig2 * hv;
    const double src = p.theta * sig2 * hv * hv;

    // L V_i = a V_{i-1} + b V_i + c V_{i+1}
    const double a = diff / (dx * dx) - conv / (2.0 * dx);
    const double b = -2.0 * diff / (dx * dx);
    const double c = diff / (dx * dx) + conv / (2.0 * dx);

    const double* old = &values[(n + 1) * nx];
    double* out = &values[n * nx];
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t i = r + 1;
      lower[r] = -0.5 * dt * a;
      mid[r] = 1.0 - 0.5 * dt * b;
      upper[r] = -0.5 * dt * c;
      rhs[r] = old[i] + 0.5 * dt * (a * old[i - 1] + b * old[i] + c * old[i + 1]) + dt * src;
    }
    // Zero curvature at the edges: V_0 = 2 V_1 - V_2, V_{N-1} = 2 V_{N-2} - V_{N-3}.
    mid[0] += 2.0 * lower[0];
    upper[0] -= lower[0];
    lower[0] = 0.0;
    mid[m - 1] += 2.0 * upper[m - 1];
    lower[m - 1] -= upper[m - 1];
    upper[m - 1] = 0.0;

    // Thomas sweep.
    for (std::size_t r = 0; r < m; ++r) {
      const double denom = mid[r] - (r > 0 ? lower[r] * cp[r - 1] : 0.0);
      if (denom == 0.0 || !std::isfinite(denom)) {
        throw NumericalError("solve: singular tridiagonal system at time step " +
                             std::to_string(n) + " (t = " + std::to_string(times[n]) + ")");
      }
      cp[r] = upper[r] / denom;
      dp[r] = (rhs[r] - (r > 0 ? lower[r] * dp[r - 1] : 0.0)) / denom;
    }
    out[m] = dp[m - 1];
    for (std::size_t r = m - 1; r-- > 0;) out[r + 1] = dp[r] - cp[r] * out[r + 2];
    out[0] = 2.0 * out[1] - out[2];
    out[nx - 1] = 2.0 * out[nx - 2] - out[nx - 3];
  }
  return PdeSolution(times, std::move(xs), std::move(values), std::move(warnings));
}

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Mean of int h dx + g(x_T) over Euler-Maruyama paths with drift
/// theta sigma^2 h(t) and volatility sigma. Path p draws from stream p of the
/// counter generator, so the estimate is a pure function of the seed.
inline McEstimate mc_oracle(const PdeProblem& p, double x0, int n_paths, int n_steps,
                            std::uint64_t seed) {
  p.validate();
  if (n_paths < 100) throw ConfigurationError("mc_oracle: need at least 100 paths");
  if (n_steps < 1) throw ConfigurationError("mc_oracle: need at least one step");
  const std::vector<double> times = aligned_time_grid(p.h, p.horizon, n_steps);
  const std::size_t steps = times.size() - 1;
  std::vector<double> hk(steps), drift(steps), vol(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double dt = times[k + 1] - times[k];
    hk[k] = p.h(times[k]);
    drift[k] = p.theta * p.sigma * p.sigma * hk[k] * dt;
    vol[k] = p.sigma * std::sqrt(dt);
  }
  double mean = 0.0;
  double m2 = 0.0;
  for (int path = 0; path < n_paths; ++path) {
    CounterRng rng(seed, static_cast<std::uint64_t>(path));
    double x = x0;
    double running = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double dxk = drift[k] + vol[k] * rng.normal();
      running += hk[k] * dxk;
      x += dxk;
    }
    const double payoff = running + p.g(x);
    // Welford update; path order fixes the rounding.
    const double delta = payoff - mean;
    mean += delta / (path + 1);
    m2 += delta * (payoff - mean);
  }
  const double var = m2 / (n_paths - 1);
  return {mean, std::sqrt(var / n_paths)};
}

}  // namespace entrisk
