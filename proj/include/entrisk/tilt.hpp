#pragma once

// Worst-case measure at a fixed Lagrange multiplier theta (inverse temperature):
//
//   m*   = e^{theta l} / E[e^{theta l}]
//   V*   = E[l e^{theta l}] / E[e^{theta l}]
//   W*   = theta^{-1} ln E[e^{theta l}]
//   eta* = theta V* - ln E[e^{theta l}]
//
// plus theta sweeps and the two inverse problems (theta for a target risk,
// theta for a target entropy budget).

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "entrisk/core_ensemble.hpp"
#include "entrisk/error.hpp"
#include "entrisk/rootfind.hpp"

namespace entrisk {

struct TiltResult {
  double theta = 0.0;
  MeasureChange m_star;
  double v_star = 0.0;
  double w_star = 0.0;
  double eta_star = 0.0;
  /// ln E_P[e^{theta l}] = theta * w_star.
  double log_partition = 0.0;
};

struct TiltRow {
  double theta = 0.0;
  double v_star = 0.0;
  double w_star = 0.0;
  double eta_star = 0.0;
};

/// Rows over a strictly increasing theta grid.
using TiltCurve = std::vector<TiltRow>;

namespace detail {

/// ln Sum_j p_j e^{a_j}, shifted by max a_j over the support of p.
inline double log_sum_exp(std::span<const double> probs, std::span<const double> a) {
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (probs[j] > 0.0) shift = std::max(shift, a[j]);
  }
  CompensatedSum acc;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (probs[j] > 0.0) acc.add(probs[j] * std::exp(a[j] - shift));
  }
  return shift + std::log(acc.value());
}

}  // namespace detail

inline TiltResult tilt_at(const LossSample& s, double theta) {
  if (!std::isfinite(theta)) throw DomainError("tilt_at: theta must be finite");
  const auto losses = s.losses();
  const auto probs = s.probs();
  const std::size_t n = s.size();

  if (theta == 0.0) {
    const double v = expected_loss(s);
    return {0.0, MeasureChange::identity(s), v, v, 0.0, 0.0};
  }

  std::vector<double> a(n);
  for (std::size_t j = 0; j < n; ++j) a[j] = theta * losses[j];
  const double log_z = detail::log_sum_exp(probs, a);
  if (!std::isfinite(log_z)) {
    throw OverflowError("tilt_at: log-partition is not finite at theta = " +
                        std::to_string(theta));
  }

  std::vector<double> m(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (probs[j] > 0.0) m[j] = std::exp(a[j] - log_z);
  }
  detail::CompensatedSum mass;
  detail::CompensatedSum first;
  for (std::size_t j = 0; j < n; ++j) {
    mass.add(probs[j] * m[j]);
    first.add(probs[j] * m[j] * losses[j]);
  }
  // Remove the last ulps of normalisation error so m* validates exactly.
  const double z = mass.value();
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw OverflowError("tilt_at: tilted mass is degenerate at theta = " + std::to_string(theta));
  }
  for (double& x : m) x /= z;
  const double v = first.value() / z;

  // eta* = theta v* - ln Z = -ln E_P[e^{theta (l - v*)}]; centring on v*
  // avoids cancelling two large terms when eta* is small.
  std::vector<double> centred(n);
  for (std::size_t j = 0; j < n; ++j) centred[j] = theta * (losses[j] - v);
  const double eta = std::max(0.0, -detail::log_sum_exp(probs, centred));

  if (!std::isfinite(v) || !std::isfinite(eta)) {
    throw OverflowError("tilt_at: non-finite result at theta = " + std::to_string(theta));
  }
  return {theta, MeasureChange(std::move(m), s), v, log_z / theta, eta, log_z};
}

/// tilt_at over a strictly increasing grid.
inline TiltCurve sweep(const LossSample& s, std::span<const double> theta_grid) {
  TiltCurve curve;
  curve.reserve(theta_grid.size());
  for (std::size_t k = 0; k < theta_grid.size(); ++k) {
    if (!std::isfinite(theta_grid[k])) {
      throw DomainError("sweep: grid point " + std::to_string(k) + " is not finite");
    }
    if (k > 0 && !(theta_grid[k] > theta_grid[k - 1])) {
      throw DomainError("sweep: grid must be strictly increasing (index " + std::to_string(k) +
                        ")");
    }
    try {
      const TiltResult r = tilt_at(s, theta_grid[k]);
      curve.push_back({r.theta, r.v_star, r.w_star, r.eta_star});
    } catch (const OverflowError& e) {
      throw OverflowError("sweep: grid index " + std::to_string(k) + ": " + e.what());
    }
  }
  return curve;
}

/// Evenly spaced grid of `points` values over [lo, hi].
inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  if (points == 0) throw DomainError("linear_grid: need at least one point");
  if (points == 1) return {lo};
  if (!(hi > lo)) throw DomainError("linear_grid: need hi > lo");
  std::vector<double> g(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) g[k] = lo + step * static_cast<double>(k);
  g.back() = hi;
  return g;
}

/// Smallest theta >= 0 with V*(theta) = v_target.
///
/// V* is strictly increasing in theta whenever the loss is not constant, so
/// the root is unique. Targets below E[l] would need theta < 0 and are
/// rejected, as is anything at or beyond the largest loss.
inline double solve_theta_for_risk(const LossSample& s, double v_target) {
  const double mean = expected_loss(s);
  const double lo_l = s.min_loss();
  const double hi_l = s.max_loss();
  if (v_target == mean) return 0.0;
  if (!(v_target > lo_l && v_target < hi_l)) {
    throw RangeError("solve_theta_for_risk: target " + std::to_string(v_target) +
                     " outside the achievable interval (" + std::to_string(lo_l) + ", " +
                     std::to_string(hi_l) + ")");
  }
  if (v_target < mean) {
    throw RangeError("solve_theta_for_risk: target " + std::to_string(v_target) +
                     " is below the nominal risk " + std::to_string(mean) +
                     "; worst-case multipliers are nonnegative");
  }
  const double spread = hi_l - lo_l;
  const auto f = [&](double theta) { return tilt_at(s, theta).v_star - v_target; };
  const double hi = expand_upper_bracket(f, 1.0 / spread);
  const RootResult r = find_root_monotone(f, 0.0, hi, 1e-10 * spread);
  if (!r.converged) {
    throw AccuracyError("solve_theta_for_risk: no convergence, residual " +
                        std::to_string(r.fx));
  }
  return r.x;
}

/// sup over theta >= 0 of eta*(theta) = -ln P(l = max l).
inline double max_entropy_budget(const LossSample& s) {
  const double top = s.max_loss();
  detail::CompensatedSum mass;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s.losses()[j] == top) mass.add(s.probs()[j]);
  }
  return -std::log(mass.value());
}

/// theta >= 0 with eta*(theta) = eta_target.
inline double solve_theta_for_budget(const LossSample& s, double eta_target) {
  if (!(eta_target >= 0.0) || !std::isfinite(eta_target)) {
    throw RangeError("solve_theta_for_budget: budget must be finite and >= 0");
  }
  if (eta_target == 0.0) return 0.0;
  const double sup = max_entropy_budget(s);
  if (!(eta_target < sup)) {
    throw RangeError("solve_theta_for_budget: budget " + std::to_string(eta_target) +
                     " is not below the supremum " + std::to_string(sup));
  }
  const double spread = s.max_loss() - s.min_loss();
  const auto f = [&](double theta) { return tilt_at(s, theta).eta_star - eta_target; };
  const double hi = expand_upper_bracket(f, 1.0 / spread);
  const RootResult r = find_root_monotone(f, 0.0, hi, 1e-10);
  if (!r.converged) {
    throw AccuracyError("solve_theta_for_budget: no convergence, residual " +
                        std::to_string(r.fx));
  }
  return r.x;
}

}  // namespace entrisk
