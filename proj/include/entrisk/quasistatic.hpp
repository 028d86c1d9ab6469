#pragma once

// Entropy budget recovered along the quasi-static path,
//   eta(theta_f) = int_0^{theta_f} theta dV*(theta),
// and the power-law ("ideal gas") spectrum benchmark evaluated by quadrature.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "entrisk/error.hpp"
#include "entrisk/quadrature.hpp"
#include "entrisk/tilt.hpp"

namespace entrisk {

struct QuasistaticReport {
  TiltCurve curve;
  std::vector<double> eta_integrated;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

/// Stieltjes trapezoid of theta against dV* along an anchored curve.
inline QuasistaticReport integrate_entropy(const TiltCurve& curve) {
  if (curve.empty()) throw PreconditionError("integrate_entropy: empty curve");
  if (curve.front().theta != 0.0) {
    throw PreconditionError("integrate_entropy: curve must start at theta = 0, got " +
                            std::to_string(curve.front().theta));
  }
  QuasistaticReport report;
  report.curve = curve;
  report.eta_integrated.resize(curve.size());
  detail::CompensatedSum eta;
  report.eta_integrated[0] = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const TiltRow& a = curve[k - 1];
    const TiltRow& b = curve[k];
    if (!(b.theta > a.theta)) {
      throw PreconditionError("integrate_entropy: theta grid not strictly increasing at row " +
                              std::to_string(k));
    }
    eta.add(0.5 * (a.theta + b.theta) * (b.v_star - a.v_star));
    report.eta_integrated[k] = eta.value();
  }
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const double err = std::abs(report.eta_integrated[k] - curve[k].eta_star);
    report.max_abs_error = std::max(report.max_abs_error, err);
    report.max_rel_error =
        std::max(report.max_rel_error, err / std::max(curve[k].eta_star, 1e-300));
  }
  return report;
}

inline double rel_error_at(const QuasistaticReport& r, std::size_t k) {
  return std::abs(r.eta_integrated[k] - r.curve[k].eta_star) /
         std::max(r.curve[k].eta_star, 1e-300);
}

/// Loss spectrum l in (0, l_max] with density l^{n/2 - 1} dl.
struct IdealGasSpec {
  int n = 2;
  double l_max = 50.0;
  int quadrature_points = 2048;
};

struct IdealGasCurve {
  TiltCurve curve;
  /// True where more than 1e-6 of the tilted mass sits within 1% of l_max,
  /// i.e. where the truncation visibly distorts the power-law answer.
  std::vector<bool> truncated;
};

namespace detail {

struct IdealGasMoments {
  double log_i0 = 0.0;  // ln int l^a e^{theta l} dl
  double mean = 0.0;    // I1 / I0
  double edge_mass = 0.0;
};

inline constexpr std::size_t kIdealGasPanelOrder = 16;

/// Moments by the substitution l = u^2, which turns l^{n/2-1} dl into
/// 2 u^{n-1} du and removes the endpoint singularity for n = 1.
inline IdealGasMoments ideal_gas_moments(const IdealGasSpec& spec, double theta,
                                         std::size_t panels) {
  static const GaussLegendre rule(kIdealGasPanelOrder);
  const double upper = std::sqrt(spec.l_max);
  const double shift = theta > 0.0 ? theta * spec.l_max : 0.0;
  const int power = spec.n - 1;
  const auto base = [&](double u) {
    return 2.0 * std::pow(u, power) * std::exp(theta * u * u - shift);
  };
  const double i0 = integrate_composite(base, 0.0, upper, panels, rule);
  const double i1 =
      integrate_composite([&](double u) { return u * u * base(u); }, 0.0, upper, panels, rule);
  const double edge_lo = std::sqrt(0.99 * spec.l_max);
  const double edge =
      integrate_composite(base, edge_lo, upper, std::max<std::size_t>(1, panels / 16), rule);
  return {std::log(i0) + shift, i1 / i0, edge / i0};
}

}  // namespace detail

/// Tilted statistics of the truncated power-law spectrum over a theta grid.
///
/// The nominal measure is the normalised density on (0, l_max]; theta < 0
/// weights towards small losses, which is where the untruncated spectrum is
/// normalisable and |V*| = n / (2 |theta|).
inline IdealGasCurve ideal_gas_curve(const IdealGasSpec& spec,
                                     std::span<const double> theta_grid) {
  if (spec.n < 1) throw DomainError("ideal_gas_curve: dimension must be >= 1");
  if (!(spec.l_max > 0.0) || !std::isfinite(spec.l_max)) {
    throw DomainError("ideal_gas_curve: l_max must be positive and finite");
  }
  if (spec.quadrature_points < 1) {
    throw DomainError("ideal_gas_curve: quadrature_points must be positive");
  }
  const std::size_t panels = std::max<std::size_t>(
      1, static_cast<std::size_t>(spec.quadrature_points) / detail::kIdealGasPanelOrder);

  const auto checked = [&](double theta) {
    const auto coarse = detail::ideal_gas_moments(spec, theta, panels);
    const auto fine = detail::ideal_gas_moments(spec, theta, 2 * panels);
    const double dmean = std::abs(fine.mean - coarse.mean) / std::abs(fine.mean);
    const double dlog = std::abs(fine.log_i0 - coarse.log_i0) / std::max(1.0, std::abs(fine.log_i0));
    if (!(dmean <= 1e-8) || !(dlog <= 1e-8)) {
      throw AccuracyError("ideal_gas_curve: quadrature not converged at theta = " +
                          std::to_string(theta) + " (node doubling changed the mean by " +
                          std::to_string(dmean) + " relative)");
    }
    return fine;
  };

  const double log_i0_nominal = checked(0.0).log_i0;
  IdealGasCurve out;
  out.curve.reserve(theta_grid.size());
  out.truncated.reserve(theta_grid.size());
  for (std::size_t k = 0; k < theta_grid.size(); ++k) {
    const double theta = theta_grid[k];
    if (!std::isfinite(theta)) throw DomainError("ideal_gas_curve: non-finite theta");
    if (k > 0 && !(theta > theta_grid[k - 1])) {
      throw DomainError("ideal_gas_curve: theta grid must be strictly increasing");
    }
    const auto mom = checked(theta);
    const double log_z = mom.log_i0 - log_i0_nominal;
    const double v = mom.mean;
    const double eta = theta == 0.0 ? 0.0 : std::max(0.0, theta * v - log_z);
    const double w = theta == 0.0 ? v : log_z / theta;
    out.curve.push_back({theta, v, w, eta});
    out.truncated.push_back(mom.edge_mass > 1e-6);
  }
  return out;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
};

/// Least-squares slope of eta* against ln|V*| over the rows not flagged as
/// truncated.
inline SlopeFit ideal_gas_slope(const IdealGasCurve& c) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < c.curve.size(); ++k) {
    if (c.truncated[k] || c.curve[k].v_star == 0.0) continue;
    xs.push_back(std::log(std::abs(c.curve[k].v_star)));
    ys.push_back(c.curve[k].eta_star);
  }
  if (xs.size() < 2) throw StateError("ideal_gas_slope: fewer than two clean grid points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw StateError("ideal_gas_slope: degenerate abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx, xs.size()};
}

}  // namespace entrisk
