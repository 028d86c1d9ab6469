#pragma once

// Independent reference computations used only by the tests. None of these
// call into the code paths they are used to check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace entrisk::oracle {

/// Direct (unshifted, long double) evaluation of the tilted statistics.
struct DirectTilt {
  long double v = 0, w = 0, eta = 0, log_z = 0;
  std::vector<long double> m;
};

inline DirectTilt direct_tilt(const std::vector<double>& losses, const std::vector<double>& probs,
                              double theta) {
  DirectTilt out;
  long double z = 0, first = 0;
  for (std::size_t j = 0; j < losses.size(); ++j) {
    const long double e = std::exp(static_cast<long double>(theta) * losses[j]);
    z += probs[j] * e;
    first += probs[j] * e * losses[j];
  }
  out.log_z = std::log(z);
  out.v = first / z;
  out.w = theta == 0.0 ? out.v : out.log_z / theta;
  long double eta = 0;
  for (std::size_t j = 0; j < losses.size(); ++j) {
    const long double m = std::exp(static_cast<long double>(theta) * losses[j]) / z;
    out.m.push_back(m);
    if (m > 0) eta += probs[j] * m * std::log(m);
  }
  out.eta = eta;
  return out;
}

/// Plain bisection of an increasing function on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// beta of the unit-amplitude exponential profile f_m = e^{beta m spacing}
/// carrying total energy -v over levels eps_m = -m spacing (m = 1..N):
/// Sum_m n_m m spacing e^{beta m spacing} = v.
inline double fixed_point_beta(const std::vector<double>& densities, double spacing, double v) {
  const auto energy = [&](double beta) {
    long double e = 0;
    for (std::size_t m = 0; m < densities.size(); ++m) {
      const long double level = static_cast<long double>(m + 1) * spacing;
      e += densities[m] * level * std::exp(static_cast<long double>(beta) * level);
    }
    return static_cast<double>(e) - v;
  };
  double lo = -1.0, hi = 1.0;
  while (energy(lo) > 0.0) lo *= 2.0;
  while (energy(hi) < 0.0) hi *= 2.0;
  return bisect(energy, lo, hi);
}

/// Composite Simpson rule with an even number of intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t intervals) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / static_cast<double>(intervals);
  double s = f(a) + f(b);
  for (std::size_t i = 1; i < intervals; ++i) {
    s += (i % 2 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
  }
  return s * h / 3.0;
}

/// E[g(x0 + drift + sigma W_T)] by quadrature of the Gaussian density over
/// +-12 standard deviations.
inline double gaussian_expectation(const std::function<double(double)>& g, double mean, double sd) {
  const auto integrand = [&](double y) {
    const double z = (y - mean) / sd;
    return g(y) * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
  };
  return simpson(integrand, mean - 12.0 * sd, mean + 12.0 * sd, 20000);
}

/// Closed-form solution of V_t + a V_x + (s^2/2) V_xx + src = 0 with
/// V(T, x) = amp exp(-(x - mu)^2 / (2 w^2)); tau = T - t.
inline double drifted_bump(double x, double tau, double amp, double mu, double width,
                           double drift, double sigma, double src) {
  const double var = width * width + sigma * sigma * tau;
  const double d = x + drift * tau - mu;
  return amp * width / std::sqrt(var) * std::exp(-d * d / (2.0 * var)) + src * tau;
}

/// Random loss sample with `n` points and strictly positive weights.
struct RandomSample {
  std::vector<double> losses;
  std::vector<double> probs;
};

inline RandomSample random_sample(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::uniform_real_distribution<double> uni(0.05, 1.0);
  RandomSample s;
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    s.losses.push_back(normal(rng));
    s.probs.push_back(uni(rng));
    total += s.probs.back();
  }
  for (double& p : s.probs) p /= total;
  return s;
}

/// Random Radon-Nikodym weights (Dirichlet-like) normalised against probs.
inline std::vector<double> random_density(std::mt19937_64& rng, const std::vector<double>& probs,
                                          double concentration = 1.0) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> m(probs.size());
  long double total = 0;
  for (std::size_t j = 0; j < m.size(); ++j) {
    m[j] = gamma(rng) + 1e-300;
    total += probs[j] * m[j];
  }
  for (double& x : m) x = static_cast<double>(x / total);
  return m;
}

}  // namespace entrisk::oracle
