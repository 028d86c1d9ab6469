#pragma once

// Simulated thermalization: ensemble Monte Carlo on an arithmetic energy grid.
//
// Levels eps_m = -m * spacing (m = 1..N) carry densities n_m from the nominal
// measure and unnormalised occupations f_m whose total energy Sum n f eps is
// pinned to -V. Each step picks a level triple with eps_i = eps_j + eps_k and
// moves occupation along the decay i -> j + k at a rate proportional to
// (f_i - f_j f_k) n_i n_j n_k. Energy is conserved exactly by the grid
// identity; particle number is not. The fixed points are f_m = e^{-beta eps_m},
// from which beta is read off by a weighted log-linear fit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "entrisk/core_ensemble.hpp"
#include "entrisk/error.hpp"
#include "entrisk/random.hpp"

namespace entrisk {

inline constexpr double kEmptyBinDensity = 1e-12;

/// Zero-based level indices with (i+1) = (j+1) + (k+1) and j <= k.
struct LevelTriple {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  std::uint32_t k = 0;
};

inline std::vector<LevelTriple> admissible_triples(std::size_t n_levels) {
  std::vector<LevelTriple> out;
  for (std::size_t mi = 2; mi <= n_levels; ++mi) {
    for (std::size_t mj = 1; mj <= mi / 2; ++mj) {
      out.push_back({static_cast<std::uint32_t>(mi - 1), static_cast<std::uint32_t>(mj - 1),
                     static_cast<std::uint32_t>(mi - mj - 1)});
    }
  }
  return out;
}

struct ThermalizationState {
  double grid_spacing = 1.0;
  std::vector<double> energies;
  std::vector<double> densities;
  std::vector<double> occupations;
  /// Conserved target, -V.
  double total_energy = 0.0;
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  CounterRng rng{0};
  std::vector<LevelTriple> triples;

  std::size_t size() const noexcept { return energies.size(); }

  double current_energy() const noexcept {
    detail::CompensatedSum acc;
    for (std::size_t m = 0; m < size(); ++m) acc.add(densities[m] * occupations[m] * energies[m]);
    return acc.value();
  }

  double particle_number() const noexcept {
    detail::CompensatedSum acc;
    for (std::size_t m = 0; m < size(); ++m) acc.add(densities[m] * occupations[m]);
    return acc.value();
  }

  double mean_particle_energy() const noexcept { return current_energy() / particle_number(); }

  DiscreteEnsemble ensemble() const { return ensemble_with(occupations); }

  /// The grid with another occupation profile. Levels are stored deepest-last;
  /// DiscreteEnsemble wants increasing energy.
  DiscreteEnsemble ensemble_with(std::span<const double> occ) const {
    std::vector<double> e(energies.rbegin(), energies.rend());
    std::vector<double> n(densities.rbegin(), densities.rend());
    std::vector<double> f(occ.rbegin(), occ.rend());
    return DiscreteEnsemble(std::move(e), std::move(n), std::move(f));
  }
};

/// Grid, densities and a uniform occupation profile scaled so the total
/// energy is exactly -v_target.
///
/// Losses must be nonnegative. The spacing is max(l) / n_levels and each
/// sample point is binned to the nearest level (clamped to level 1); levels
/// that receive no probability get density kEmptyBinDensity.
inline ThermalizationState init_state(const LossSample& s, double v_target, int n_levels,
                                      std::uint64_t seed) {
  if (n_levels < 1) throw ConfigurationError("init_state: n_levels must be >= 1");
  const double top = s.max_loss();
  if (s.min_loss() < 0.0 || !(top > 0.0)) {
    throw RangeError("init_state: losses must be >= 0 with a positive maximum");
  }
  const std::size_t n = static_cast<std::size_t>(n_levels);
  ThermalizationState st;
  st.grid_spacing = top / static_cast<double>(n);
  st.energies.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    st.energies[m] = -static_cast<double>(m + 1) * st.grid_spacing;
  }

  std::vector<detail::CompensatedSum> mass(n);
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s.probs()[j] == 0.0) continue;
    const double pos = std::round(s.losses()[j] / st.grid_spacing);
    const std::size_t m = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(n)));
    mass[m - 1].add(s.probs()[j]);
  }
  st.densities.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double v = mass[m].value();
    st.densities[m] = v > 0.0 ? v : kEmptyBinDensity;
  }

  const double scale = detail::sum(st.densities) * top;
  if (!(v_target > 0.0) || !(v_target < scale)) {
    throw RangeError("init_state: v_target " + std::to_string(v_target) +
                     " outside (0, " + std::to_string(scale) + ")");
  }
  detail::CompensatedSum unit_energy;
  for (std::size_t m = 0; m < n; ++m) unit_energy.add(st.densities[m] * st.energies[m]);
  st.occupations.assign(n, -v_target / unit_energy.value());
  st.total_energy = -v_target;
  st.seed = seed;
  st.rng = CounterRng(seed);
  st.triples = admissible_triples(n);
  return st;
}

/// Builds a state directly from a grid spacing, densities (level 1 first) and
/// occupations. The conserved total is taken from the occupations.
inline ThermalizationState make_state(double grid_spacing, std::vector<double> densities,
                                      std::vector<double> occupations, std::uint64_t seed) {
  if (!(grid_spacing > 0.0)) throw DomainError("make_state: spacing must be positive");
  if (densities.size() != occupations.size() || densities.empty()) {
    throw DimensionError("make_state: densities and occupations must match");
  }
  ThermalizationState st;
  st.grid_spacing = grid_spacing;
  const std::size_t n = densities.size();
  for (std::size_t m = 0; m < n; ++m) {
    if (!(densities[m] > 0.0)) throw DomainError("make_state: density must be > 0");
    if (occupations[m] < 0.0) throw DomainError("make_state: negative occupation");
    st.energies.push_back(-static_cast<double>(m + 1) * grid_spacing);
  }
  st.densities = std::move(densities);
  st.occupations = std::move(occupations);
  st.total_energy = st.current_energy();
  st.seed = seed;
  st.rng = CounterRng(seed);
  st.triples = admissible_triples(n);
  return st;
}

/// Raw flow (f_i - f_j f_k) n_i n_j n_k; positive means decay i -> j + k.
inline double triple_flow(const ThermalizationState& st, const LevelTriple& t) noexcept {
  const auto& f = st.occupations;
  const auto& n = st.densities;
  return (f[t.i] - f[t.j] * f[t.k]) * n[t.i] * n[t.j] * n[t.k];
}

/// Applies learning_rate * flow on one triple, clipped so no occupation goes
/// negative. Returns the transferred amount delta.
inline double apply_flow(ThermalizationState& st, const LevelTriple& t, double learning_rate) {
  auto& f = st.occupations;
  const auto& n = st.densities;
  double delta = learning_rate * triple_flow(st, t);
  if (delta > 0.0) {
    delta = std::min(delta, f[t.i] * n[t.i]);
  } else if (delta < 0.0) {
    if (t.j == t.k) {
      delta = std::max(delta, -0.5 * f[t.j] * n[t.j]);
    } else {
      delta = std::max({delta, -f[t.j] * n[t.j], -f[t.k] * n[t.k]});
    }
  }
  f[t.i] = std::max(0.0, f[t.i] - delta / n[t.i]);
  if (t.j == t.k) {
    f[t.j] = std::max(0.0, f[t.j] + 2.0 * delta / n[t.j]);
  } else {
    f[t.j] = std::max(0.0, f[t.j] + delta / n[t.j]);
    f[t.k] = std::max(0.0, f[t.k] + delta / n[t.k]);
  }
  return delta;
}

/// One Monte Carlo step on a uniformly drawn admissible triple.
inline void step(ThermalizationState& st, double learning_rate) {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw DomainError("step: learning_rate must lie in (0, 1]");
  }
  if (st.triples.empty()) {
    throw ConfigurationError("step: no admissible level triple (need at least 2 levels)");
  }
  const auto& t = st.triples[st.rng.below(st.triples.size())];
  apply_flow(st, t, learning_rate);
  ++st.iteration;
}

/// Largest |flow| over all admissible triples.
inline double max_abs_flow(const ThermalizationState& st) {
  double out = 0.0;
  for (const auto& t : st.triples) out = std::max(out, std::abs(triple_flow(st, t)));
  return out;
}

struct ExponentialFit {
  double beta = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Weighted least squares of ln f_m on eps_m (weights n_m f_m); beta is minus
/// the slope. Levels with f_m < 1e-300 are skipped.
inline ExponentialFit fit_exponential_law(std::span<const double> energies,
                                          std::span<const double> densities,
                                          std::span<const double> occupations) {
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t m = 0; m < energies.size(); ++m) {
    if (occupations[m] < 1e-300) continue;
    const double w = densities[m] * occupations[m];
    sw += w;
    sx += w * energies[m];
    sy += w * std::log(occupations[m]);
  }
  if (!(sw > 0.0)) throw StateError("fit_exponential_law: no occupied levels");
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t m = 0; m < energies.size(); ++m) {
    if (occupations[m] < 1e-300) continue;
    const double w = densities[m] * occupations[m];
    const double dx = energies[m] - mx;
    const double dy = std::log(occupations[m]) - my;
    sxx += w * dx * dx;
    sxy += w * dx * dy;
    syy += w * dy * dy;
  }
  if (!(sxx > 0.0)) throw StateError("fit_exponential_law: fewer than two distinct levels");
  const double slope = sxy / sxx;
  // A perfectly flat profile is a perfect fit.
  const double r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return {-slope, my - slope * mx, r2};
}

struct TraceRow {
  std::uint64_t iteration = 0;
  double mean_particle_energy = 0.0;
  double total_energy = 0.0;
  double particle_number = 0.0;
  double kl_to_boltzmann = 0.0;
};

struct ThermalizationOptions {
  double learning_rate = 0.1;
  std::uint64_t max_iters = 200'000'000;
  double tol = 1e-7;
  std::uint64_t window = 1000;
  /// Trace snapshot interval; 0 means 10 windows.
  std::uint64_t trace_every = 0;
};

struct ThermalizationResult {
  double beta = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::uint64_t iterations_used = 0;
  std::vector<TraceRow> trace;
  bool converged = false;
  std::uint64_t seed = 0;
  /// max |E_t - E_0| / |E_0| over the trace snapshots and the final state.
  double energy_drift = 0.0;
};

inline double kl_to_boltzmann(const DiscreteEnsemble& e, double beta);

/// Iterates step() until the mean particle energy changes by less than tol
/// (relative) across one window, then fits the exponential law.
inline ThermalizationResult run(ThermalizationState& st, const ThermalizationOptions& opt = {}) {
  if (opt.window == 0) throw DomainError("run: window must be positive");
  const std::uint64_t trace_every = opt.trace_every ? opt.trace_every : 10 * opt.window;
  const double e0 = st.total_energy;

  ThermalizationResult res;
  res.seed = st.seed;
  std::vector<std::vector<double>> snapshots;
  const auto record = [&] {
    const double e = st.current_energy();
    const double np = st.particle_number();
    res.trace.push_back({st.iteration, e / np, e, np, 0.0});
    snapshots.push_back(st.occupations);
    res.energy_drift = std::max(res.energy_drift, std::abs(e - e0) / std::abs(e0));
  };

  record();
  double previous = st.mean_particle_energy();
  const std::uint64_t start = st.iteration;
  while (st.iteration - start < opt.max_iters) {
    for (std::uint64_t w = 0; w < opt.window && st.iteration - start < opt.max_iters; ++w) {
      step(st, opt.learning_rate);
      if ((st.iteration - start) % trace_every == 0) record();
    }
    const double current = st.mean_particle_energy();
    if (std::abs(current - previous) < opt.tol * std::abs(previous)) {
      res.converged = true;
      break;
    }
    previous = current;
  }
  if (res.trace.back().iteration != st.iteration) record();
  res.iterations_used = st.iteration - start;

  const ExponentialFit fit = fit_exponential_law(st.energies, st.densities, st.occupations);
  res.beta = fit.beta;
  res.intercept = fit.intercept;
  res.r_squared = fit.r_squared;
  if (res.converged && res.r_squared < 0.999) res.converged = false;

  for (std::size_t r = 0; r < res.trace.size(); ++r) {
    res.trace[r].kl_to_boltzmann = kl_to_boltzmann(st.ensemble_with(snapshots[r]), res.beta);
  }
  return res;
}

/// ln Z(beta) = ln Sum_m n_m e^{-beta eps_m}.
inline double log_partition(std::span<const double> energies, std::span<const double> densities,
                            double beta) {
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < energies.size(); ++m) {
    shift = std::max(shift, std::log(densities[m]) - beta * energies[m]);
  }
  detail::CompensatedSum acc;
  for (std::size_t m = 0; m < energies.size(); ++m) {
    acc.add(std::exp(std::log(densities[m]) - beta * energies[m] - shift));
  }
  return shift + std::log(acc.value());
}

inline double log_partition(const DiscreteEnsemble& e, double beta) {
  return log_partition(e.energies(), e.densities(), beta);
}

/// Z(beta_int) for an ensemble assumed to be in internal equilibrium at
/// beta_int; a convenient choice of Z_neq for transition_rate_estimate.
inline double internal_partition(const DiscreteEnsemble& e, double beta_int) {
  return std::exp(log_partition(e, beta_int));
}

/// Level probabilities of the canonical ensemble, n_m e^{-beta eps_m} / Z.
inline std::vector<double> boltzmann_probabilities(const DiscreteEnsemble& e, double beta) {
  const double log_z = log_partition(e, beta);
  std::vector<double> p(e.size());
  for (std::size_t m = 0; m < e.size(); ++m) {
    p[m] = std::exp(std::log(e.densities()[m]) - beta * e.energies()[m] - log_z);
  }
  return p;
}

namespace detail {

inline std::vector<double> level_probabilities(const DiscreteEnsemble& e) {
  const double mass = e.particle_number();
  if (!(mass > 0.0)) throw DomainError("ensemble has no occupied level");
  std::vector<double> p(e.size());
  for (std::size_t m = 0; m < e.size(); ++m) p[m] = e.densities()[m] * e.occupations()[m] / mass;
  return p;
}

}  // namespace detail

/// D(p_hat || p_bz(beta)) with p_hat the normalised level occupation.
inline double kl_to_boltzmann(const DiscreteEnsemble& e, double beta) {
  const auto p = detail::level_probabilities(e);
  const double log_z = log_partition(e, beta);
  detail::CompensatedSum acc;
  for (std::size_t m = 0; m < e.size(); ++m) {
    if (p[m] == 0.0) continue;
    const double log_bz = std::log(e.densities()[m]) - beta * e.energies()[m] - log_z;
    if (!std::isfinite(log_bz)) {
      throw DomainError("kl_to_boltzmann: occupied level " + std::to_string(m) +
                        " has no Boltzmann weight at beta = " + std::to_string(beta));
    }
    acc.add(p[m] * (std::log(p[m]) - log_bz));
  }
  return std::max(0.0, acc.value());
}

/// Net logarithmic transition rate from a non-equilibrium ensemble to the
/// canonical one: D(p_hat || p_bz) - beta ln(z_neq / z_eq).
inline double transition_rate_estimate(const DiscreteEnsemble& e, double beta, double z_neq,
                                       double z_eq) {
  if (!(z_neq > 0.0) || !(z_eq > 0.0)) {
    throw DomainError("transition_rate_estimate: partition functions must be positive");
  }
  return kl_to_boltzmann(e, beta) - beta * std::log(z_neq / z_eq);
}

/// A = U - S / beta for the normalised occupation. At the Boltzmann profile
/// this equals -ln Z(beta) / beta.
inline double free_energy(const DiscreteEnsemble& e, double beta) {
  if (!(beta > 0.0)) throw DomainError("free_energy: beta must be positive");
  const DiscreteEnsemble p = e.normalized_copy();
  double u = 0.0;
  for (std::size_t m = 0; m < p.size(); ++m) {
    u += p.densities()[m] * p.occupations()[m] * p.energies()[m];
  }
  return u - shannon_entropy(p) / beta;
}

}  // namespace entrisk
