#pragma once

// Shared data model. A nominal model is held either as a LossSample
// (losses l_j with probabilities p_j) or as a DiscreteEnsemble (energy levels
// eps_i = -l with densities of states n_i and per-level occupations f_i).
// Boltzmann's constant is 1 and the microstate count N is absorbed into the
// densities, so every quantity is reported directly in model-risk units.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "entrisk/error.hpp"

namespace entrisk {

inline constexpr double kNormTolerance = 1e-12;

namespace detail {

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double sum(std::span<const double> xs) noexcept {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

/// x ln x with the continuous extension 0 ln 0 = 0.
inline double xlogx(double x) noexcept { return x > 0.0 ? x * std::log(x) : 0.0; }

inline void require_finite(std::span<const double> xs, const char* what) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) {
      throw DomainError(std::string(what) + "[" + std::to_string(i) + "] is not finite");
    }
  }
}

}  // namespace detail

/// Weighted sample of the loss functional under the nominal measure.
class LossSample {
 public:
  LossSample(std::vector<double> losses, std::vector<double> probs)
      : losses_(std::move(losses)), probs_(std::move(probs)) {
    if (losses_.size() != probs_.size()) {
      throw DimensionError("LossSample: " + std::to_string(losses_.size()) + " losses but " +
                           std::to_string(probs_.size()) + " probabilities");
    }
    if (losses_.empty()) throw DimensionError("LossSample: empty sample");
    detail::require_finite(losses_, "LossSample loss");
    detail::require_finite(probs_, "LossSample prob");
    for (double p : probs_) {
      if (p < 0.0) throw DomainError("LossSample: negative probability");
    }
    const double total = detail::sum(probs_);
    if (std::abs(total - 1.0) > kNormTolerance) {
      throw DomainError("LossSample: probabilities sum to " + std::to_string(total) +
                        ", expected 1");
    }
  }

  /// Equal weights 1/n.
  static LossSample uniform(std::vector<double> losses) {
    const std::size_t n = losses.size();
    if (n == 0) throw DimensionError("LossSample: empty sample");
    return LossSample(std::move(losses), std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  /// Rescales nonnegative weights to sum to one before validating.
  static LossSample normalized(std::vector<double> losses, std::vector<double> weights) {
    const double total = detail::sum(weights);
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw DomainError("LossSample: weights must have a positive finite sum");
    }
    for (double& w : weights) w /= total;
    return LossSample(std::move(losses), std::move(weights));
  }

  std::size_t size() const noexcept { return losses_.size(); }
  std::span<const double> losses() const noexcept { return losses_; }
  std::span<const double> probs() const noexcept { return probs_; }

  double min_loss() const noexcept {
    double v = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < size(); ++j) {
      if (probs_[j] > 0.0) v = std::min(v, losses_[j]);
    }
    return v;
  }
  double max_loss() const noexcept {
    double v = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < size(); ++j) {
      if (probs_[j] > 0.0) v = std::max(v, losses_[j]);
    }
    return v;
  }

 private:
  std::vector<double> losses_;
  std::vector<double> probs_;
};

/// Radon-Nikodym weights m_j = dQ/dP at each sample point.
class MeasureChange {
 public:
  MeasureChange(std::vector<double> weights, const LossSample& s) : m_(std::move(weights)) {
    if (m_.size() != s.size()) {
      throw DimensionError("MeasureChange: " + std::to_string(m_.size()) +
                           " weights for a sample of size " + std::to_string(s.size()));
    }
    detail::require_finite(m_, "MeasureChange weight");
    for (double m : m_) {
      if (m < 0.0) throw DomainError("MeasureChange: negative Radon-Nikodym weight");
    }
    detail::CompensatedSum total;
    for (std::size_t j = 0; j < m_.size(); ++j) total.add(s.probs()[j] * m_[j]);
    if (std::abs(total.value() - 1.0) > kNormTolerance) {
      throw DomainError("MeasureChange: E_P[m] = " + std::to_string(total.value()) +
                        ", expected 1");
    }
  }

  static MeasureChange identity(const LossSample& s) {
    return MeasureChange(std::vector<double>(s.size(), 1.0), s);
  }

  std::size_t size() const noexcept { return m_.size(); }
  std::span<const double> weights() const noexcept { return m_; }

 private:
  std::vector<double> m_;
};

/// Energy levels (strictly increasing) with densities of states and occupations.
class DiscreteEnsemble {
 public:
  DiscreteEnsemble(std::vector<double> energies, std::vector<double> densities,
                   std::vector<double> occupations)
      : energies_(std::move(energies)),
        densities_(std::move(densities)),
        occupations_(std::move(occupations)) {
    const std::size_t n = energies_.size();
    if (n == 0 || densities_.size() != n || occupations_.size() != n) {
      throw DimensionError("DiscreteEnsemble: energies, densities and occupations must be "
                           "non-empty and of equal length");
    }
    detail::require_finite(energies_, "DiscreteEnsemble energy");
    detail::require_finite(densities_, "DiscreteEnsemble density");
    detail::require_finite(occupations_, "DiscreteEnsemble occupation");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(densities_[i] > 0.0)) throw DomainError("DiscreteEnsemble: density must be > 0");
      if (occupations_[i] < 0.0) throw DomainError("DiscreteEnsemble: negative occupation");
      if (i > 0 && !(energies_[i] > energies_[i - 1])) {
        throw DomainError("DiscreteEnsemble: energies must be strictly increasing");
      }
    }
    detail::CompensatedSum mass;
    for (std::size_t i = 0; i < n; ++i) mass.add(densities_[i] * occupations_[i]);
    normalized_ = std::abs(mass.value() - 1.0) <= kNormTolerance;
  }

  std::size_t size() const noexcept { return energies_.size(); }
  std::span<const double> energies() const noexcept { return energies_; }
  std::span<const double> densities() const noexcept { return densities_; }
  std::span<const double> occupations() const noexcept { return occupations_; }
  bool normalized() const noexcept { return normalized_; }

  /// Sum_i n_i f_i.
  double particle_number() const noexcept {
    detail::CompensatedSum acc;
    for (std::size_t i = 0; i < size(); ++i) acc.add(densities_[i] * occupations_[i]);
    return acc.value();
  }

  /// Sum_i n_i f_i eps_i.
  double total_energy() const noexcept {
    detail::CompensatedSum acc;
    for (std::size_t i = 0; i < size(); ++i) {
      acc.add(densities_[i] * occupations_[i] * energies_[i]);
    }
    return acc.value();
  }

  /// Same levels, occupations rescaled so that Sum n f = 1.
  DiscreteEnsemble normalized_copy() const {
    const double mass = particle_number();
    if (!(mass > 0.0)) throw StateError("DiscreteEnsemble: zero total occupation");
    std::vector<double> f(occupations_.begin(), occupations_.end());
    for (double& x : f) x /= mass;
    return DiscreteEnsemble(energies_, densities_, std::move(f));
  }

 private:
  std::vector<double> energies_;
  std::vector<double> densities_;
  std::vector<double> occupations_;
  bool normalized_ = false;
};

/// E_P[l].
inline double expected_loss(const LossSample& s) {
  detail::CompensatedSum acc;
  for (std::size_t j = 0; j < s.size(); ++j) acc.add(s.probs()[j] * s.losses()[j]);
  return acc.value();
}

/// E_Q[l] = Sum_j p_j m_j l_j.
inline double expected_loss(const LossSample& s, const MeasureChange& m) {
  if (m.size() != s.size()) throw DimensionError("expected_loss: size mismatch");
  detail::CompensatedSum acc;
  for (std::size_t j = 0; j < s.size(); ++j) {
    acc.add(s.probs()[j] * m.weights()[j] * s.losses()[j]);
  }
  return acc.value();
}

inline double expected_loss(const LossSample& s, const std::optional<MeasureChange>& m) {
  return m ? expected_loss(s, *m) : expected_loss(s);
}

/// D(Q || P) = E_P[m ln m], in nats.
inline double relative_entropy(const MeasureChange& m, const LossSample& s) {
  if (m.size() != s.size()) throw DimensionError("relative_entropy: size mismatch");
  detail::CompensatedSum acc;
  for (std::size_t j = 0; j < s.size(); ++j) {
    acc.add(s.probs()[j] * detail::xlogx(m.weights()[j]));
  }
  // Gibbs' inequality; anything below zero is rounding.
  return std::max(0.0, acc.value());
}

/// S = -Sum_i n_i f_i ln f_i of a normalized ensemble.
inline double shannon_entropy(const DiscreteEnsemble& e) {
  if (!e.normalized()) throw StateError("shannon_entropy: ensemble is not normalized");
  detail::CompensatedSum acc;
  for (std::size_t i = 0; i < e.size(); ++i) {
    acc.add(-e.densities()[i] * detail::xlogx(e.occupations()[i]));
  }
  return acc.value();
}

/// Loss sample -> ensemble with eps = -l. Equal losses are merged into one
/// level whose density is their total probability. Occupations come from the
/// measure change (probability-weighted mean within a merged level), or are
/// identically 1 for the nominal measure. Points with zero probability are
/// dropped since a density of states must be positive.
inline DiscreteEnsemble to_ensemble(const LossSample& s,
                                    const std::optional<MeasureChange>& m = std::nullopt) {
  if (m && m->size() != s.size()) throw DimensionError("to_ensemble: size mismatch");
  struct Acc {
    detail::CompensatedSum p;
    detail::CompensatedSum pm;
  };
  std::map<double, Acc> by_energy;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double p = s.probs()[j];
    if (p == 0.0) continue;
    auto& acc = by_energy[-s.losses()[j]];
    acc.p.add(p);
    acc.pm.add(p * (m ? m->weights()[j] : 1.0));
  }
  std::vector<double> eps, n, f;
  eps.reserve(by_energy.size());
  n.reserve(by_energy.size());
  f.reserve(by_energy.size());
  for (const auto& [energy, acc] : by_energy) {
    eps.push_back(energy);
    n.push_back(acc.p.value());
    f.push_back(acc.pm.value() / acc.p.value());
  }
  return DiscreteEnsemble(std::move(eps), std::move(n), std::move(f));
}

/// Ensemble -> loss sample with l = -eps and p_i = n_i / Sum n. Losses come
/// out in descending order.
inline LossSample to_sample(const DiscreteEnsemble& e) {
  const std::size_t n = e.size();
  std::vector<double> losses(n), weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    losses[i] = -e.energies()[i];
    weights[i] = e.densities()[i];
  }
  return LossSample::normalized(std::move(losses), std::move(weights));
}

/// Occupations of a normalized ensemble as Radon-Nikodym weights against
/// to_sample(e): m_i = f_i Sum n.
inline MeasureChange to_measure_change(const DiscreteEnsemble& e) {
  if (!e.normalized()) throw StateError("to_measure_change: ensemble is not normalized");
  const double mass = detail::sum(e.densities());
  std::vector<double> m(e.occupations().begin(), e.occupations().end());
  for (double& x : m) x *= mass;
  return MeasureChange(std::move(m), to_sample(e));
}

}  // namespace entrisk
