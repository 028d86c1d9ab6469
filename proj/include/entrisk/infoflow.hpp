#pragma once

// Information arriving from conditioning variables Y_1..Y_n reduces the
// entropy of X by I(X;Y_1) + I(X;Y_2|Y_1) + ...; the accumulated reduction
// int_0^T I(t) dt is read as the relative-entropy budget over horizon T.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "entrisk/core_ensemble.hpp"
#include "entrisk/error.hpp"
#include "entrisk/tilt.hpp"

namespace entrisk {

inline constexpr std::size_t kMaxConditioning = 8;
inline constexpr std::size_t kMaxJointCells = std::size_t{1} << 24;

/// Joint pmf of (X, Y_1, ..., Y_n) stored row-major with X the slowest index.
class JointPmf {
 public:
  JointPmf(std::vector<std::size_t> dims, std::vector<double> probs)
      : dims_(std::move(dims)), probs_(std::move(probs)) {
    if (dims_.size() < 2) throw DimensionError("JointPmf: need X and at least one Y");
    if (dims_.size() - 1 > kMaxConditioning) {
      throw DimensionError("JointPmf: at most " + std::to_string(kMaxConditioning) +
                           " conditioning variables");
    }
    std::size_t cells = 1;
    for (std::size_t d : dims_) {
      if (d == 0) throw DimensionError("JointPmf: empty alphabet");
      if (cells > kMaxJointCells / d) throw DimensionError("JointPmf: too many cells");
      cells *= d;
    }
    if (probs_.size() != cells) {
      throw DimensionError("JointPmf: expected " + std::to_string(cells) + " cells, got " +
                           std::to_string(probs_.size()));
    }
    detail::require_finite(probs_, "JointPmf probability");
    for (double p : probs_) {
      if (p < 0.0) throw DomainError("JointPmf: negative probability");
    }
    const double total = detail::sum(probs_);
    if (std::abs(total - 1.0) > kNormTolerance) {
      throw DomainError("JointPmf: probabilities sum to " + std::to_string(total));
    }
  }

  std::size_t conditioning_count() const noexcept { return dims_.size() - 1; }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::span<const double> probs() const noexcept { return probs_; }

  /// Marginal over the variables whose flag is set (0 = X, i = Y_i), in the
  /// original order.
  std::vector<double> marginal(const std::vector<bool>& keep) const {
    std::size_t out_cells = 1;
    for (std::size_t v = 0; v < dims_.size(); ++v) {
      if (keep[v]) out_cells *= dims_[v];
    }
    std::vector<double> out(out_cells, 0.0);
    std::vector<std::size_t> idx(dims_.size(), 0);
    for (std::size_t c = 0; c < probs_.size(); ++c) {
      std::size_t o = 0;
      for (std::size_t v = 0; v < dims_.size(); ++v) {
        if (keep[v]) o = o * dims_[v] + idx[v];
      }
      out[o] += probs_[c];
      for (std::size_t v = dims_.size(); v-- > 0;) {
        if (++idx[v] < dims_[v]) break;
        idx[v] = 0;
      }
    }
    return out;
  }

  /// Same distribution with the conditioning variables reordered:
  /// new Y_{r+1} = old Y_{order[r]+1}.
  JointPmf permuted(const std::vector<std::size_t>& order) const {
    const std::size_t n = conditioning_count();
    if (order.size() != n) throw DimensionError("JointPmf::permuted: wrong order length");
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t r = 0; r < n; ++r) {
      if (sorted[r] != r) throw DomainError("JointPmf::permuted: not a permutation");
    }
    std::vector<std::size_t> new_dims{dims_[0]};
    for (std::size_t r = 0; r < n; ++r) new_dims.push_back(dims_[order[r] + 1]);
    std::vector<double> out(probs_.size());
    std::vector<std::size_t> idx(dims_.size(), 0);
    for (std::size_t c = 0; c < probs_.size(); ++c) {
      std::size_t o = idx[0];
      for (std::size_t r = 0; r < n; ++r) o = o * new_dims[r + 1] + idx[order[r] + 1];
      out[o] = probs_[c];
      for (std::size_t v = dims_.size(); v-- > 0;) {
        if (++idx[v] < dims_[v]) break;
        idx[v] = 0;
      }
    }
    return JointPmf(std::move(new_dims), std::move(out));
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> probs_;
};

/// Shannon entropy in nats of a flat pmf.
inline double entropy_nats(std::span<const double> p) {
  detail::CompensatedSum acc;
  for (double x : p) acc.add(-detail::xlogx(x));
  return acc.value();
}

struct EntropyChain {
  double h_x = 0.0;
  double h_x_given_all = 0.0;
  /// terms[i] = I(X; Y_{i+1} | Y_1..Y_i).
  std::vector<double> terms;
};

/// Chain-rule decomposition of H(X | Y_1..Y_n).
///
/// Each term is evaluated from its own log-ratio,
///   I(X;Y_i|Y_<i) = Sum p(x,y_<=i) ln[p(x,y_<=i) p(y_<i) / (p(x,y_<i) p(y_<=i))],
/// rather than as a difference of entropies, so every term is a KL divergence
/// and comes out nonnegative.
inline EntropyChain conditional_entropy_chain(const JointPmf& j) {
  const auto& dims = j.dims();
  const std::size_t nv = dims.size();
  const std::size_t dx = dims[0];
  EntropyChain out;

  std::vector<bool> keep(nv, false);
  keep[0] = true;
  out.h_x = entropy_nats(j.marginal(keep));

  // p(x, y_<i) and p(y_<i), starting from i = 1 (nothing conditioned on).
  std::vector<double> p_xprev = j.marginal(keep);
  std::vector<double> p_prev{1.0};
  detail::CompensatedSum total;
  for (std::size_t i = 1; i < nv; ++i) {
    std::vector<bool> kx(nv, false), ky(nv, false);
    for (std::size_t v = 0; v <= i; ++v) kx[v] = true;
    for (std::size_t v = 1; v <= i; ++v) ky[v] = true;
    const std::vector<double> p_xcur = j.marginal(kx);  // (x, y_1..y_i)
    const std::vector<double> p_cur = j.marginal(ky);   // (y_1..y_i)
    const std::size_t d_prev = p_prev.size();
    const std::size_t di = dims[i];

    detail::CompensatedSum term;
    for (std::size_t x = 0; x < dx; ++x) {
      for (std::size_t yp = 0; yp < d_prev; ++yp) {
        for (std::size_t yi = 0; yi < di; ++yi) {
          const std::size_t yc = yp * di + yi;
          const double pxc = p_xcur[x * d_prev * di + yc];
          if (pxc <= 0.0) continue;
          const double num = pxc * p_prev[yp];
          const double den = p_xprev[x * d_prev + yp] * p_cur[yc];
          term.add(pxc * std::log(num / den));
        }
      }
    }
    const double t = std::max(0.0, term.value());
    out.terms.push_back(t);
    total.add(t);
    p_xprev = p_xcur;
    p_prev = p_cur;
  }
  out.h_x_given_all = out.h_x - total.value();
  return out;
}

/// H(X | Y_1..Y_n) = H(X, Y) - H(Y), computed straight from the joint.
inline double conditional_entropy_direct(const JointPmf& j) {
  std::vector<bool> ky(j.dims().size(), true);
  ky[0] = false;
  return entropy_nats(j.probs()) - entropy_nats(j.marginal(ky));
}

/// Piecewise-constant information rate I(t) >= 0 in nats per unit time.
struct InfoSchedule {
  std::vector<double> knots;  // 0 = t_0 < ... < t_k = T_max
  std::vector<double> rates;  // rate on [t_i, t_{i+1})

  static InfoSchedule constant(double rate, double t_max) { return {{0.0, t_max}, {rate}}; }

  void validate() const {
    if (knots.size() < 2 || rates.size() + 1 != knots.size()) {
      throw DimensionError("InfoSchedule: need k+1 knots for k rates");
    }
    if (knots.front() != 0.0) throw DomainError("InfoSchedule: first knot must be 0");
    for (std::size_t i = 0; i < rates.size(); ++i) {
      if (!(rates[i] >= 0.0) || !std::isfinite(rates[i])) {
        throw DomainError("InfoSchedule: rates must be finite and >= 0");
      }
      if (!(knots[i + 1] > knots[i])) {
        throw DomainError("InfoSchedule: knots must be strictly increasing");
      }
    }
  }

  double t_max() const noexcept { return knots.back(); }
};

/// eta(T) = int_0^T I(t) dt.
inline double entropy_budget(const InfoSchedule& sched, double horizon) {
  sched.validate();
  if (!(horizon >= 0.0)) throw RangeError("entropy_budget: horizon must be >= 0");
  if (horizon > sched.t_max()) {
    throw RangeError("entropy_budget: horizon " + std::to_string(horizon) +
                     " beyond schedule end " + std::to_string(sched.t_max()));
  }
  detail::CompensatedSum acc;
  for (std::size_t i = 0; i < sched.rates.size(); ++i) {
    const double hi = std::min(horizon, sched.knots[i + 1]);
    if (hi > sched.knots[i]) acc.add(sched.rates[i] * (hi - sched.knots[i]));
  }
  return acc.value();
}

struct HorizonRow {
  double horizon = 0.0;
  double eta = 0.0;
  double theta = 0.0;
  double v_star = 0.0;
};

/// Budget, multiplier and worst-case risk at each horizon.
inline std::vector<HorizonRow> risk_horizon_curve(const LossSample& s, const InfoSchedule& sched,
                                                  std::span<const double> horizons) {
  std::vector<HorizonRow> out;
  out.reserve(horizons.size());
  for (double t : horizons) {
    const double eta = entropy_budget(sched, t);
    double theta = 0.0;
    try {
      theta = solve_theta_for_budget(s, eta);
    } catch (const RangeError& e) {
      throw RangeError("risk_horizon_curve: horizon " + std::to_string(t) + ": " + e.what());
    }
    out.push_back({t, eta, theta, tilt_at(s, theta).v_star});
  }
  return out;
}

}  // namespace entrisk
