#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "entrisk/error.hpp"

namespace entrisk {

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Root of a nondecreasing function on a bracket [lo, hi] with f(lo) <= 0 <= f(hi).
///
/// Each iteration tries a secant step through the bracket endpoints and falls
/// back to bisection whenever the secant point lands outside the middle 90% of
/// the bracket or the previous step shrank the bracket by less than half. The
/// bracket therefore always contracts geometrically, so the iteration cap is a
/// hard guarantee rather than a hope.
template <typename F>
RootResult find_root_monotone(F&& f, double lo, double hi, double f_tol, double x_tol = 0.0,
                              int max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (!(flo <= 0.0 && fhi >= 0.0)) {
    throw RangeError("find_root_monotone: bracket [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "] does not straddle the root");
  }
  if (std::abs(flo) <= f_tol) return {lo, flo, 0, true};
  if (std::abs(fhi) <= f_tol) return {hi, fhi, 0, true};

  double prev_width = std::numeric_limits<double>::infinity();
  RootResult out;
  for (int it = 1; it <= max_iter; ++it) {
    const double width = hi - lo;
    double x = 0.5 * (lo + hi);
    if (width < 0.5 * prev_width && fhi != flo) {
      const double s = lo - flo * (hi - lo) / (fhi - flo);
      if (s > lo + 0.05 * width && s < hi - 0.05 * width) x = s;
    }
    prev_width = width;

    const double fx = f(x);
    out = {x, fx, it, false};
    if (std::abs(fx) <= f_tol) {
      out.converged = true;
      return out;
    }
    if (fx < 0.0) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
      fhi = fx;
    }
    if (hi - lo <= x_tol || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x)) {
      out.x = std::abs(flo) < std::abs(fhi) ? lo : hi;
      out.fx = std::abs(flo) < std::abs(fhi) ? flo : fhi;
      out.converged = std::abs(out.fx) <= f_tol || x_tol > 0.0;
      return out;
    }
  }
  return out;
}

/// Doubles `hi` from `start` until f(hi) >= 0. Throws RangeError after
/// `max_doublings` attempts.
template <typename F>
double expand_upper_bracket(F&& f, double start, int max_doublings = 1100) {
  double hi = start;
  for (int i = 0; i < max_doublings; ++i) {
    if (f(hi) >= 0.0) return hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) break;
  }
  throw RangeError("expand_upper_bracket: no sign change found");
}

}  // namespace entrisk
