#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "entrisk/error.hpp"

namespace entrisk {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(std::size_t order) : nodes(order), weights(order) {
    if (order == 0) throw DomainError("GaussLegendre: order must be positive");
    const std::size_t half = (order + 1) / 2;
    const double n = static_cast<double>(order);
    for (std::size_t i = 0; i < half; ++i) {
      // Tricomi initial guess, then Newton on P_n.
      double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
      double dp = 1.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t k = 2; k <= order; ++k) {
          const double kk = static_cast<double>(k);
          const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = -x;
      nodes[order - 1 - i] = x;
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      weights[i] = w;
      weights[order - 1 - i] = w;
    }
  }
};

/// Composite Gauss-Legendre: `panels` equal sub-intervals of [a, b], each
/// integrated with `rule`.
template <typename F>
double integrate_composite(F&& f, double a, double b, std::size_t panels,
                           const GaussLegendre& rule) {
  const double h = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double mid = lo + 0.5 * h;
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      acc += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
    }
    total += 0.5 * h * acc;
  }
  return total;
}

}  // namespace entrisk
