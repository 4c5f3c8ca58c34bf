#pragma once

// Reference values and fits used by the experiment harness.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace ticc {

/// Exact ground-state energy per site of -J sum ZZ - h sum X:
/// -(1/pi) int_0^pi sqrt(J^2 + h^2 - 2 J h cos k) dk.
inline double tfimExactEnergy(double J, double h) {
  auto f = [J, h](double k) { return std::sqrt(std::max(0.0, J * J + h * h - 2.0 * J * h * std::cos(k))); };
  double err = 0.0;
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, std::numbers::pi, 15, 1e-15, &err);
  return -integral / std::numbers::pi;
}

struct DecayFit {
  double alpha = 0.0;  // value ~ exp(-alpha L)
  double intercept = 0.0;
  double mse = 0.0;    // mean squared residual of log(value)
  int points = 0;
};

/// Least-squares fit of log(value) against L over points with L >= lMin.
inline DecayFit fitDecay(const std::vector<std::pair<double, double>>& series, double lMin = 0.0) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [l, v] : series) {
    if (l < lMin) continue;
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("fitDecay: values must be positive and finite");
    pts.emplace_back(l, std::log(v));
  }
  if (pts.size() < 2) throw ValidationError("fitDecay: need at least two points with L >= Lmin");
  const double n = static_cast<double>(pts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw ValidationError("fitDecay: all points share the same L");
  const double slope = (n * sxy - sx * sy) / den;
  const double icpt = (sy - slope * sx) / n;
  double mse = 0.0;
  for (const auto& [x, y] : pts) mse += (y - icpt - slope * x) * (y - icpt - slope * x) / n;
  return {-slope, icpt, mse, static_cast<int>(pts.size())};
}

}  // namespace ticc
