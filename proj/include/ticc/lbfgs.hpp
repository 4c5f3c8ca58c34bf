#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (bracketing followed by
// cubic-interpolation zoom). The objective may return +inf to reject a trial
// point; the line search then shrinks the step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>

#include "errors.hpp"

namespace ticc {

struct LbfgsOptions {
  int memory = 10;
  int maxIter = 2000;
  double gradTol = 1e-9;   // stop when ||g||_2 <= gradTol
  double costTol = 1e-12;  // stop when |f_k - f_{k+1}| <= costTol
  double c1 = 1e-4;
  double c2 = 0.9;
  int maxLineSearch = 25;
  double maxStep = 1e10;
};

/// Returns f(x) and writes the gradient; may return +inf for rejected points.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsIterate {
  int iteration = 0;
  double f = 0.0;
  double gradNorm = 0.0;
  double step = 0.0;
  int evaluations = 0;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  int evaluations = 0;
  bool lineSearchFailed = false;
  std::string stopReason;
};

namespace detail {

/// Minimizer of the cubic through (a, fa, ga), (b, fb, gb), clamped to the
/// interior of [a, b]; falls back to bisection when the cubic is degenerate.
inline double cubicMinimizer(double a, double fa, double ga, double b, double fb, double gb) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  double t = 0.5 * (a + b);
  if (disc >= 0.0 && std::isfinite(disc)) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double den = gb - ga + 2.0 * d2;
    if (den != 0.0) t = b - (b - a) * (gb + d2 - d1) / den;
  }
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
  return t;
}

struct LinePoint {
  double alpha = 0.0;
  double f = 0.0;
  double g = 0.0;  // directional derivative
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

}  // namespace detail

/// Minimizes `f` from x0. Iterations count accepted steps; the callback (if
/// any) sees every accepted iterate, starting with x0 as iteration 0.
inline LbfgsResult lbfgs(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& opts = {},
                         const std::function<void(const LbfgsIterate&, const Eigen::VectorXd&)>& callback = {}) {
  if (opts.memory < 1) throw ValidationError("lbfgs: memory must be >= 1");
  if (!(opts.c1 > 0.0 && opts.c1 < opts.c2 && opts.c2 < 1.0))
    throw ValidationError("lbfgs: need 0 < c1 < c2 < 1");

  LbfgsResult res;
  res.x = std::move(x0);
  res.grad.resize(res.x.size());
  res.f = f(res.x, res.grad);
  res.evaluations = 1;
  if (!std::isfinite(res.f)) throw ValidationError("lbfgs: objective is not finite at the starting point");
  if (callback) callback({0, res.f, res.grad.norm(), 0.0, res.evaluations}, res.x);
  if (res.x.size() == 0) {
    res.stopReason = "no parameters";
    return res;
  }

  std::deque<Eigen::VectorXd> sHist, yHist;
  std::deque<double> rhoHist;
  bool restarted = false;

  for (int it = 1; it <= opts.maxIter; ++it) {
    const double gnorm = res.grad.norm();
    if (gnorm <= opts.gradTol) {
      res.stopReason = "gradient tolerance";
      return res;
    }

    // Two-loop recursion.
    Eigen::VectorXd q = res.grad;
    std::vector<double> alphas(sHist.size());
    for (std::size_t i = sHist.size(); i-- > 0;) {
      alphas[i] = rhoHist[i] * sHist[i].dot(q);
      q -= alphas[i] * yHist[i];
    }
    if (!sHist.empty()) q *= sHist.back().dot(yHist.back()) / yHist.back().squaredNorm();
    for (std::size_t i = 0; i < sHist.size(); ++i) {
      const double beta = rhoHist[i] * yHist[i].dot(q);
      q += (alphas[i] - beta) * sHist[i];
    }
    Eigen::VectorXd dir = -q;
    double dg0 = dir.dot(res.grad);
    if (!(dg0 < 0.0)) {
      dir = -res.grad;
      dg0 = -gnorm * gnorm;
      sHist.clear();
      yHist.clear();
      rhoHist.clear();
    }
    double alpha = sHist.empty() ? std::min(1.0, 1.0 / dir.norm()) : 1.0;

    // Strong-Wolfe search.
    auto eval = [&](double a) {
      detail::LinePoint p;
      p.alpha = a;
      p.x = res.x + a * dir;
      p.grad.resize(res.x.size());
      p.f = f(p.x, p.grad);
      ++res.evaluations;
      p.g = std::isfinite(p.f) ? p.grad.dot(dir) : std::numeric_limits<double>::quiet_NaN();
      return p;
    };
    const double f0 = res.f;
    detail::LinePoint prev{0.0, f0, dg0, res.x, res.grad};
    detail::LinePoint accepted;
    bool found = false;
    int evals = 0;

    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) {
      while (evals < opts.maxLineSearch) {
        double a;
        if (std::isfinite(hi.f))
          a = detail::cubicMinimizer(lo.alpha, lo.f, lo.g, hi.alpha, hi.f, hi.g);
        else
          a = 0.5 * (lo.alpha + hi.alpha);
        detail::LinePoint p = eval(a);
        ++evals;
        if (!std::isfinite(p.f) || p.f > f0 + opts.c1 * a * dg0 || p.f >= lo.f) {
          hi = std::move(p);
        } else {
          if (std::abs(p.g) <= -opts.c2 * dg0) {
            accepted = std::move(p);
            found = true;
            return;
          }
          if (p.g * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
          lo = std::move(p);
        }
        if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, lo.alpha)) break;
      }
      // Fall back to the best sufficient-decrease point seen.
      if (lo.alpha > 0.0 && lo.f < f0) {
        accepted = std::move(lo);
        found = true;
      }
    };

    while (evals < opts.maxLineSearch) {
      detail::LinePoint p = eval(alpha);
      ++evals;
      if (!std::isfinite(p.f) || p.f > f0 + opts.c1 * alpha * dg0 || (prev.alpha > 0.0 && p.f >= prev.f)) {
        zoom(prev, std::move(p));
        break;
      }
      if (std::abs(p.g) <= -opts.c2 * dg0) {
        accepted = std::move(p);
        found = true;
        break;
      }
      if (p.g >= 0.0) {
        zoom(std::move(p), prev);
        break;
      }
      prev = std::move(p);
      alpha = std::min(2.0 * alpha, opts.maxStep);
    }

    if (!found) {
      if (!restarted && !sHist.empty()) {
        // Drop curvature history and retry along steepest descent.
        sHist.clear();
        yHist.clear();
        rhoHist.clear();
        restarted = true;
        --it;
        continue;
      }
      res.lineSearchFailed = true;
      res.iterations = it - 1;
      res.stopReason = "line search failed";
      return res;
    }
    restarted = false;

    Eigen::VectorXd s = accepted.x - res.x;
    Eigen::VectorXd y = accepted.grad - res.grad;
    const double sy = s.dot(y);
    const double fPrev = res.f;
    res.x = std::move(accepted.x);
    res.grad = std::move(accepted.grad);
    res.f = accepted.f;
    res.iterations = it;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      sHist.push_back(std::move(s));
      yHist.push_back(std::move(y));
      rhoHist.push_back(1.0 / sy);
      if (static_cast<int>(sHist.size()) > opts.memory) {
        sHist.pop_front();
        yHist.pop_front();
        rhoHist.pop_front();
      }
    }
    if (callback) callback({it, res.f, res.grad.norm(), accepted.alpha, res.evaluations}, res.x);
    if (std::abs(fPrev - res.f) <= opts.costTol) {
      res.stopReason = "cost tolerance";
      return res;
    }
  }
  res.stopReason = "max iterations";
  return res;
}

}  // namespace ticc
