#pragma once

// Restarted Arnoldi iteration for the largest-magnitude eigenpair of a
// matrix-free linear operator.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "errors.hpp"

namespace ticc {

struct ArnoldiOptions {
  int krylovDim = 30;
  int maxRestarts = 40;
  double tol = 1e-12;
  std::uint64_t seed = 0x5eedULL;  // cold-start vector stream
};

struct EigenResult {
  std::complex<double> value;
  Eigen::VectorXcd vector;  // unit norm
  double residual = 0.0;    // ||A v - value v||
  int iterations = 0;       // operator applications
  bool degenerate = false;  // second Ritz value within 1e-10 in magnitude
};

using LinearMap = std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>;

namespace detail {

inline Eigen::VectorXcd randomUnitVector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = {g(rng), g(rng)};
  return v / v.norm();
}

}  // namespace detail

/// Largest-magnitude eigenpair of `apply` (dimension n). A supplied warm start
/// replaces the random initial vector; convergence is checked after every
/// Krylov step so a good warm start terminates early.
inline EigenResult leadingEigenpair(const LinearMap& apply, Eigen::Index n,
                                    const Eigen::VectorXcd* warmStart = nullptr,
                                    const ArnoldiOptions& opts = {}) {
  using Eigen::Index;
  using Eigen::MatrixXcd;
  using Eigen::VectorXcd;
  if (n < 1) throw ValidationError("leadingEigenpair: dimension must be >= 1");
  if (!(opts.tol > 0.0)) throw ValidationError("leadingEigenpair: tol must be positive");

  VectorXcd v;
  if (warmStart != nullptr && warmStart->size() == n && warmStart->norm() > 0.0 &&
      warmStart->allFinite()) {
    v = *warmStart / warmStart->norm();
  } else {
    v = detail::randomUnitVector(n, opts.seed);
  }

  EigenResult res;
  const Index m = std::max<Index>(1, std::min<Index>(opts.krylovDim, n));
  MatrixXcd V(n, m + 1);
  MatrixXcd H = MatrixXcd::Zero(m + 1, m);
  VectorXcd w(n), av(n);
  double bestResidual = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart <= opts.maxRestarts; ++restart) {
    V.col(0) = v;
    H.setZero();
    Index used = 0;
    std::complex<double> ritz{0.0, 0.0};
    VectorXcd y;
    bool degenerate = false;

    for (Index j = 0; j < m; ++j) {
      apply(V.col(j), w);
      ++res.iterations;
      if (!w.allFinite()) throw NumericalError("leadingEigenpair: operator produced non-finite values");
      // Modified Gram-Schmidt, applied twice.
      for (int pass = 0; pass < 2; ++pass) {
        for (Index i = 0; i <= j; ++i) {
          const std::complex<double> c = V.col(i).dot(w);
          H(i, j) += c;
          w -= c * V.col(i);
        }
      }
      const double beta = w.norm();
      H(j + 1, j) = beta;
      used = j + 1;

      Eigen::ComplexEigenSolver<MatrixXcd> es(H.topLeftCorner(used, used));
      const auto& vals = es.eigenvalues();
      Index best = 0;
      for (Index i = 1; i < vals.size(); ++i)
        if (std::abs(vals[i]) > std::abs(vals[best])) best = i;
      ritz = vals[best];
      y = es.eigenvectors().col(best);
      y /= y.norm();
      degenerate = false;
      for (Index i = 0; i < vals.size(); ++i)
        if (i != best && std::abs(std::abs(vals[best]) - std::abs(vals[i])) < 1e-10)
          degenerate = true;

      const double hnorm = H.topLeftCorner(used + 1, used).norm();
      const double estimate = beta * std::abs(y[used - 1]);
      const bool breakdown = beta <= 1e-14 * std::max(1.0, hnorm);
      if (estimate <= 0.5 * opts.tol || breakdown || used == m) break;
      V.col(j + 1) = w / beta;
    }

    v = V.leftCols(used) * y;
    v /= v.norm();
    apply(v, av);
    ++res.iterations;
    const double trueResidual = (av - ritz * v).norm();
    bestResidual = std::min(bestResidual, trueResidual);
    if (trueResidual <= opts.tol) {
      res.value = ritz;
      res.vector = v;
      res.residual = trueResidual;
      res.degenerate = degenerate;
      return res;
    }
    // Out of Krylov space, or rounding left the true residual above tol:
    // restart from the Ritz vector.
  }
  std::ostringstream os;
  os << "leadingEigenpair: no convergence after " << opts.maxRestarts
     << " restarts (dimension " << n << ", best residual " << bestResidual << ")";
  throw EigensolverError(os.str(), bestResidual);
}

}  // namespace ticc
