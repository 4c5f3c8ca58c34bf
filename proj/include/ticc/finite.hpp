#pragma once

// Periodic finite chains: statevectors, translation-invariant layers with
// wrap-around, reference evolution and the finite-size local infidelity.
//
// Qubit j is bit j of the amplitude index. A parity-0 layer acts on pairs
// (2r, 2r+1); a parity-1 layer on (2r+1, 2r+2 mod n), so the last one wraps
// around to (n-1, 0). In each pair the first qubit is the gate's left qubit.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "gates.hpp"
#include "models.hpp"
#include "tensor.hpp"

namespace ticc {

inline constexpr int kMaxQubits = 30;

struct StateVector {
  int n = 0;
  Eigen::VectorXcd amp;

  static StateVector basis(int n, std::uint64_t index) {
    checkQubits(n);
    StateVector v{n, Eigen::VectorXcd::Zero(Eigen::Index(1) << n)};
    v.amp[static_cast<Eigen::Index>(index)] = 1.0;
    return v;
  }

  static void checkQubits(int n) {
    if (n < 2 || n % 2 != 0)
      throw ConfigError("n", "qubit count must be even and >= 2 (got " + std::to_string(n) + ")");
    if (n > kMaxQubits) throw ConfigError("n", "qubit count above " + std::to_string(kMaxQubits));
  }
};

/// Haar-random state from normalized i.i.d. complex Gaussian amplitudes.
inline StateVector haarState(int n, std::uint64_t seed) {
  StateVector::checkQubits(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  StateVector v{n, Eigen::VectorXcd(Eigen::Index(1) << n)};
  for (Eigen::Index i = 0; i < v.amp.size(); ++i) v.amp[i] = {g(rng), g(rng)};
  v.amp.normalize();
  return v;
}

/// In place: apply a 4x4 matrix to qubits (left, right).
inline void applyTwoQubit(StateVector& v, const Eigen::Matrix4cd& g, int left, int right) {
  const std::uint64_t ml = std::uint64_t{1} << left, mr = std::uint64_t{1} << right;
  const auto dim = static_cast<std::uint64_t>(v.amp.size());
  cplx* a = v.amp.data();
  for (std::uint64_t i = 0; i < dim; ++i) {
    if (i & (ml | mr)) continue;
    const std::uint64_t idx[4] = {i, i | mr, i | ml, i | ml | mr};
    const cplx x0 = a[idx[0]], x1 = a[idx[1]], x2 = a[idx[2]], x3 = a[idx[3]];
    for (int r = 0; r < 4; ++r) a[idx[r]] = g(r, 0) * x0 + g(r, 1) * x1 + g(r, 2) * x2 + g(r, 3) * x3;
  }
}

inline void applyBondLayer(StateVector& v, const Eigen::Matrix4cd& g, int parity) {
  for (int r = 0; r < v.n / 2; ++r) {
    const int left = 2 * r + parity;
    applyTwoQubit(v, g, left % v.n, (left + 1) % v.n);
  }
}

inline StateVector applyCircuitPBC(StateVector v, const ParamCircuit& c) {
  StateVector::checkQubits(v.n);
  for (const auto& layer : c.layers) applyBondLayer(v, Eigen::Matrix4cd(layer.gate.toMatrix()), layer.parity);
  return v;
}

/// H v for the periodic chain built from a unit-cell Hamiltonian.
inline Eigen::VectorXcd applyHamiltonian(const UnitCellHamiltonian& h, const StateVector& v,
                                         bool traceless = true) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.amp.size());
  for (int parity = 0; parity < 2; ++parity) {
    const DenseTensor& t = parity == 0 ? h.bondEven : h.bondOdd;
    const Eigen::Matrix4cd m = traceless ? tracelessPart(t).toMatrix() : t.toMatrix();
    for (int r = 0; r < v.n / 2; ++r) {
      StateVector w = v;
      const int left = 2 * r + parity;
      applyTwoQubit(w, m, left % v.n, (left + 1) % v.n);
      out += w.amp;
    }
  }
  return out;
}

/// exp(-i t H) v by a scaled Taylor series; H uses traceless bond terms.
inline StateVector expmvTaylor(const UnitCellHamiltonian& h, const StateVector& v, double t) {
  StateVector::checkQubits(v.n);
  if (t == 0.0) return v;
  const double bound =
      0.5 * v.n *
      (tracelessPart(h.bondEven).toMatrix().jacobiSvd().singularValues()[0] +
       tracelessPart(h.bondOdd).toMatrix().jacobiSvd().singularValues()[0]);
  const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) * bound)));
  const double tau = t / steps;
  StateVector cur = v;
  for (int s = 0; s < steps; ++s) {
    Eigen::VectorXcd term = cur.amp, sum = cur.amp;
    for (int k = 1; k < 80; ++k) {
      StateVector tmp{v.n, term};
      term = applyHamiltonian(h, tmp) * cplx(0.0, -tau / k);
      sum += term;
      if (term.norm() < 1e-17 * sum.norm()) break;
    }
    cur.amp = std::move(sum);
  }
  return cur;
}

/// Reference action of exp(-iHt) on a periodic chain of n qubits. For
/// n <= kTaylorMaxQubits the action is a converged Taylor expansion; above it
/// a 4th-order Trotter circuit is refined by halving the step until two
/// successive results agree within tol.
class ReferenceEvolution {
 public:
  static constexpr int kTaylorMaxQubits = 14;
  enum class Method { automatic, taylor, trotter };

  ReferenceEvolution(UnitCellHamiltonian h, double t, int n, double tol = 1e-10,
                     Method method = Method::automatic)
      : h_(std::move(h)), t_(t), n_(n), tol_(tol), method_(method) {
    StateVector::checkQubits(n);
    if (!(tol > 0.0)) throw ValidationError("ReferenceEvolution: tol must be positive");
  }

  StateVector apply(const StateVector& v) const {
    if (v.n != n_) throw ValidationError("ReferenceEvolution: qubit count mismatch");
    const bool taylor = method_ == Method::taylor ||
                        (method_ == Method::automatic && n_ <= kTaylorMaxQubits);
    if (taylor) return expmvTaylor(h_, v, t_);
    StateVector prev = applyCircuitPBC(v, trotterCircuit(h_, {4, 1, t_}));
    for (int k = 2; k <= 4096; k *= 2) {
      StateVector cur = applyCircuitPBC(v, trotterCircuit(h_, {4, k, t_}));
      if ((cur.amp - prev.amp).norm() <= tol_) return cur;
      prev = std::move(cur);
    }
    throw ConvergenceError("ReferenceEvolution: Trotter refinement did not converge");
  }

 private:
  UnitCellHamiltonian h_;
  double t_;
  int n_;
  double tol_;
  Method method_;
};

struct FiniteCost {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (0 for a single state)
  std::vector<double> perState;
};

/// 1 - (|<R| V^dagger exp(-iHt) |R>|^2)^(1/n), averaged over N Haar states
/// drawn with seeds seed, seed + 1, ...
inline FiniteCost costFinite(const ParamCircuit& c, const ReferenceEvolution& ref, int n, int N,
                             std::uint64_t seed) {
  if (N < 1) throw ValidationError("costFinite: N must be >= 1");
  FiniteCost out;
  for (int k = 0; k < N; ++k) {
    const StateVector r = haarState(n, seed + static_cast<std::uint64_t>(k));
    const StateVector vr = applyCircuitPBC(r, c);
    const StateVector ur = ref.apply(r);
    const double overlap2 = std::norm(vr.amp.dot(ur.amp));
    out.perState.push_back(1.0 - std::pow(overlap2, 1.0 / n));
  }
  for (double x : out.perState) out.mean += x / N;
  if (N > 1) {
    double s = 0.0;
    for (double x : out.perState) s += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(s / (N - 1));
  }
  return out;
}

inline FiniteCost costFinite(const ParamCircuit& c, const UnitCellHamiltonian& h, double t, int n,
                             int N, std::uint64_t seed) {
  return costFinite(c, ReferenceEvolution(h, t, n), n, N, seed);
}

}  // namespace ticc
