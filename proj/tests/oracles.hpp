#pragma once

// Independent reference computations shared by the test suites. Everything
// here is built from explicit Kronecker products and dense matrix functions,
// without the library's layer or transfer-operator code paths.

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;

inline MatrixXcd taylorExp(const MatrixXcd& a, int terms = 60) {
  MatrixXcd out = MatrixXcd::Identity(a.rows(), a.cols());
  MatrixXcd term = out;
  for (int k = 1; k < terms; ++k) {
    term = term * a / double(k);
    out += term;
  }
  return out;
}

/// exp(s * h) for Hermitian h via dense diagonalization.
inline MatrixXcd expHermitian(const MatrixXcd& h, cplx s) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  Eigen::VectorXcd d(h.rows());
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = std::exp(s * es.eigenvalues()[i]);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

inline MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline MatrixXcd pauli(char p) {
  MatrixXcd m(2, 2);
  switch (p) {
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, cplx(0, -1), cplx(0, 1), 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: m << 1, 0, 0, 1;
  }
  return m;
}

/// Single-qubit operator on qubit q of n, where qubit q is bit q of the
/// index (kron order: qubit n-1 first).
inline MatrixXcd site(const MatrixXcd& op, int q, int n) {
  MatrixXcd out = MatrixXcd::Identity(1, 1);
  for (int j = n - 1; j >= 0; --j) out = kron(out, j == q ? op : MatrixXcd::Identity(2, 2));
  return out;
}

/// Cyclic shift permutation: qubit j -> qubit j+1 (mod n).
inline MatrixXcd shift(int n) {
  const Eigen::Index dim = Eigen::Index(1) << n;
  MatrixXcd p = MatrixXcd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Eigen::Index top = (i >> (n - 1)) & 1;
    const Eigen::Index j = ((i << 1) & (dim - 1)) | top;
    p(j, i) = 1.0;
  }
  return p;
}

/// Two-qubit operator g (basis 2*s_left + s_right) on qubits (left = q,
/// right = q+1 mod n) of an n-qubit register, built with Kronecker products
/// and, for the wrap-around bond, conjugation by the cyclic shift.
inline MatrixXcd bond(const MatrixXcd& g, int q, int n) {
  if (q == n - 1) {
    const MatrixXcd s = shift(n);
    // Shift qubits so the wrapped pair (n-1, 0) lands on (0, 1).
    return s.adjoint() * bond(g, 0, n) * s;
  }
  // In kron order qubit q+1 is the more significant of the pair.
  MatrixXcd swap = MatrixXcd::Zero(4, 4);
  swap(0, 0) = swap(3, 3) = swap(1, 2) = swap(2, 1) = 1.0;
  const MatrixXcd gk = swap * g * swap;
  const MatrixXcd above = MatrixXcd::Identity(Eigen::Index(1) << (n - q - 2), Eigen::Index(1) << (n - q - 2));
  const MatrixXcd below = MatrixXcd::Identity(Eigen::Index(1) << q, Eigen::Index(1) << q);
  return kron(kron(above, gk), below);
}

/// Periodic chain operator: sum over parity-0 and parity-1 bonds.
inline MatrixXcd chainOperator(const MatrixXcd& even, const MatrixXcd& odd, int n) {
  const Eigen::Index dim = Eigen::Index(1) << n;
  MatrixXcd h = MatrixXcd::Zero(dim, dim);
  for (int r = 0; r < n / 2; ++r) {
    h += bond(even, 2 * r, n);
    h += bond(odd, 2 * r + 1, n);
  }
  return h;
}

/// Dense unitary of a layer of gates.
inline MatrixXcd layerUnitary(const MatrixXcd& g, int parity, int n) {
  const Eigen::Index dim = Eigen::Index(1) << n;
  MatrixXcd u = MatrixXcd::Identity(dim, dim);
  for (int r = 0; r < n / 2; ++r) u = bond(g, 2 * r + parity, n) * u;
  return u;
}

/// Per-site TFIM Hamiltonian -J sum ZZ - h sum X on a ring (no bond splitting).
inline MatrixXcd tfimChain(double J, double h, int n) {
  const Eigen::Index dim = Eigen::Index(1) << n;
  MatrixXcd H = MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    H -= J * site(pauli('Z'), i, n) * site(pauli('Z'), (i + 1) % n, n);
    H -= h * site(pauli('X'), i, n);
  }
  return H;
}

/// Per-site Thirring Hamiltonian on a ring with sigma^+ = |0><1|.
inline MatrixXcd thirringChain(double m, double g, double a, int n) {
  const Eigen::Index dim = Eigen::Index(1) << n;
  MatrixXcd sp(2, 2), sm(2, 2);
  sp << 0, 1, 0, 0;
  sm << 0, 0, 1, 0;
  const MatrixXcd id = MatrixXcd::Identity(dim, dim);
  MatrixXcd H = MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    H += cplx(0, 1.0 / (2 * a)) * (site(sm, j, n) * site(sp, i, n) - site(sm, i, n) * site(sp, j, n));
    H += (m / 2) * (i % 2 == 0 ? 1.0 : -1.0) * (id - site(pauli('Z'), i, n));
    H += (g / (4 * a)) * (id - site(pauli('Z'), i, n)) * (id - site(pauli('Z'), j, n));
  }
  return H;
}

/// Per-site XXZ Hamiltonian on a ring.
inline MatrixXcd xxzChain(double Jx, double Jz, int n) {
  const Eigen::Index dim = Eigen::Index(1) << n;
  MatrixXcd H = MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    H += Jx * (site(pauli('X'), i, n) * site(pauli('X'), j, n) + site(pauli('Y'), i, n) * site(pauli('Y'), j, n));
    H += Jz * site(pauli('Z'), i, n) * site(pauli('Z'), j, n);
  }
  return H;
}

/// Product state: amplitudes amps[q] (2 components) on qubit q.
inline Eigen::VectorXcd productState(const std::vector<std::array<cplx, 2>>& amps) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(1);
  for (int q = static_cast<int>(amps.size()) - 1; q >= 0; --q) {
    Eigen::VectorXcd s(2);
    s << amps[q][0], amps[q][1];
    Eigen::VectorXcd nv(v.size() * 2);
    for (Eigen::Index i = 0; i < v.size(); ++i) nv.segment(2 * i, 2) = v[i] * s;
    v = nv;
  }
  return v;
}

}  // namespace oracle
