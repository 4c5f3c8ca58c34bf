#pragma once

// Infinite MPS with a two-site unit cell and its (mixed) transfer operators.
//
// Sites alternate A, B, A, B, ... with site A on even positions. Site tensors
// are stored in right-canonical form (Gamma * lambda): siteA has shape
// (chiBA, 2, chiAB) and siteB has shape (chiAB, 2, chiBA); bondBA sits to the
// left of every A site and bondAB to the left of every B site.
//
// A unit cell read with alignment 0 starts on an A site (bond [2r, 2r+1]
// inside the cell); alignment 1 starts on a B site (bond [2r-1, 2r]).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "arnoldi.hpp"
#include "errors.hpp"
#include "tensor.hpp"

namespace ticc {

struct InfiniteMPS {
  DenseTensor siteA;
  DenseTensor siteB;
  std::vector<double> bondAB;
  std::vector<double> bondBA;

  std::size_t chiAB() const { return siteA.dim(2); }
  std::size_t chiBA() const { return siteA.dim(0); }
  std::size_t chi() const { return std::max(chiAB(), chiBA()); }

  /// Product state with single-site amplitudes a on A sites and b on B sites.
  static InfiniteMPS product(std::array<cplx, 2> a, std::array<cplx, 2> b) {
    auto unit = [](std::array<cplx, 2> v) {
      const double n = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
      if (n == 0.0) throw ValidationError("InfiniteMPS::product: zero amplitude vector");
      return DenseTensor({1, 2, 1}, {v[0] / n, v[1] / n});
    };
    return InfiniteMPS{unit(a), unit(b), {1.0}, {1.0}};
  }

  /// Computational basis cell |a b>.
  static InfiniteMPS basis(int a, int b) {
    auto amp = [](int s) {
      return s == 0 ? std::array<cplx, 2>{1.0, 0.0} : std::array<cplx, 2>{0.0, 1.0};
    };
    return product(amp(a), amp(b));
  }

  void validate() const {
    if (siteA.rank() != 3 || siteB.rank() != 3 || siteA.dim(1) != 2 || siteB.dim(1) != 2)
      throw ValidationError("InfiniteMPS: site tensors must have shape (chi, 2, chi)");
    if (siteA.dim(2) != siteB.dim(0) || siteB.dim(2) != siteA.dim(0))
      throw ValidationError("InfiniteMPS: virtual dimensions of siteA and siteB do not match");
    if (bondAB.size() != siteA.dim(2) || bondBA.size() != siteA.dim(0))
      throw ValidationError("InfiniteMPS: bond weight lengths do not match site tensors");
  }
};

/// Two-site cell tensor as a (chiL * 4) x chiR row-major matrix; the physical
/// index is 2 * s_left + s_right.
inline RowMatrixXcd cellMatrix(const InfiniteMPS& psi, int alignment) {
  const DenseTensor& m1 = alignment == 0 ? psi.siteA : psi.siteB;
  const DenseTensor& m2 = alignment == 0 ? psi.siteB : psi.siteA;
  const std::size_t chiL = m1.dim(0), chiM = m1.dim(2), chiR = m2.dim(2);
  RowMatrixXcd prod = m1.matrix(chiL * 2, chiM) * m2.matrix(chiM, 2 * chiR);
  // (chiL*2) x (2*chiR) and (chiL*4) x chiR share the same row-major storage.
  return RowMap(prod.data(), static_cast<Eigen::Index>(chiL * 4),
                static_cast<Eigen::Index>(chiR));
}

/// Applies a 4x4 operator to the physical index of a cell matrix.
inline RowMatrixXcd applyGateToCell(const RowMatrixXcd& cell, const DenseTensor& gate) {
  if (gate.rank() != 2 || gate.dim(0) != 4 || gate.dim(1) != 4)
    throw ValidationError("applyGateToCell: gate must be 4x4");
  const Eigen::Index chiL = cell.rows() / 4;
  const auto g = gate.matrix(4, 4);
  RowMatrixXcd out(cell.rows(), cell.cols());
  for (Eigen::Index a = 0; a < chiL; ++a)
    out.middleRows(4 * a, 4).noalias() = g * cell.middleRows(4 * a, 4);
  return out;
}

/// Mixed transfer operator of one unit cell. Vectors are chiKet x chiBra
/// matrices stored row-major; apply(v) = sum_s K_s v B_s^dagger.
class TransferOperator {
 public:
  TransferOperator(const InfiniteMPS& bra, const InfiniteMPS& ket, int alignment = 0)
      : TransferOperator(cellMatrix(bra, alignment), cellMatrix(ket, alignment)) {}

  TransferOperator(RowMatrixXcd braCell, RowMatrixXcd ketCell)
      : bra_(std::move(braCell)), ket_(std::move(ketCell)) {
    chiB_ = bra_.cols();
    chiK_ = ket_.cols();
    if (bra_.rows() != 4 * chiB_ || ket_.rows() != 4 * chiK_)
      throw ValidationError("TransferOperator: cell matrices must be (4 chi) x chi");
  }

  /// Same operator with a two-site gate acting on the ket cell.
  TransferOperator withKetGate(const DenseTensor& gate) const {
    return TransferOperator(bra_, applyGateToCell(ket_, gate));
  }

  Eigen::Index dim() const { return chiK_ * chiB_; }
  Eigen::Index chiKet() const { return chiK_; }
  Eigen::Index chiBra() const { return chiB_; }
  const RowMatrixXcd& ketCell() const { return ket_; }
  const RowMatrixXcd& braCell() const { return bra_; }

  void apply(const Eigen::VectorXcd& v, Eigen::VectorXcd& out) const {
    ConstRowMap vm(v.data(), chiK_, chiB_);
    RowMatrixXcd x = ket_ * vm;  // (chiK*4) x chiB
    ConstRowMap xs(x.data(), chiK_, 4 * chiB_);
    ConstRowMap bs(bra_.data(), chiB_, 4 * chiB_);
    out.resize(dim());
    RowMap om(out.data(), chiK_, chiB_);
    om.noalias() = xs * bs.adjoint();
  }

  void applyAdjoint(const Eigen::VectorXcd& w, Eigen::VectorXcd& out) const {
    ConstRowMap wm(w.data(), chiK_, chiB_);
    ConstRowMap bs(bra_.data(), chiB_, 4 * chiB_);
    RowMatrixXcd p = wm * bs;  // chiK x (4 chiB)
    ConstRowMap ps(p.data(), 4 * chiK_, chiB_);
    out.resize(dim());
    RowMap om(out.data(), chiK_, chiB_);
    om.noalias() = ket_.adjoint() * ps;
  }

  /// Explicit matrix; only for small operators (tests, oracles).
  Eigen::MatrixXcd dense() const {
    const Eigen::Index n = dim();
    Eigen::MatrixXcd m(n, n);
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n), col;
    for (Eigen::Index j = 0; j < n; ++j) {
      e.setZero();
      e[j] = 1.0;
      apply(e, col);
      m.col(j) = col;
    }
    return m;
  }

  LinearMap map() const {
    return [this](const Eigen::VectorXcd& v, Eigen::VectorXcd& out) { apply(v, out); };
  }
  LinearMap adjointMap() const {
    return [this](const Eigen::VectorXcd& v, Eigen::VectorXcd& out) { applyAdjoint(v, out); };
  }

 private:
  RowMatrixXcd bra_;
  RowMatrixXcd ket_;
  Eigen::Index chiB_ = 0;
  Eigen::Index chiK_ = 0;
};

inline EigenResult leadingEigenvalue(const TransferOperator& op,
                                     const Eigen::VectorXcd* warmStart = nullptr,
                                     double tol = 1e-12) {
  ArnoldiOptions opts;
  opts.tol = tol;
  return leadingEigenpair(op.map(), op.dim(), warmStart, opts);
}

/// Left eigenvector l (l^dagger T = lambda l^dagger). The returned value is
/// lambda itself, not its conjugate.
inline EigenResult leadingLeftEigenvalue(const TransferOperator& op,
                                         const Eigen::VectorXcd* warmStart = nullptr,
                                         double tol = 1e-12) {
  ArnoldiOptions opts;
  opts.tol = tol;
  EigenResult r = leadingEigenpair(op.adjointMap(), op.dim(), warmStart, opts);
  r.value = std::conj(r.value);
  return r;
}

/// |lambda0|^2 of the mixed transfer matrix: local fidelity per unit cell.
inline double localFidelity(const InfiniteMPS& psi1, const InfiniteMPS& psi2,
                            double tol = 1e-12) {
  const TransferOperator op(psi1, psi2, 0);
  return std::norm(leadingEigenvalue(op, nullptr, tol).value);
}

/// Rescales the site tensors so |lambda0(psi, psi)| = 1.
inline InfiniteMPS normalize(const InfiniteMPS& psi, double tol = 1e-12) {
  psi.validate();
  const EigenResult r = leadingEigenvalue(TransferOperator(psi, psi, 0), nullptr, tol);
  const double mag = std::abs(r.value);
  if (!std::isfinite(mag) || mag < 1e-200)
    throw NormalizationError("normalize: leading transfer eigenvalue is zero or not finite");
  InfiniteMPS out = psi;
  const double s = std::pow(mag, -0.25);
  out.siteA *= s;
  out.siteB *= s;
  return out;
}

namespace detail {

/// Hermitian positive square-root factor of a transfer fixed point:
/// returns X with m ~= X X^dagger restricted to eigenvalues above cutoff.
inline Eigen::MatrixXcd psdFactor(const Eigen::MatrixXcd& m, double cutoff,
                                  Eigen::MatrixXcd& pinv) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()));
  const Eigen::VectorXd& d = es.eigenvalues();
  const double top = d.maxCoeff();
  if (!(top > 0.0)) throw NumericalError("canonicalize: fixed point is not positive");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = d.size(); i-- > 0;)
    if (d[i] > cutoff * top) keep.push_back(i);
  Eigen::MatrixXcd x(m.rows(), static_cast<Eigen::Index>(keep.size()));
  pinv.resize(static_cast<Eigen::Index>(keep.size()), m.rows());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const double s = std::sqrt(d[keep[k]]);
    x.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]) * s;
    pinv.row(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]).adjoint() / s;
  }
  return x;
}

inline Eigen::MatrixXcd fixedPointMatrix(const Eigen::VectorXcd& v, Eigen::Index chi) {
  Eigen::MatrixXcd m = ConstRowMap(v.data(), chi, chi);
  const cplx tr = m.trace();
  if (std::abs(tr) > 0.0) m *= std::conj(tr) / std::abs(tr);
  return 0.5 * (m + m.adjoint());
}

}  // namespace detail

/// Brings an iMPS into right-canonical form with Schmidt bond weights.
/// Fixed-point eigenvalues below `cutoff` (relative) are projected out.
inline InfiniteMPS canonicalize(const InfiniteMPS& psi, double cutoff = 1e-13,
                                double tol = 1e-12) {
  psi.validate();
  using Eigen::Index;
  RowMatrixXcd cell = cellMatrix(psi, 0);
  const Index chi = cell.cols();
  // The overall scale drops out below; unit weight per bond keeps the
  // eigensolver residual at order-one magnitude.
  const double weight = cell.norm();
  if (!(weight > 1e-200)) throw NormalizationError("canonicalize: zero cell");
  cell *= std::sqrt(static_cast<double>(chi)) / weight;
  const TransferOperator op(cell, cell);
  const EigenResult right = leadingEigenvalue(op, nullptr, tol);
  const EigenResult left = leadingLeftEigenvalue(op, nullptr, tol);
  const double eta = std::abs(right.value);
  if (!(eta > 1e-200)) throw NormalizationError("canonicalize: zero transfer eigenvalue");

  Eigen::MatrixXcd xinv, finv;
  const Eigen::MatrixXcd x = detail::psdFactor(detail::fixedPointMatrix(right.vector, chi), cutoff, xinv);
  // L = Y^dagger Y; psdFactor gives L = F F^dagger, so Y = F^dagger.
  const Eigen::MatrixXcd f = detail::psdFactor(detail::fixedPointMatrix(left.vector, chi), cutoff, finv);
  const Eigen::MatrixXcd y = f.adjoint();

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(y * x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  Index k = 0;
  while (k < s.size() && s[k] > kRankCutoff * s[0]) ++k;
  if (k == 0) throw NumericalError("canonicalize: degenerate gauge");
  const Eigen::MatrixXcd w = svd.matrixV().leftCols(k).adjoint();  // k x k1
  Eigen::VectorXd lambda = s.head(k);
  lambda /= lambda.norm();

  // Right-canonical cell B_s = W X^-1 M_s X W^dagger / sqrt(eta).
  const Eigen::MatrixXcd leftGauge = w * xinv;          // k x chi
  const Eigen::MatrixXcd rightGauge = x * w.adjoint();  // chi x k
  RowMatrixXcd bcell(4 * k, k);
  const double scale = 1.0 / std::sqrt(eta);
  for (int sidx = 0; sidx < 4; ++sidx) {
    Eigen::MatrixXcd ms(chi, chi);
    for (Index a = 0; a < chi; ++a) ms.row(a) = cell.row(4 * a + sidx);
    const Eigen::MatrixXcd bs = scale * (leftGauge * ms * rightGauge);
    for (Index a = 0; a < k; ++a) bcell.row(4 * a + sidx) = bs.row(a);
  }

  // Split the cell: theta = diag(lambda) B reshaped (2k) x (2k).
  RowMatrixXcd theta = bcell;
  for (Index a = 0; a < k; ++a) theta.middleRows(4 * a, 4) *= lambda[a];
  const ConstRowMap thetaMat(theta.data(), 2 * k, 2 * k);
  const TruncatedSVD split = svdTruncateMatrix(thetaMat, static_cast<std::size_t>(2 * k), 0.0);
  const auto kab = static_cast<Index>(split.S.size());
  double sn = 0.0;
  for (double v : split.S) sn += v * v;
  sn = std::sqrt(sn);

  InfiniteMPS out;
  out.bondBA.assign(lambda.data(), lambda.data() + k);
  out.bondAB.resize(split.S.size());
  for (std::size_t i = 0; i < split.S.size(); ++i) out.bondAB[i] = split.S[i] / sn;
  out.siteB = split.V.reshape({static_cast<std::size_t>(kab), 2, static_cast<std::size_t>(k)});
  const ConstRowMap bmat(bcell.data(), 2 * k, 2 * k);
  const RowMatrixXcd a = bmat * split.V.matrix(kab, 2 * k).adjoint() / sn;
  out.siteA = DenseTensor({static_cast<std::size_t>(k), 2, static_cast<std::size_t>(kab)});
  out.siteA.matrix(2 * k, kab) = a;
  if (!out.siteA.allFinite() || !out.siteB.allFinite())
    throw NumericalError("canonicalize: non-finite site tensors");
  return out;
}

/// <psi| op |psi> per unit cell on bonds of the given parity, using the
/// dominant left and right fixed points as environments.
inline cplx expectation2Site(const InfiniteMPS& psi, const DenseTensor& op, int bondParity,
                             double tol = 1e-12) {
  const TransferOperator t(psi, psi, bondParity);
  const EigenResult r = leadingEigenvalue(t, nullptr, tol);
  const EigenResult l = leadingLeftEigenvalue(t, nullptr, tol);
  const TransferOperator tOp(t.braCell(), applyGateToCell(t.ketCell(), op));
  Eigen::VectorXcd tr;
  tOp.apply(r.vector, tr);
  return l.vector.dot(tr) / (r.value * l.vector.dot(r.vector));
}

/// Correlation length in lattice sites: -2 / log|lambda1 / lambda0| where the
/// eigenvalues belong to the two-site transfer matrix. Product-like spectra
/// (|lambda1| at solver noise) give 0; a (near-)degenerate leading magnitude
/// gives +infinity.
inline double correlationLength(const InfiniteMPS& psi, double tol = 1e-12) {
  const TransferOperator t(psi, psi, 0);
  if (t.dim() == 1) return 0.0;
  const EigenResult r = leadingEigenvalue(t, nullptr, tol);
  const EigenResult l = leadingLeftEigenvalue(t, nullptr, tol);
  const cplx lr = l.vector.dot(r.vector);
  if (std::abs(lr) < 1e-300) throw NumericalError("correlationLength: defective fixed point");
  const Eigen::VectorXcd rv = r.vector, lv = l.vector;
  const cplx lam0 = r.value;
  LinearMap deflated = [&](const Eigen::VectorXcd& v, Eigen::VectorXcd& out) {
    t.apply(v, out);
    out -= lam0 * rv * (lv.dot(v) / lr);
  };
  // A different start vector: the default one has no weight outside span(r0)
  // when the dominant eigenspace is degenerate.
  const EigenResult second =
      leadingEigenpair(deflated, t.dim(), nullptr, ArnoldiOptions{30, 40, tol, 0x9e3779b97f4a7c15ULL});
  const double ratio = std::abs(second.value) / std::abs(lam0);
  if (std::abs(second.value) <= 100.0 * tol) return 0.0;
  if (ratio >= 1.0 - 1e-12) return std::numeric_limits<double>::infinity();
  return -2.0 / std::log(ratio);
}

/// Random iMPS: i.i.d. standard complex Gaussian site tensors, canonicalized.
inline InfiniteMPS randomIMPS(std::size_t chi, std::uint64_t seed) {
  if (chi < 1) throw ValidationError("randomIMPS: chi must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  auto draw = [&]() {
    DenseTensor t({chi, 2, chi});
    for (auto& z : t.data()) z = {g(rng), g(rng)};
    return t;
  };
  InfiniteMPS raw{draw(), draw(), std::vector<double>(chi, 1.0 / std::sqrt(double(chi))),
                  std::vector<double>(chi, 1.0 / std::sqrt(double(chi)))};
  if (chi == 1) return normalize(raw);
  return canonicalize(raw);
}

// ---------------------------------------------------------------------------
// Snapshot files.

struct SnapshotMeta {
  std::string generator = "unknown";
  nlohmann::json params = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
};

inline nlohmann::json toJson(const InfiniteMPS& psi, const SnapshotMeta& meta = {}) {
  nlohmann::json j;
  j["siteA"] = toJson(psi.siteA);
  j["siteB"] = toJson(psi.siteB);
  j["bondAB"] = psi.bondAB;
  j["bondBA"] = psi.bondBA;
  double residual = std::numeric_limits<double>::quiet_NaN();
  try {
    residual = std::abs(std::abs(leadingEigenvalue(TransferOperator(psi, psi, 0)).value) - 1.0);
  } catch (const Error&) {
  }
  nlohmann::json gen{{"name", meta.generator}, {"params", meta.params}};
  gen["seed"] = meta.seed ? nlohmann::json(*meta.seed) : nlohmann::json(nullptr);
  j["metadata"] = {{"chi", psi.chi()}, {"normalizationResidual", residual}, {"generator", gen}};
  return j;
}

inline InfiniteMPS impsFromJson(const nlohmann::json& j) {
  InfiniteMPS psi{tensorFromJson(j.at("siteA")), tensorFromJson(j.at("siteB")),
                  j.at("bondAB").get<std::vector<double>>(),
                  j.at("bondBA").get<std::vector<double>>()};
  psi.validate();
  return psi;
}

}  // namespace ticc
