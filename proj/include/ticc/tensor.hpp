#pragma once

// Dense complex tensors and the small set of linear-algebra kernels the rest of
// the library is built on.
//
// Layout: row-major, last index fastest. A tensor of shape (d0, d1, ..., dk)
// stores element (i0, ..., ik) at offset ((i0 * d1 + i1) * d2 + ...) * dk + ik.
// Serialized tensors use the same order, so files are portable.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace ticc {

using cplx = std::complex<double>;
using RowMatrixXcd =
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrixXcd>;
using ConstRowMap = Eigen::Map<const RowMatrixXcd>;

class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(product(shape_), cplx{0.0, 0.0}) {
    checkShape();
  }

  DenseTensor(std::vector<std::size_t> shape, std::vector<cplx> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    checkShape();
    if (data_.size() != product(shape_)) {
      throw ValidationError("DenseTensor: data size " +
                            std::to_string(data_.size()) +
                            " does not match shape product " +
                            std::to_string(product(shape_)));
    }
  }

  static DenseTensor identity(std::size_t n) {
    DenseTensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  template <typename Derived>
  static DenseTensor fromMatrix(const Eigen::MatrixBase<Derived>& m) {
    DenseTensor t({static_cast<std::size_t>(m.rows()),
                   static_cast<std::size_t>(m.cols())});
    t.matrix(t.shape_[0], t.shape_[1]) = m;
    return t;
  }

  std::size_t rank() const noexcept { return shape_.size(); }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<cplx> data() noexcept { return data_; }
  std::span<const cplx> data() const noexcept { return data_; }

  cplx& operator[](std::size_t flat) { return data_[flat]; }
  const cplx& operator[](std::size_t flat) const { return data_[flat]; }

  template <typename... I>
  cplx& operator()(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const cplx& operator()(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size())
      throw ValidationError("DenseTensor: index rank mismatch");
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      if (i >= shape_[axis]) throw ValidationError("DenseTensor: index out of range");
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }

  /// Row-major matrix view of the storage; rows * cols must equal size().
  RowMap matrix(std::size_t rows, std::size_t cols) {
    checkView(rows, cols);
    return RowMap(data_.data(), static_cast<Eigen::Index>(rows),
                  static_cast<Eigen::Index>(cols));
  }
  ConstRowMap matrix(std::size_t rows, std::size_t cols) const {
    checkView(rows, cols);
    return ConstRowMap(data_.data(), static_cast<Eigen::Index>(rows),
                       static_cast<Eigen::Index>(cols));
  }

  /// Copy of a rank-2 tensor as an Eigen matrix.
  Eigen::MatrixXcd toMatrix() const {
    if (rank() != 2) throw ValidationError("DenseTensor::toMatrix: tensor is not rank 2");
    return matrix(shape_[0], shape_[1]);
  }

  DenseTensor reshape(std::vector<std::size_t> newShape) const {
    if (product(newShape) != data_.size())
      throw ValidationError("DenseTensor::reshape: size mismatch");
    return DenseTensor(std::move(newShape), data_);
  }

  /// Axis permutation: result axis k is input axis perm[k].
  DenseTensor permute(const std::vector<std::size_t>& perm) const {
    const std::size_t r = rank();
    if (perm.size() != r) throw ValidationError("DenseTensor::permute: rank mismatch");
    std::vector<bool> seen(r, false);
    for (std::size_t p : perm) {
      if (p >= r || seen[p]) throw ValidationError("DenseTensor::permute: not a permutation");
      seen[p] = true;
    }
    std::vector<std::size_t> newShape(r);
    for (std::size_t k = 0; k < r; ++k) newShape[k] = shape_[perm[k]];
    DenseTensor out(newShape);
    if (data_.empty()) return out;

    std::vector<std::size_t> inStride(r, 1);
    for (std::size_t k = r; k-- > 1;) inStride[k - 1] = inStride[k] * shape_[k];
    std::vector<std::size_t> stride(r);
    for (std::size_t k = 0; k < r; ++k) stride[k] = inStride[perm[k]];

    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t flat = 0; flat < out.data_.size(); ++flat) {
      out.data_[flat] = data_[src];
      for (std::size_t k = r; k-- > 0;) {
        ++idx[k];
        src += stride[k];
        if (idx[k] < newShape[k]) break;
        src -= stride[k] * newShape[k];
        idx[k] = 0;
      }
    }
    return out;
  }

  DenseTensor conj() const {
    DenseTensor out(*this);
    for (auto& z : out.data_) z = std::conj(z);
    return out;
  }

  DenseTensor& operator*=(cplx alpha) {
    for (auto& z : data_) z *= alpha;
    return *this;
  }
  friend DenseTensor operator*(cplx alpha, DenseTensor t) { return t *= alpha; }

  DenseTensor& operator+=(const DenseTensor& o) {
    if (o.shape_ != shape_) throw ValidationError("DenseTensor +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) {
    return a += (cplx{-1.0, 0.0} * b);
  }

  double norm() const {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return std::sqrt(s);
  }

  bool allFinite() const {
    return std::all_of(data_.begin(), data_.end(), [](const cplx& z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

  static std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  void checkShape() const {
    for (std::size_t d : shape_)
      if (d == 0) throw ValidationError("DenseTensor: dimensions must be positive");
  }
  void checkView(std::size_t rows, std::size_t cols) const {
    if (rows * cols != data_.size())
      throw ValidationError("DenseTensor::matrix: view does not cover the storage");
  }

  std::vector<std::size_t> shape_;
  std::vector<cplx> data_;
};

/// Sums over paired axes; free axes of `a` come first, then free axes of `b`.
inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                            const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<bool> usedA(a.rank(), false), usedB(b.rank(), false);
  std::size_t inner = 1;
  for (auto [ia, ib] : pairs) {
    if (ia >= a.rank() || ib >= b.rank())
      throw ContractionError("contract: axis out of range");
    if (usedA[ia] || usedB[ib]) throw ContractionError("contract: axis paired twice");
    if (a.dim(ia) != b.dim(ib))
      throw ContractionError("contract: dimension mismatch on axes (" +
                             std::to_string(ia) + ", " + std::to_string(ib) + "): " +
                             std::to_string(a.dim(ia)) + " vs " + std::to_string(b.dim(ib)));
    usedA[ia] = usedB[ib] = true;
    inner *= a.dim(ia);
  }
  std::vector<std::size_t> permA, permB, outShape;
  for (std::size_t k = 0; k < a.rank(); ++k)
    if (!usedA[k]) {
      permA.push_back(k);
      outShape.push_back(a.dim(k));
    }
  for (auto [ia, ib] : pairs) {
    permA.push_back(ia);
    permB.push_back(ib);
  }
  for (std::size_t k = 0; k < b.rank(); ++k)
    if (!usedB[k]) {
      permB.push_back(k);
      outShape.push_back(b.dim(k));
    }
  const DenseTensor ap = a.permute(permA);
  const DenseTensor bp = b.permute(permB);
  const std::size_t rows = a.size() / inner;
  const std::size_t cols = b.size() / inner;
  RowMatrixXcd prod = ap.matrix(rows, inner) * bp.matrix(inner, cols);
  if (outShape.empty()) outShape.push_back(1);
  DenseTensor out(outShape);
  out.matrix(rows, cols) = prod;
  return out;
}

struct TruncatedSVD {
  DenseTensor U;                   // (m, k) isometry
  std::vector<double> S;           // descending, nonnegative
  DenseTensor V;                   // (k, n) isometry, m ~= U diag(S) V
  double discardedWeight = 0.0;    // discarded sum S^2 / total sum S^2
};

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRankCutoff = 1e-14;

namespace detail {

inline void throwIfNonFinite(const Eigen::MatrixXcd& m, const char* where) {
  if (!m.allFinite()) throw NumericalError(std::string(where) + ": non-finite values");
}

/// Number of singular values to keep under the chiMax / weightTol rule.
inline std::size_t truncationRank(const Eigen::VectorXd& s, std::size_t chiMax,
                                  double weightTol, double& discarded) {
  const auto n = static_cast<std::size_t>(s.size());
  double total = s.squaredNorm();
  if (n == 0 || total == 0.0) {
    discarded = 0.0;
    return n == 0 ? 0 : 1;
  }
  std::size_t keep = 0;
  while (keep < n && s[static_cast<Eigen::Index>(keep)] > kRankCutoff * s[0]) ++keep;
  keep = std::max<std::size_t>(1, std::min(keep, chiMax));
  double tail = 0.0;
  for (std::size_t i = keep; i < n; ++i) tail += s[static_cast<Eigen::Index>(i)] * s[static_cast<Eigen::Index>(i)];
  while (keep > 1) {
    const double sv = s[static_cast<Eigen::Index>(keep - 1)];
    if ((tail + sv * sv) / total > weightTol) break;
    tail += sv * sv;
    --keep;
  }
  discarded = std::clamp(tail / total, 0.0, 1.0);
  return keep;
}

}  // namespace detail

/// SVD of a matrix (Eigen view), truncated to at most chiMax values.
template <typename Derived>
TruncatedSVD svdTruncateMatrix(const Eigen::MatrixBase<Derived>& m, std::size_t chiMax,
                               double weightTol) {
  if (chiMax < 1) throw ValidationError("svdTruncate: chiMax must be >= 1");
  Eigen::MatrixXcd a = m;
  detail::throwIfNonFinite(a, "svdTruncate input");
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
    const auto& sv = svd.singularValues();
    std::ostringstream os;
    os << "svdTruncate: SVD did not converge on " << a.rows() << "x" << a.cols()
       << " matrix (norm " << a.norm() << ", largest/smallest singular value "
       << (sv.size() ? sv[0] : 0.0) << "/" << (sv.size() ? sv[sv.size() - 1] : 0.0) << ")";
    throw NumericalError(os.str());
  }
  const Eigen::VectorXd& s = svd.singularValues();
  TruncatedSVD out;
  const std::size_t keep = detail::truncationRank(s, chiMax, weightTol, out.discardedWeight);
  const auto k = static_cast<Eigen::Index>(keep);
  out.S.assign(s.data(), s.data() + keep);
  out.U = DenseTensor::fromMatrix(svd.matrixU().leftCols(k));
  out.V = DenseTensor::fromMatrix(svd.matrixV().leftCols(k).adjoint());
  return out;
}

inline TruncatedSVD svdTruncate(const DenseTensor& m, std::size_t chiMax, double weightTol) {
  if (m.rank() != 2) throw ValidationError("svdTruncate: input must be a matrix");
  return svdTruncateMatrix(m.matrix(m.dim(0), m.dim(1)), chiMax, weightTol);
}

/// Thin QR: m = Q R with Q an isometry.
inline std::pair<DenseTensor, DenseTensor> qr(const DenseTensor& m) {
  if (m.rank() != 2) throw ValidationError("qr: input must be a matrix");
  Eigen::MatrixXcd a = m.toMatrix();
  const Eigen::Index rows = a.rows(), cols = a.cols(), k = std::min(rows, cols);
  Eigen::HouseholderQR<Eigen::MatrixXcd> h(a);
  Eigen::MatrixXcd q = h.householderQ() * Eigen::MatrixXcd::Identity(rows, k);
  Eigen::MatrixXcd r = h.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  return {DenseTensor::fromMatrix(q), DenseTensor::fromMatrix(r)};
}

inline double hermiticityDefect(const Eigen::MatrixXcd& h) {
  return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

struct HermitianEigen {
  Eigen::VectorXd values;    // ascending
  Eigen::MatrixXcd vectors;  // columns
};

inline HermitianEigen eigh(const DenseTensor& h, double hermTol = 1e-10) {
  if (h.rank() != 2 || h.dim(0) != h.dim(1))
    throw ValidationError("eigh: input must be a square matrix");
  Eigen::MatrixXcd m = h.toMatrix();
  detail::throwIfNonFinite(m, "eigh input");
  if (double d = hermiticityDefect(m); d > hermTol)
    throw ValidationError("eigh: matrix is not Hermitian (defect " + std::to_string(d) + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()));
  if (es.info() != Eigen::Success) throw NumericalError("eigh: eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

/// exp(scale * h) for Hermitian h.
inline DenseTensor expmHermitian(const DenseTensor& h, cplx scale) {
  const HermitianEigen e = eigh(h);
  Eigen::VectorXcd d(e.values.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = std::exp(scale * e.values[i]);
  Eigen::MatrixXcd out = e.vectors * d.asDiagonal() * e.vectors.adjoint();
  detail::throwIfNonFinite(out, "expmHermitian");
  return DenseTensor::fromMatrix(out);
}

// ---------------------------------------------------------------------------
// JSON: {"shape": [...], "re": [...], "im": [...]} in storage order.

inline nlohmann::json toJson(const DenseTensor& t) {
  nlohmann::json j;
  j["shape"] = t.shape();
  std::vector<double> re, im;
  re.reserve(t.size());
  im.reserve(t.size());
  for (const auto& z : t.data()) {
    re.push_back(z.real());
    im.push_back(z.imag());
  }
  j["re"] = std::move(re);
  j["im"] = std::move(im);
  return j;
}

inline DenseTensor tensorFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("re") || !j.contains("im"))
    throw ValidationError("tensor JSON must have shape, re and im");
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto re = j.at("re").get<std::vector<double>>();
  auto im = j.at("im").get<std::vector<double>>();
  if (re.size() != im.size()) throw ValidationError("tensor JSON: re/im length mismatch");
  std::vector<cplx> data(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) data[i] = {re[i], im[i]};
  DenseTensor t(std::move(shape), std::move(data));
  if (!t.allFinite()) throw ValidationError("tensor JSON: non-finite entries");
  return t;
}

}  // namespace ticc
