#pragma once

// Two-qubit gate families, translation-invariant layers and circuits.
//
// Conventions:
//   * two-qubit basis index = 2 * s_left + s_right (left qubit most significant);
//   * rotations R_P(theta) = exp(-i theta / 2 * P);
//   * parity 0 layers act on bonds [2r, 2r+1], parity 1 on [2r-1, 2r];
//   * SU(4) generators are the 15 two-qubit Paulis without II in
//     lexicographic order over {I, X, Y, Z}: IX, IY, IZ, XI, XX, ..., ZZ.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "tensor.hpp"

namespace ticc {

inline Eigen::Matrix2cd pauli(char p) {
  Eigen::Matrix2cd m;
  switch (p) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, cplx(0, -1), cplx(0, 1), 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: throw ValidationError(std::string("pauli: unknown label ") + p);
  }
  return m;
}

inline Eigen::Matrix4cd kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

inline Eigen::Matrix4cd pauli2(const char* label) { return kron(pauli(label[0]), pauli(label[1])); }

/// Label of SU(4) generator k (0-based), e.g. 4 -> "XX".
inline std::string su4GeneratorLabel(int k) {
  static constexpr char kLetters[] = {'I', 'X', 'Y', 'Z'};
  if (k < 0 || k >= 15) throw ValidationError("su4GeneratorLabel: index out of range");
  const int idx = k + 1;
  return {kLetters[idx / 4], kLetters[idx % 4]};
}

inline const std::array<Eigen::Matrix4cd, 15>& su4Generators() {
  static const std::array<Eigen::Matrix4cd, 15> gens = [] {
    std::array<Eigen::Matrix4cd, 15> g;
    for (int k = 0; k < 15; ++k) g[k] = pauli2(su4GeneratorLabel(k).c_str());
    return g;
  }();
  return gens;
}

struct Su4Params {
  std::array<double, 15> theta{};
  friend bool operator==(const Su4Params&, const Su4Params&) = default;
};

struct LowRzParams {
  double theta1 = 0.0;  // R_zz
  double theta2 = 0.0;  // R_x on the left qubit
  double theta3 = 0.0;  // R_x on the right qubit
  friend bool operator==(const LowRzParams&, const LowRzParams&) = default;
};

struct RawUnitary {
  friend bool operator==(const RawUnitary&, const RawUnitary&) = default;
};

using LayerParams = std::variant<Su4Params, LowRzParams, RawUnitary>;

enum class GateFamily { su4, lowrz };

inline std::string toString(GateFamily f) { return f == GateFamily::su4 ? "su4" : "lowrz"; }
inline GateFamily gateFamilyFromString(const std::string& s) {
  if (s == "su4") return GateFamily::su4;
  if (s == "lowrz") return GateFamily::lowrz;
  throw ValidationError("unknown gate family '" + s + "' (expected su4 or lowrz)");
}

/// exp(-i sum_k theta_k G_k).
inline DenseTensor buildSu4(const Su4Params& p) {
  Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
  for (int k = 0; k < 15; ++k) {
    if (!std::isfinite(p.theta[k])) throw ValidationError("buildSu4: non-finite angle");
    h += p.theta[k] * su4Generators()[k];
  }
  return expmHermitian(DenseTensor::fromMatrix(h), cplx(0.0, -1.0));
}

/// R_zz(theta1) (R_x(theta2) x R_x(theta3)).
inline DenseTensor buildLowRz(const LowRzParams& p) {
  if (!std::isfinite(p.theta1) || !std::isfinite(p.theta2) || !std::isfinite(p.theta3))
    throw ValidationError("buildLowRz: non-finite angle");
  auto rx = [](double t) {
    Eigen::Matrix2cd m;
    const double c = std::cos(t / 2), s = std::sin(t / 2);
    m << c, cplx(0, -s), cplx(0, -s), c;
    return m;
  };
  Eigen::Matrix4cd zz = Eigen::Matrix4cd::Zero();
  const cplx minus = std::exp(cplx(0, -p.theta1 / 2)), plus = std::exp(cplx(0, p.theta1 / 2));
  zz.diagonal() << minus, plus, plus, minus;
  return DenseTensor::fromMatrix(Eigen::Matrix4cd(zz * kron(rx(p.theta2), rx(p.theta3))));
}

inline double unitarityDefect(const DenseTensor& g) {
  const Eigen::MatrixXcd m = g.toMatrix();
  return (m.adjoint() * m - Eigen::MatrixXcd::Identity(m.rows(), m.cols())).norm();
}

/// Generator parameters of a 4x4 unitary via the principal logarithm; the
/// identity component (global phase) is dropped.
inline Su4Params su4FromUnitary(const DenseTensor& u) {
  if (u.rank() != 2 || u.dim(0) != 4 || u.dim(1) != 4)
    throw ValidationError("su4FromUnitary: expected a 4x4 matrix");
  if (unitarityDefect(u) > 1e-10) throw ValidationError("su4FromUnitary: matrix is not unitary");
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(u.toMatrix());
  const Eigen::MatrixXcd& q = schur.matrixU();
  const Eigen::MatrixXcd& t = schur.matrixT();
  Eigen::VectorXcd d(4);
  for (int i = 0; i < 4; ++i) d[i] = -std::arg(t(i, i));
  const Eigen::MatrixXcd h = q * d.asDiagonal() * q.adjoint();
  Su4Params p;
  for (int k = 0; k < 15; ++k) p.theta[k] = (su4Generators()[k] * h).trace().real() / 4.0;
  return p;
}

struct GateLayer {
  int parity = 0;
  DenseTensor gate = DenseTensor::identity(4);
  LayerParams params = RawUnitary{};

  static GateLayer su4(int parity, const Su4Params& p) { return {checkParity(parity), buildSu4(p), p}; }
  static GateLayer lowrz(int parity, const LowRzParams& p) {
    return {checkParity(parity), buildLowRz(p), p};
  }
  static GateLayer raw(int parity, DenseTensor u) {
    if (u.rank() != 2 || u.dim(0) != 4 || u.dim(1) != 4)
      throw ValidationError("GateLayer::raw: gate must be 4x4");
    if (const double d = unitarityDefect(u); d > 1e-10)
      throw ValidationError("GateLayer::raw: gate is not unitary (defect " + std::to_string(d) + ")");
    return {checkParity(parity), std::move(u), RawUnitary{}};
  }

  bool isRaw() const { return std::holds_alternative<RawUnitary>(params); }

  std::size_t numParams() const {
    if (std::holds_alternative<Su4Params>(params)) return 15;
    if (std::holds_alternative<LowRzParams>(params)) return 3;
    return 0;
  }

  std::vector<double> paramVector() const {
    if (const auto* s = std::get_if<Su4Params>(&params)) return {s->theta.begin(), s->theta.end()};
    if (const auto* l = std::get_if<LowRzParams>(&params)) return {l->theta1, l->theta2, l->theta3};
    return {};
  }

  /// Same family and parity with new parameters (from `values[0..numParams)`).
  GateLayer withParams(const double* values) const {
    if (std::holds_alternative<Su4Params>(params)) {
      Su4Params p;
      std::copy(values, values + 15, p.theta.begin());
      return su4(parity, p);
    }
    if (std::holds_alternative<LowRzParams>(params))
      return lowrz(parity, {values[0], values[1], values[2]});
    return *this;
  }

 private:
  static int checkParity(int p) {
    if (p != 0 && p != 1) throw ValidationError("GateLayer: parity must be 0 or 1");
    return p;
  }
};

struct ParamCircuit {
  GateFamily family = GateFamily::su4;
  int firstParity = 0;
  std::vector<GateLayer> layers;

  void validate() const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].parity != static_cast<int>((firstParity + l) % 2))
        throw ValidationError("ParamCircuit: layer " + std::to_string(l) +
                              " breaks parity alternation");
      const bool ok = layers[l].isRaw() ||
                      (family == GateFamily::su4 && std::holds_alternative<Su4Params>(layers[l].params)) ||
                      (family == GateFamily::lowrz && std::holds_alternative<LowRzParams>(layers[l].params));
      if (!ok) throw ValidationError("ParamCircuit: layer " + std::to_string(l) + " has the wrong family");
    }
  }

  std::size_t numParams() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.numParams();
    return n;
  }

  std::vector<double> parameters() const {
    std::vector<double> out;
    out.reserve(numParams());
    for (const auto& l : layers) {
      const auto p = l.paramVector();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  ParamCircuit withParameters(const std::vector<double>& values) const {
    if (values.size() != numParams())
      throw ValidationError("ParamCircuit::withParameters: expected " + std::to_string(numParams()) +
                            " values, got " + std::to_string(values.size()));
    ParamCircuit out = *this;
    std::size_t off = 0;
    for (auto& l : out.layers) {
      const std::size_t n = l.numParams();
      if (n > 0) l = l.withParams(values.data() + off);
      off += n;
    }
    return out;
  }

  /// L layers of the given family with all-zero parameters (identity gates).
  static ParamCircuit identity(GateFamily family, std::size_t depth, int firstParity = 0) {
    ParamCircuit c{family, firstParity, {}};
    for (std::size_t l = 0; l < depth; ++l) {
      const int p = static_cast<int>((firstParity + l) % 2);
      c.layers.push_back(family == GateFamily::su4 ? GateLayer::su4(p, {}) : GateLayer::lowrz(p, {}));
    }
    return c;
  }
};

/// Replaces runs of equal-parity layers by one raw layer holding their
/// product (later layers multiply from the left).
inline ParamCircuit mergeAdjacentLayers(const ParamCircuit& c) {
  ParamCircuit out{c.family, c.firstParity, {}};
  for (std::size_t i = 0; i < c.layers.size();) {
    std::size_t j = i + 1;
    while (j < c.layers.size() && c.layers[j].parity == c.layers[i].parity) ++j;
    if (j == i + 1) {
      out.layers.push_back(c.layers[i]);
    } else {
      Eigen::MatrixXcd u = c.layers[i].gate.toMatrix();
      for (std::size_t k = i + 1; k < j; ++k) u = c.layers[k].gate.toMatrix() * u;
      out.layers.push_back(GateLayer::raw(c.layers[i].parity, DenseTensor::fromMatrix(u)));
    }
    i = j;
  }
  if (!out.layers.empty()) out.firstParity = out.layers.front().parity;
  return out;
}

// ---------------------------------------------------------------------------
// Resource counting.

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (den == 0) throw ValidationError("Rational: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }

  friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// True when theta is an integer multiple of pi/2 within tol.
inline bool isCliffordAngle(double theta, double tol = 1e-12) {
  const double q = theta / (std::numbers::pi / 2.0);
  return std::abs(q - std::round(q)) * (std::numbers::pi / 2.0) <= tol;
}

struct ResourceCount {
  std::size_t su4Layers = 0;
  Rational cnotPerQubit;  // per qubit per period
  Rational rzPerQubit;    // per qubit per period
};

/// Each qubit touches one gate per layer and each gate is shared by two
/// qubits. CNOTs: at most 3 per gate. R_z: lowrz layers count their
/// non-Clifford rotations, other layers the 15-rotation SU(4) bound.
inline ResourceCount countResources(const ParamCircuit& c) {
  ResourceCount r;
  r.su4Layers = mergeAdjacentLayers(c).layers.size();
  r.cnotPerQubit = Rational(3 * static_cast<std::int64_t>(r.su4Layers), 2);
  Rational rz(0);
  for (const auto& layer : c.layers) {
    if (const auto* p = std::get_if<LowRzParams>(&layer.params)) {
      for (double t : {p->theta1, p->theta2, p->theta3})
        if (!isCliffordAngle(t)) rz = rz + Rational(1, 2);
    } else {
      rz = rz + Rational(15, 2);
    }
  }
  r.rzPerQubit = rz;
  return r;
}

// ---------------------------------------------------------------------------
// Circuit files: {gateFamily, firstParity, layers: [{parity, params|unitary}]}.

inline nlohmann::json toJson(const ParamCircuit& c) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : c.layers) {
    nlohmann::json j{{"parity", l.parity}};
    if (l.isRaw())
      j["unitary"] = toJson(l.gate);
    else
      j["params"] = l.paramVector();
    layers.push_back(std::move(j));
  }
  return {{"gateFamily", toString(c.family)}, {"firstParity", c.firstParity}, {"layers", layers}};
}

inline ParamCircuit circuitFromJson(const nlohmann::json& j) {
  ParamCircuit c;
  c.family = gateFamilyFromString(j.at("gateFamily").get<std::string>());
  c.firstParity = j.at("firstParity").get<int>();
  for (const auto& lj : j.at("layers")) {
    const int parity = lj.at("parity").get<int>();
    if (lj.contains("unitary")) {
      c.layers.push_back(GateLayer::raw(parity, tensorFromJson(lj.at("unitary"))));
      continue;
    }
    const auto p = lj.at("params").get<std::vector<double>>();
    if (c.family == GateFamily::su4) {
      if (p.size() != 15) throw ValidationError("circuit JSON: su4 layer needs 15 params");
      Su4Params s;
      std::copy(p.begin(), p.end(), s.theta.begin());
      c.layers.push_back(GateLayer::su4(parity, s));
    } else {
      if (p.size() != 3) throw ValidationError("circuit JSON: lowrz layer needs 3 params");
      c.layers.push_back(GateLayer::lowrz(parity, {p[0], p[1], p[2]}));
    }
  }
  c.validate();
  return c;
}

}  // namespace ticc
