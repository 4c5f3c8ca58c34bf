#pragma once

// Spin-chain Hamiltonians as two-site bond terms on a two-site unit cell, and
// Trotter circuits built from them.
//
// Single-site terms are split evenly between the two bonds touching a site,
// so H = sum_r (bondEven[2r, 2r+1] + bondOdd[2r+1, 2r+2]) and the energy per
// site is (<bondEven> + <bondOdd>) / 2.

#include <Eigen/Dense>

#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "gates.hpp"
#include "tensor.hpp"

namespace ticc {

struct UnitCellHamiltonian {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
  DenseTensor bondEven;
  DenseTensor bondOdd;
};

namespace detail {

inline DenseTensor hermitianTerm(const Eigen::Matrix4cd& m) {
  if (hermiticityDefect(m) > 1e-12) throw NumericalError("bond term is not Hermitian");
  return DenseTensor::fromMatrix(Eigen::Matrix4cd(0.5 * (m + m.adjoint())));
}

}  // namespace detail

/// -J sum Z Z - h sum X.
inline UnitCellHamiltonian tfim(double J, double h) {
  const Eigen::Matrix4cd bond = -J * pauli2("ZZ") - 0.5 * h * (pauli2("XI") + pauli2("IX"));
  const DenseTensor t = detail::hermitianTerm(bond);
  return {"tfim", {{"J", J}, {"h", h}}, t, t};
}

/// Staggered-fermion Thirring chain with sigma^+ = |0><1|:
///   hopping (i/2a)(s-_{i+1} s+_i - s-_i s+_{i+1}),
///   mass (m/2)(-1)^i (1 - Z_i), interaction (g/4a)(1 - Z_i)(1 - Z_{i+1}).
inline UnitCellHamiltonian thirring(double m, double g, double a = 1.0) {
  if (!(a > 0.0)) throw ValidationError("thirring: lattice spacing a must be positive");
  Eigen::Matrix4cd hop = Eigen::Matrix4cd::Zero();
  hop(1, 2) = cplx(0.0, 1.0 / (2.0 * a));   // |01><10|
  hop(2, 1) = cplx(0.0, -1.0 / (2.0 * a));  // -|10><01|
  const Eigen::Matrix4cd id = Eigen::Matrix4cd::Identity();
  const Eigen::Matrix4cd nL = id - pauli2("ZI"), nR = id - pauli2("IZ");
  const Eigen::Matrix4cd inter = (g / (4.0 * a)) * nL * nR;
  const Eigen::Matrix4cd mass = (m / 4.0) * (nL - nR);
  return {"thirring",
          {{"m", m}, {"g", g}, {"a", a}},
          detail::hermitianTerm(hop + inter + mass),
          detail::hermitianTerm(hop + inter - mass)};
}

/// Jx (XX + YY) + Jz ZZ.
inline UnitCellHamiltonian xxz(double Jx, double Jz) {
  const DenseTensor t = detail::hermitianTerm(Jx * (pauli2("XX") + pauli2("YY")) + Jz * pauli2("ZZ"));
  return {"xxz", {{"Jx", Jx}, {"Jz", Jz}}, t, t};
}

/// Bond term without its identity component (tr(h)/4 I), which only
/// contributes a global phase to evolution gates.
inline DenseTensor tracelessPart(const DenseTensor& h) {
  Eigen::MatrixXcd m = h.toMatrix();
  m -= (m.trace() / 4.0) * Eigen::MatrixXcd::Identity(4, 4);
  return DenseTensor::fromMatrix(m);
}

/// exp(-i tau h) (or exp(-tau h) when imaginary) with the identity part removed.
inline DenseTensor bondPropagator(const DenseTensor& h, double tau, bool imaginary = false) {
  return expmHermitian(tracelessPart(h), imaginary ? cplx(-tau, 0.0) : cplx(0.0, -tau));
}

// ---------------------------------------------------------------------------
// Trotter circuits.

struct TrotterSpec {
  int order = 2;
  int trotterNumber = 1;
  double totalTime = 0.0;

  void validate() const {
    if (order != 1 && order != 2 && order != 4) throw ValidationError("TrotterSpec: order must be 1, 2 or 4");
    if (trotterNumber < 1) throw ValidationError("TrotterSpec: Trotter number must be >= 1");
    if (!std::isfinite(totalTime)) throw ValidationError("TrotterSpec: time must be finite");
  }
};

/// Merged alternating depth of a Trotter circuit.
inline int trotterDepth(int order, int k) {
  switch (order) {
    case 1: return 2 * k;
    case 2: return 2 * k + 1;
    case 4: return 10 * k + 1;
    default: throw ValidationError("trotterDepth: order must be 1, 2 or 4");
  }
}

/// Suzuki parameter of the fourth-order fractal composition.
inline double suzukiP() { return 1.0 / (4.0 - std::cbrt(4.0)); }

/// Splitting sequence: (part, tau) with part 0 = first term applied (even
/// bonds, or the X field) and part 1 = the other term.
using SplitSequence = std::vector<std::pair<int, double>>;

inline SplitSequence splitSequence(const TrotterSpec& spec) {
  spec.validate();
  const double dt = spec.totalTime / spec.trotterNumber;
  SplitSequence seq;
  auto strang = [&seq](double x) {
    seq.emplace_back(0, x / 2);
    seq.emplace_back(1, x);
    seq.emplace_back(0, x / 2);
  };
  const double p = suzukiP();
  for (int s = 0; s < spec.trotterNumber; ++s) {
    if (spec.order == 1) {
      seq.emplace_back(0, dt);
      seq.emplace_back(1, dt);
    } else if (spec.order == 2) {
      strang(dt);
    } else {
      for (double x : {p * dt, p * dt, (1.0 - 4.0 * p) * dt, p * dt, p * dt}) strang(x);
    }
  }
  return seq;
}

/// Sums neighbouring entries of the same part (they commute).
inline SplitSequence mergeSplitSequence(const SplitSequence& seq) {
  SplitSequence out;
  for (const auto& [part, tau] : seq) {
    if (!out.empty() && out.back().first == part)
      out.back().second += tau;
    else
      out.emplace_back(part, tau);
  }
  return out;
}

/// Unmerged layer sequence (parities may repeat); mainly for checking merges.
inline ParamCircuit trotterSequenceCircuit(const UnitCellHamiltonian& h, const TrotterSpec& spec) {
  ParamCircuit c{GateFamily::su4, 0, {}};
  for (const auto& [part, tau] : splitSequence(spec))
    c.layers.push_back(GateLayer::raw(part, bondPropagator(part == 0 ? h.bondEven : h.bondOdd, tau)));
  return c;
}

/// Merged Trotter circuit of raw layers, first parity 0.
inline ParamCircuit trotterCircuit(const UnitCellHamiltonian& h, const TrotterSpec& spec) {
  ParamCircuit c{GateFamily::su4, 0, {}};
  for (const auto& [part, tau] : mergeSplitSequence(splitSequence(spec)))
    c.layers.push_back(GateLayer::raw(part, bondPropagator(part == 0 ? h.bondEven : h.bondOdd, tau)));
  c.validate();
  return c;
}

/// Trotter circuit with each layer converted to su4 parameters (principal log).
inline ParamCircuit trotterCircuitSu4(const UnitCellHamiltonian& h, const TrotterSpec& spec) {
  ParamCircuit raw = trotterCircuit(h, spec);
  ParamCircuit c{GateFamily::su4, 0, {}};
  for (const auto& l : raw.layers) c.layers.push_back(GateLayer::su4(l.parity, su4FromUnitary(l.gate)));
  return c;
}

/// TFIM Trotter circuit with H = H_ZZ + H_X split (field not distributed onto
/// bonds), expressed in the lowrz family. X blocks are applied first. Each
/// (X, ZZ) pair becomes a parity-0 layer (zz, x, x) and a parity-1 layer
/// (zz, 0, 0); a trailing X block becomes a parity-0 layer (0, x, x).
inline ParamCircuit tfimSplitTrotter(double J, double hField, const TrotterSpec& spec) {
  const SplitSequence seq = mergeSplitSequence(splitSequence(spec));
  ParamCircuit c{GateFamily::lowrz, 0, {}};
  // exp(-i tau H_X) = prod R_x(-2 h tau); exp(-i tau H_ZZ) = prod R_zz(-2 J tau).
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto [part, tau] = seq[i];
    if (part == 0) {
      const double x = -2.0 * hField * tau;
      if (i + 1 < seq.size()) {
        const double zz = -2.0 * J * seq[i + 1].second;
        c.layers.push_back(GateLayer::lowrz(0, {zz, x, x}));
        c.layers.push_back(GateLayer::lowrz(1, {zz, 0.0, 0.0}));
        ++i;
      } else {
        c.layers.push_back(GateLayer::lowrz(0, {0.0, x, x}));
      }
    } else {
      const double zz = -2.0 * J * tau;
      c.layers.push_back(GateLayer::lowrz(0, {zz, 0.0, 0.0}));
      c.layers.push_back(GateLayer::lowrz(1, {zz, 0.0, 0.0}));
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Config block: {"model": "tfim" | "thirring" | "xxz", "params": {...}}.

inline UnitCellHamiltonian modelFromJson(const nlohmann::json& j, const std::string& path = "model") {
  if (!j.is_object()) throw ConfigError(path, "must be an object");
  for (const auto& [k, v] : j.items())
    if (k != "model" && k != "params") throw ConfigError(path + "." + k, "unknown key");
  if (!j.contains("model") || !j.at("model").is_string()) throw ConfigError(path + ".model", "missing model name");
  const std::string name = j.at("model").get<std::string>();
  const nlohmann::json p = j.value("params", nlohmann::json::object());
  if (!p.is_object()) throw ConfigError(path + ".params", "must be an object");

  auto read = [&](const std::set<std::string>& allowed, const std::string& key, double dflt, bool required) {
    for (const auto& [k, v] : p.items())
      if (!allowed.count(k)) throw ConfigError(path + ".params." + k, "unknown key for model " + name);
    if (!p.contains(key)) {
      if (required) throw ConfigError(path + ".params." + key, "missing");
      return dflt;
    }
    if (!p.at(key).is_number()) throw ConfigError(path + ".params." + key, "must be a number");
    const double v = p.at(key).get<double>();
    if (!std::isfinite(v)) throw ConfigError(path + ".params." + key, "must be finite");
    return v;
  };
  if (name == "tfim") {
    const std::set<std::string> keys{"J", "h"};
    return tfim(read(keys, "J", 1.0, false), read(keys, "h", 0.0, true));
  }
  if (name == "thirring") {
    const std::set<std::string> keys{"m", "g", "a"};
    const double a = read(keys, "a", 1.0, false);
    if (!(a > 0.0)) throw ConfigError(path + ".params.a", "must be positive");
    return thirring(read(keys, "m", 0.0, true), read(keys, "g", 0.0, true), a);
  }
  if (name == "xxz") {
    const std::set<std::string> keys{"Jx", "Jz"};
    return xxz(read(keys, "Jx", 1.0, true), read(keys, "Jz", 0.0, true));
  }
  throw ConfigError(path + ".model", "unknown model '" + name + "' (expected tfim, thirring or xxz)");
}

inline nlohmann::json toJson(const UnitCellHamiltonian& h) { return {{"model", h.name}, {"params", h.params}}; }

}  // namespace ticc
