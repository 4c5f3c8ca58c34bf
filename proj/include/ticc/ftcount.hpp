#pragma once

// Clifford+R_z inventories of lowrz circuits and a Clifford+T cost model:
// T gates per qubit at synthesis precision eps, and the cost of circuits whose
// rotation angles carry an eps-sized synthesis error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "compile.hpp"
#include "errors.hpp"
#include "gates.hpp"
#include "io.hpp"

namespace ticc {

struct RzRotation {
  double angle = 0.0;        // reduced to (-pi, pi]
  Rational multiplicity;     // rotations per qubit per period
  std::size_t layer = 0;
  int slot = 0;              // 0: R_zz, 1: R_x on the left qubit, 2: R_x on the right qubit
  bool clifford = false;
};

struct RzInventory {
  std::vector<RzRotation> rotations;
  std::vector<bool> cliffordOnly;  // per layer

  Rational nonCliffordPerQubit() const {
    Rational r(0);
    for (const auto& x : rotations)
      if (!x.clifford) r = r + x.multiplicity;
    return r;
  }
};

/// Angle modulo 2 pi in (-pi, pi]; R_z(theta + 2 pi) differs by a global sign.
inline double reduceAngle(double theta) {
  double r = std::remainder(theta, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

/// Every lowrz layer contributes R_zz(theta1) = CNOT R_z CNOT on each bond of
/// its parity and R_x = H R_z H on each site; per qubit and period each of the
/// three rotations counts 1/2.
inline RzInventory extractRz(const ParamCircuit& c) {
  if (c.family != GateFamily::lowrz)
    throw UnsupportedFamilyError("extractRz: " + toString(c.family) +
                                 " circuits have no Clifford+Rz form here; optimize in the lowrz family");
  RzInventory inv;
  for (std::size_t l = 0; l < c.layers.size(); ++l) {
    const auto* p = std::get_if<LowRzParams>(&c.layers[l].params);
    if (p == nullptr) throw UnsupportedFamilyError("extractRz: layer " + std::to_string(l) + " is not a lowrz layer");
    bool onlyClifford = true;
    const double angles[3] = {p->theta1, p->theta2, p->theta3};
    for (int s = 0; s < 3; ++s) {
      const double a = reduceAngle(angles[s]);
      const bool cl = isCliffordAngle(a);
      onlyClifford = onlyClifford && cl;
      inv.rotations.push_back({a, Rational(1, 2), l, s, cl});
    }
    inv.cliffordOnly.push_back(onlyClifford);
  }
  return inv;
}

struct TCountModel {
  double slope = 3.0;
  double offset = 4.0;

  void validate() const {
    if (!(slope >= 0.0) || !std::isfinite(offset)) throw ValidationError("TCountModel: slope must be >= 0 and offset finite");
  }
  /// T gates for one R_z at precision eps: ceil(slope log2(1/eps) + offset), at least 0.
  double tCount(double eps) const {
    if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("TCountModel: eps must lie in (0, 1)");
    return std::max(0.0, std::ceil(slope * std::log2(1.0 / eps) + offset));
  }
};

inline double tCountPerQubit(const RzInventory& inv, double eps, const TCountModel& model = {}) {
  return inv.nonCliffordPerQubit().value() * model.tCount(eps);
}

/// Cost with each non-Clifford angle shifted by an independent U(-eps, eps)
/// draw (a stand-in for synthesis error, not exact Clifford+T matrices).
inline double perturbedCost(const ParamCircuit& c, double eps, const CostSpec& spec, std::uint64_t seed) {
  if (!(eps >= 0.0)) throw ValidationError("perturbedCost: eps must be >= 0");
  if (eps == 0.0) return evaluateCost(c, spec);
  const RzInventory inv = extractRz(c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-eps, eps);
  ParamCircuit out = c;
  for (std::size_t l = 0; l < c.layers.size(); ++l) {
    const auto& p = std::get<LowRzParams>(c.layers[l].params);
    double a[3] = {p.theta1, p.theta2, p.theta3};
    for (int s = 0; s < 3; ++s)
      if (!inv.rotations[3 * l + s].clifford) a[s] += u(rng);
    out.layers[l] = GateLayer::lowrz(c.layers[l].parity, {a[0], a[1], a[2]});
  }
  return evaluateCost(out, spec);
}

// ---------------------------------------------------------------------------
// Frontier tables.

struct FrontierInput {
  std::string id;
  std::string group;  // Pareto flags are computed within a group
  ParamCircuit circuit;
};

struct FrontierRow {
  std::string id;
  std::string group;
  std::string family;
  std::size_t layers = 0;
  double eps = 0.0;
  double tPerQubit = 0.0;
  double cost = 0.0;
  bool pareto = false;
  std::uint64_t seed = 0;
};

struct FrontierOptions {
  std::uint64_t seed = 1;
  int samples = 1;  // perturbation draws averaged per point
};

/// Marks rows not dominated within their group (no other row with
/// t <= and cost <= and one of them strictly smaller).
inline void markPareto(std::vector<FrontierRow>& rows) {
  for (auto& r : rows) {
    r.pareto = true;
    for (const auto& o : rows) {
      if (o.group != r.group) continue;
      const bool le = o.tPerQubit <= r.tPerQubit && o.cost <= r.cost;
      const bool lt = o.tPerQubit < r.tPerQubit || o.cost < r.cost;
      if (le && lt) {
        r.pareto = false;
        break;
      }
    }
  }
}

inline std::vector<FrontierRow> frontier(const std::vector<FrontierInput>& circuits, const std::vector<double>& epsGrid,
                                         const CostSpec& spec, const TCountModel& model = {},
                                         const FrontierOptions& opts = {}) {
  if (circuits.empty() || epsGrid.empty()) throw ValidationError("frontier: need at least one circuit and one eps");
  if (opts.samples < 1) throw ValidationError("frontier: samples must be >= 1");
  model.validate();
  std::vector<FrontierRow> rows;
  std::uint64_t stream = opts.seed;
  for (const auto& in : circuits) {
    const RzInventory inv = extractRz(in.circuit);
    for (double eps : epsGrid) {
      FrontierRow r{in.id, in.group, toString(in.circuit.family), in.circuit.layers.size(), eps,
                    tCountPerQubit(inv, eps, model), 0.0, false, stream};
      for (int s = 0; s < opts.samples; ++s)
        r.cost += perturbedCost(in.circuit, eps, spec, stream + static_cast<std::uint64_t>(s)) / opts.samples;
      stream += static_cast<std::uint64_t>(opts.samples);
      rows.push_back(std::move(r));
    }
  }
  markPareto(rows);
  return rows;
}

/// Smallest T per qubit in `group` among rows with cost <= level (inf if none).
inline double minTAtCost(const std::vector<FrontierRow>& rows, const std::string& group, double level) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : rows)
    if (r.group == group && r.cost <= level) best = std::min(best, r.tPerQubit);
  return best;
}

inline std::string frontierCsv(const std::vector<FrontierRow>& rows, const TCountModel& model) {
  std::string s = "circuitId,family,layers,eps,tPerQubit,cost,paretoFlag,modelSlope,modelOffset,seed\n";
  for (const auto& r : rows)
    s += r.id + "," + r.family + "," + std::to_string(r.layers) + "," + fmtReal(r.eps) + "," + fmtReal(r.tPerQubit) +
         "," + fmtReal(r.cost) + "," + (r.pareto ? "1" : "0") + "," + fmtReal(model.slope) + "," +
         fmtReal(model.offset) + "," + std::to_string(r.seed) + "\n";
  return s;
}

/// eps grid 10^-2, 10^-2.5, ..., 10^-7.
inline std::vector<double> defaultEpsGrid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(std::pow(10.0, -2.0 - 0.5 * i));
  return g;
}

}  // namespace ticc
