#pragma once

// iTEBD: infinite gate layers applied to two-site iMPS, imaginary-time ground
// states, real-time evolution with step refinement and training-set
// generation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "gates.hpp"
#include "imps.hpp"
#include "models.hpp"
#include "tensor.hpp"

namespace ticc {

/// Truncations discarding more than this weight are followed by a full
/// re-canonicalization; below it the drift of the norm stays at the level of
/// the discarded weight.
inline constexpr double kRecanonicalizeWeight = 1e-10;

struct LayerResult {
  InfiniteMPS psi;
  double discardedWeight = 0.0;
  bool truncationWarning = false;  // discardedWeight > weightTol
};

/// Applies `gate` on every bond of the given parity. The bond to the left of
/// the updated pair keeps its weights; the middle bond is recomputed by SVD
/// and truncated to at most chiMax values (values whose tail weight stays
/// below weightTol are dropped too). Site tensors stay in right-canonical
/// form without inverting bond weights. Non-unitary gates are renormalized.
inline LayerResult applyGate(const InfiniteMPS& psi, const DenseTensor& gate, int parity,
                             std::size_t chiMax, double weightTol) {
  if (parity != 0 && parity != 1) throw ValidationError("applyGate: parity must be 0 or 1");
  const std::vector<double>& lambdaLeft = parity == 0 ? psi.bondBA : psi.bondAB;
  const DenseTensor& m2 = parity == 0 ? psi.siteB : psi.siteA;
  const auto chiL = static_cast<Eigen::Index>(lambdaLeft.size());
  const auto chiR = static_cast<Eigen::Index>(m2.dim(2));

  const RowMatrixXcd c = applyGateToCell(cellMatrix(psi, parity), gate);  // (chiL*4) x chiR
  RowMatrixXcd theta = c;
  for (Eigen::Index a = 0; a < chiL; ++a) theta.middleRows(4 * a, 4) *= lambdaLeft[a];
  const ConstRowMap thetaMat(theta.data(), 2 * chiL, 2 * chiR);
  TruncatedSVD svd = svdTruncateMatrix(thetaMat, chiMax, weightTol);

  double s2 = 0.0;
  for (double s : svd.S) s2 += s * s;
  const double norm = std::sqrt(s2);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericalError("applyGate: state vanished under the gate");
  const auto k = static_cast<Eigen::Index>(svd.S.size());

  std::vector<double> middle(svd.S.size());
  for (std::size_t i = 0; i < svd.S.size(); ++i) middle[i] = svd.S[i] / norm;
  DenseTensor newM2 = svd.V.reshape({static_cast<std::size_t>(k), 2, static_cast<std::size_t>(chiR)});
  const ConstRowMap cMat(c.data(), 2 * chiL, 2 * chiR);
  DenseTensor newM1({static_cast<std::size_t>(chiL), 2, static_cast<std::size_t>(k)});
  newM1.matrix(2 * chiL, k) = cMat * svd.V.matrix(k, 2 * chiR).adjoint() / norm;

  LayerResult out;
  out.discardedWeight = svd.discardedWeight;
  out.truncationWarning = svd.discardedWeight > weightTol;
  out.psi = psi;
  if (parity == 0) {
    out.psi.siteA = std::move(newM1);
    out.psi.siteB = std::move(newM2);
    out.psi.bondAB = std::move(middle);
  } else {
    out.psi.siteB = std::move(newM1);
    out.psi.siteA = std::move(newM2);
    out.psi.bondBA = std::move(middle);
  }
  if (svd.discardedWeight > kRecanonicalizeWeight) out.psi = canonicalize(out.psi);
  return out;
}

inline LayerResult applyLayer(const InfiniteMPS& psi, const GateLayer& layer, std::size_t chiMax,
                              double weightTol) {
  return applyGate(psi, layer.gate, layer.parity, chiMax, weightTol);
}

struct CircuitResult {
  InfiniteMPS psi;
  double maxDiscardedWeight = 0.0;
  double totalDiscardedWeight = 0.0;
  bool truncationWarning = false;
  // Sum of sqrt(discarded weight): bounds the distance to the untruncated state.
  double truncationDistance = 0.0;
};

/// Applies layers [begin, end) in order (or their adjoints in reverse order).
inline CircuitResult applyCircuit(const InfiniteMPS& psi, const ParamCircuit& c, std::size_t chiMax,
                                  double weightTol, bool adjoint = false, std::size_t begin = 0,
                                  std::size_t end = std::numeric_limits<std::size_t>::max()) {
  end = std::min(end, c.layers.size());
  CircuitResult out{psi, 0.0, 0.0, false, 0.0};
  auto step = [&](const GateLayer& l) {
    const DenseTensor g = adjoint ? DenseTensor::fromMatrix(Eigen::MatrixXcd(l.gate.toMatrix().adjoint())) : l.gate;
    LayerResult r = applyGate(out.psi, g, l.parity, chiMax, weightTol);
    out.psi = std::move(r.psi);
    out.maxDiscardedWeight = std::max(out.maxDiscardedWeight, r.discardedWeight);
    out.totalDiscardedWeight += r.discardedWeight;
    out.truncationDistance += std::sqrt(r.discardedWeight);
    out.truncationWarning = out.truncationWarning || r.truncationWarning;
  };
  if (!adjoint) {
    for (std::size_t l = begin; l < end; ++l) step(c.layers[l]);
  } else {
    for (std::size_t l = end; l-- > begin;) step(c.layers[l]);
  }
  return out;
}

/// Energy per site: (<bondEven> on parity-0 bonds + <bondOdd> on parity-1 bonds) / 2.
inline double energyDensity(const InfiniteMPS& psi, const UnitCellHamiltonian& h) {
  return 0.5 * (expectation2Site(psi, h.bondEven, 0).real() + expectation2Site(psi, h.bondOdd, 1).real());
}

struct EvolutionReport {
  int steps = 0;
  double finalStepSize = 0.0;
  double maxDiscardedWeight = 0.0;
  std::vector<std::pair<int, double>> energyTrace;
  bool converged = false;
  bool truncationWarning = false;
};

// ---------------------------------------------------------------------------
// Imaginary time.

struct GroundStateOptions {
  std::vector<double> schedule{0.1, 0.01, 1e-3, 1e-4, 1e-5};
  int blockSteps = 20;         // Strang steps between energy checks
  int maxStepsPerStage = 20000;
  double stageTol = 1e-11;     // |dE| per block that ends a stage
  double finalTol = 1e-9;      // |dE| between the last checks for convergence
  double weightTol = 1e-12;
  std::size_t initialChi = 2;
  std::uint64_t seed = 1;
};

/// Second-order imaginary-time iTEBD over a decreasing step schedule. Each
/// stage runs blocks of Strang steps e(d/2) [o(d) e(d)]... o(d) e(d/2) and
/// ends when the energy change per block falls below stageTol.
inline std::pair<InfiniteMPS, EvolutionReport> groundState(const UnitCellHamiltonian& h, std::size_t chiMax,
                                                           const GroundStateOptions& opts = {}) {
  if (opts.schedule.empty()) throw ValidationError("groundState: empty schedule");
  for (std::size_t i = 1; i < opts.schedule.size(); ++i)
    if (!(opts.schedule[i] < opts.schedule[i - 1])) throw ValidationError("groundState: schedule must decrease");
  if (chiMax < 1) throw ValidationError("groundState: chiMax must be >= 1");

  InfiniteMPS psi = randomIMPS(std::min(opts.initialChi, chiMax), opts.seed);
  EvolutionReport rep;
  double energy = energyDensity(psi, h);
  rep.energyTrace.emplace_back(0, energy);
  double lastChange = std::numeric_limits<double>::infinity();

  auto apply = [&](const DenseTensor& g, int parity) {
    LayerResult r = applyGate(psi, g, parity, chiMax, opts.weightTol);
    psi = std::move(r.psi);
    rep.maxDiscardedWeight = std::max(rep.maxDiscardedWeight, r.discardedWeight);
    rep.truncationWarning = rep.truncationWarning || r.truncationWarning;
  };

  for (double dtau : opts.schedule) {
    const DenseTensor eHalf = bondPropagator(h.bondEven, dtau / 2, true);
    const DenseTensor eFull = bondPropagator(h.bondEven, dtau, true);
    const DenseTensor oFull = bondPropagator(h.bondOdd, dtau, true);
    rep.finalStepSize = dtau;
    for (int done = 0; done < opts.maxStepsPerStage; done += opts.blockSteps) {
      apply(eHalf, 0);
      for (int s = 0; s < opts.blockSteps; ++s) {
        apply(oFull, 1);
        apply(s + 1 < opts.blockSteps ? eFull : eHalf, 0);
      }
      rep.steps += opts.blockSteps;
      psi = canonicalize(psi);
      const double e = energyDensity(psi, h);
      lastChange = std::abs(e - energy);
      energy = e;
      rep.energyTrace.emplace_back(rep.steps, energy);
      if (lastChange < opts.stageTol) break;
    }
  }
  rep.converged = lastChange < opts.finalTol;
  return {psi, rep};
}

// ---------------------------------------------------------------------------
// Real time.

struct EvolveOptions {
  double initialDt = 0.1;
  int maxRefinements = 8;
  double weightTol = 1e-12;
};

namespace detail {

inline std::pair<InfiniteMPS, CircuitResult> runTrotter(const InfiniteMPS& psi0, const UnitCellHamiltonian& h,
                                                        double t, int k, std::size_t chiMax, double weightTol) {
  const ParamCircuit c = trotterCircuit(h, {4, k, t});
  CircuitResult r = applyCircuit(psi0, c, chiMax, weightTol);
  InfiniteMPS psi = r.totalDiscardedWeight > 0.0 ? canonicalize(r.psi) : r.psi;
  return {std::move(psi), r};
}

}  // namespace detail

/// exp(-iHt)|psi0> with fourth-order Trotter steps, halving the step until
/// successive results have local fidelity >= 1 - tol. Truncation errors do not
/// shrink with the step and add up in amplitude, so (d1 + d2)^2 is added to the
/// tolerance, d being the summed sqrt of the discarded weights of a run.
inline std::pair<InfiniteMPS, EvolutionReport> evolveState(const InfiniteMPS& psi0, const UnitCellHamiltonian& h,
                                                           double t, std::size_t chiMax, double tol,
                                                           const EvolveOptions& opts = {}) {
  if (!(t >= 0.0)) throw ValidationError("evolveState: t must be >= 0");
  EvolutionReport rep;
  if (t == 0.0) {
    rep.converged = true;
    return {psi0, rep};
  }
  int k = std::max(1, static_cast<int>(std::ceil(t / opts.initialDt)));
  auto [prev, prevRun] = detail::runTrotter(psi0, h, t, k, chiMax, opts.weightTol);
  rep.steps += k;
  rep.maxDiscardedWeight = prevRun.maxDiscardedWeight;
  for (int refine = 0; refine < opts.maxRefinements; ++refine) {
    k *= 2;
    auto [cur, run] = detail::runTrotter(psi0, h, t, k, chiMax, opts.weightTol);
    rep.steps += k;
    rep.maxDiscardedWeight = std::max(rep.maxDiscardedWeight, run.maxDiscardedWeight);
    rep.truncationWarning = rep.truncationWarning || run.truncationWarning;
    const double f = localFidelity(prev, cur);
    prev = std::move(cur);
    rep.finalStepSize = t / k;
    const double d = prevRun.truncationDistance + run.truncationDistance;
    const double allowance = d * d;
    prevRun = run;
    if (f >= 1.0 - tol - allowance) {
      rep.converged = true;
      return {prev, rep};
    }
  }
  std::ostringstream msg;
  msg << "evolveState: Trotter refinement did not reach fidelity 1 - " << tol << " (final dt " << t / k << ")";
  throw ConvergenceError(msg.str());
}

struct TrainingPair {
  InfiniteMPS input;
  InfiniteMPS target;
  std::uint64_t seed = 0;
  EvolutionReport report;
};

/// Inputs randomIMPS(chiTrain, seedBase + k); targets their evolutions.
inline std::vector<TrainingPair> makeTrainingSet(const UnitCellHamiltonian& h, double t, std::size_t chiTrain,
                                                 int n, std::uint64_t seedBase, std::size_t chiMax,
                                                 double tol = 1e-10) {
  if (n < 1) throw ValidationError("makeTrainingSet: n must be >= 1");
  std::vector<TrainingPair> out;
  for (int k = 0; k < n; ++k) {
    const std::uint64_t seed = seedBase + static_cast<std::uint64_t>(k);
    InfiniteMPS in = randomIMPS(chiTrain, seed);
    auto [target, rep] = evolveState(in, h, t, chiMax, tol);
    out.push_back({std::move(in), std::move(target), seed, std::move(rep)});
  }
  return out;
}

}  // namespace ticc
