#pragma once

// Variational compilation of infinite gate layers: local-infidelity costs,
// environment sweeps, warm-started finite-difference gradients and the
// L-BFGS driver.

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "evolve.hpp"
#include "gates.hpp"
#include "imps.hpp"
#include "io.hpp"
#include "lbfgs.hpp"

namespace ticc {

enum class CostKind { groundState, stateEvolution, unitaryQml };

inline std::string toString(CostKind k) {
  switch (k) {
    case CostKind::groundState: return "groundState";
    case CostKind::stateEvolution: return "stateEvolution";
    case CostKind::unitaryQml: return "unitaryQml";
  }
  return "?";
}

struct TargetPair {
  InfiniteMPS input;
  InfiniteMPS target;
};

struct CostSpec {
  CostKind kind = CostKind::stateEvolution;
  std::vector<TargetPair> targets;
  std::size_t evalChiMax = 128;
  double weightTol = 1e-12;
  double maxDiscardedWeight = 1e-6;  // larger truncations raise TruncationError
  double eigTol = 1e-12;

  void validate() const {
    if (targets.empty()) throw ValidationError("CostSpec: no targets");
    if (kind != CostKind::unitaryQml && targets.size() != 1)
      throw ValidationError("CostSpec: " + toString(kind) + " takes exactly one target");
    if (evalChiMax < 1) throw ValidationError("CostSpec: evalChiMax must be >= 1");
    for (const auto& p : targets) {
      p.input.validate();
      p.target.validate();
    }
    if (kind == CostKind::groundState &&
        std::abs(localFidelity(targets[0].input, InfiniteMPS::basis(0, 0)) - 1.0) > 1e-10)
      throw ValidationError("CostSpec: ground-state compilation starts from the |0> product state");
  }

  static CostSpec groundState(InfiniteMPS target) {
    return {CostKind::groundState, {{InfiniteMPS::basis(0, 0), std::move(target)}}};
  }
  static CostSpec stateEvolution(InfiniteMPS phi0, InfiniteMPS target) {
    return {CostKind::stateEvolution, {{std::move(phi0), std::move(target)}}};
  }
  static CostSpec unitaryQml(std::vector<TargetPair> pairs) { return {CostKind::unitaryQml, std::move(pairs)}; }
};

struct CostEvaluation {
  double cost = 0.0;
  std::vector<double> perPair;
  double maxDiscardedWeight = 0.0;
};

namespace detail {

inline void checkTruncation(double weight, const CostSpec& spec) {
  if (weight > spec.maxDiscardedWeight) {
    std::ostringstream os;
    os << "discarded weight " << weight << " exceeds the limit " << spec.maxDiscardedWeight
       << " at evalChiMax " << spec.evalChiMax;
    throw TruncationError(os.str(), weight);
  }
}

}  // namespace detail

/// Mean over pairs of 1 - |lambda0(V|phi_i>, |psi_i>)|^2.
inline CostEvaluation evaluateCostDetailed(const ParamCircuit& c, const CostSpec& spec) {
  c.validate();
  if (spec.targets.empty()) throw ValidationError("evaluateCost: no targets");
  CostEvaluation out;
  for (const auto& p : spec.targets) {
    const CircuitResult r = applyCircuit(p.input, c, spec.evalChiMax, spec.weightTol);
    out.maxDiscardedWeight = std::max(out.maxDiscardedWeight, r.maxDiscardedWeight);
    detail::checkTruncation(r.maxDiscardedWeight, spec);
    const EigenResult e = leadingEigenvalue(TransferOperator(p.target, r.psi), nullptr, spec.eigTol);
    out.perPair.push_back(1.0 - std::norm(e.value));
  }
  for (double v : out.perPair) out.cost += v / static_cast<double>(out.perPair.size());
  return out;
}

inline double evaluateCost(const ParamCircuit& c, const CostSpec& spec) { return evaluateCostDetailed(c, spec).cost; }

// ---------------------------------------------------------------------------
// Layer-local gradients.

/// States below (phiTilde = U_{l-1}...U_0 |phi>) and above
/// (psiTilde = U_{l+1}^dagger...U_{L-1}^dagger |psi>) layer l, so that
/// <psi|V|phi> per cell is the leading eigenvalue of the transfer operator
/// between psiTilde and U_l phiTilde.
struct EnvironmentPair {
  InfiniteMPS phiTilde;
  InfiniteMPS psiTilde;
  int layerIndex = 0;
  Eigen::VectorXcd warmVector;  // right eigenvector of the unperturbed operator
  Eigen::VectorXcd warmLeft;    // left eigenvector of the unperturbed operator
};

enum class StartMode { warm, cold };

struct GradientOptions {
  double h = 1e-7;
  StartMode start = StartMode::warm;
  double eigTol = 1e-12;
};

struct EigenStats {
  int solves = 0;
  long iterations = 0;
  double mean() const { return solves == 0 ? 0.0 : static_cast<double>(iterations) / solves; }
  EigenStats& operator+=(const EigenStats& o) {
    solves += o.solves;
    iterations += o.iterations;
    return *this;
  }
};

struct LayerGradient {
  std::vector<double> grad;
  double cost = 0.0;
  std::complex<double> lambda;
  Eigen::VectorXcd right;
  Eigen::VectorXcd left;
  EigenStats perturbed;  // solves at shifted parameters only
};

/// Forward differences (C(theta + h e_k) - C(theta)) / h of the layer-local
/// cost. Every shifted eigenvalue is evaluated as
///   lambda' = lambda + <l, (T' - T) r'> + <rho, r' - r>,
/// with l, r the unperturbed left/right eigenvectors (<l, r> = 1, <l, r'> = 1)
/// and rho = T^dagger l - conj(lambda) l, which avoids subtracting two nearly
/// equal eigenvalues. In warm mode the shifted solves start from r.
inline LayerGradient layerGradient(const EnvironmentPair& env, const GateLayer& layer,
                                   const GradientOptions& opts = {}) {
  if (!(opts.h > 0.0)) throw ValidationError("layerGradient: h must be positive");
  const bool warm = opts.start == StartMode::warm;
  const RowMatrixXcd bra = cellMatrix(env.psiTilde, layer.parity);
  const RowMatrixXcd phiCell = cellMatrix(env.phiTilde, layer.parity);
  const TransferOperator t(bra, applyGateToCell(phiCell, layer.gate));

  LayerGradient out;
  const Eigen::VectorXcd* rStart = warm && env.warmVector.size() == t.dim() ? &env.warmVector : nullptr;
  const Eigen::VectorXcd* lStart = warm && env.warmLeft.size() == t.dim() ? &env.warmLeft : nullptr;
  Eigen::VectorXcd r = leadingEigenvalue(t, rStart, opts.eigTol).vector;
  const Eigen::VectorXcd l = leadingLeftEigenvalue(t, lStart, opts.eigTol).vector;
  out.right = r;
  out.left = l;

  const std::complex<double> lr = l.dot(r);
  if (std::abs(lr) < 1e-14) throw NumericalError("layerGradient: left and right eigenvectors are orthogonal");
  r /= lr;
  Eigen::VectorXcd tr, tl;
  t.apply(r, tr);
  const std::complex<double> lambda = l.dot(tr);
  t.applyAdjoint(l, tl);
  const Eigen::VectorXcd rho = tl - std::conj(lambda) * l;
  out.lambda = lambda;
  out.cost = 1.0 - std::norm(lambda);

  std::vector<double> theta = layer.paramVector();
  out.grad.assign(theta.size(), 0.0);
  Eigen::VectorXcd tdr;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double keep = theta[k];
    theta[k] = keep + opts.h;
    const DenseTensor shifted = layer.withParams(theta.data()).gate;
    theta[k] = keep;
    const TransferOperator tp(bra, applyGateToCell(phiCell, shifted));
    const EigenResult e = leadingEigenvalue(tp, warm ? &out.right : nullptr, opts.eigTol);
    ++out.perturbed.solves;
    out.perturbed.iterations += e.iterations;

    Eigen::VectorXcd rp = e.vector;
    const std::complex<double> lrp = l.dot(rp);
    if (std::abs(lrp) < 1e-14) throw NumericalError("layerGradient: shifted eigenvector lost overlap");
    rp /= lrp;
    const TransferOperator td(bra, applyGateToCell(phiCell, shifted - layer.gate));
    td.apply(rp, tdr);
    const std::complex<double> delta = l.dot(tdr) + rho.dot(rp - r);
    out.grad[k] = -(2.0 * (std::conj(lambda) * delta).real() + std::norm(delta)) / opts.h;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep over all layers.

/// Eigenvectors from the previous sweep, indexed [pair][layer].
struct GradientCache {
  std::vector<std::vector<Eigen::VectorXcd>> right;
  std::vector<std::vector<Eigen::VectorXcd>> left;
};

struct SweepResult {
  double cost = 0.0;                // full-circuit cost (top layer)
  std::vector<double> grad;         // mean over pairs, circuit parameter order
  std::vector<double> layerCosts;   // layer-local cost at every sweep position
  double maxDiscardedWeight = 0.0;
  EigenStats perturbed;
  int layerApplications = 0;
};

/// One bottom-up pass per training pair. The states above each layer are
/// built once from the top (L - 1 adjoint layer applications) and cached;
/// the state below is advanced one layer at a time. Both are exact copies of
/// what a from-scratch contraction would produce, so truncation enters only
/// through evalChiMax.
inline SweepResult sweepGradient(const ParamCircuit& c, const CostSpec& spec, const GradientOptions& opts = {},
                                 GradientCache* cache = nullptr) {
  c.validate();
  if (spec.targets.empty()) throw ValidationError("sweepGradient: no targets");
  SweepResult out;
  const std::size_t L = c.layers.size();
  const double nPairs = static_cast<double>(spec.targets.size());
  out.grad.assign(c.numParams(), 0.0);
  out.layerCosts.assign(L, 0.0);
  if (L == 0) {
    out.cost = evaluateCost(c, spec);
    return out;
  }
  if (cache != nullptr) {
    cache->right.resize(spec.targets.size(), std::vector<Eigen::VectorXcd>(L));
    cache->left.resize(spec.targets.size(), std::vector<Eigen::VectorXcd>(L));
  }

  auto track = [&](const LayerResult& r) {
    out.maxDiscardedWeight = std::max(out.maxDiscardedWeight, r.discardedWeight);
    ++out.layerApplications;
    detail::checkTruncation(r.discardedWeight, spec);
  };

  for (std::size_t p = 0; p < spec.targets.size(); ++p) {
    const TargetPair& pair = spec.targets[p];
    std::vector<InfiniteMPS> above(L);
    above[L - 1] = pair.target;
    for (std::size_t l = L - 1; l-- > 0;) {
      const GateLayer& up = c.layers[l + 1];
      const DenseTensor adj = DenseTensor::fromMatrix(Eigen::MatrixXcd(up.gate.toMatrix().adjoint()));
      LayerResult r = applyGate(above[l + 1], adj, up.parity, spec.evalChiMax, spec.weightTol);
      track(r);
      above[l] = std::move(r.psi);
    }
    InfiniteMPS below = pair.input;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < L; ++l) {
      const GateLayer& layer = c.layers[l];
      EnvironmentPair env{below, above[l], static_cast<int>(l), {}, {}};
      if (cache != nullptr) {
        env.warmVector = cache->right[p][l];
        env.warmLeft = cache->left[p][l];
      }
      LayerGradient g = layerGradient(env, layer, opts);
      for (std::size_t k = 0; k < g.grad.size(); ++k) out.grad[offset + k] += g.grad[k] / nPairs;
      offset += g.grad.size();
      out.layerCosts[l] += g.cost / nPairs;
      out.perturbed += g.perturbed;
      if (cache != nullptr) {
        cache->right[p][l] = std::move(g.right);
        cache->left[p][l] = std::move(g.left);
      }
      if (l + 1 < L) {
        LayerResult r = applyLayer(below, layer, spec.evalChiMax, spec.weightTol);
        track(r);
        below = std::move(r.psi);
      }
    }
  }
  out.cost = out.layerCosts.back();
  return out;
}

// ---------------------------------------------------------------------------
// Optimization driver.

struct CostTraceEntry {
  int iteration = 0;
  double trainCost = 0.0;
  std::optional<double> testCost;
};

struct CompilationReport {
  std::vector<CostTraceEntry> costTrace;
  std::vector<double> finalParams;
  std::vector<double> gradientNormTrace;
  double truncationMax = 0.0;
  double wallTime = 0.0;  // seconds
  int evaluations = 0;
  int iterations = 0;
  bool lineSearchFailed = false;
  std::string stopReason;
  EigenStats perturbed;
};

struct OptimizeOptions {
  int maxIter = 2000;
  double gradTol = 1e-9;
  double costTol = 1e-12;
  double h = 1e-7;
  int memory = 10;
  StartMode start = StartMode::warm;
  std::optional<CostSpec> testSet;  // evaluated every iteration, never used in updates
  std::function<void(const CostTraceEntry&)> onIteration;
};

/// L-BFGS over all circuit parameters. Trial points whose evaluation fails
/// (truncation above the limit, eigensolver failure) count as +inf and make
/// the line search shrink the step.
inline std::pair<ParamCircuit, CompilationReport> optimize(const ParamCircuit& c0, const CostSpec& spec,
                                                           const OptimizeOptions& opts = {}) {
  c0.validate();
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  CompilationReport rep;
  GradientCache cache;
  GradientOptions gopts{opts.h, opts.start, spec.eigTol};
  bool first = true;

  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) -> double {
    const ParamCircuit c = c0.withParameters(std::vector<double>(x.data(), x.data() + x.size()));
    SweepResult s;
    if (first) {
      first = false;
      s = sweepGradient(c, spec, gopts, opts.start == StartMode::warm ? &cache : nullptr);
    } else {
      try {
        s = sweepGradient(c, spec, gopts, opts.start == StartMode::warm ? &cache : nullptr);
      } catch (const TruncationError&) {
        return std::numeric_limits<double>::infinity();
      } catch (const EigensolverError&) {
        return std::numeric_limits<double>::infinity();
      } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();
      }
    }
    rep.truncationMax = std::max(rep.truncationMax, s.maxDiscardedWeight);
    rep.perturbed += s.perturbed;
    grad = Eigen::Map<const Eigen::VectorXd>(s.grad.data(), static_cast<Eigen::Index>(s.grad.size()));
    return s.cost;
  };

  auto onIterate = [&](const LbfgsIterate& it, const Eigen::VectorXd& x) {
    CostTraceEntry e{it.iteration, it.f, std::nullopt};
    if (opts.testSet) {
      const ParamCircuit c = c0.withParameters(std::vector<double>(x.data(), x.data() + x.size()));
      e.testCost = evaluateCost(c, *opts.testSet);
    }
    rep.costTrace.push_back(e);
    rep.gradientNormTrace.push_back(it.gradNorm);
    if (opts.onIteration) opts.onIteration(e);
  };

  LbfgsOptions lo;
  lo.memory = opts.memory;
  lo.maxIter = opts.maxIter;
  lo.gradTol = opts.gradTol;
  lo.costTol = opts.costTol;
  const std::vector<double> p0 = c0.parameters();
  const LbfgsResult res = lbfgs(objective, Eigen::Map<const Eigen::VectorXd>(p0.data(), static_cast<Eigen::Index>(p0.size())), lo, onIterate);

  rep.finalParams.assign(res.x.data(), res.x.data() + res.x.size());
  rep.evaluations = res.evaluations;
  rep.iterations = res.iterations;
  rep.lineSearchFailed = res.lineSearchFailed;
  rep.stopReason = res.stopReason;
  rep.wallTime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {c0.withParameters(rep.finalParams), rep};
}

inline nlohmann::json toJson(const CompilationReport& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& e : r.costTrace) {
    nlohmann::json row{{"iteration", e.iteration}, {"trainCost", jsonReal(e.trainCost)}};
    row["testCost"] = e.testCost ? jsonReal(*e.testCost) : nlohmann::json(nullptr);
    trace.push_back(row);
  }
  nlohmann::json grads = nlohmann::json::array();
  for (double g : r.gradientNormTrace) grads.push_back(jsonReal(g));
  return {{"costTrace", trace},
          {"finalParams", r.finalParams},
          {"gradientNormTrace", grads},
          {"truncationMax", r.truncationMax},
          {"wallTime", r.wallTime},
          {"evaluations", r.evaluations},
          {"iterations", r.iterations},
          {"lineSearchFailed", r.lineSearchFailed},
          {"stopReason", r.stopReason},
          {"meanPerturbedArnoldiIterations", r.perturbed.mean()}};
}

/// iteration,trainCost,testCost (empty when no test set).
inline std::string costTraceCsv(const CompilationReport& r) {
  std::string s = "iteration,trainCost,testCost\n";
  for (const auto& e : r.costTrace)
    s += std::to_string(e.iteration) + "," + fmtReal(e.trainCost) + "," + (e.testCost ? fmtReal(*e.testCost) : "") + "\n";
  return s;
}

}  // namespace ticc
