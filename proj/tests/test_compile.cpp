#include <gtest/gtest.h>

#include <random>

#include "ticc/analysis.hpp"
#include "ticc/compile.hpp"

using namespace ticc;

namespace {

ParamCircuit randomCircuit(GateFamily f, int depth, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  ParamCircuit c = ParamCircuit::identity(f, depth);
  std::vector<double> p(c.numParams());
  for (auto& x : p) x = u(rng);
  return c.withParameters(p);
}

CostSpec randomPairSpec(std::uint64_t seed, std::size_t chiIn = 2, std::size_t chiOut = 4) {
  CostSpec s = CostSpec::stateEvolution(randomIMPS(chiIn, seed), randomIMPS(chiOut, seed + 1));
  s.evalChiMax = 64;
  return s;
}

// Naive recontraction: both environments rebuilt from scratch for every layer.
std::vector<double> naiveGradient(const ParamCircuit& c, const CostSpec& spec, const GradientOptions& opts) {
  std::vector<double> grad(c.numParams(), 0.0);
  for (const auto& pair : spec.targets) {
    std::size_t off = 0;
    for (std::size_t l = 0; l < c.layers.size(); ++l) {
      const InfiniteMPS below = applyCircuit(pair.input, c, spec.evalChiMax, spec.weightTol, false, 0, l).psi;
      const InfiniteMPS above =
          applyCircuit(pair.target, c, spec.evalChiMax, spec.weightTol, true, l + 1, c.layers.size()).psi;
      const LayerGradient g = layerGradient({below, above, static_cast<int>(l), {}, {}}, c.layers[l], opts);
      for (std::size_t k = 0; k < g.grad.size(); ++k) grad[off + k] += g.grad[k] / spec.targets.size();
      off += g.grad.size();
    }
  }
  return grad;
}

}  // namespace

TEST(EvaluateCost, TrivialCases) {
  const InfiniteMPS psi = randomIMPS(3, 1);
  EXPECT_NEAR(evaluateCost(ParamCircuit::identity(GateFamily::su4, 2), CostSpec::stateEvolution(psi, psi)), 0.0, 1e-12);
  const CostSpec orth = CostSpec::stateEvolution(InfiniteMPS::basis(0, 0), InfiniteMPS::basis(1, 1));
  EXPECT_NEAR(evaluateCost(ParamCircuit::identity(GateFamily::su4, 1), orth), 1.0, 1e-14);
}

TEST(EvaluateCost, SelfConsistentTarget) {
  const ParamCircuit c = randomCircuit(GateFamily::su4, 2, 2);
  const InfiniteMPS in = randomIMPS(2, 3);
  const InfiniteMPS target = applyCircuit(in, c, 64, 0.0).psi;
  EXPECT_NEAR(evaluateCost(c, CostSpec::stateEvolution(in, target)), 0.0, 1e-9);
  const CostEvaluation e = evaluateCostDetailed(c, CostSpec::stateEvolution(in, target));
  EXPECT_GE(e.cost, -1e-9);
  EXPECT_EQ(e.perPair.size(), 1u);
}

TEST(EvaluateCost, BoundsOverRandomInstances) {
  for (int i = 0; i < 1000; ++i) {
    const ParamCircuit c = randomCircuit(i % 2 ? GateFamily::su4 : GateFamily::lowrz, 2, 100 + i, 3.0);
    const double v = evaluateCost(c, randomPairSpec(5000 + 2 * i, 1, 2));
    ASSERT_GE(v, -1e-9);
    ASSERT_LE(v, 1.0 + 1e-9);
  }
}

TEST(EvaluateCost, GlobalPhaseInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> a(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    ParamCircuit c = randomCircuit(GateFamily::su4, 2, 200 + i);
    const CostSpec spec = randomPairSpec(9000 + 2 * i, 1, 2);
    const double base = evaluateCost(c, spec);
    const std::size_t l = i % 2;
    c.layers[l] = GateLayer::raw(c.layers[l].parity, std::exp(cplx(0, a(rng))) * c.layers[l].gate);
    ASSERT_NEAR(evaluateCost(c, spec), base, 1e-10);
  }
}

TEST(EvaluateCost, TruncationEscalates) {
  CostSpec spec = randomPairSpec(11, 4, 4);
  spec.evalChiMax = 4;
  spec.maxDiscardedWeight = 1e-8;
  EXPECT_THROW(evaluateCost(randomCircuit(GateFamily::su4, 4, 12, 1.5), spec), TruncationError);
  spec.maxDiscardedWeight = 1.0;
  EXPECT_NO_THROW(evaluateCost(randomCircuit(GateFamily::su4, 4, 12, 1.5), spec));
}

TEST(CostSpec, Validation) {
  EXPECT_THROW(CostSpec{}.validate(), ValidationError);
  CostSpec gs = CostSpec::groundState(randomIMPS(2, 1));
  EXPECT_NO_THROW(gs.validate());
  gs.targets[0].input = InfiniteMPS::basis(1, 0);
  EXPECT_THROW(gs.validate(), ValidationError);
  CostSpec two = CostSpec::stateEvolution(randomIMPS(2, 1), randomIMPS(2, 2));
  two.targets.push_back(two.targets[0]);
  EXPECT_THROW(two.validate(), ValidationError);
}

TEST(LayerGradient, VanishesAtMinimum) {
  const ParamCircuit c = randomCircuit(GateFamily::su4, 1, 13);
  const InfiniteMPS in = randomIMPS(2, 14);
  const InfiniteMPS target = applyCircuit(in, c, 64, 0.0).psi;
  const LayerGradient g = layerGradient({in, target, 0, {}, {}}, c.layers[0]);
  double n2 = 0.0;
  for (double x : g.grad) n2 += x * x;
  EXPECT_LT(std::sqrt(n2), 1e-5);
  EXPECT_NEAR(g.cost, 0.0, 1e-10);
}

TEST(LayerGradient, MatchesCentralDifference) {
  for (GateFamily f : {GateFamily::su4, GateFamily::lowrz}) {
    const ParamCircuit c = randomCircuit(f, 1, 15);
    const CostSpec spec = randomPairSpec(16, 2, 4);
    const LayerGradient g =
        layerGradient({spec.targets[0].input, spec.targets[0].target, 0, {}, {}}, c.layers[0]);
    std::vector<double> p = c.parameters();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double h = 1e-5, keep = p[k];
      p[k] = keep + h;
      const double up = evaluateCost(c.withParameters(p), spec);
      p[k] = keep - h;
      const double dn = evaluateCost(c.withParameters(p), spec);
      p[k] = keep;
      const double cd = (up - dn) / (2 * h);
      if (std::abs(cd) > 1e-4) {
        EXPECT_LT(std::abs(g.grad[k] - cd), 1e-3 * std::abs(cd)) << k;
      }
    }
  }
}

TEST(LayerGradient, WarmEqualsColdWithFewerIterations) {
  long warmIt = 0, coldIt = 0;
  for (int i = 0; i < 5; ++i) {
    const ParamCircuit c = randomCircuit(GateFamily::su4, 1, 30 + i);
    const CostSpec spec = randomPairSpec(40 + 2 * i, 3, 4);
    const EnvironmentPair env{spec.targets[0].input, spec.targets[0].target, 0, {}, {}};
    GradientOptions cold;
    cold.start = StartMode::cold;
    const LayerGradient w = layerGradient(env, c.layers[0]);
    const LayerGradient k = layerGradient(env, c.layers[0], cold);
    for (std::size_t j = 0; j < w.grad.size(); ++j) EXPECT_NEAR(w.grad[j], k.grad[j], 1e-8);
    warmIt += w.perturbed.iterations;
    coldIt += k.perturbed.iterations;
  }
  EXPECT_LT(warmIt, coldIt);
}

TEST(SweepGradient, SingleLayerEqualsLayerGradient) {
  const ParamCircuit c = randomCircuit(GateFamily::su4, 1, 50);
  const CostSpec spec = randomPairSpec(51);
  const SweepResult s = sweepGradient(c, spec);
  const LayerGradient g = layerGradient({spec.targets[0].input, spec.targets[0].target, 0, {}, {}}, c.layers[0]);
  for (std::size_t k = 0; k < g.grad.size(); ++k) EXPECT_NEAR(s.grad[k], g.grad[k], 1e-12);
  EXPECT_EQ(s.layerApplications, 0);
}

TEST(SweepGradient, MatchesNaiveRecontraction) {
  for (GateFamily f : {GateFamily::su4, GateFamily::lowrz}) {
    const ParamCircuit c = randomCircuit(f, 3, 52);
    CostSpec spec = randomPairSpec(53, 2, 4);
    spec.evalChiMax = 16;
    const SweepResult s = sweepGradient(c, spec);
    const std::vector<double> naive = naiveGradient(c, spec, {});
    for (std::size_t k = 0; k < naive.size(); ++k) EXPECT_NEAR(s.grad[k], naive[k], 1e-9) << k;
    // Two applications per layer boundary, independent of L squared.
    EXPECT_EQ(s.layerApplications, 4);
  }
}

TEST(SweepGradient, EnvironmentReconstruction) {
  // Bonds stay below evalChiMax, so every layer sees the exact environments.
  const ParamCircuit c = randomCircuit(GateFamily::su4, 4, 54);
  CostSpec spec = randomPairSpec(55, 1, 8);
  spec.evalChiMax = 256;
  const SweepResult s = sweepGradient(c, spec);
  const double full = evaluateCost(c, spec);
  for (double lc : s.layerCosts) EXPECT_NEAR(lc, full, 1e-8 + 10 * s.maxDiscardedWeight);
}

TEST(SweepGradient, LinearOverPairs) {
  const ParamCircuit c = randomCircuit(GateFamily::su4, 2, 56);
  const CostSpec a = randomPairSpec(57), b = randomPairSpec(59);
  const CostSpec both = CostSpec::unitaryQml({a.targets[0], b.targets[0]});
  const SweepResult sa = sweepGradient(c, a), sb = sweepGradient(c, b), sab = sweepGradient(c, both);
  for (std::size_t k = 0; k < sab.grad.size(); ++k) EXPECT_NEAR(sab.grad[k], 0.5 * (sa.grad[k] + sb.grad[k]), 1e-12);
  EXPECT_NEAR(sab.cost, 0.5 * (sa.cost + sb.cost), 1e-12);
}

TEST(Lbfgs, Rosenbrock) {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    double v = 0.0;
    g.setZero(x.size());
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      const double a = x[i + 1] - x[i] * x[i], b = 1.0 - x[i];
      v += 100 * a * a + b * b;
      g[i] += -400 * a * x[i] - 2 * b;
      g[i + 1] += 200 * a;
    }
    return v;
  };
  Eigen::VectorXd x0(6);
  x0 << -1.2, 1.0, -1.2, 1.0, -1.2, 1.0;
  std::vector<double> trace;
  LbfgsOptions o;
  o.gradTol = 1e-10;
  o.costTol = 0.0;
  const LbfgsResult r = lbfgs(f, x0, o, [&](const LbfgsIterate& it, const Eigen::VectorXd&) { trace.push_back(it.f); });
  EXPECT_LT((r.x - Eigen::VectorXd::Ones(6)).norm(), 1e-8);
  EXPECT_FALSE(r.lineSearchFailed);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-12);
}

TEST(Lbfgs, RejectedRegionShrinksStep) {
  // Minimum at 3 but values beyond x = 2 are rejected; the optimizer stays feasible.
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    if (x[0] > 2.0) return std::numeric_limits<double>::infinity();
    g.resize(1);
    g[0] = 2 * (x[0] - 3);
    return (x[0] - 3) * (x[0] - 3);
  };
  Eigen::VectorXd x0(1);
  x0 << -5.0;
  LbfgsOptions o;
  o.maxIter = 50;
  const LbfgsResult r = lbfgs(f, x0, o);
  EXPECT_LE(r.x[0], 2.0);
  EXPECT_GT(r.x[0], 1.0);
}

TEST(Optimize, StartAtSolutionStopsQuickly) {
  const ParamCircuit c = randomCircuit(GateFamily::su4, 2, 60);
  const InfiniteMPS in = randomIMPS(2, 61);
  const CostSpec spec = CostSpec::stateEvolution(in, applyCircuit(in, c, 64, 0.0).psi);
  const auto [out, rep] = optimize(c, spec);
  EXPECT_LE(rep.iterations, 2);
  EXPECT_NEAR(rep.costTrace.back().trainCost, rep.costTrace.front().trainCost, 1e-10);
  EXPECT_LT(rep.costTrace.back().trainCost, 1e-9);
}

TEST(Optimize, GroundStateBeatsIdentityTenfold) {
  GroundStateOptions go;
  go.schedule = {0.1, 0.01, 1e-3};
  const auto [gs, grep] = groundState(tfim(1.0, 1.316), 32, go);
  CostSpec spec = CostSpec::groundState(gs);
  spec.evalChiMax = 32;
  const ParamCircuit init = ParamCircuit::identity(GateFamily::su4, 4);
  OptimizeOptions oo;
  oo.maxIter = 150;
  oo.testSet = spec;
  const auto [c, rep] = optimize(init, spec, oo);
  const double start = evaluateCost(init, spec);
  EXPECT_LE(rep.costTrace.back().trainCost, start / 10);
  EXPECT_NEAR(evaluateCost(c, spec), rep.costTrace.back().trainCost, 1e-8);
  for (std::size_t i = 1; i < rep.costTrace.size(); ++i) {
    EXPECT_LE(rep.costTrace[i].trainCost, rep.costTrace[i - 1].trainCost + 1e-12);
    ASSERT_TRUE(rep.costTrace[i].testCost.has_value());
    // Test set equals the training set; the two routes truncate at different
    // points of the circuit, so they agree to the truncation level only.
    EXPECT_NEAR(*rep.costTrace[i].testCost, rep.costTrace[i].trainCost, 1e-7 + 10 * rep.truncationMax);
  }
  const nlohmann::json j = toJson(rep);
  EXPECT_EQ(j["costTrace"].size(), rep.costTrace.size());
  const std::string csv = costTraceCsv(rep);
  EXPECT_EQ(csv.rfind("iteration,trainCost,testCost\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), rep.costTrace.size() + 1);
}
