#pragma once

// Config-driven studies behind the command-line tool: strict config parsing,
// the six experiments and their CSV/JSON writers.

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "analysis.hpp"
#include "compile.hpp"
#include "errors.hpp"
#include "evolve.hpp"
#include "finite.hpp"
#include "ftcount.hpp"
#include "gates.hpp"
#include "imps.hpp"
#include "io.hpp"
#include "models.hpp"

namespace ticc {

inline constexpr const char* kToolVersion = "0.1.0";

/// Failure inside a named stage of an experiment.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what) : Error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// ---------------------------------------------------------------------------
// Config.

struct CircuitBlock {
  GateFamily family = GateFamily::su4;
  std::vector<int> layers{4};
  std::string init = "identity";  // identity | trotter1 | trotter2
  std::string file;               // finite-validate: learned circuit to load
  bool operator==(const CircuitBlock&) const = default;
};

struct EvolveBlock {
  std::size_t chiMax = 64;
  double tol = 1e-10;
  double t = 1.0;
  std::string initialState = "neel10";  // neel10 | neel01 | zero | plus
  std::size_t evalChiMax = 64;
  double weightTol = 1e-12;
  double maxDiscardedWeight = 1e-6;
  bool operator==(const EvolveBlock&) const = default;
};

struct OptimizeBlock {
  int maxIter = 2000;
  double gradTol = 1e-9;
  double costTol = 1e-12;
  double h = 1e-7;
  int memory = 10;
  bool operator==(const OptimizeBlock&) const = default;
};

struct DataBlock {
  int nTrain = 4;
  std::size_t chiTrain = 2;
  int nTest = 10;
  std::size_t chiTest = 2;
  std::vector<int> nTrainList{1, 2, 3, 4};
  std::vector<std::size_t> chiTrainList{1, 2};
  bool operator==(const DataBlock&) const = default;
};

struct TcountBlock {
  std::vector<double> epsGrid = defaultEpsGrid();
  double slope = 3.0;
  double offset = 4.0;
  std::vector<int> optimizedTrotterNumbers{1, 2, 3, 4};
  std::vector<int> trotterOrders{1, 2, 4};
  int maxTrotterNumber = 12;
  int samples = 4;
  double costLevel = 1e-4;
  bool operator==(const TcountBlock&) const = default;
};

struct FiniteBlock {
  std::vector<int> sizes{8, 10, 12};
  int haarStates = 10;
  int trotterOrder = 2;
  bool operator==(const FiniteBlock&) const = default;
};

struct FitBlock {
  double lMin = 0.0;
  bool operator==(const FitBlock&) const = default;
};

struct ExperimentConfig {
  std::string experiment;
  nlohmann::json model;
  CircuitBlock circuit;
  EvolveBlock evolve;
  OptimizeBlock optimize;
  DataBlock data;
  TcountBlock tcount;
  FiniteBlock finite;
  FitBlock fit;
  std::uint64_t seed = 1;
  std::string output = "out";

  bool operator==(const ExperimentConfig&) const = default;

  UnitCellHamiltonian hamiltonian() const { return modelFromJson(model, "model"); }
};

inline const std::vector<std::string>& experimentNames() {
  static const std::vector<std::string> names{"ground-state",  "state-evolution", "unitary-compress",
                                              "tcount",        "finite-validate", "generalization"};
  return names;
}

namespace detail {

/// Reads declared keys of one JSON object and rejects everything else.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const nlohmann::json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<long long>() < 0) throw ConfigError(field(key), "expected a non-negative integer");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
      }
      out = v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(key), std::string("wrong type (") + e.what() + ")");
    }
  }

  const nlohmann::json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace detail

/// Range checks that need no computation; field paths in every error.
inline void validate(const ExperimentConfig& c) {
  using detail::require;
  const auto& names = experimentNames();
  require(std::find(names.begin(), names.end(), c.experiment) != names.end(), "experiment",
          "unknown experiment '" + c.experiment + "'");
  (void)c.hamiltonian();
  require(!c.circuit.layers.empty(), "circuit.layers", "need at least one depth");
  for (int l : c.circuit.layers) require(l >= 1 && l <= 200, "circuit.layers", "depths must lie in [1, 200]");
  require(c.circuit.init == "identity" || c.circuit.init == "trotter1" || c.circuit.init == "trotter2", "circuit.init",
          "expected identity, trotter1 or trotter2");
  if (!c.circuit.file.empty())
    require(std::filesystem::exists(c.circuit.file), "circuit.file", "file not found: " + c.circuit.file);
  require(c.evolve.chiMax >= 1 && c.evolve.chiMax <= 1024, "evolve.chiMax", "must lie in [1, 1024]");
  require(c.evolve.evalChiMax >= 1 && c.evolve.evalChiMax <= 1024, "evolve.evalChiMax", "must lie in [1, 1024]");
  require(c.evolve.tol > 0.0 && c.evolve.tol < 1.0, "evolve.tol", "must lie in (0, 1)");
  require(c.evolve.t >= 0.0, "evolve.t", "must be >= 0");
  require(c.evolve.weightTol >= 0.0, "evolve.weightTol", "must be >= 0");
  require(c.evolve.maxDiscardedWeight > 0.0, "evolve.maxDiscardedWeight", "must be > 0");
  require(c.evolve.initialState == "neel10" || c.evolve.initialState == "neel01" || c.evolve.initialState == "zero" ||
              c.evolve.initialState == "plus",
          "evolve.initialState", "expected neel10, neel01, zero or plus");
  require(c.optimize.maxIter >= 0, "optimize.maxIter", "must be >= 0");
  require(c.optimize.gradTol >= 0.0, "optimize.gradTol", "must be >= 0");
  require(c.optimize.costTol >= 0.0, "optimize.costTol", "must be >= 0");
  require(c.optimize.h > 0.0 && c.optimize.h < 1.0, "optimize.h", "must lie in (0, 1)");
  require(c.optimize.memory >= 1, "optimize.memory", "must be >= 1");
  require(c.data.nTrain >= 1, "data.nTrain", "must be >= 1");
  require(c.data.nTest >= 1, "data.nTest", "must be >= 1");
  require(c.data.chiTrain >= 1, "data.chiTrain", "must be >= 1");
  require(c.data.chiTest >= 1, "data.chiTest", "must be >= 1");
  require(!c.data.nTrainList.empty(), "data.nTrainList", "must not be empty");
  for (int n : c.data.nTrainList) require(n >= 1, "data.nTrainList", "entries must be >= 1");
  require(!c.data.chiTrainList.empty(), "data.chiTrainList", "must not be empty");
  for (std::size_t x : c.data.chiTrainList) require(x >= 1, "data.chiTrainList", "entries must be >= 1");
  require(!c.tcount.epsGrid.empty(), "tcount.epsGrid", "must not be empty");
  for (double e : c.tcount.epsGrid) require(e > 0.0 && e < 1.0, "tcount.epsGrid", "entries must lie in (0, 1)");
  require(c.tcount.slope >= 0.0, "tcount.slope", "must be >= 0");
  for (int k : c.tcount.optimizedTrotterNumbers) require(k >= 1, "tcount.optimizedTrotterNumbers", "entries must be >= 1");
  for (int o : c.tcount.trotterOrders) require(o == 1 || o == 2 || o == 4, "tcount.trotterOrders", "orders are 1, 2 or 4");
  require(c.tcount.maxTrotterNumber >= 1, "tcount.maxTrotterNumber", "must be >= 1");
  require(c.tcount.samples >= 1, "tcount.samples", "must be >= 1");
  require(c.tcount.costLevel > 0.0, "tcount.costLevel", "must be > 0");
  require(!c.finite.sizes.empty(), "finite.sizes", "must not be empty");
  for (int n : c.finite.sizes)
    require(n >= 2 && n % 2 == 0 && n <= kMaxQubits, "finite.sizes", "sizes must be even and in [2, 30]");
  require(c.finite.haarStates >= 1, "finite.haarStates", "must be >= 1");
  require(c.finite.trotterOrder == 1 || c.finite.trotterOrder == 2 || c.finite.trotterOrder == 4,
          "finite.trotterOrder", "orders are 1, 2 or 4");
  require(!c.output.empty(), "output", "must not be empty");
  if (c.experiment == "tcount") {
    require(c.circuit.family == GateFamily::lowrz, "circuit.family", "tcount needs the lowrz family");
    require(c.model.value("model", "") == "tfim", "model.model", "tcount uses the split TFIM Trotter circuits");
  }
}

inline ExperimentConfig configFromJson(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::ObjectReader top(j, "");
  top.get("experiment", c.experiment);
  if (c.experiment.empty()) throw ConfigError("experiment", "missing");
  if (const auto* m = top.child("model"))
    c.model = *m;
  else
    throw ConfigError("model", "missing");
  if (const auto* b = top.child("circuit")) {
    detail::ObjectReader r(*b, "circuit");
    std::string fam = toString(c.circuit.family);
    r.get("family", fam);
    try {
      c.circuit.family = gateFamilyFromString(fam);
    } catch (const Error& e) {
      throw ConfigError("circuit.family", e.what());
    }
    if (const auto* l = r.child("layers")) {
      if (l->is_number_integer()) {
        c.circuit.layers = {l->get<int>()};
      } else if (l->is_array() && std::all_of(l->begin(), l->end(), [](const auto& x) { return x.is_number_integer(); })) {
        c.circuit.layers = l->get<std::vector<int>>();
      } else {
        throw ConfigError("circuit.layers", "expected an integer or a list of integers");
      }
    }
    r.get("init", c.circuit.init);
    r.get("file", c.circuit.file);
    r.finish();
  }
  if (const auto* b = top.child("evolve")) {
    detail::ObjectReader r(*b, "evolve");
    r.get("chiMax", c.evolve.chiMax);
    r.get("tol", c.evolve.tol);
    r.get("t", c.evolve.t);
    r.get("initialState", c.evolve.initialState);
    r.get("evalChiMax", c.evolve.evalChiMax);
    r.get("weightTol", c.evolve.weightTol);
    r.get("maxDiscardedWeight", c.evolve.maxDiscardedWeight);
    r.finish();
  }
  if (const auto* b = top.child("optimize")) {
    detail::ObjectReader r(*b, "optimize");
    r.get("maxIter", c.optimize.maxIter);
    r.get("gradTol", c.optimize.gradTol);
    r.get("costTol", c.optimize.costTol);
    r.get("h", c.optimize.h);
    r.get("memory", c.optimize.memory);
    r.finish();
  }
  if (const auto* b = top.child("data")) {
    detail::ObjectReader r(*b, "data");
    r.get("nTrain", c.data.nTrain);
    r.get("chiTrain", c.data.chiTrain);
    r.get("nTest", c.data.nTest);
    r.get("chiTest", c.data.chiTest);
    r.get("nTrainList", c.data.nTrainList);
    r.get("chiTrainList", c.data.chiTrainList);
    r.finish();
  }
  if (const auto* b = top.child("tcount")) {
    detail::ObjectReader r(*b, "tcount");
    r.get("epsGrid", c.tcount.epsGrid);
    r.get("slope", c.tcount.slope);
    r.get("offset", c.tcount.offset);
    r.get("optimizedTrotterNumbers", c.tcount.optimizedTrotterNumbers);
    r.get("trotterOrders", c.tcount.trotterOrders);
    r.get("maxTrotterNumber", c.tcount.maxTrotterNumber);
    r.get("samples", c.tcount.samples);
    r.get("costLevel", c.tcount.costLevel);
    r.finish();
  }
  if (const auto* b = top.child("finite")) {
    detail::ObjectReader r(*b, "finite");
    r.get("sizes", c.finite.sizes);
    r.get("haarStates", c.finite.haarStates);
    r.get("trotterOrder", c.finite.trotterOrder);
    r.finish();
  }
  if (const auto* b = top.child("fit")) {
    detail::ObjectReader r(*b, "fit");
    r.get("lMin", c.fit.lMin);
    r.finish();
  }
  top.get("seed", c.seed);
  top.get("output", c.output);
  top.finish();
  validate(c);
  return c;
}

inline nlohmann::json toJson(const ExperimentConfig& c) {
  return {{"experiment", c.experiment},
          {"model", c.model},
          {"circuit",
           {{"family", toString(c.circuit.family)},
            {"layers", c.circuit.layers},
            {"init", c.circuit.init},
            {"file", c.circuit.file}}},
          {"evolve",
           {{"chiMax", c.evolve.chiMax},
            {"tol", c.evolve.tol},
            {"t", c.evolve.t},
            {"initialState", c.evolve.initialState},
            {"evalChiMax", c.evolve.evalChiMax},
            {"weightTol", c.evolve.weightTol},
            {"maxDiscardedWeight", c.evolve.maxDiscardedWeight}}},
          {"optimize",
           {{"maxIter", c.optimize.maxIter},
            {"gradTol", c.optimize.gradTol},
            {"costTol", c.optimize.costTol},
            {"h", c.optimize.h},
            {"memory", c.optimize.memory}}},
          {"data",
           {{"nTrain", c.data.nTrain},
            {"chiTrain", c.data.chiTrain},
            {"nTest", c.data.nTest},
            {"chiTest", c.data.chiTest},
            {"nTrainList", c.data.nTrainList},
            {"chiTrainList", c.data.chiTrainList}}},
          {"tcount",
           {{"epsGrid", c.tcount.epsGrid},
            {"slope", c.tcount.slope},
            {"offset", c.tcount.offset},
            {"optimizedTrotterNumbers", c.tcount.optimizedTrotterNumbers},
            {"trotterOrders", c.tcount.trotterOrders},
            {"maxTrotterNumber", c.tcount.maxTrotterNumber},
            {"samples", c.tcount.samples},
            {"costLevel", c.tcount.costLevel}}},
          {"finite",
           {{"sizes", c.finite.sizes}, {"haarStates", c.finite.haarStates}, {"trotterOrder", c.finite.trotterOrder}}},
          {"fit", {{"lMin", c.fit.lMin}}},
          {"seed", c.seed},
          {"output", c.output}};
}

inline ExperimentConfig loadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  return configFromJson(j);
}

/// First 16 hex digits of SHA-256 over the canonical config JSON without the
/// output directory.
inline std::string configHash(const ExperimentConfig& c) {
  nlohmann::json j = toJson(c);
  j.erase("output");
  const std::string text = j.dump();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("configHash: digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < 8 && i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

// ---------------------------------------------------------------------------
// Shared pieces.

/// Runs f(0..n-1) on up to `threads` workers; results must be written to
/// per-index slots. The first exception (by index) is rethrown.
template <class F>
void parallelFor(std::size_t n, int threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            f(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

inline InfiniteMPS initialState(const std::string& name) {
  if (name == "neel10") return InfiniteMPS::basis(1, 0);
  if (name == "neel01") return InfiniteMPS::basis(0, 1);
  if (name == "zero") return InfiniteMPS::basis(0, 0);
  if (name == "plus") {
    const double r = std::sqrt(0.5);
    return InfiniteMPS::product({r, r}, {r, r});
  }
  throw ConfigError("evolve.initialState", "unknown state '" + name + "'");
}

/// Depth-L initial circuit. Trotter initializations use the largest Trotter
/// number whose circuit fits in L layers (time t) and pad with identity layers
/// of alternating parity; when no step fits the circuit is the identity.
inline ParamCircuit initialCircuit(const std::string& init, GateFamily family, int L, const UnitCellHamiltonian& h,
                                   double t) {
  const std::size_t depth = static_cast<std::size_t>(L);
  if (init == "identity") return ParamCircuit::identity(family, depth);
  const int order = init == "trotter1" ? 1 : 2;
  if (family == GateFamily::lowrz && h.name != "tfim")
    throw ConfigError("circuit.init", "lowrz Trotter initialization exists for tfim only");
  auto build = [&](int k) {
    return family == GateFamily::su4
               ? trotterCircuitSu4(h, {order, k, t})
               : tfimSplitTrotter(h.params.at("J").get<double>(), h.params.at("h").get<double>(), {order, k, t});
  };
  ParamCircuit best;
  for (int k = 1;; ++k) {
    ParamCircuit c = build(k);
    if (c.layers.size() > depth) break;
    best = std::move(c);
  }
  if (best.layers.empty()) return ParamCircuit::identity(family, depth);
  while (best.layers.size() < depth) {
    const int p = 1 - best.layers.back().parity;
    best.layers.push_back(family == GateFamily::su4 ? GateLayer::su4(p, {}) : GateLayer::lowrz(p, {}));
  }
  return best;
}

inline OptimizeOptions optimizeOptions(const ExperimentConfig& c) {
  OptimizeOptions o;
  o.maxIter = c.optimize.maxIter;
  o.gradTol = c.optimize.gradTol;
  o.costTol = c.optimize.costTol;
  o.h = c.optimize.h;
  o.memory = c.optimize.memory;
  return o;
}

inline CostSpec withEvalSettings(CostSpec s, const ExperimentConfig& c) {
  s.evalChiMax = c.evolve.evalChiMax;
  s.weightTol = c.evolve.weightTol;
  s.maxDiscardedWeight = c.evolve.maxDiscardedWeight;
  return s;
}

inline std::uint64_t testSeedBase(std::uint64_t seed) { return seed + 1000000ULL; }

struct Dataset {
  std::vector<TrainingPair> pairs;
  CostSpec spec;
};

inline Dataset makeDataset(const ExperimentConfig& c, int n, std::size_t chi, std::uint64_t seedBase) {
  Dataset d;
  d.pairs = makeTrainingSet(c.hamiltonian(), c.evolve.t, chi, n, seedBase, c.evolve.chiMax, c.evolve.tol);
  std::vector<TargetPair> tp;
  for (const auto& p : d.pairs) tp.push_back({p.input, p.target});
  d.spec = withEvalSettings(CostSpec::unitaryQml(std::move(tp)), c);
  return d;
}

struct CompiledCircuit {
  int layers = 0;
  ParamCircuit circuit;
  CompilationReport report;
};

// ---------------------------------------------------------------------------
// Studies.

struct GroundStateRow {
  int layers = 0;
  double localInfidelity = 0.0;
  double relEnergyError = 0.0;
  double energy = 0.0;
  CompiledCircuit compiled;
};

struct GroundStateStudy {
  double referenceEnergy = 0.0;  // exact for TFIM, otherwise the iTEBD energy
  double itebdEnergy = 0.0;
  double correlationLength = 0.0;
  EvolutionReport itebd;
  InfiniteMPS target;
  std::vector<GroundStateRow> rows;
  std::optional<DecayFit> infidelityFit;
  std::optional<DecayFit> energyFit;
};

inline GroundStateStudy runGroundState(const ExperimentConfig& c, int threads = 1) {
  const UnitCellHamiltonian h = c.hamiltonian();
  GroundStateStudy s;
  GroundStateOptions go;
  go.seed = c.seed;
  std::tie(s.target, s.itebd) = stage("ground state", [&] { return groundState(h, c.evolve.chiMax, go); });
  s.itebdEnergy = energyDensity(s.target, h);
  s.correlationLength = stage("correlation length", [&] { return correlationLength(s.target); });
  s.referenceEnergy = h.name == "tfim" ? tfimExactEnergy(h.params.at("J").get<double>(), h.params.at("h").get<double>())
                                       : s.itebdEnergy;
  const CostSpec spec = withEvalSettings(CostSpec::groundState(s.target), c);
  s.rows.resize(c.circuit.layers.size());
  parallelFor(s.rows.size(), threads, [&](std::size_t i) {
    const int L = c.circuit.layers[i];
    stage("compile L=" + std::to_string(L), [&] {
      const ParamCircuit init = initialCircuit(c.circuit.init, c.circuit.family, L, h, c.evolve.t);
      auto [circ, rep] = optimize(init, spec, optimizeOptions(c));
      const InfiniteMPS out =
          applyCircuit(spec.targets[0].input, circ, c.evolve.evalChiMax, c.evolve.weightTol).psi;
      GroundStateRow& r = s.rows[i];
      r.layers = L;
      r.localInfidelity = evaluateCost(circ, spec);
      r.energy = energyDensity(out, h);
      r.relEnergyError = std::abs((r.energy - s.referenceEnergy) / s.referenceEnergy);
      r.compiled = {L, std::move(circ), std::move(rep)};
      return 0;
    });
  });
  std::vector<std::pair<double, double>> inf, en;
  for (const auto& r : s.rows) {
    inf.emplace_back(r.layers, r.localInfidelity);
    en.emplace_back(r.layers, r.relEnergyError);
  }
  try {
    s.infidelityFit = fitDecay(inf, c.fit.lMin);
    s.energyFit = fitDecay(en, c.fit.lMin);
  } catch (const ValidationError&) {
    // Fewer than two usable points: no fit.
  }
  return s;
}

struct TrotterRow {
  int order = 0;
  int trotterNumber = 0;
  int depth = 0;
  double cost = 0.0;      // state evolution / training cost
  double testCost = 0.0;  // unitary compression only
};

/// Trotter circuits of the given orders with merged depth <= maxDepth.
struct TrotterPoint {
  int order = 0;
  int trotterNumber = 0;
  ParamCircuit circuit;
};

inline std::vector<TrotterPoint> trotterGrid(const UnitCellHamiltonian& h, double t, int maxDepth,
                                             const std::vector<int>& orders = {1, 2, 4}) {
  std::vector<TrotterPoint> out;
  for (int order : orders)
    for (int k = 1; trotterDepth(order, k) <= maxDepth; ++k) out.push_back({order, k, trotterCircuit(h, {order, k, t})});
  return out;
}

struct StateEvolutionStudy {
  InfiniteMPS target;
  EvolutionReport targetReport;
  std::vector<CompiledCircuit> learned;
  std::vector<double> learnedCost;
  std::vector<TrotterRow> trotter;
};

inline StateEvolutionStudy runStateEvolution(const ExperimentConfig& c, int threads = 1) {
  const UnitCellHamiltonian h = c.hamiltonian();
  const InfiniteMPS phi0 = initialState(c.evolve.initialState);
  StateEvolutionStudy s;
  std::tie(s.target, s.targetReport) =
      stage("target evolution", [&] { return evolveState(phi0, h, c.evolve.t, c.evolve.chiMax, c.evolve.tol); });
  const CostSpec spec = withEvalSettings(CostSpec::stateEvolution(phi0, s.target), c);
  const int maxDepth = *std::max_element(c.circuit.layers.begin(), c.circuit.layers.end());
  const auto grid = trotterGrid(h, c.evolve.t, maxDepth);
  s.trotter.resize(grid.size());
  parallelFor(grid.size(), threads, [&](std::size_t i) {
    const auto& g = grid[i];
    s.trotter[i] = {g.order, g.trotterNumber, static_cast<int>(g.circuit.layers.size()),
                    stage("trotter cost", [&] { return evaluateCost(g.circuit, spec); }), 0.0};
  });
  s.learned.resize(c.circuit.layers.size());
  s.learnedCost.resize(c.circuit.layers.size());
  parallelFor(c.circuit.layers.size(), threads, [&](std::size_t i) {
    const int L = c.circuit.layers[i];
    stage("compile L=" + std::to_string(L), [&] {
      const ParamCircuit init = initialCircuit(c.circuit.init, c.circuit.family, L, h, c.evolve.t);
      auto [circ, rep] = optimize(init, spec, optimizeOptions(c));
      s.learnedCost[i] = evaluateCost(circ, spec);
      s.learned[i] = {L, std::move(circ), std::move(rep)};
      return 0;
    });
  });
  return s;
}

struct UnitaryStudy {
  Dataset train;
  Dataset test;
  std::vector<CompiledCircuit> learned;
  std::vector<double> trainCost;
  std::vector<double> testCost;
  std::vector<TrotterRow> trotter;
};

inline UnitaryStudy runUnitaryCompress(const ExperimentConfig& c, int threads = 1) {
  const UnitCellHamiltonian h = c.hamiltonian();
  UnitaryStudy s;
  s.train = stage("training set", [&] { return makeDataset(c, c.data.nTrain, c.data.chiTrain, c.seed); });
  s.test = stage("test set", [&] { return makeDataset(c, c.data.nTest, c.data.chiTest, testSeedBase(c.seed)); });
  const int maxDepth = *std::max_element(c.circuit.layers.begin(), c.circuit.layers.end());
  const auto grid = trotterGrid(h, c.evolve.t, maxDepth);
  s.trotter.resize(grid.size());
  parallelFor(grid.size(), threads, [&](std::size_t i) {
    const auto& g = grid[i];
    s.trotter[i] = {g.order, g.trotterNumber, static_cast<int>(g.circuit.layers.size()),
                    stage("trotter cost", [&] { return evaluateCost(g.circuit, s.train.spec); }),
                    stage("trotter cost", [&] { return evaluateCost(g.circuit, s.test.spec); })};
  });
  const std::size_t n = c.circuit.layers.size();
  s.learned.resize(n);
  s.trainCost.resize(n);
  s.testCost.resize(n);
  parallelFor(n, threads, [&](std::size_t i) {
    const int L = c.circuit.layers[i];
    stage("compile L=" + std::to_string(L), [&] {
      const ParamCircuit init = initialCircuit(c.circuit.init, c.circuit.family, L, h, c.evolve.t);
      OptimizeOptions o = optimizeOptions(c);
      o.testSet = s.test.spec;
      auto [circ, rep] = optimize(init, s.train.spec, o);
      s.trainCost[i] = evaluateCost(circ, s.train.spec);
      s.testCost[i] = evaluateCost(circ, s.test.spec);
      s.learned[i] = {L, std::move(circ), std::move(rep)};
      return 0;
    });
  });
  return s;
}

struct TcountStudy {
  Dataset train;
  std::vector<CompiledCircuit> optimized;
  std::vector<FrontierRow> rows;
  double trotterT = 0.0;    // min T per qubit at costLevel, Trotter group
  double optimizedT = 0.0;  // same for the optimized group
};

inline constexpr const char* kTrotterGroup = "trotter";
inline constexpr const char* kOptimizedGroup = "optimized";

/// Optimized lowrz circuits start from first-order split TFIM Trotter circuits.
inline TcountStudy runTcount(const ExperimentConfig& c, int threads = 1) {
  const UnitCellHamiltonian h = c.hamiltonian();
  const double J = h.params.at("J").get<double>(), hf = h.params.at("h").get<double>();
  TcountStudy s;
  s.train = stage("training set", [&] { return makeDataset(c, c.data.nTrain, c.data.chiTrain, c.seed); });
  const auto& ks = c.tcount.optimizedTrotterNumbers;
  s.optimized.resize(ks.size());
  parallelFor(ks.size(), threads, [&](std::size_t i) {
    stage("compile k=" + std::to_string(ks[i]), [&] {
      const ParamCircuit init = tfimSplitTrotter(J, hf, {1, ks[i], c.evolve.t});
      auto [circ, rep] = optimize(init, s.train.spec, optimizeOptions(c));
      s.optimized[i] = {static_cast<int>(circ.layers.size()), std::move(circ), std::move(rep)};
      return 0;
    });
  });
  std::vector<FrontierInput> inputs;
  for (int order : c.tcount.trotterOrders)
    for (int k = 1; k <= c.tcount.maxTrotterNumber; ++k)
      inputs.push_back({"trotter-o" + std::to_string(order) + "-k" + std::to_string(k), kTrotterGroup,
                        tfimSplitTrotter(J, hf, {order, k, c.evolve.t})});
  for (std::size_t i = 0; i < ks.size(); ++i)
    inputs.push_back({"optimized-k" + std::to_string(ks[i]), kOptimizedGroup, s.optimized[i].circuit});
  const TCountModel model{c.tcount.slope, c.tcount.offset};
  std::vector<std::vector<FrontierRow>> parts(inputs.size());
  parallelFor(inputs.size(), threads, [&](std::size_t i) {
    FrontierOptions fo;
    fo.seed = c.seed + 7919ULL * i;
    fo.samples = c.tcount.samples;
    parts[i] = stage("frontier " + inputs[i].id, [&] { return frontier({inputs[i]}, c.tcount.epsGrid, s.train.spec, model, fo); });
  });
  for (auto& p : parts) s.rows.insert(s.rows.end(), p.begin(), p.end());
  markPareto(s.rows);
  s.trotterT = minTAtCost(s.rows, kTrotterGroup, c.tcount.costLevel);
  s.optimizedT = minTAtCost(s.rows, kOptimizedGroup, c.tcount.costLevel);
  return s;
}

struct FiniteRow {
  int n = 0;
  int layers = 0;
  std::string family;
  std::string source;  // "learned" or "trotter<order>"
  FiniteCost cost;
  std::uint64_t seed = 0;
};

struct FiniteStudy {
  std::optional<UnitaryStudy> training;  // when the circuit was learned in this run
  ParamCircuit learned;
  ParamCircuit trotter;
  std::vector<FiniteRow> rows;
};

/// The learned circuit comes from circuit.file or, without one, from a
/// unitary compression at depth circuit.layers[0]. The Trotter baseline has
/// the largest Trotter number whose merged depth fits the learned depth.
inline FiniteStudy runFiniteValidate(const ExperimentConfig& c, int threads = 1) {
  const UnitCellHamiltonian h = c.hamiltonian();
  FiniteStudy s;
  if (!c.circuit.file.empty()) {
    std::ifstream in(c.circuit.file);
    try {
      s.learned = circuitFromJson(nlohmann::json::parse(in));
    } catch (const std::exception& e) {
      throw ConfigError("circuit.file", std::string("cannot read circuit: ") + e.what());
    }
  } else {
    ExperimentConfig one = c;
    one.circuit.layers = {c.circuit.layers.front()};
    s.training = runUnitaryCompress(one, threads);
    s.learned = s.training->learned.front().circuit;
  }
  const int depth = static_cast<int>(s.learned.layers.size());
  int k = 0;
  while (trotterDepth(c.finite.trotterOrder, k + 1) <= depth) ++k;
  if (k == 0) throw ConfigError("circuit.layers", "learned depth is below one Trotter step of the requested order");
  s.trotter = trotterCircuit(h, {c.finite.trotterOrder, k, c.evolve.t});
  const auto& sizes = c.finite.sizes;
  s.rows.resize(2 * sizes.size());
  parallelFor(sizes.size(), threads, [&](std::size_t i) {
    const int n = sizes[i];
    stage("finite n=" + std::to_string(n), [&] {
      const ReferenceEvolution ref(h, c.evolve.t, n, 1e-10);
      s.rows[2 * i] = {n, depth, toString(s.learned.family), "learned",
                       costFinite(s.learned, ref, n, c.finite.haarStates, c.seed), c.seed};
      s.rows[2 * i + 1] = {n, static_cast<int>(s.trotter.layers.size()), "raw",
                           "trotter" + std::to_string(c.finite.trotterOrder),
                           costFinite(s.trotter, ref, n, c.finite.haarStates, c.seed), c.seed};
      return 0;
    });
  });
  return s;
}

struct GeneralizationRun {
  std::size_t chiTrain = 0;
  int nTrain = 0;
  CompilationReport report;
  double trainCost = 0.0;
  double testCost = 0.0;
};

struct GeneralizationStudy {
  Dataset test;
  std::vector<GeneralizationRun> runs;
};

/// One compression per (chiTrain, nTrain) at depth circuit.layers[0]; all
/// share the same test set.
inline GeneralizationStudy runGeneralization(const ExperimentConfig& c, int threads = 1) {
  const UnitCellHamiltonian h = c.hamiltonian();
  GeneralizationStudy s;
  s.test = stage("test set", [&] { return makeDataset(c, c.data.nTest, c.data.chiTest, testSeedBase(c.seed)); });
  std::vector<std::pair<std::size_t, int>> grid;
  for (std::size_t chi : c.data.chiTrainList)
    for (int n : c.data.nTrainList) grid.emplace_back(chi, n);
  s.runs.resize(grid.size());
  const int L = c.circuit.layers.front();
  parallelFor(grid.size(), threads, [&](std::size_t i) {
    const auto [chi, n] = grid[i];
    stage("compile chiTrain=" + std::to_string(chi) + " nTrain=" + std::to_string(n), [&] {
      const Dataset train = makeDataset(c, n, chi, c.seed);
      OptimizeOptions o = optimizeOptions(c);
      o.testSet = s.test.spec;
      auto [circ, rep] = optimize(initialCircuit(c.circuit.init, c.circuit.family, L, h, c.evolve.t), train.spec, o);
      s.runs[i] = {chi, n, std::move(rep), evaluateCost(circ, train.spec), evaluateCost(circ, s.test.spec)};
      return 0;
    });
  });
  return s;
}

// ---------------------------------------------------------------------------
// Output.

/// Prefixes every CSV line with the config hash column.
inline std::string withHash(const std::string& csv, const std::string& hash) {
  std::string out;
  std::size_t pos = 0;
  bool header = true;
  while (pos < csv.size()) {
    const std::size_t end = csv.find('\n', pos);
    const std::string line = csv.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    out += (header ? std::string("configHash") : hash) + "," + line + "\n";
    header = false;
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

class OutputDir {
 public:
  OutputDir(std::filesystem::path dir, std::string hash) : dir_(std::move(dir)), hash_(std::move(hash)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("output", "cannot create '" + dir_.string() + "': " + ec.message());
  }
  void csv(const std::string& name, const std::string& body) { write(name, withHash(body, hash_)); }
  void json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }
  void write(const std::string& name, const std::string& text) {
    const auto path = dir_ / name;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw StageError("output", "cannot write " + path.string());
    out << text;
    files_.push_back(name);
  }
  const std::vector<std::string>& files() const { return files_; }
  const std::string& hash() const { return hash_; }

 private:
  std::filesystem::path dir_;
  std::string hash_;
  std::vector<std::string> files_;
};

inline void writeCompiled(OutputDir& out, const CompiledCircuit& cc, const std::string& tag) {
  out.json("report_" + tag + ".json", toJson(cc.report));
  out.csv("cost_trace_" + tag + ".csv", costTraceCsv(cc.report));
  out.json("circuit_" + tag + ".json", toJson(cc.circuit));
}

inline void writeDataset(OutputDir& out, const ExperimentConfig& c, const Dataset& d, const std::string& name,
                         std::size_t chi) {
  nlohmann::json seeds = nlohmann::json::array(), dts = nlohmann::json::array();
  for (std::size_t k = 0; k < d.pairs.size(); ++k) {
    const auto& p = d.pairs[k];
    const SnapshotMeta meta{"randomIMPS", {{"chi", chi}}, p.seed};
    out.json(name + "/input_" + std::to_string(k) + ".json", toJson(p.input, meta));
    out.json(name + "/target_" + std::to_string(k) + ".json",
             toJson(p.target, {"evolveState", {{"t", c.evolve.t}, {"model", c.model}}, p.seed}));
    seeds.push_back(p.seed);
    dts.push_back(p.report.finalStepSize);
  }
  out.json(name + "/manifest.json", {{"model", c.model},
                                     {"t", c.evolve.t},
                                     {"chiTrain", chi},
                                     {"n", d.pairs.size()},
                                     {"seeds", seeds},
                                     {"convergence", {{"finalDt", dts}, {"tol", c.evolve.tol}}}});
}

inline std::string trotterCsv(const std::vector<TrotterRow>& rows, const std::vector<CompiledCircuit>& learned,
                              const std::vector<double>& learnedCost, const std::vector<double>* learnedTest,
                              bool withTest) {
  std::string s = withTest ? "kind,order,trotterNumber,depth,trainCost,testCost\n" : "kind,order,trotterNumber,depth,cost\n";
  for (const auto& r : rows) {
    s += "trotter," + std::to_string(r.order) + "," + std::to_string(r.trotterNumber) + "," + std::to_string(r.depth) +
         "," + fmtReal(r.cost);
    s += withTest ? "," + fmtReal(r.testCost) + "\n" : "\n";
  }
  for (std::size_t i = 0; i < learned.size(); ++i) {
    s += "learned,,," + std::to_string(learned[i].layers) + "," + fmtReal(learnedCost[i]);
    s += withTest ? "," + fmtReal((*learnedTest)[i]) + "\n" : "\n";
  }
  return s;
}

/// Runs the configured experiment and writes its artifacts plus a manifest.
inline void runExperiment(const ExperimentConfig& c, const std::filesystem::path& outDir, int threads = 1) {
  validate(c);
  const auto t0 = std::chrono::steady_clock::now();
  OutputDir out(outDir, configHash(c));
  nlohmann::json summary;

  if (c.experiment == "ground-state") {
    const GroundStateStudy s = runGroundState(c, threads);
    std::string csv = "layers,localInfidelity,relEnergyError,energy,iterations,truncationMax\n";
    for (const auto& r : s.rows) {
      csv += std::to_string(r.layers) + "," + fmtReal(r.localInfidelity) + "," + fmtReal(r.relEnergyError) + "," +
             fmtReal(r.energy) + "," + std::to_string(r.compiled.report.iterations) + "," +
             fmtReal(r.compiled.report.truncationMax) + "\n";
      writeCompiled(out, r.compiled, "L" + std::to_string(r.layers));
    }
    out.csv("ground_state.csv", csv);
    auto fitJson = [](const std::optional<DecayFit>& f) -> nlohmann::json {
      if (!f) return nullptr;
      return {{"alpha", f->alpha}, {"intercept", f->intercept}, {"mse", f->mse}, {"points", f->points}};
    };
    summary = {{"referenceEnergy", s.referenceEnergy},
               {"itebdEnergy", s.itebdEnergy},
               {"correlationLength", jsonReal(s.correlationLength)},
               {"itebdConverged", s.itebd.converged},
               {"infidelityFit", fitJson(s.infidelityFit)},
               {"energyFit", fitJson(s.energyFit)}};
    out.json("target_imps.json", toJson(s.target, {"groundState", {{"chiMax", c.evolve.chiMax}}, c.seed}));
  } else if (c.experiment == "state-evolution") {
    const StateEvolutionStudy s = runStateEvolution(c, threads);
    out.csv("comparison.csv", trotterCsv(s.trotter, s.learned, s.learnedCost, nullptr, false));
    for (const auto& l : s.learned) writeCompiled(out, l, "L" + std::to_string(l.layers));
    out.json("target_imps.json",
             toJson(s.target, {"evolveState", {{"t", c.evolve.t}, {"initialState", c.evolve.initialState}}, {}}));
    summary = {{"targetFinalDt", s.targetReport.finalStepSize},
               {"targetMaxDiscardedWeight", s.targetReport.maxDiscardedWeight}};
  } else if (c.experiment == "unitary-compress") {
    const UnitaryStudy s = runUnitaryCompress(c, threads);
    out.csv("comparison.csv", trotterCsv(s.trotter, s.learned, s.trainCost, &s.testCost, true));
    for (const auto& l : s.learned) writeCompiled(out, l, "L" + std::to_string(l.layers));
    writeDataset(out, c, s.train, "dataset_train", c.data.chiTrain);
    writeDataset(out, c, s.test, "dataset_test", c.data.chiTest);
  } else if (c.experiment == "tcount") {
    const TcountStudy s = runTcount(c, threads);
    out.csv("frontier.csv", frontierCsv(s.rows, {c.tcount.slope, c.tcount.offset}));
    for (const auto& o : s.optimized) writeCompiled(out, o, "L" + std::to_string(o.layers));
    writeDataset(out, c, s.train, "dataset_train", c.data.chiTrain);
    summary = {{"costLevel", c.tcount.costLevel},
               {"trotterTPerQubit", jsonReal(s.trotterT)},
               {"optimizedTPerQubit", jsonReal(s.optimizedT)},
               {"model", {{"slope", c.tcount.slope}, {"offset", c.tcount.offset}}},
               {"errorModel", "uniform angle perturbation in [-eps, eps] per non-Clifford rotation"}};
  } else if (c.experiment == "finite-validate") {
    const FiniteStudy s = runFiniteValidate(c, threads);
    std::string csv = "n,layers,family,source,meanCost,stdCost,seed\n";
    for (const auto& r : s.rows)
      csv += std::to_string(r.n) + "," + std::to_string(r.layers) + "," + r.family + "," + r.source + "," +
             fmtReal(r.cost.mean) + "," + fmtReal(r.cost.std) + "," + std::to_string(r.seed) + "\n";
    out.csv("validation.csv", csv);
    out.json("circuit_learned.json", toJson(s.learned));
    if (s.training) writeCompiled(out, s.training->learned.front(), "learned");
  } else if (c.experiment == "generalization") {
    const GeneralizationStudy s = runGeneralization(c, threads);
    std::string traces = "chiTrain,nTrain,iteration,trainCost,testCost\n", finals = "chiTrain,nTrain,trainCost,testCost\n";
    for (const auto& r : s.runs) {
      const std::string key = std::to_string(r.chiTrain) + "," + std::to_string(r.nTrain) + ",";
      for (const auto& e : r.report.costTrace)
        traces += key + std::to_string(e.iteration) + "," + fmtReal(e.trainCost) + "," +
                  (e.testCost ? fmtReal(*e.testCost) : "") + "\n";
      finals += key + fmtReal(r.trainCost) + "," + fmtReal(r.testCost) + "\n";
    }
    out.csv("generalization_trace.csv", traces);
    out.csv("generalization.csv", finals);
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json files = out.files();
  out.json("manifest.json", {{"tool", "ticc"},
                             {"version", kToolVersion},
                             {"experiment", c.experiment},
                             {"configHash", out.hash()},
                             {"config", toJson(c)},
                             {"threads", threads},
                             {"wallTime", wall},
                             {"summary", summary},
                             {"files", files}});
}

}  // namespace ticc
