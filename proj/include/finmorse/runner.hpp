#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "finmorse/graph_io.hpp"
#include "finmorse/report.hpp"

namespace finmorse {

inline constexpr const char* tool_version = "0.1.0";

inline const std::vector<std::string>& known_operations() {
  static const std::vector<std::string> ops{"morse", "bs",      "doob",   "green", "parabolicity",
                                            "bracket", "pipeline", "kernel", "clr"};
  return ops;
}

inline std::map<std::string, double> default_tolerances() {
  return {{"zero", 1e-8},   {"bs", 1e-9},          {"stable", 1e-10},      {"support", 1e-10},
          {"spectra", 1e-9}, {"stall", 0.02},       {"decay_window", 3},    {"pd", 1e-10},
          {"tail_delta", 1e-6}, {"certificate", 1e-9}, {"kernel", 1e-7}, {"conjugation", 1e-11},
          {"nonneg", 1e-10}};
}

struct ScenarioConfig {
  std::string id = "scenario";
  std::uint64_t seed = 0;
  bool has_seed = false;
  json graph;
  json potential;
  json baseline;
  json exhaustion;
  json params = json::object();
  std::vector<std::string> operations;
  std::map<std::string, double> tol = default_tolerances();
  Index vertex_cap = default_vertex_cap;
  Index dense_cap = 6000;
  Index dense_preferred = 1600;
  std::string base_dir = ".";
  json source;  // document as given

  // Document that reproduces this run: source plus effective seed,
  // operations, tolerances and limits.
  json echo() const {
    json e = source;
    e["id"] = id;
    if (has_seed) e["seed"] = seed;
    e["operations"] = operations;
    json t = json::object();
    for (const auto& [k, v] : tol) t[k] = v;
    e["tolerances"] = t;
    e["limits"] = {{"vertex_cap", vertex_cap}, {"dense_cap", dense_cap}, {"dense_preferred", dense_preferred}};
    return e;
  }
};

namespace detail {

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(path + "/" + key, "missing required field");
  return j.at(key);
}

inline double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

inline std::string str(const json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ConfigError(path, "expected a string");
}

inline std::vector<int> radii_list(const json& j, const std::string& path) {
  std::vector<int> r;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) r.push_back(integer(j[i], path + "/" + std::to_string(i)));
  } else if (j.is_object()) {
    int from = integer(require(j, "from", path), path + "/from");
    int to = integer(require(j, "to", path), path + "/to");
    int step = j.contains("step") ? integer(j["step"], path + "/step") : 1;
    if (step <= 0) throw ConfigError(path + "/step", "step must be positive");
    for (int x = from; x <= to; x += step) r.push_back(x);
  } else {
    throw ConfigError(path, "expected a list of radii or {from, to, step}");
  }
  if (r.empty()) throw ConfigError(path, "radii list is empty");
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] <= r[i - 1]) throw ConfigError(path, "radii must be strictly increasing (levels must be nested)");
  return r;
}

inline int l1_norm(std::span<const int> c) {
  int s = 0;
  for (int x : c) s += std::abs(x);
  return s;
}

// {"type": constant|geometric|linear|perturb, ...}; vertex rules see |x|_1,
// edge rules see the smaller |x|_1 of the two endpoints.
inline VertexRule vertex_profile(const json& j, const std::string& path, std::uint64_t seed) {
  if (j.is_null()) return {};
  if (j.is_number()) {
    double c = j.get<double>();
    return [c](std::span<const int>) { return c; };
  }
  auto type = str(require(j, "type", path), path + "/type");
  if (type == "constant") {
    double c = num(require(j, "value", path), path + "/value");
    return [c](std::span<const int>) { return c; };
  }
  if (type == "geometric") {
    double b = num(require(j, "base", path), path + "/base");
    return [b](std::span<const int> x) { return std::pow(b, l1_norm(x)); };
  }
  if (type == "linear") {
    double a = j.contains("a") ? num(j["a"], path + "/a") : 1.0;
    double b = num(require(j, "b", path), path + "/b");
    return [a, b](std::span<const int> x) { return a + b * l1_norm(x); };
  }
  if (type == "perturb") {
    double lo = num(require(j, "lo", path), path + "/lo");
    double hi = num(require(j, "hi", path), path + "/hi");
    if (!(lo <= hi)) throw ConfigError(path, "perturb needs lo <= hi");
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return [rng, lo, hi](std::span<const int>) { return std::uniform_real_distribution<double>(lo, hi)(*rng); };
  }
  throw ConfigError(path + "/type", "unknown profile type '" + type + "'");
}

inline EdgeRule edge_profile(const json& j, const std::string& path, std::uint64_t seed) {
  auto v = vertex_profile(j, path, seed);
  if (!v) return {};
  return [v](std::span<const int> a, std::span<const int> b) { return v(l1_norm(a) <= l1_norm(b) ? a : b); };
}

inline bool profile_is_random(const json& j) {
  return j.is_object() && j.contains("type") && j["type"] == "perturb";
}

}  // namespace detail

inline ScenarioConfig parse_config(const json& doc, const std::string& base_dir = ".") {
  if (!doc.is_object()) throw ConfigError("/", "scenario must be a JSON object");
  ScenarioConfig c;
  c.source = doc;
  c.base_dir = base_dir;
  static const std::set<std::string> known_keys{"id",     "seed",      "graph",      "potential", "baseline",
                                                "exhaustion", "operations", "params", "tolerances", "limits"};
  for (const auto& [k, v] : doc.items())
    if (!known_keys.count(k)) throw ConfigError("/" + k, "unknown field");
  if (doc.contains("id")) c.id = detail::str(doc["id"], "/id");
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned() && !doc["seed"].is_number_integer())
      throw ConfigError("/seed", "seed must be a nonnegative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
    c.has_seed = true;
  }

  c.graph = detail::require(doc, "graph", "");
  if (!c.graph.is_object()) throw ConfigError("/graph", "expected an object");
  if (c.graph.contains("file")) {
    detail::str(c.graph["file"], "/graph/file");
  } else {
    auto gen = detail::str(detail::require(c.graph, "generator", "/graph"), "/graph/generator");
    if (gen == "lattice") {
      int d = detail::integer(detail::require(c.graph, "dimension", "/graph"), "/graph/dimension");
      if (d < 1 || d > 4) throw ConfigError("/graph/dimension", "dimension must be in 1..4");
      if (detail::integer(detail::require(c.graph, "radius", "/graph"), "/graph/radius") < 1)
        throw ConfigError("/graph/radius", "radius must be >= 1");
    } else if (gen == "half_line") {
      if (detail::integer(detail::require(c.graph, "length", "/graph"), "/graph/length") < 1)
        throw ConfigError("/graph/length", "length must be >= 1");
    } else if (gen == "tree") {
      if (detail::integer(detail::require(c.graph, "branching", "/graph"), "/graph/branching") < 2)
        throw ConfigError("/graph/branching", "branching must be >= 2");
      if (detail::integer(detail::require(c.graph, "depth", "/graph"), "/graph/depth") < 1)
        throw ConfigError("/graph/depth", "depth must be >= 1");
    } else {
      throw ConfigError("/graph/generator", "unknown generator '" + gen + "'");
    }
    if (c.graph.contains("boundary")) {
      auto b = detail::str(c.graph["boundary"], "/graph/boundary");
      if (b != "free" && b != "dirichlet") throw ConfigError("/graph/boundary", "boundary must be free or dirichlet");
    }
  }

  c.potential = doc.contains("potential") ? doc["potential"] : json{{"family", "zero"}};
  {
    auto fam = detail::str(detail::require(c.potential, "family", "/potential"), "/potential/family");
    static const std::set<std::string> fams{"zero", "constant", "constant_well", "power_decay", "values", "file"};
    if (!fams.count(fam)) throw ConfigError("/potential/family", "unknown potential family '" + fam + "'");
  }
  c.baseline = doc.contains("baseline") ? doc["baseline"] : json{{"family", "zero"}};
  {
    auto fam = detail::str(detail::require(c.baseline, "family", "/baseline"), "/baseline/family");
    static const std::set<std::string> fams{"zero", "constant", "point", "values"};
    if (!fams.count(fam)) throw ConfigError("/baseline/family", "unknown baseline family '" + fam + "'");
  }

  if (doc.contains("exhaustion")) {
    c.exhaustion = doc["exhaustion"];
    detail::str(detail::require(c.exhaustion, "center", "/exhaustion"), "/exhaustion/center");
    detail::radii_list(detail::require(c.exhaustion, "radii", "/exhaustion"), "/exhaustion/radii");
    if (c.exhaustion.contains("metric")) {
      auto m = detail::str(c.exhaustion["metric"], "/exhaustion/metric");
      if (m != "graph" && m != "sup") throw ConfigError("/exhaustion/metric", "metric must be graph or sup");
    }
  }

  const auto& ops = detail::require(doc, "operations", "");
  if (!ops.is_array() || ops.empty()) throw ConfigError("/operations", "operation list must be a nonempty array");
  for (std::size_t i = 0; i < ops.size(); ++i) {
    auto op = detail::str(ops[i], "/operations/" + std::to_string(i));
    const auto& k = known_operations();
    if (std::find(k.begin(), k.end(), op) == k.end())
      throw ConfigError("/operations/" + std::to_string(i), "unknown operation '" + op + "'");
    c.operations.push_back(op);
  }

  if (doc.contains("params")) {
    if (!doc["params"].is_object()) throw ConfigError("/params", "expected an object");
    c.params = doc["params"];
    for (const auto& [k, v] : c.params.items()) {
      const auto& kn = known_operations();
      if (std::find(kn.begin(), kn.end(), k) == kn.end()) throw ConfigError("/params/" + k, "unknown operation");
    }
  }
  if (doc.contains("tolerances")) {
    if (!doc["tolerances"].is_object()) throw ConfigError("/tolerances", "expected an object");
    for (const auto& [k, v] : doc["tolerances"].items()) {
      if (!c.tol.count(k)) throw ConfigError("/tolerances/" + k, "unknown tolerance");
      c.tol[k] = detail::num(v, "/tolerances/" + k);
    }
  }
  if (doc.contains("limits")) {
    const auto& l = doc["limits"];
    if (!l.is_object()) throw ConfigError("/limits", "expected an object");
    for (const auto& [k, v] : l.items()) {
      int x = detail::integer(v, "/limits/" + k);
      if (x <= 0) throw ConfigError("/limits/" + k, "limit must be positive");
      if (k == "vertex_cap")
        c.vertex_cap = x;
      else if (k == "dense_cap")
        c.dense_cap = x;
      else if (k == "dense_preferred")
        c.dense_preferred = x;
      else
        throw ConfigError("/limits/" + k, "unknown limit");
    }
  }

  bool random = detail::profile_is_random(c.graph.value("mu", json())) ||
                detail::profile_is_random(c.graph.value("w", json()));
  if (c.params.contains("doob") && c.params["doob"].value("phi", std::string()) == "random") random = true;
  if (random && !c.has_seed) throw ConfigError("/seed", "seed is required for randomized profiles or sweeps");
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
  auto dir = std::filesystem::path(path).parent_path().string();
  return parse_config(doc, dir.empty() ? "." : dir);
}

inline void set_tolerance(ScenarioConfig& c, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--tol", "expected NAME=VALUE, got '" + assignment + "'");
  auto name = assignment.substr(0, eq);
  if (!c.tol.count(name)) throw ConfigError("--tol", "unknown tolerance '" + name + "'");
  try {
    std::size_t used = 0;
    double v = std::stod(assignment.substr(eq + 1), &used);
    if (used != assignment.size() - eq - 1) throw std::invalid_argument("trailing characters");
    c.tol[name] = v;
  } catch (const std::exception&) {
    throw ConfigError("--tol", "bad value in '" + assignment + "'");
  }
}

// ---------------------------------------------------------------------------
// Scenario construction

struct Scenario {
  std::shared_ptr<const WeightedGraph> graph;
  PotentialField V;
  std::optional<Exhaustion> exhaustion;
  std::optional<Index> center;
};

namespace detail {

inline std::vector<double> vertex_values(const WeightedGraph& g, const json& spec, const std::string& path,
                                         const std::string& base_dir, bool allow_file) {
  std::vector<double> v(g.size(), 0.0);
  auto fam = str(require(spec, "family", path), path + "/family");
  auto center_dist = [&](const std::string& key) {
    auto c = str(require(spec, key, path), path + "/" + key);
    auto ci = g.find(c);
    if (!ci) throw ConfigError(path + "/" + key, "unknown vertex '" + c + "'");
    return graph_distances(g, *ci);
  };
  if (fam == "zero") return v;
  if (fam == "constant") {
    double c = num(require(spec, "value", path), path + "/value");
    std::fill(v.begin(), v.end(), c);
  } else if (fam == "constant_well") {
    auto d = center_dist("center");
    int r = integer(require(spec, "radius", path), path + "/radius");
    double c = num(require(spec, "value", path), path + "/value");
    for (Index x = 0; x < g.size(); ++x)
      if (d[x] >= 0 && d[x] <= r) v[x] = c;
  } else if (fam == "power_decay") {
    auto d = center_dist("center");
    double c = num(require(spec, "c", path), path + "/c");
    int cutoff = spec.contains("cutoff") ? integer(spec["cutoff"], path + "/cutoff") : -1;
    for (Index x = 0; x < g.size(); ++x)
      if (d[x] >= 0 && (cutoff < 0 || d[x] <= cutoff)) v[x] = c / (1.0 + double(d[x]) * d[x]);
  } else if (fam == "point") {
    auto id = str(require(spec, "vertex", path), path + "/vertex");
    auto x = g.find(id);
    if (!x) throw ConfigError(path + "/vertex", "unknown vertex '" + id + "'");
    v[*x] = num(require(spec, "value", path), path + "/value");
  } else if (fam == "values" || (fam == "file" && allow_file)) {
    json vals;
    std::string vpath = path + "/values";
    if (fam == "file") {
      auto file = str(require(spec, "path", path), path + "/path");
      auto full = std::filesystem::path(file).is_absolute() ? file : (std::filesystem::path(base_dir) / file).string();
      std::ifstream in(full);
      if (!in) throw ConfigError(path + "/path", "cannot open '" + full + "'");
      try {
        vals = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError(full, std::string("malformed JSON: ") + e.what());
      }
      if (vals.is_object() && vals.contains("values")) vals = vals["values"];
      vpath = full + "/values";
    } else {
      vals = require(spec, "values", path);
    }
    if (!vals.is_object()) throw ConfigError(vpath, "expected an object mapping vertex ids to values");
    for (const auto& [id, val] : vals.items()) {
      auto x = g.find(id);
      if (!x) throw ConfigError(vpath + "/" + id, "unknown vertex '" + id + "'");
      v[*x] = num(val, vpath + "/" + id);
    }
  } else {
    throw ConfigError(path + "/family", "family '" + fam + "' not allowed here");
  }
  return v;
}

}  // namespace detail

inline Scenario build_scenario(const ScenarioConfig& c) {
  Scenario s;
  WeightedGraph g;
  const auto& gs = c.graph;
  try {
    if (gs.contains("file")) {
      auto file = detail::str(gs["file"], "/graph/file");
      auto full = std::filesystem::path(file).is_absolute() ? file : (std::filesystem::path(c.base_dir) / file).string();
      g = load_graph(full);
      if (g.size() > c.vertex_cap) throw CapExceeded("graph file exceeds vertex cap");
    } else {
      auto gen = gs["generator"].get<std::string>();
      LatticeOptions o;
      o.vertex_cap = c.vertex_cap;
      o.mu = detail::vertex_profile(gs.value("mu", json()), "/graph/mu", c.seed);
      o.w = detail::edge_profile(gs.value("w", json()), "/graph/w", c.seed ^ 0x9e3779b97f4a7c15ULL);
      if (gs.value("boundary", std::string("free")) == "dirichlet") o.boundary = OuterBoundary::dirichlet;
      if (gen == "lattice")
        g = build_lattice(gs["dimension"].get<int>(), gs["radius"].get<int>(), o);
      else if (gen == "half_line")
        g = build_half_line(gs["length"].get<int>(), o);
      else
        g = build_tree(gs["branching"].get<int>(), gs["depth"].get<int>(), c.vertex_cap);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("/graph", e.what());
  }
  {
    auto W = detail::vertex_values(g, c.baseline, "/baseline", c.base_dir, false);
    bool any = false;
    for (Index x = 0; x < g.size(); ++x) {
      if (W[x] < 0.0) throw ConfigError("/baseline", "baseline W must be nonnegative");
      if (W[x] != 0.0) any = true;
      W[x] += g.W()[x];
    }
    if (any) g = g.with_W(std::move(W));
  }
  s.V = PotentialField(detail::vertex_values(g, c.potential, "/potential", c.base_dir, true));
  if (!c.exhaustion.is_null()) {
    auto center = detail::str(c.exhaustion["center"], "/exhaustion/center");
    auto ci = g.find(center);
    if (!ci) throw ConfigError("/exhaustion/center", "unknown vertex '" + center + "'");
    s.center = *ci;
    auto metric = c.exhaustion.value("metric", std::string("graph")) == "sup" ? BallMetric::sup : BallMetric::graph;
    try {
      s.exhaustion = ball_exhaustion(g, center, detail::radii_list(c.exhaustion["radii"], "/exhaustion/radii"), metric);
    } catch (const Error& e) {
      throw ConfigError("/exhaustion", e.what());
    }
  }
  s.graph = std::make_shared<const WeightedGraph>(std::move(g));
  return s;
}

// Same scenario with generator size and exhaustion radii doubled.
inline ScenarioConfig doubled(const ScenarioConfig& c) {
  if (c.graph.contains("file")) throw DomainError("doubling needs a generated graph");
  ScenarioConfig d = c;
  auto& g = d.graph;
  const auto gen = g["generator"].get<std::string>();
  if (gen == "lattice")
    g["radius"] = 2 * g["radius"].get<int>();
  else if (gen == "half_line")
    g["length"] = 2 * g["length"].get<int>();
  else
    g["depth"] = 2 * g["depth"].get<int>();
  if (!d.exhaustion.is_null()) {
    auto r = detail::radii_list(d.exhaustion["radii"], "/exhaustion/radii");
    for (int& x : r) x *= 2;
    d.exhaustion["radii"] = r;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Running

struct OpOutcome {
  json result = json::object();
  json verdicts = json::object();
  std::string error;
  std::map<std::string, std::string> csv;  // sidecar name -> content
};

struct RunOptions {
  bool normalize = false;
  bool want_csv = false;
};

namespace detail {

inline SpectralOptions spectral_of(const ScenarioConfig& c) {
  SpectralOptions o;
  o.dense_cap = c.dense_cap;
  o.dense_preferred = c.dense_preferred;
  o.seed = c.seed;
  return o;
}

inline BSOptions bs_of(const ScenarioConfig& c) {
  BSOptions o;
  o.tol = c.tol.at("bs");
  o.tol_zero = c.tol.at("zero");
  o.tol_pd = c.tol.at("pd");
  o.spectral = spectral_of(c);
  return o;
}

inline json op_params(const ScenarioConfig& c, const std::string& op) {
  return c.params.contains(op) ? c.params[op] : json::object();
}

inline VertexSet probe_of(const ScenarioConfig& c, const Scenario& s, const json& p, const std::string& path) {
  if (p.contains("probe")) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < p["probe"].size(); ++i) ids.push_back(str(p["probe"][i], path + "/probe/" + std::to_string(i)));
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (!s.graph->find(ids[i])) throw ConfigError(path + "/probe/" + std::to_string(i), "unknown vertex '" + ids[i] + "'");
    return ids_to_set(*s.graph, ids);
  }
  if (!s.center) throw ConfigError(path + "/probe", "no probe given and no exhaustion center to default to");
  (void)c;
  return {*s.center};
}

inline const Exhaustion& need_exhaustion(const Scenario& s, const std::string& op) {
  if (!s.exhaustion) throw ConfigError("/exhaustion", "operation '" + op + "' needs an exhaustion");
  return *s.exhaustion;
}

inline std::string eigen_csv(const VectorXd& v) {
  std::ostringstream os;
  write_eigen_csv(os, v);
  return os.str();
}

inline OpOutcome run_morse(const ScenarioConfig& c, const Scenario& s) {
  OpOutcome o;
  OperatorBundle H(s.graph, s.V);
  auto so = spectral_of(c);
  auto mi = morse_index(H, c.tol.at("zero"), so);
  o.result["n_minus"] = mi.count;
  o.result["count"] = to_json(mi);
  VectorXd ev;
  if (H.size() <= so.dense_preferred) {
    ev = dense_eigh(MatrixXd(H.sym_matrix()), false).values;
  } else {
    ev = lowest_values(H.sym_matrix(), std::min<int>(H.size(), mi.count + 6), so);
  }
  o.result["spectrum_complete"] = ev.size() == H.size();
  o.result["lowest"] = vec_json(ev.head(std::min<Eigen::Index>(ev.size(), 10)));
  o.verdicts["count_unambiguous"] = !mi.ambiguous;
  auto p = op_params(c, "morse");
  if (p.contains("expect")) o.verdicts["matches_expected"] = mi.count == integer(p["expect"], "/params/morse/expect");
  o.csv[c.id + "_eigenvalues.csv"] = eigen_csv(ev);
  return o;
}

inline OpOutcome run_bs(const ScenarioConfig& c, const Scenario& s) {
  OpOutcome o;
  auto p = op_params(c, "bs");
  OperatorBundle L(s.graph, PotentialField::zero(s.graph->size()));
  PotentialField V = p.value("use_negative_part", false) ? s.V.negative_part() : s.V;
  auto r = bs_bound_check(L, V, bs_of(c));
  o.result = to_json(*s.graph, r);
  o.verdicts["holds"] = r.holds;
  return o;
}

inline OpOutcome run_doob(const ScenarioConfig& c, const Scenario& s) {
  OpOutcome o;
  auto p = op_params(c, "doob");
  auto so = spectral_of(c);
  OperatorBundle H(s.graph, s.V);
  const auto mode = p.value("phi", std::string("ground_state"));
  VectorXd phi;
  if (mode == "ground_state") {
    phi = ground_state(H, so).phi;
  } else if (mode == "random") {
    double lo = p.value("lo", 0.1), hi = p.value("hi", 10.0);
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(lo, hi);
    phi.resize(H.size());
    for (Index x = 0; x < H.size(); ++x) phi[x] = u(rng);
  } else if (mode == "exterior") {
    const auto& ex = need_exhaustion(s, "doob");
    if (ex.size() < 2) throw DomainError("exterior phi needs at least two exhaustion levels");
    auto rb = restrict_bundle(H, ex.last(), BoundaryKind::dirichlet);
    Restriction meta{WeightedGraph(), ex.last(), {}, BoundaryKind::dirichlet};
    std::vector<VertexSet> inner;
    for (std::size_t k = 0; k + 1 < ex.size(); ++k) inner.push_back(to_local(meta, ex.level(k)));
    auto scan = find_stable_exterior(rb.bundle, Exhaustion(inner), c.tol.at("stable"), so);
    if (!scan.found()) throw Error("no exhaustion level has a stable exterior");
    auto sol = exterior_positive_solution(rb.bundle, scan.K, {}, c.tol.at("pd"), so);
    auto d = doob_transform(rb.bundle, sol.phi);
    auto chk = compact_support_check(d.q, set_union(scan.K, sol.layer), c.tol.at("support"));
    const auto& og = rb.bundle.graph();
    o.result["phi_source"] = mode;
    o.result["stable_K"] = ids_json(og, scan.K);
    o.result["conjugation_residual"] = d.conjugation_residual;
    o.result["exterior_residual"] = chk.max_exterior;
    o.result["q_support"] = ids_json(og, d.q.support(c.tol.at("support") * std::max(1.0, d.q.max_abs())));
    o.verdicts["conjugation"] = d.conjugation_residual <= c.tol.at("conjugation");
    o.verdicts["compact_support"] = chk.ok;
    return o;
  } else {
    throw ConfigError("/params/doob/phi", "unknown phi source '" + mode + "'");
  }
  auto d = doob_transform(H, phi);
  o.result["phi_source"] = mode;
  o.result["conjugation_residual"] = d.conjugation_residual;
  o.verdicts["conjugation"] = d.conjugation_residual <= c.tol.at("conjugation");
  o.result["q_min"] = d.q.min();
  o.result["q_max"] = d.q.max();
  if (H.size() <= so.dense_preferred) {
    auto a = dense_eigh(MatrixXd(H.sym_matrix()), false).values;
    auto b = dense_eigh(MatrixXd(d.bundle.sym_matrix()), false).values;
    double dev = (a - b).cwiseAbs().maxCoeff() / std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
    o.result["spectra_deviation"] = dev;
    o.verdicts["spectra_match"] = dev <= c.tol.at("spectra");
  }
  if (mode == "ground_state") {
    double l1 = lambda1(H, so);
    double spread = 0.0;
    for (Index x = 0; x < H.size(); ++x) spread = std::max(spread, std::abs(d.q[x] - l1));
    o.result["lambda1"] = l1;
    o.result["q_deviation_from_lambda1"] = spread;
    o.verdicts["q_constant"] = spread <= 1e-8 * H.scale();
  }
  return o;
}

inline OpOutcome run_green(const ScenarioConfig& c, const Scenario& s) {
  OpOutcome o;
  auto p = op_params(c, "green");
  const auto& ex = need_exhaustion(s, "green");
  OperatorBundle L(s.graph, s.V);
  auto probe = probe_of(c, s, p, "/params/green");
  if (!is_subset(probe, ex.level(0))) throw ConfigError("/params/green/probe", "probe must lie in the first level");
  json levels = json::array();
  bool monotone = true, nonneg = true, symmetric = true;
  MatrixXd prev;
  for (std::size_t k = 0; k < ex.size(); ++k) {
    const auto& lev = ex.level(k);
    json lj = {{"level_index", k}, {"level_size", lev.size()}};
    MatrixXd G;
    if (static_cast<Index>(lev.size()) <= 4000) {
      MatrixXd full = green_kernel(L, lev);
      double mn = full.minCoeff();
      lj["min_entry"] = mn;
      if (mn < -1e-12) nonneg = false;
      auto pos = detail::positions_in(lev, probe, "probe");
      G.resize(pos.size(), pos.size());
      for (std::size_t i = 0; i < pos.size(); ++i)
        for (std::size_t j = 0; j < pos.size(); ++j) G(i, j) = full(pos[i], pos[j]);
      lj["mode"] = "dense";
    } else {
      G = green_block(L, lev, probe);
      if (G.minCoeff() < -1e-12) nonneg = false;
      lj["mode"] = "probe_pairs";
    }
    if (relative_asymmetry(G) > 1e-12) symmetric = false;
    if (prev.size() && (G - prev).minCoeff() < -1e-10) monotone = false;
    json gp = json::array();
    for (Eigen::Index i = 0; i < G.rows(); ++i) gp.push_back(vec_json(G.row(i).transpose()));
    lj["probe_block"] = gp;
    levels.push_back(lj);
    prev = G;
  }
  o.result["probe"] = ids_json(*s.graph, probe);
  o.result["levels"] = levels;
  o.verdicts["nonnegative"] = nonneg;
  o.verdicts["monotone"] = monotone;
  o.verdicts["symmetric"] = symmetric;
  return o;
}

inline OpOutcome run_parabolicity(const ScenarioConfig& c, const Scenario& s) {
  OpOutcome o;
  auto p = op_params(c, "parabolicity");
  const auto& ex = need_exhaustion(s, "parabolicity");
  OperatorBundle L(s.graph, s.V);
  auto probe = probe_of(c, s, p, "/params/parabolicity");
  auto pv = parabolicity_test(L, ex, probe, c.tol.at("stall"), static_cast<int>(c.tol.at("decay_window")));
  o.result = to_json(pv, *s.graph);
  if (p.contains("expect")) o.verdicts["matches_expected"] = std::string(to_string(pv.verdict)) == str(p["expect"], "/params/parabolicity/expect");
  std::ostringstream os;
  write_parabolicity_csv(os, pv, *s.graph);
  o.csv[c.id + "_parabolicity.csv"] = os.str();
  return o;
}

inline OpOutcome run_bracket(const ScenarioConfig& c, const Scenario& s) {
  OpOutcome o;
  auto p = op_params(c, "bracket");
  OperatorBundle H(s.graph, s.V);
  VertexSet K;
  if (p.contains("K")) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < p["K"].size(); ++i) {
      ids.push_back(str(p["K"][i], "/params/bracket/K/" + std::to_string(i)));
      if (!s.graph->find(ids.back())) throw ConfigError("/params/bracket/K/" + std::to_string(i), "unknown vertex '" + ids.back() + "'");
    }
    K = ids_to_set(*s.graph, ids);
  } else {
    int lvl = p.contains("level") ? integer(p["level"], "/params/bracket/level") : 0;
    K = need_exhaustion(s, "bracket").level(static_cast<std::size_t>(lvl));
  }
  std::vector<double> lambdas{0.0};
  if (p.contains("lambdas")) lambdas = p["lambdas"].get<std::vector<double>>();
  json arr = json::array();
  bool all = true;
  for (double lam : lambdas) {
    auto b = bracketing_check(H, K, lam, c.tol.at("zero"), spectral_of(c));
    arr.push_back(to_json(b));
    all = all && b.holds;
  }
  o.result["K"] = ids_json(*s.graph, K);
  o.result["results"] = arr;
  o.verdicts["holds"] = all;
  return o;
}

inline PipelineConfig pipeline_of(const ScenarioConfig& c) {
  PipelineConfig p;
  p.tol_zero = c.tol.at("zero");
  p.tol_stable = c.tol.at("stable");
  p.tol_pd = c.tol.at("pd");
  p.tol_support = c.tol.at("support");
  p.tol_spectra = c.tol.at("spectra");
  p.tol_bs = c.tol.at("bs");
  p.tol_nonneg = c.tol.at("nonneg");
  p.spectral = spectral_of(c);
  return p;
}

inline OpOutcome run_pipeline(const ScenarioConfig& c, const Scenario& s) {
  OpOutcome o;
  auto p = op_params(c, "pipeline");
  OperatorBundle H(s.graph, s.V);
  auto rep = main_theorem_pipeline(H, need_exhaustion(s, "pipeline"), pipeline_of(c));
  o.result = to_json(rep, p.value("include_phi", true));
  for (const auto& [k, v] : rep.verdicts) o.verdicts[k] = v;
  if (p.value("doubling", false)) {
    auto dc = doubled(c);
    auto ds = build_scenario(dc);
    OperatorBundle H2(ds.graph, ds.V);
    auto rep2 = main_theorem_pipeline(H2, *ds.exhaustion, pipeline_of(dc));
    int bs1 = rep.bs ? rep.bs->bs_count : -1, bs2 = rep2.bs ? rep2.bs->bs_count : -1;
    o.result["doubling"] = {{"omega_size", rep2.omega->size()},
                            {"morse_index", rep2.morse_index},
                            {"bs_count", bs2},
                            {"morse_sensitivity", std::abs(rep2.morse_index - rep.morse_index)},
                            {"bs_sensitivity", std::abs(bs2 - bs1)},
                            {"verdicts", json::object()}};
    for (const auto& [k, v] : rep2.verdicts) o.result["doubling"]["verdicts"][k] = v;
    o.verdicts["doubled_run"] = rep2.all_true();
    o.verdicts["doubling_invariant"] = rep2.morse_index == rep.morse_index && bs1 == bs2;
  }
  return o;
}

inline OpOutcome run_kernel(const ScenarioConfig& c, const Scenario& s) {
  OpOutcome o;
  auto p = op_params(c, "kernel");
  OperatorBundle L(s.graph, PotentialField::zero(s.graph->size()));
  PotentialField V = s.V;
  if (p.value("tune", false)) {
    double l1 = lambda1(OperatorBundle(s.graph, s.V), spectral_of(c));
    V = V.plus(PotentialField(std::vector<double>(s.graph->size(), -l1)));
    o.result["tuned_by"] = -l1;
  }
  auto kc = kernel_check(L, V, c.tol.at("zero"), bs_of(c));
  o.result["kernel_dim"] = kc.kernel_dim;
  o.result["inclusion_residuals"] = kc.residuals;
  o.result["shift"] = shift_json(*s.graph, kc.shift);
  bool ok = true;
  for (double r : kc.residuals) ok = ok && r <= c.tol.at("kernel");
  o.verdicts["inclusion"] = ok;
  if (p.value("tune", false)) o.verdicts["kernel_found"] = kc.kernel_dim >= 1;
  return o;
}

inline OpOutcome run_clr(const ScenarioConfig& c, const Scenario& s) {
  OpOutcome o;
  auto p = op_params(c, "clr");
  OperatorBundle L(s.graph, PotentialField::zero(s.graph->size()));
  std::vector<double> lambdas{4, 8, 16, 32, 64};
  if (p.contains("lambdas")) lambdas = p["lambdas"].get<std::vector<double>>();
  auto r = clr_scaling_probe(L, s.V, lambdas, c.tol.at("zero"), spectral_of(c));
  o.result = {{"lambdas", r.lambdas}, {"counts", r.counts}, {"exponent", r.exponent}};
  o.verdicts["monotone"] = r.monotone;
  if (p.contains("max_exponent"))
    o.verdicts["exponent_bound"] = r.exponent <= num(p["max_exponent"], "/params/clr/max_exponent");
  return o;
}

}  // namespace detail

struct RunReport {
  std::string id;
  json doc;
  bool all_true = false;
  std::map<std::string, std::string> csv;
};

inline RunReport run(const ScenarioConfig& c, const RunOptions& ro = {}) {
  RunReport rr;
  rr.id = c.id;
  json ops = json::array();
  bool all = true;
  std::optional<Scenario> scen;
  std::string scen_error;
  try {
    scen = build_scenario(c);
  } catch (const std::exception& e) {
    scen_error = e.what();
  }
  for (const auto& op : c.operations) {
    auto t0 = std::chrono::steady_clock::now();
    OpOutcome out;
    try {
      if (!scen) throw ConfigError("/graph", scen_error);
      if (op == "morse") out = detail::run_morse(c, *scen);
      else if (op == "bs") out = detail::run_bs(c, *scen);
      else if (op == "doob") out = detail::run_doob(c, *scen);
      else if (op == "green") out = detail::run_green(c, *scen);
      else if (op == "parabolicity") out = detail::run_parabolicity(c, *scen);
      else if (op == "bracket") out = detail::run_bracket(c, *scen);
      else if (op == "pipeline") out = detail::run_pipeline(c, *scen);
      else if (op == "kernel") out = detail::run_kernel(c, *scen);
      else out = detail::run_clr(c, *scen);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    bool ok = out.error.empty();
    for (const auto& [k, v] : out.verdicts.items()) ok = ok && v.get<bool>();
    all = all && ok;
    json entry = {{"op", op}, {"ok", ok}, {"verdicts", out.verdicts}, {"result", out.result}};
    if (!out.error.empty()) entry["error"] = out.error;
    if (!ro.normalize) entry["wall_ms"] = ms;
    ops.push_back(entry);
    if (ro.want_csv)
      for (auto& [name, content] : out.csv) rr.csv[name] = std::move(content);
  }
  json tols = json::object();
  for (const auto& [k, v] : c.tol) tols[k] = v;
  rr.doc = {{"tool", "finmorse"},
            {"version", tool_version},
            {"scenario", c.id},
            {"seed", c.seed},
            {"config", c.echo()},
            {"tolerances", tols},
            {"operations", ops},
            {"all_verdicts_true", all}};
  rr.all_true = all;
  return rr;
}

// Runs scenarios on up to `jobs` threads; results come back ordered by id
// (ties keep input order).
inline std::vector<RunReport> run_batch(const std::vector<ScenarioConfig>& cs, int jobs, const RunOptions& ro = {}) {
  std::vector<RunReport> out(cs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cs.size(); i = next++) out[i] = run(cs[i], ro);
  };
  int n = std::max(1, std::min<int>(jobs, static_cast<int>(cs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::stable_sort(out.begin(), out.end(), [](const RunReport& a, const RunReport& b) { return a.id < b.id; });
  return out;
}

inline json batch_json(const std::vector<RunReport>& rs) {
  json reports = json::array();
  bool all = true;
  for (const auto& r : rs) {
    reports.push_back(r.doc);
    all = all && r.all_true;
  }
  return {{"tool", "finmorse"}, {"version", tool_version}, {"reports", reports}, {"all_verdicts_true", all}};
}

// {"scenarios": [config object | "relative/path.json", ...]}
inline std::vector<ScenarioConfig> load_batch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open batch file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
  auto dir = std::filesystem::path(path).parent_path();
  if (dir.empty()) dir = ".";
  if (!doc.is_object() || !doc.contains("scenarios") || !doc["scenarios"].is_array())
    throw ConfigError("/scenarios", "batch document needs a scenarios array");
  std::vector<ScenarioConfig> out;
  for (std::size_t i = 0; i < doc["scenarios"].size(); ++i) {
    const auto& s = doc["scenarios"][i];
    const std::string p = "/scenarios/" + std::to_string(i);
    try {
      if (s.is_string())
        out.push_back(load_config((dir / s.get<std::string>()).string()));
      else
        out.push_back(parse_config(s, dir.string()));
    } catch (const ConfigError& e) {
      throw ConfigError(p, e.what());
    }
  }
  return out;
}

}  // namespace finmorse
