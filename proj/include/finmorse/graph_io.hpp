#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "json.hpp"

#include "finmorse/graph.hpp"

namespace finmorse {

namespace detail {

inline double json_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

inline std::string json_id(const nlohmann::json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ConfigError(path, "expected a string vertex id");
}

}  // namespace detail

// Reads {"vertices":[{"id","mu","W"}],"edges":[{"u","v","w"}]}. mu defaults
// to 1 and W to 0. Every violation is reported with a JSON pointer style path.
inline WeightedGraph graph_from_json(const nlohmann::json& doc, const std::string& root = "") {
  if (!doc.is_object()) throw ConfigError(root.empty() ? "/" : root, "graph document must be an object");
  if (!doc.contains("vertices") || !doc["vertices"].is_array())
    throw ConfigError(root + "/vertices", "missing vertex array");
  if (doc.contains("edges") && !doc["edges"].is_array()) throw ConfigError(root + "/edges", "expected an array");

  const auto& vs = doc["vertices"];
  std::vector<std::string> ids;
  std::vector<double> mu, W;
  std::unordered_map<std::string, Index> seen;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const std::string p = root + "/vertices/" + std::to_string(i);
    const auto& v = vs[i];
    if (!v.is_object()) throw ConfigError(p, "vertex must be an object");
    if (!v.contains("id")) throw ConfigError(p + "/id", "missing vertex id");
    auto id = detail::json_id(v["id"], p + "/id");
    if (!seen.emplace(id, static_cast<Index>(i)).second) throw ConfigError(p + "/id", "duplicate vertex id '" + id + "'");
    double m = v.contains("mu") ? detail::json_number(v["mu"], p + "/mu") : 1.0;
    if (m <= 0.0) throw ConfigError(p + "/mu", "mu must be positive");
    double w = v.contains("W") ? detail::json_number(v["W"], p + "/W") : 0.0;
    if (w < 0.0) throw ConfigError(p + "/W", "W must be nonnegative");
    ids.push_back(std::move(id));
    mu.push_back(m);
    W.push_back(w);
  }
  std::vector<Edge> edges;
  if (doc.contains("edges")) {
    const auto& es = doc["edges"];
    std::unordered_map<std::string, std::size_t> pairs;
    for (std::size_t i = 0; i < es.size(); ++i) {
      const std::string p = root + "/edges/" + std::to_string(i);
      const auto& e = es[i];
      if (!e.is_object()) throw ConfigError(p, "edge must be an object");
      for (const char* key : {"u", "v"})
        if (!e.contains(key)) throw ConfigError(p + "/" + key, "missing edge endpoint");
      auto u = detail::json_id(e["u"], p + "/u");
      auto v = detail::json_id(e["v"], p + "/v");
      auto iu = seen.find(u);
      if (iu == seen.end()) throw ConfigError(p + "/u", "unknown vertex '" + u + "'");
      auto iv = seen.find(v);
      if (iv == seen.end()) throw ConfigError(p + "/v", "unknown vertex '" + v + "'");
      if (iu->second == iv->second) throw ConfigError(p, "self-loop at '" + u + "'");
      double w = e.contains("w") ? detail::json_number(e["w"], p + "/w") : 1.0;
      if (w <= 0.0) throw ConfigError(p + "/w", "conductance must be positive");
      auto a = std::min(iu->second, iv->second), b = std::max(iu->second, iv->second);
      auto key = std::to_string(a) + ":" + std::to_string(b);
      if (!pairs.emplace(key, i).second) throw ConfigError(p, "duplicate edge '" + u + "'-'" + v + "'");
      edges.push_back({iu->second, iv->second, w});
    }
  }
  return {std::move(ids), std::move(mu), std::move(W), std::move(edges)};
}

inline WeightedGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open graph file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
  return graph_from_json(doc);
}

inline nlohmann::json graph_to_json(const WeightedGraph& g) {
  nlohmann::json vs = nlohmann::json::array(), es = nlohmann::json::array();
  for (Index i = 0; i < g.size(); ++i) vs.push_back({{"id", g.id(i)}, {"mu", g.mu()[i]}, {"W", g.W()[i]}});
  for (const auto& e : g.edges()) es.push_back({{"u", g.id(e.u)}, {"v", g.id(e.v)}, {"w", e.w}});
  return {{"vertices", vs}, {"edges", es}};
}

}  // namespace finmorse
