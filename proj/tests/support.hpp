#pragma once

// Seeded instance generators shared by the unit, property and acceptance
// suites.

#include <cstdint>
#include <memory>
#include <random>
#include <set>
#include <vector>

#include "finmorse/finmorse.hpp"

namespace fmtest {

using namespace finmorse;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Connected graph: random spanning tree plus extra edges.
inline WeightedGraph random_graph(std::mt19937_64& rng, int n, double extra = 1.0, double lo = 0.5, double hi = 2.0,
                                  double W_max = 0.0) {
  std::vector<std::string> ids;
  std::vector<double> mu, W;
  for (int i = 0; i < n; ++i) {
    ids.push_back("v" + std::to_string(i));
    mu.push_back(uniform(rng, lo, hi));
    W.push_back(W_max > 0.0 ? uniform(rng, 0.0, W_max) : 0.0);
  }
  std::vector<Edge> edges;
  std::set<std::pair<int, int>> seen;
  for (int i = 1; i < n; ++i) {
    int j = uniform_int(rng, 0, i - 1);
    edges.push_back({j, i, uniform(rng, lo, hi)});
    seen.insert({j, i});
  }
  int want = static_cast<int>(extra * n);
  for (int t = 0; t < 10 * want && want > 0 && n > 2; ++t) {
    int a = uniform_int(rng, 0, n - 1), b = uniform_int(rng, 0, n - 1);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b}).second) continue;
    edges.push_back({a, b, uniform(rng, lo, hi)});
    if (--want == 0) break;
  }
  return WeightedGraph(ids, mu, W, edges);
}

inline PotentialField random_potential(std::mt19937_64& rng, int n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return PotentialField(std::move(v));
}

inline VectorXd random_vector(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
  return v;
}

inline std::shared_ptr<const WeightedGraph> share(WeightedGraph g) {
  return std::make_shared<const WeightedGraph>(std::move(g));
}

inline OperatorBundle bundle(WeightedGraph g, std::vector<double> V = {}) {
  auto p = share(std::move(g));
  if (V.empty()) V.assign(p->size(), 0.0);
  return OperatorBundle(p, PotentialField(std::move(V)));
}

// Path a-b-c-... with unit data.
inline WeightedGraph path(int n) {
  std::vector<std::string> ids;
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) ids.push_back(std::string(1, static_cast<char>('a' + i)));
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return WeightedGraph(ids, std::vector<double>(n, 1.0), std::vector<double>(n, 0.0), edges);
}

inline VertexSet ball_of(const WeightedGraph& g, Index center, int r) { return ball(graph_distances(g, center), r); }

// Random compact well: depth in [lo, hi] on a random ball around a random vertex.
inline PotentialField random_well(std::mt19937_64& rng, const WeightedGraph& g, double lo, double hi, int rmax = 1) {
  Index c = uniform_int(rng, 0, g.size() - 1);
  int r = uniform_int(rng, 0, rmax);
  double depth = uniform(rng, lo, hi);
  std::vector<double> v(g.size(), 0.0);
  for (Index x : ball_of(g, c, r)) v[x] = -depth;
  return PotentialField(std::move(v));
}

inline VectorXd sorted(VectorXd v) {
  std::sort(v.data(), v.data() + v.size());
  return v;
}

inline double rel_dev(const VectorXd& a, const VectorXd& b) {
  double d = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / d;
}

}  // namespace fmtest
