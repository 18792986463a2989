#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "finmorse/errors.hpp"

namespace finmorse {

using Index = int;
// Sorted, duplicate free list of vertex indices.
using VertexSet = std::vector<Index>;

enum class BoundaryKind { dirichlet, neumann };
enum class OuterBoundary { free, dirichlet };
enum class BallMetric { graph, sup };

struct Edge {
  Index u;
  Index v;
  double w;
};

inline constexpr Index default_vertex_cap = 50000;

inline bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

class WeightedGraph {
 public:
  WeightedGraph() = default;

  // boundary_mass is the grounded part of the form: vertex x carries an extra
  // b(x) f(x)^2, the trace of edges to vertices that were cut away.
  WeightedGraph(std::vector<std::string> ids, std::vector<double> mu, std::vector<double> W,
                std::vector<Edge> edges, std::vector<double> boundary_mass = {},
                std::vector<std::vector<int>> coords = {})
      : ids_(std::move(ids)),
        mu_(std::move(mu)),
        W_(std::move(W)),
        bmass_(std::move(boundary_mass)),
        edges_(std::move(edges)),
        coords_(std::move(coords)) {
    const auto n = ids_.size();
    if (mu_.size() != n || W_.size() != n)
      throw DimensionMismatch("mu and W must have one entry per vertex");
    if (bmass_.empty()) bmass_.assign(n, 0.0);
    if (bmass_.size() != n) throw DimensionMismatch("boundary mass must have one entry per vertex");
    if (!coords_.empty() && coords_.size() != n)
      throw DimensionMismatch("coordinates must have one entry per vertex");
    lookup_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!lookup_.emplace(ids_[i], static_cast<Index>(i)).second)
        throw GraphError("duplicate vertex id '" + ids_[i] + "'");
      if (!finite_positive(mu_[i]))
        throw GraphError("mu must be positive at vertex '" + ids_[i] + "'");
      if (!std::isfinite(W_[i]) || W_[i] < 0.0)
        throw GraphError("W must be nonnegative at vertex '" + ids_[i] + "'");
      if (!std::isfinite(bmass_[i]) || bmass_[i] < 0.0)
        throw GraphError("boundary mass must be nonnegative at vertex '" + ids_[i] + "'");
    }
    std::vector<Index> deg(n + 1, 0);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(edges_.size() * 2);
    for (auto& e : edges_) {
      if (e.u < 0 || e.v < 0 || e.u >= static_cast<Index>(n) || e.v >= static_cast<Index>(n))
        throw GraphError("edge endpoint out of range");
      if (e.u == e.v) throw GraphError("self-loop at vertex '" + ids_[e.u] + "'");
      if (!finite_positive(e.w))
        throw GraphError("conductance must be positive on edge '" + ids_[e.u] + "'-'" + ids_[e.v] + "'");
      if (e.u > e.v) std::swap(e.u, e.v);
      auto key = (static_cast<std::uint64_t>(e.u) << 32) | static_cast<std::uint32_t>(e.v);
      if (!seen.insert(key).second)
        throw GraphError("duplicate edge '" + ids_[e.u] + "'-'" + ids_[e.v] + "'");
      ++deg[e.u + 1];
      ++deg[e.v + 1];
    }
    for (std::size_t i = 0; i < n; ++i) deg[i + 1] += deg[i];
    adj_ptr_ = deg;
    adj_idx_.resize(adj_ptr_.back());
    adj_w_.resize(adj_ptr_.back());
    std::vector<Index> fill(adj_ptr_.begin(), adj_ptr_.end() - 1);
    for (const auto& e : edges_) {
      adj_idx_[fill[e.u]] = e.v;
      adj_w_[fill[e.u]++] = e.w;
      adj_idx_[fill[e.v]] = e.u;
      adj_w_[fill[e.v]++] = e.w;
    }
  }

  Index size() const { return static_cast<Index>(ids_.size()); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(Index i) const { return ids_.at(i); }
  std::optional<Index> find(const std::string& id) const {
    auto it = lookup_.find(id);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }
  Index index_of(const std::string& id) const {
    auto i = find(id);
    if (!i) throw GraphError("unknown vertex id '" + id + "'");
    return *i;
  }

  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& W() const { return W_; }
  const std::vector<double>& boundary_mass() const { return bmass_; }
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const Index> neighbors(Index x) const {
    return {adj_idx_.data() + adj_ptr_[x], static_cast<std::size_t>(adj_ptr_[x + 1] - adj_ptr_[x])};
  }
  std::span<const double> neighbor_weights(Index x) const {
    return {adj_w_.data() + adj_ptr_[x], static_cast<std::size_t>(adj_ptr_[x + 1] - adj_ptr_[x])};
  }
  double degree(Index x) const {
    double s = 0.0;
    for (double w : neighbor_weights(x)) s += w;
    return s;
  }

  bool has_coords() const { return !coords_.empty(); }
  const std::vector<int>& coord(Index x) const { return coords_.at(x); }
  const std::vector<std::vector<int>>& coords() const { return coords_; }

  WeightedGraph with_W(std::vector<double> W) const {
    return {ids_, mu_, std::move(W), edges_, bmass_, coords_};
  }
  WeightedGraph with_mu(std::vector<double> mu) const {
    return {ids_, std::move(mu), W_, edges_, bmass_, coords_};
  }

  // Component label per vertex, labels numbered in order of first vertex.
  std::vector<Index> components() const {
    std::vector<Index> label(ids_.size(), -1);
    Index next = 0;
    std::vector<Index> stack;
    for (Index s = 0; s < size(); ++s) {
      if (label[s] >= 0) continue;
      label[s] = next;
      stack.push_back(s);
      while (!stack.empty()) {
        Index x = stack.back();
        stack.pop_back();
        for (Index y : neighbors(x))
          if (label[y] < 0) {
            label[y] = next;
            stack.push_back(y);
          }
      }
      ++next;
    }
    return label;
  }
  bool connected() const {
    if (ids_.empty()) return true;
    auto lab = components();
    return *std::max_element(lab.begin(), lab.end()) == 0;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<double> mu_;
  std::vector<double> W_;
  std::vector<double> bmass_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> coords_;
  std::unordered_map<std::string, Index> lookup_;
  std::vector<Index> adj_ptr_{0};
  std::vector<Index> adj_idx_;
  std::vector<double> adj_w_;
};

// ---------------------------------------------------------------------------
// Potential

class PotentialField {
 public:
  PotentialField() = default;
  explicit PotentialField(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_)
      if (!std::isfinite(v)) throw DomainError("potential values must be finite");
  }
  static PotentialField zero(Index n) { return PotentialField(std::vector<double>(n, 0.0)); }

  Index size() const { return static_cast<Index>(values_.size()); }
  double operator[](Index i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

  VertexSet support(double tol = 0.0) const {
    VertexSet s;
    for (Index i = 0; i < size(); ++i)
      if (std::abs(values_[i]) > tol) s.push_back(i);
    return s;
  }
  // min(V, 0), i.e. -V_-.
  PotentialField negative_part() const {
    std::vector<double> v(values_);
    for (double& x : v) x = std::min(x, 0.0);
    return PotentialField(std::move(v));
  }
  PotentialField restricted(const VertexSet& region) const {
    std::vector<double> v;
    v.reserve(region.size());
    for (Index i : region) v.push_back(values_.at(i));
    return PotentialField(std::move(v));
  }
  PotentialField scaled(double c) const {
    std::vector<double> v(values_);
    for (double& x : v) x *= c;
    return PotentialField(std::move(v));
  }
  PotentialField plus(const PotentialField& o) const {
    if (o.size() != size()) throw DimensionMismatch("potential sizes differ");
    std::vector<double> v(values_);
    for (Index i = 0; i < size(); ++i) v[i] += o[i];
    return PotentialField(std::move(v));
  }
  double min() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }
  double max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Vertex set helpers

inline VertexSet make_set(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline VertexSet complement(Index n, const VertexSet& s) {
  VertexSet out;
  out.reserve(n - static_cast<Index>(s.size()));
  std::size_t j = 0;
  for (Index i = 0; i < n; ++i) {
    if (j < s.size() && s[j] == i) {
      ++j;
      continue;
    }
    out.push_back(i);
  }
  return out;
}

inline VertexSet set_union(const VertexSet& a, const VertexSet& b) {
  VertexSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline bool is_subset(const VertexSet& a, const VertexSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// Vertices outside s adjacent to s.
inline VertexSet outer_layer(const WeightedGraph& g, const VertexSet& s) {
  std::vector<char> in(g.size(), 0);
  for (Index x : s) in[x] = 1;
  std::vector<Index> out;
  for (Index x : s)
    for (Index y : g.neighbors(x))
      if (!in[y]) out.push_back(y);
  return make_set(std::move(out));
}

inline VertexSet ids_to_set(const WeightedGraph& g, const std::vector<std::string>& ids) {
  std::vector<Index> v;
  v.reserve(ids.size());
  for (const auto& id : ids) v.push_back(g.index_of(id));
  return make_set(std::move(v));
}

inline std::vector<std::string> set_to_ids(const WeightedGraph& g, const VertexSet& s) {
  std::vector<std::string> out;
  out.reserve(s.size());
  for (Index i : s) out.push_back(g.id(i));
  return out;
}

// ---------------------------------------------------------------------------
// Generators

using VertexRule = std::function<double(std::span<const int>)>;
using EdgeRule = std::function<double(std::span<const int>, std::span<const int>)>;

struct LatticeOptions {
  VertexRule mu;
  EdgeRule w;
  VertexRule W;
  OuterBoundary boundary = OuterBoundary::free;
  Index vertex_cap = default_vertex_cap;
};

namespace detail {

inline std::string coord_id(std::span<const int> c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(c[i]);
  }
  return s;
}

inline double eval_vertex(const VertexRule& r, std::span<const int> c, double dflt, const char* what,
                          bool allow_zero) {
  double v = r ? r(c) : dflt;
  bool ok = allow_zero ? (std::isfinite(v) && v >= 0.0) : finite_positive(v);
  if (!ok)
    throw ProfileViolation(std::string(what) + " profile gave " + std::to_string(v) + " at vertex '" +
                           coord_id(c) + "'");
  return v;
}

inline double eval_edge(const EdgeRule& r, std::span<const int> a, std::span<const int> b) {
  double v = r ? r(a, b) : 1.0;
  if (!finite_positive(v))
    throw ProfileViolation("conductance profile gave " + std::to_string(v) + " on edge '" + coord_id(a) +
                           "'-'" + coord_id(b) + "'");
  return v;
}

}  // namespace detail

// Points of Z^d with sup norm <= radius, lexicographic order, nearest
// neighbour edges. Ids are the comma separated coordinates.
inline WeightedGraph build_lattice(int dimension, int radius, const LatticeOptions& opt = {}) {
  if (dimension < 1 || dimension > 4) throw DomainError("lattice dimension must be in 1..4");
  if (radius < 1) throw DomainError("lattice radius must be >= 1");
  const long side = 2L * radius + 1;
  long total = 1;
  for (int d = 0; d < dimension; ++d) {
    total *= side;
    if (total > opt.vertex_cap)
      throw CapExceeded("lattice with " + std::to_string(side) + "^" + std::to_string(dimension) +
                        " vertices exceeds vertex cap " + std::to_string(opt.vertex_cap));
  }
  const Index n = static_cast<Index>(total);
  std::vector<std::vector<int>> coords(n, std::vector<int>(dimension));
  for (Index i = 0; i < n; ++i) {
    long r = i;
    for (int d = dimension - 1; d >= 0; --d) {
      coords[i][d] = static_cast<int>(r % side) - radius;
      r /= side;
    }
  }
  std::vector<long> stride(dimension, 1);
  for (int d = dimension - 2; d >= 0; --d) stride[d] = stride[d + 1] * side;

  std::vector<std::string> ids(n);
  std::vector<double> mu(n), W(n), bmass(n, 0.0);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * dimension);
  std::vector<int> nb(dimension);
  for (Index i = 0; i < n; ++i) {
    const auto& c = coords[i];
    ids[i] = detail::coord_id(c);
    mu[i] = detail::eval_vertex(opt.mu, c, 1.0, "mu", false);
    W[i] = detail::eval_vertex(opt.W, c, 0.0, "W", true);
    for (int d = 0; d < dimension; ++d) {
      for (int s : {-1, 1}) {
        nb = c;
        nb[d] += s;
        bool inside = std::abs(nb[d]) <= radius;
        if (inside && s == 1) {
          edges.push_back({i, static_cast<Index>(i + stride[d]), detail::eval_edge(opt.w, c, nb)});
        } else if (!inside && opt.boundary == OuterBoundary::dirichlet) {
          bmass[i] += detail::eval_edge(opt.w, c, nb);
        }
      }
    }
  }
  return {std::move(ids), std::move(mu), std::move(W), std::move(edges), std::move(bmass), std::move(coords)};
}

// Path 0..length. Profiles see the one-element coordinate {j}; the edge rule
// sees ({j}, {j+1}).
inline WeightedGraph build_half_line(int length, const LatticeOptions& opt = {}) {
  if (length < 1) throw DomainError("half-line length must be >= 1");
  if (length + 1 > opt.vertex_cap) throw CapExceeded("half-line exceeds vertex cap");
  const Index n = length + 1;
  std::vector<std::string> ids(n);
  std::vector<double> mu(n), W(n);
  std::vector<std::vector<int>> coords(n);
  std::vector<Edge> edges;
  for (Index j = 0; j < n; ++j) {
    coords[j] = {j};
    ids[j] = std::to_string(j);
    mu[j] = detail::eval_vertex(opt.mu, coords[j], 1.0, "mu", false);
    W[j] = detail::eval_vertex(opt.W, coords[j], 0.0, "W", true);
  }
  for (Index j = 0; j + 1 < n; ++j) edges.push_back({j, j + 1, detail::eval_edge(opt.w, coords[j], coords[j + 1])});
  std::vector<double> bmass(n, 0.0);
  if (opt.boundary == OuterBoundary::dirichlet) {
    std::vector<int> beyond{n};
    bmass[n - 1] = detail::eval_edge(opt.w, coords[n - 1], beyond);
  }
  return {std::move(ids), std::move(mu), std::move(W), std::move(edges), std::move(bmass), std::move(coords)};
}

// Rooted regular tree, unit weights, vertices in breadth-first order.
inline WeightedGraph build_tree(int branching, int depth, Index vertex_cap = default_vertex_cap) {
  if (branching < 2) throw DomainError("tree branching must be >= 2");
  if (depth < 1) throw DomainError("tree depth must be >= 1");
  long total = 1, layer = 1;
  for (int d = 0; d < depth; ++d) {
    layer *= branching;
    total += layer;
    if (total > vertex_cap)
      throw CapExceeded("tree exceeds vertex cap " + std::to_string(vertex_cap));
  }
  const Index n = static_cast<Index>(total);
  std::vector<std::string> ids(n);
  for (Index i = 0; i < n; ++i) ids[i] = std::to_string(i);
  std::vector<Edge> edges;
  edges.reserve(n - 1);
  for (Index c = 1; c < n; ++c) edges.push_back({(c - 1) / branching, c, 1.0});
  return {std::move(ids), std::vector<double>(n, 1.0), std::vector<double>(n, 0.0), std::move(edges)};
}

// ---------------------------------------------------------------------------
// Exhaustion

class Exhaustion {
 public:
  Exhaustion() = default;
  explicit Exhaustion(std::vector<VertexSet> levels, std::vector<int> radii = {})
      : levels_(std::move(levels)), radii_(std::move(radii)) {
    if (levels_.empty()) throw DomainError("exhaustion needs at least one level");
    if (!radii_.empty() && radii_.size() != levels_.size())
      throw DimensionMismatch("one radius per exhaustion level expected");
    for (std::size_t k = 0; k < levels_.size(); ++k) {
      levels_[k] = make_set(std::move(levels_[k]));
      if (levels_[k].empty()) throw DomainError("exhaustion level " + std::to_string(k) + " is empty");
      if (k > 0 && (levels_[k].size() <= levels_[k - 1].size() || !is_subset(levels_[k - 1], levels_[k])))
        throw DomainError("exhaustion level " + std::to_string(k) + " does not strictly contain level " +
                          std::to_string(k - 1));
    }
  }

  std::size_t size() const { return levels_.size(); }
  const VertexSet& level(std::size_t k) const { return levels_.at(k); }
  const std::vector<VertexSet>& levels() const { return levels_; }
  const std::vector<int>& radii() const { return radii_; }
  const VertexSet& last() const { return levels_.back(); }

 private:
  std::vector<VertexSet> levels_;
  std::vector<int> radii_;
};

inline std::vector<int> graph_distances(const WeightedGraph& g, Index src) {
  std::vector<int> dist(g.size(), -1);
  std::vector<Index> queue{src};
  dist[src] = 0;
  for (std::size_t h = 0; h < queue.size(); ++h) {
    Index x = queue[h];
    for (Index y : g.neighbors(x))
      if (dist[y] < 0) {
        dist[y] = dist[x] + 1;
        queue.push_back(y);
      }
  }
  return dist;
}

inline std::vector<int> sup_distances(const WeightedGraph& g, Index src) {
  if (!g.has_coords()) throw DomainError("sup-norm balls need vertex coordinates");
  std::vector<int> dist(g.size());
  const auto& c0 = g.coord(src);
  for (Index i = 0; i < g.size(); ++i) {
    int m = 0;
    for (std::size_t d = 0; d < c0.size(); ++d) m = std::max(m, std::abs(g.coord(i)[d] - c0[d]));
    dist[i] = m;
  }
  return dist;
}

inline VertexSet ball(const std::vector<int>& dist, int radius) {
  VertexSet s;
  for (Index i = 0; i < static_cast<Index>(dist.size()); ++i)
    if (dist[i] >= 0 && dist[i] <= radius) s.push_back(i);
  return s;
}

inline Exhaustion ball_exhaustion(const WeightedGraph& g, const std::string& center,
                                  const std::vector<int>& radii, BallMetric metric = BallMetric::graph) {
  if (radii.empty()) throw DomainError("radii list is empty");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (radii[k] < 0) throw DomainError("radii must be nonnegative");
    if (k > 0 && radii[k] <= radii[k - 1])
      throw DomainError("radii must be strictly increasing (levels must be nested)");
  }
  Index c = g.index_of(center);
  auto dist = metric == BallMetric::graph ? graph_distances(g, c) : sup_distances(g, c);
  std::vector<VertexSet> levels;
  levels.reserve(radii.size());
  for (int r : radii) levels.push_back(ball(dist, r));
  return Exhaustion(std::move(levels), radii);
}

// ---------------------------------------------------------------------------
// Restriction

struct Restriction {
  WeightedGraph graph;
  VertexSet parent;                   // parent index of each restricted vertex
  std::vector<double> crossing_mass;  // conductance to vertices outside the region
  BoundaryKind bc = BoundaryKind::dirichlet;
};

inline Restriction restrict_to(const WeightedGraph& g, const VertexSet& region, BoundaryKind bc) {
  if (region.empty()) throw DomainError("restriction region is empty");
  std::vector<Index> local(g.size(), -1);
  for (std::size_t i = 0; i < region.size(); ++i) {
    Index x = region[i];
    if (x < 0 || x >= g.size()) throw GraphError("region is not a subset of the vertex set");
    if (i > 0 && region[i] <= region[i - 1]) throw DomainError("region must be sorted and duplicate free");
    local[x] = static_cast<Index>(i);
  }
  const auto m = region.size();
  std::vector<std::string> ids(m);
  std::vector<double> mu(m), W(m), bmass(m), cross(m, 0.0);
  std::vector<std::vector<int>> coords;
  if (g.has_coords()) coords.resize(m);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < m; ++i) {
    Index x = region[i];
    ids[i] = g.id(x);
    mu[i] = g.mu()[x];
    W[i] = g.W()[x];
    bmass[i] = g.boundary_mass()[x];
    if (g.has_coords()) coords[i] = g.coord(x);
    auto nb = g.neighbors(x);
    auto wt = g.neighbor_weights(x);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      Index y = local[nb[k]];
      if (y < 0)
        cross[i] += wt[k];
      else if (static_cast<Index>(i) < y)
        edges.push_back({static_cast<Index>(i), y, wt[k]});
    }
  }
  if (bc == BoundaryKind::dirichlet)
    for (std::size_t i = 0; i < m; ++i) bmass[i] += cross[i];
  return {WeightedGraph(std::move(ids), std::move(mu), std::move(W), std::move(edges), std::move(bmass),
                        std::move(coords)),
          region, std::move(cross), bc};
}

// Re-express a subset of the parent vertex set in the local indices of a
// restriction. Vertices outside the region are dropped.
inline VertexSet to_local(const Restriction& r, const VertexSet& s) {
  VertexSet out;
  std::size_t j = 0;
  for (Index x : s) {
    while (j < r.parent.size() && r.parent[j] < x) ++j;
    if (j < r.parent.size() && r.parent[j] == x) out.push_back(static_cast<Index>(j));
  }
  return out;
}

}  // namespace finmorse
