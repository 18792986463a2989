#pragma once

#include <memory>
#include <vector>

#include "finmorse/graph.hpp"
#include "finmorse/linalg.hpp"

namespace finmorse {

// H = Delta_mu + W + V on a weighted graph. A is the form matrix
//   A = sum_edges w (e_x - e_y)(e_x - e_y)^T + diag(b) + diag(mu (W + V)),
// so that H = D_mu^{-1} A and <Hf, g>_nu = g^T A f. S = D^{-1/2} A D^{-1/2}
// carries the spectrum.
class OperatorBundle {
 public:
  OperatorBundle() = default;
  OperatorBundle(std::shared_ptr<const WeightedGraph> graph, PotentialField potential)
      : graph_(std::move(graph)), potential_(std::move(potential)) {
    if (!graph_) throw DomainError("operator bundle needs a graph");
    const Index n = graph_->size();
    if (potential_.size() != n)
      throw DimensionMismatch("potential has " + std::to_string(potential_.size()) + " entries, graph has " +
                              std::to_string(n) + " vertices");
    mu_ = to_eigen(graph_->mu());
    sqrt_mu_ = mu_.cwiseSqrt();
    std::vector<Eigen::Triplet<double>> ta, ts;
    ta.reserve(n + 2 * graph_->edge_count());
    ts.reserve(n + 2 * graph_->edge_count());
    VectorXd diag(n);
    for (Index x = 0; x < n; ++x)
      diag[x] = graph_->boundary_mass()[x] + mu_[x] * (graph_->W()[x] + potential_[x]);
    for (const auto& e : graph_->edges()) {
      diag[e.u] += e.w;
      diag[e.v] += e.w;
      ta.emplace_back(e.u, e.v, -e.w);
      ta.emplace_back(e.v, e.u, -e.w);
      double s = -e.w / (sqrt_mu_[e.u] * sqrt_mu_[e.v]);
      ts.emplace_back(e.u, e.v, s);
      ts.emplace_back(e.v, e.u, s);
    }
    for (Index x = 0; x < n; ++x) {
      ta.emplace_back(x, x, diag[x]);
      ts.emplace_back(x, x, diag[x] / mu_[x]);
    }
    A_.resize(n, n);
    A_.setFromTriplets(ta.begin(), ta.end());
    S_.resize(n, n);
    S_.setFromTriplets(ts.begin(), ts.end());
    scale_ = spectral_scale(S_);
  }

  Index size() const { return graph_ ? graph_->size() : 0; }
  const WeightedGraph& graph() const { return *graph_; }
  std::shared_ptr<const WeightedGraph> graph_ptr() const { return graph_; }
  const PotentialField& potential() const { return potential_; }
  const SpMat& form_matrix() const { return A_; }
  const SpMat& sym_matrix() const { return S_; }
  const VectorXd& mu() const { return mu_; }
  const VectorXd& sqrt_mu() const { return sqrt_mu_; }
  // max(1, Gershgorin bound on the spectral radius of S).
  double scale() const { return scale_; }

  VectorXd apply(const VectorXd& f) const {
    check(f);
    return (A_ * f).cwiseQuotient(mu_);
  }
  double inner(const VectorXd& f, const VectorXd& g) const {
    check(f);
    check(g);
    return f.dot(mu_.cwiseProduct(g));
  }
  // <Hf, g>_nu through the assembled matrix.
  double form(const VectorXd& f, const VectorXd& g) const {
    check(f);
    check(g);
    return g.dot(A_ * f);
  }
  // nu representation <-> symmetrized representation
  VectorXd to_sym(const VectorXd& f) const { return sqrt_mu_.cwiseProduct(f); }
  VectorXd from_sym(const VectorXd& s) const { return s.cwiseQuotient(sqrt_mu_); }

 private:
  void check(const VectorXd& f) const {
    if (f.size() != size())
      throw DimensionMismatch("vector has " + std::to_string(f.size()) + " entries, operator has " +
                              std::to_string(size()));
  }

  std::shared_ptr<const WeightedGraph> graph_;
  PotentialField potential_;
  SpMat A_, S_;
  VectorXd mu_, sqrt_mu_;
  double scale_ = 1.0;
};

inline OperatorBundle assemble(const WeightedGraph& g, const PotentialField& V) {
  return {std::make_shared<const WeightedGraph>(g), V};
}
inline OperatorBundle assemble(std::shared_ptr<const WeightedGraph> g, const PotentialField& V) {
  return {std::move(g), V};
}
inline OperatorBundle assemble(const WeightedGraph& g) { return assemble(g, PotentialField::zero(g.size())); }

// Sum over edges w (df)(dg) + sum (b + mu (W + V)) f g, evaluated directly
// from the graph data without the assembled matrix.
inline double form_sum(const OperatorBundle& H, const VectorXd& f, const VectorXd& g) {
  const auto& G = H.graph();
  if (f.size() != G.size() || g.size() != G.size()) throw DimensionMismatch("vector size does not match graph");
  double s = 0.0;
  for (const auto& e : G.edges()) s += e.w * (f[e.u] - f[e.v]) * (g[e.u] - g[e.v]);
  for (Index x = 0; x < G.size(); ++x)
    s += (G.boundary_mass()[x] + (G.W()[x] + H.potential()[x]) * G.mu()[x]) * f[x] * g[x];
  return s;
}

inline double quadratic_form(const OperatorBundle& H, const VectorXd& f) { return form_sum(H, f, f); }

// Dirichlet or Neumann restriction of H to a region, potential restricted
// alongside.
struct RestrictedBundle {
  OperatorBundle bundle;
  VertexSet parent;
};

inline RestrictedBundle restrict_bundle(const OperatorBundle& H, const VertexSet& region, BoundaryKind bc) {
  auto r = restrict_to(H.graph(), region, bc);
  return {OperatorBundle(std::make_shared<const WeightedGraph>(std::move(r.graph)), H.potential().restricted(region)),
          region};
}

// ---------------------------------------------------------------------------
// Doob transform

struct DoobData {
  VectorXd phi;
  OperatorBundle bundle;  // Delta_{mu~, w~} + q on the transformed graph
  PotentialField q;
  double conjugation_residual = 0.0;  // max over columns, relative to column norm
};

// phi^{-1} H phi, with w~ = w phi(x) phi(y), mu~ = mu phi^2, q = (H phi)/phi.
// The transformed graph carries no W and no boundary mass: both are absorbed
// into q.
inline DoobData doob_transform(const OperatorBundle& H, const VectorXd& phi) {
  const auto& G = H.graph();
  if (phi.size() != G.size()) throw DimensionMismatch("phi size does not match graph");
  for (Index x = 0; x < G.size(); ++x)
    if (!(phi[x] > 0.0) || !std::isfinite(phi[x]))
      throw PositivityError("phi must be strictly positive (vertex '" + G.id(x) + "')", G.id(x), phi[x]);
  VectorXd Hphi = H.apply(phi);
  std::vector<double> q(G.size()), mu(G.size());
  for (Index x = 0; x < G.size(); ++x) {
    q[x] = Hphi[x] / phi[x];
    mu[x] = G.mu()[x] * phi[x] * phi[x];
  }
  std::vector<Edge> edges = G.edges();
  for (auto& e : edges) e.w *= phi[e.u] * phi[e.v];
  auto ng = std::make_shared<const WeightedGraph>(G.ids(), std::move(mu), std::vector<double>(G.size(), 0.0),
                                                  std::move(edges), std::vector<double>(), G.coords());
  PotentialField qf(std::move(q));
  DoobData out{phi, OperatorBundle(ng, qf), qf, 0.0};

  // Column-wise conjugation check: M1 = Phi^{-1} D^{-1} A Phi against
  // M2 = D~^{-1} A~.
  const SpMat& A = H.form_matrix();
  const SpMat& At = out.bundle.form_matrix();
  const VectorXd& mu0 = H.mu();
  const VectorXd& mut = out.bundle.mu();
  double worst = 0.0;
  for (int c = 0; c < A.outerSize(); ++c) {
    double diff = 0.0, nrm = 0.0;
    SpMat::InnerIterator i1(A, c), i2(At, c);
    for (; i1 && i2; ++i1, ++i2) {
      if (i1.row() != i2.row()) throw Error("Doob transform changed the sparsity pattern");
      double m1 = i1.value() * phi[c] / (mu0[i1.row()] * phi[i1.row()]);
      double m2 = i2.value() / mut[i2.row()];
      diff += (m1 - m2) * (m1 - m2);
      nrm += m1 * m1;
    }
    if (i1 || i2) throw Error("Doob transform changed the sparsity pattern");
    worst = std::max(worst, nrm > 0.0 ? std::sqrt(diff / nrm) : std::sqrt(diff));
  }
  out.conjugation_residual = worst;
  return out;
}

struct SupportCheck {
  bool ok = false;
  double max_exterior = 0.0;
  double bound = 0.0;
};

// max_{x outside region} |q(x)| <= tol * max(1, max |q|).
inline SupportCheck compact_support_check(const PotentialField& q, const VertexSet& region, double tol) {
  if (!(tol > 0.0)) throw DomainError("support tolerance must be positive");
  std::vector<char> in(q.size(), 0);
  for (Index x : region) in.at(x) = 1;
  SupportCheck out;
  for (Index x = 0; x < q.size(); ++x)
    if (!in[x]) out.max_exterior = std::max(out.max_exterior, std::abs(q[x]));
  out.bound = tol * std::max(1.0, q.max_abs());
  out.ok = out.max_exterior <= out.bound;
  return out;
}

}  // namespace finmorse
