#pragma once

#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "finmorse/operator.hpp"

namespace finmorse {

struct SpectralOptions {
  Index dense_cap = 6000;        // largest dense eigensolve allowed
  Index dense_preferred = 1600;  // above this, counts use sparse inertia
  bool iterative = false;        // eigen_symmetric: lowest k pairs only
  int k = 6;
  std::uint64_t seed = 0x5eedULL;
};

struct SpectralSummary {
  VectorXd eigenvalues;  // ascending
  MatrixXd eigenvectors;  // nu representation, empty when not requested
  double lambda1 = 0.0;
  double tol_zero = 1e-8;
  double scale = 1.0;
  bool complete = true;  // false in iterative mode
  double max_residual = 0.0;
  std::map<double, int> counts;
};

struct CountResult {
  int count = 0;
  double threshold = 0.0;  // eigenvalues strictly below this are counted
  double band = 0.0;       // tol * scale
  double scale = 1.0;
  bool ambiguous = false;  // an eigenvalue sits within the band around the query
  std::string method;
};

namespace detail {

inline KrylovOptions krylov_from(const SpectralOptions& o) {
  KrylovOptions k;
  k.seed = o.seed;
  return k;
}

inline MatrixXd sym_to_nu(const OperatorBundle& H, const MatrixXd& V) {
  MatrixXd out = V;
  for (Eigen::Index j = 0; j < V.cols(); ++j) out.col(j) = H.from_sym(V.col(j));
  return out;
}

}  // namespace detail

inline SpectralSummary eigen_symmetric(const OperatorBundle& H, bool want_vectors, const SpectralOptions& opt = {}) {
  SpectralSummary s;
  s.scale = H.scale();
  const Index n = H.size();
  if (n == 0) throw DomainError("empty operator");
  if (n <= opt.dense_cap && !opt.iterative) {
    auto e = dense_eigh(MatrixXd(H.sym_matrix()), want_vectors);
    s.eigenvalues = e.values;
    if (want_vectors) {
      s.eigenvectors = detail::sym_to_nu(H, e.vectors);
      MatrixXd R = MatrixXd(H.sym_matrix()) * e.vectors - e.vectors * e.values.asDiagonal();
      s.max_residual = R.colwise().norm().maxCoeff();
    }
  } else if (opt.iterative) {
    auto p = lowest_eigenpairs(H.sym_matrix(), opt.k, detail::krylov_from(opt));
    s.eigenvalues = p.values;
    if (want_vectors) s.eigenvectors = detail::sym_to_nu(H, p.vectors);
    s.complete = p.values.size() == n;
    s.max_residual = p.max_residual;
  } else {
    throw CapExceeded("operator of size " + std::to_string(n) + " exceeds dense cap " +
                      std::to_string(opt.dense_cap) + " and iterative mode is off");
  }
  s.lambda1 = s.eigenvalues[0];
  return s;
}

// Smallest eigenvalues of a symmetric sparse matrix, dense when small.
inline VectorXd lowest_values(const SpMat& S, int k, const SpectralOptions& opt = {}) {
  if (S.rows() <= opt.dense_preferred) return dense_eigh(MatrixXd(S), false).values.head(std::min<Eigen::Index>(k, S.rows()));
  return lowest_eigenpairs(S, k, detail::krylov_from(opt)).values;
}

inline double lambda1(const OperatorBundle& H, const SpectralOptions& opt = {}) {
  return lowest_values(H.sym_matrix(), 1, opt)[0];
}

// Sylvester count of eigenvalues of S below sigma, nudging the shift off an
// exact eigenvalue if the factorization breaks down.
inline int inertia_count(const SpMat& S, double sigma) { return detail::count_below_shift(S, sigma); }

inline int inertia_count(const OperatorBundle& H, double sigma) { return inertia_count(H.sym_matrix(), sigma); }

// #{eigenvalues < lambda - tol * scale}, scale = max(1, spectral radius bound).
inline CountResult count_below(const SpMat& S, double lambda, double tol, const SpectralOptions& opt = {}) {
  if (tol < 0.0) throw DomainError("tolerance must be nonnegative");
  CountResult c;
  c.scale = spectral_scale(S);
  c.band = tol * c.scale;
  c.threshold = lambda - c.band;
  if (S.rows() <= opt.dense_preferred) {
    auto ev = dense_eigh(MatrixXd(S), false).values;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev[i] < c.threshold) ++c.count;
      if (ev[i] >= lambda - c.band && ev[i] <= lambda + c.band) c.ambiguous = true;
    }
    c.method = "dense";
  } else {
    c.count = inertia_count(S, c.threshold);
    int upper = inertia_count(S, lambda + c.band);
    c.ambiguous = upper != c.count;
    c.method = "inertia";
  }
  return c;
}

inline CountResult count_below(const OperatorBundle& H, double lambda, double tol, const SpectralOptions& opt = {}) {
  return count_below(H.sym_matrix(), lambda, tol, opt);
}

inline CountResult morse_index(const OperatorBundle& H, double tol = 1e-8, const SpectralOptions& opt = {}) {
  return count_below(H, 0.0, tol, opt);
}

struct GroundState {
  double lambda1 = 0.0;
  VectorXd phi;  // ||phi||_nu = 1, entries >= 0
  std::vector<std::string> warnings;
};

inline GroundState ground_state(const OperatorBundle& H, const SpectralOptions& opt = {}) {
  if (!H.graph().connected())
    throw Disconnected("ground state requested on a disconnected graph; restrict to each component first");
  VectorXd s;
  GroundState g;
  if (H.size() <= opt.dense_preferred) {
    auto e = dense_eigh(MatrixXd(H.sym_matrix()), true);
    g.lambda1 = e.values[0];
    s = e.vectors.col(0);
  } else {
    auto p = lowest_eigenpairs(H.sym_matrix(), 1, detail::krylov_from(opt));
    g.lambda1 = p.values[0];
    s = p.vectors.col(0);
  }
  if (s.sum() < 0.0) s = -s;
  s /= s.norm();
  g.phi = H.from_sym(s);
  double mn = g.phi.minCoeff();
  if (mn < 1e-12)
    g.warnings.push_back("Perron violation: ground state entry " + std::to_string(mn) + " below 1e-12");
  g.phi = g.phi.cwiseMax(0.0);
  return g;
}

// lambda_1 of the Dirichlet restriction to the complement of K.
inline double lambda1_exterior(const OperatorBundle& H, const VertexSet& K, const SpectralOptions& opt = {}) {
  auto ext = complement(H.size(), make_set(K));
  if (ext.empty()) throw DomainError("K covers every vertex; the exterior is empty");
  return lowest_values(principal_submatrix(H.sym_matrix(), ext), 1, opt)[0];
}

inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// One value per line, 17 significant digits, ascending.
inline void write_eigen_csv(std::ostream& os, const VectorXd& values) {
  std::vector<double> v(values.data(), values.data() + values.size());
  std::sort(v.begin(), v.end());
  for (double x : v) os << format_g17(x) << '\n';
}

}  // namespace finmorse
