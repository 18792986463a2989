#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "finmorse/errors.hpp"
#include "finmorse/graph.hpp"

namespace finmorse {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Max absolute row sum, an upper bound for the spectral radius.
inline double gershgorin_radius(const SpMat& S) {
  VectorXd rows = VectorXd::Zero(S.rows());
  for (int k = 0; k < S.outerSize(); ++k)
    for (SpMat::InnerIterator it(S, k); it; ++it) rows[it.row()] += std::abs(it.value());
  return S.rows() ? rows.maxCoeff() : 0.0;
}

// min_i (S_ii - sum_{j != i} |S_ij|), a lower bound for the spectrum.
inline double gershgorin_lower(const SpMat& S) {
  VectorXd lo = VectorXd::Zero(S.rows());
  for (int k = 0; k < S.outerSize(); ++k)
    for (SpMat::InnerIterator it(S, k); it; ++it)
      lo[it.row()] += it.row() == it.col() ? it.value() : -std::abs(it.value());
  return S.rows() ? lo.minCoeff() : 0.0;
}

inline double spectral_scale(const SpMat& S) { return std::max(1.0, gershgorin_radius(S)); }

inline SpMat principal_submatrix(const SpMat& S, const VertexSet& idx) {
  std::vector<Index> local(S.rows(), -1);
  for (std::size_t i = 0; i < idx.size(); ++i) local[idx[i]] = static_cast<Index>(i);
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t c = 0; c < idx.size(); ++c)
    for (SpMat::InnerIterator it(S, idx[c]); it; ++it)
      if (local[it.row()] >= 0) t.emplace_back(local[it.row()], static_cast<int>(c), it.value());
  SpMat out(static_cast<int>(idx.size()), static_cast<int>(idx.size()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

// Rows `rows`, columns `cols` of S.
inline SpMat submatrix(const SpMat& S, const VertexSet& rows, const VertexSet& cols) {
  std::vector<Index> local(S.rows(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) local[rows[i]] = static_cast<Index>(i);
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (SpMat::InnerIterator it(S, cols[c]); it; ++it)
      if (local[it.row()] >= 0) t.emplace_back(local[it.row()], static_cast<int>(c), it.value());
  SpMat out(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

inline SpMat shifted(const SpMat& S, double sigma) {
  SpMat I(S.rows(), S.cols());
  I.setIdentity();
  return S - sigma * I;
}

inline double relative_asymmetry(const MatrixXd& M) {
  double nrm = M.norm();
  return nrm == 0.0 ? 0.0 : (M - M.transpose()).norm() / nrm;
}

inline double relative_asymmetry(const SpMat& M) {
  double nrm = M.norm();
  if (nrm == 0.0) return 0.0;
  SpMat d = M - SpMat(M.transpose());
  return d.norm() / nrm;
}

struct DenseEig {
  VectorXd values;
  MatrixXd vectors;
};

inline DenseEig dense_eigh(const MatrixXd& M, bool vectors) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("dense symmetric eigensolver did not converge");
  DenseEig out{es.eigenvalues(), MatrixXd()};
  if (vectors) out.vectors = es.eigenvectors();
  return out;
}

// ---------------------------------------------------------------------------
// Inertia

struct Inertia {
  int negative = 0;
  int zero = 0;
  int positive = 0;
};

// Sylvester inertia of S - sigma I from a sparse LDL^T factorization.
inline Inertia inertia(const SpMat& S, double sigma) {
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  ldlt.compute(shifted(S, sigma));
  if (ldlt.info() != Eigen::Success) throw SingularError("LDL^T factorization failed at shift " + std::to_string(sigma));
  Inertia in;
  const VectorXd& d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) throw SingularError("LDL^T pivot is not finite at shift " + std::to_string(sigma));
    if (d[i] < 0.0)
      ++in.negative;
    else if (d[i] == 0.0)
      ++in.zero;
    else
      ++in.positive;
  }
  return in;
}

// ---------------------------------------------------------------------------
// Block Krylov shift-invert eigensolver for the lowest eigenpairs

struct KrylovOptions {
  int block = 6;
  int max_basis = 360;
  int max_iterations = 2000;
  double tol = 1e-10;  // residual bound relative to spectral_scale
  std::uint64_t seed = 0x5eedULL;
};

struct EigenPairs {
  VectorXd values;
  MatrixXd vectors;
  int iterations = 0;
  double max_residual = 0.0;
};

namespace detail {

// Orthonormalise Z against Q[:, :m] (two passes of classical Gram-Schmidt),
// then within itself. Directions that vanish are replaced by random ones.
inline int append_block(MatrixXd& Q, int m, MatrixXd Z, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const int n = static_cast<int>(Q.rows());
  int added = 0;
  for (int j = 0; j < Z.cols() && m + added < Q.cols(); ++j) {
    VectorXd z = Z.col(j);
    for (int attempt = 0; attempt < 4; ++attempt) {
      double before = z.norm();
      for (int pass = 0; pass < 2; ++pass) {
        int k = m + added;
        if (k > 0) z -= Q.leftCols(k) * (Q.leftCols(k).transpose() * z);
      }
      double after = z.norm();
      if (after > 1e-10 * before && after > 0.0) {
        Q.col(m + added) = z / after;
        ++added;
        break;
      }
      for (int i = 0; i < n; ++i) z[i] = nd(rng);
    }
  }
  return added;
}

// Number of eigenvalues of S below sigma, nudging sigma off an exact
// eigenvalue.
inline int count_below_shift(const SpMat& S, double sigma) {
  const double scale = spectral_scale(S);
  for (int attempt = 0; attempt < 4; ++attempt) {
    try {
      auto in = inertia(S, sigma);
      if (in.zero == 0) return in.negative;
    } catch (const SingularError&) {
    }
    sigma -= 1e-13 * scale * std::pow(10.0, attempt);
  }
  throw SingularError("inertia count failed near shift " + std::to_string(sigma));
}

}  // namespace detail

inline EigenPairs lowest_eigenpairs(const SpMat& S, int k, const KrylovOptions& opt = {}) {
  const int n = static_cast<int>(S.rows());
  if (k <= 0) return {VectorXd(0), MatrixXd(n, 0), 0, 0.0};
  k = std::min(k, n);
  if (n <= std::max(400, 4 * (k + opt.block))) {
    auto e = dense_eigh(MatrixXd(S), true);
    return {e.values.head(k), e.vectors.leftCols(k), 0, 0.0};
  }
  const double scale = spectral_scale(S);
  const double sigma = gershgorin_lower(S) - 1e-3 * scale;
  Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> llt(shifted(S, sigma));
  if (llt.info() != Eigen::Success) throw ConvergenceError("shift-invert factorization failed");

  const int b = std::min(opt.block, n);
  const int nev = std::min(n, k + b);
  const int keep = std::min(n, k + 2 * b);
  const int cap = std::min(n, std::max(opt.max_basis, keep + 4 * b));
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd;

  MatrixXd Q(n, cap);
  int m = 0;
  MatrixXd Z(n, b);
  for (int j = 0; j < b; ++j)
    for (int i = 0; i < n; ++i) Z(i, j) = nd(rng);
  int added = detail::append_block(Q, m, Z, rng);
  MatrixXd last = Q.middleCols(m, added);
  m += added;

  EigenPairs out;
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    Z = llt.solve(last);
    added = detail::append_block(Q, m, Z, rng);
    last = Q.middleCols(m, added);
    m += added;
    const bool full = m + b > cap || added == 0;
    if (!full && iter % 3 != 0 && m < n) continue;

    MatrixXd SQ = S * Q.leftCols(m);
    MatrixXd Hm = Q.leftCols(m).transpose() * SQ;
    Hm = 0.5 * (Hm + Hm.transpose());
    auto rr = dense_eigh(Hm, true);
    const int r = std::min(nev, m);
    MatrixXd C = rr.vectors.leftCols(r);
    MatrixXd Y = Q.leftCols(m) * C;
    MatrixXd R = SQ * C - Y * rr.values.head(r).asDiagonal();
    int first_bad = -1;
    double worst = 0.0;
    for (int j = 0; j < std::min(k, r); ++j) {
      double res = R.col(j).norm();
      worst = std::max(worst, res);
      if (res > opt.tol * scale && first_bad < 0) first_bad = j;
    }
    bool missing = false;
    if (first_bad < 0 && r >= k) {
      // Residuals cannot reveal eigenvalues the subspace never saw; compare
      // with the Sylvester count below the k-th Ritz value.
      const double thr = rr.values[k - 1] - 1e-8 * scale;
      int found = 0;
      for (int j = 0; j < k; ++j) found += rr.values[j] < thr;
      if (k == n || detail::count_below_shift(S, thr) == found) {
        out.values = rr.values.head(k);
        out.vectors = Y.leftCols(k);
        out.iterations = iter;
        out.max_residual = worst;
        return out;
      }
      missing = true;
    }
    if (full || missing) {
      if (full) {
        const int kk = std::min(keep, r);
        Q.leftCols(kk) = Y.leftCols(kk);
        m = kk;
        int start = std::max(0, std::min(first_bad < 0 ? 0 : first_bad, kk - b));
        last = Y.middleCols(start, std::min(b, kk - start));
      }
      if (missing)
        for (Eigen::Index j = 0; j < last.cols(); ++j)
          for (int i = 0; i < n; ++i) last(i, j) = nd(rng);
    }
  }
  throw ConvergenceError("block Krylov eigensolver did not converge in " + std::to_string(opt.max_iterations) +
                         " iterations");
}

// ---------------------------------------------------------------------------
// Lanczos approximation of f(S) b for symmetric positive definite S

struct LanczosOptions {
  int max_steps = 1000;
  double tol = 1e-13;
  int check_every = 8;
};

inline VectorXd lanczos_function(const SpMat& S, const VectorXd& b, const std::function<double(double)>& f,
                                 const LanczosOptions& opt = {}) {
  const int n = static_cast<int>(S.rows());
  const double beta0 = b.norm();
  if (beta0 == 0.0) return VectorXd::Zero(n);
  const int cap = std::min(n, opt.max_steps);
  MatrixXd Q(n, cap);
  std::vector<double> alpha, beta;
  Q.col(0) = b / beta0;
  VectorXd prev;
  for (int j = 0; j < cap; ++j) {
    VectorXd w = S * Q.col(j);
    double a = Q.col(j).dot(w);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
    double bnext = w.norm();
    const int m = j + 1;
    bool breakdown = bnext <= 1e-14 * std::abs(a) || m == cap;
    if (breakdown || m % opt.check_every == 0) {
      MatrixXd T = MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
      }
      auto e = dense_eigh(T, true);
      VectorXd fv(m);
      for (int i = 0; i < m; ++i) {
        if (e.values[i] <= 0.0) throw NotPositiveDefinite("Lanczos projection is not positive definite", e.values[i]);
        fv[i] = f(e.values[i]);
      }
      VectorXd coef = e.vectors * (fv.asDiagonal() * e.vectors.row(0).transpose()) * beta0;
      VectorXd y = Q.leftCols(m) * coef;
      if (breakdown || (prev.size() && (y - prev).norm() <= opt.tol * y.norm())) return y;
      prev = std::move(y);
    }
    if (breakdown) break;
    beta.push_back(bnext);
    Q.col(j + 1) = w / bnext;
  }
  return prev;
}

inline VectorXd sqrt_apply(const SpMat& S, const VectorXd& b, const LanczosOptions& opt = {}) {
  return lanczos_function(S, b, [](double x) { return std::sqrt(x); }, opt);
}

inline VectorXd inv_sqrt_apply(const SpMat& S, const VectorXd& b, const LanczosOptions& opt = {}) {
  return lanczos_function(S, b, [](double x) { return 1.0 / std::sqrt(x); }, opt);
}

}  // namespace finmorse
