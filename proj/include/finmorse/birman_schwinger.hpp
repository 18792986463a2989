#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "finmorse/green.hpp"

namespace finmorse {

struct BSOptions {
  double tol = 1e-9;        // T eigenvalues >= 1 - tol * max(1, |T|) count
  double tol_zero = 1e-8;   // Morse index threshold, relative to scale
  double tol_pd = 1e-10;    // base must have lambda_1 > tol_pd * scale
  bool auto_shift = true;
  std::string route = "auto";  // "auto", "dense" or "compressed"
  SpectralOptions spectral;
};

// Positive definiteness of the symmetrized base: dense lambda_1 for small
// operators, Sylvester inertia above.
inline bool is_positive_definite(const OperatorBundle& L, double tol_pd, const SpectralOptions& opt = {}) {
  const double thr = tol_pd * L.scale();
  if (L.size() <= opt.dense_preferred) return dense_eigh(MatrixXd(L.sym_matrix()), false).values[0] > thr;
  return inertia_count(L.sym_matrix(), thr) == 0;
}

// Functions of the symmetrized base S_L: exact through a dense
// eigendecomposition for small bases, Lanczos otherwise.
class BaseFunctions {
 public:
  BaseFunctions(const OperatorBundle& L, double tol_pd = 1e-10, const SpectralOptions& opt = {})
      : S_(L.sym_matrix()), scale_(L.scale()) {
    dense_ = L.size() <= opt.dense_preferred;
    if (dense_) {
      eig_ = dense_eigh(MatrixXd(S_), true);
      if (!(eig_.values[0] > tol_pd * scale_))
        throw NotPositiveDefinite("base operator is not positive definite; shift it first", eig_.values[0]);
    } else if (inertia_count(S_, tol_pd * scale_) != 0) {
      throw NotPositiveDefinite("base operator is not positive definite; shift it first",
                                std::numeric_limits<double>::quiet_NaN());
    }
  }

  bool dense() const { return dense_; }
  const DenseEig& eig() const { return eig_; }

  VectorXd sqrt_apply(const VectorXd& b) const {
    if (dense_) return eig_.vectors * (eig_.values.cwiseSqrt().asDiagonal() * (eig_.vectors.transpose() * b));
    return finmorse::sqrt_apply(S_, b);
  }
  VectorXd inv_sqrt_apply(const VectorXd& b) const {
    if (dense_)
      return eig_.vectors * (eig_.values.cwiseSqrt().cwiseInverse().asDiagonal() * (eig_.vectors.transpose() * b));
    return finmorse::inv_sqrt_apply(S_, b);
  }

 private:
  SpMat S_;
  double scale_;
  bool dense_ = true;
  DenseEig eig_;
};

struct InvSqrtFactor {
  MatrixXd R;  // symmetric, R S_L R = I
  VectorXd eigenvalues;
  double residual = 0.0;  // ||R S_L R - I||_max
};

inline InvSqrtFactor inv_sqrt(const OperatorBundle& L, double tol_pd = 1e-10, Index dense_cap = 6000) {
  if (L.size() > dense_cap) throw CapExceeded("inv_sqrt is dense; operator exceeds the dense cap");
  MatrixXd S(L.sym_matrix());
  auto e = dense_eigh(S, true);
  if (!(e.values[0] > tol_pd * L.scale()))
    throw NotPositiveDefinite("base operator is not positive definite (lambda_1 = " + std::to_string(e.values[0]) + ")",
                              e.values[0]);
  InvSqrtFactor f;
  f.eigenvalues = e.values;
  f.R = e.vectors * e.values.cwiseSqrt().cwiseInverse().asDiagonal() * e.vectors.transpose();
  f.R = 0.5 * (f.R + f.R.transpose());
  MatrixXd E = f.R * S * f.R - MatrixXd::Identity(S.rows(), S.cols());
  f.residual = E.cwiseAbs().maxCoeff();
  return f;
}

struct ShiftRecord {
  PotentialField rho;
  VertexSet U;
  double magnitude = 1.0;
  OperatorBundle shifted_base;       // L + rho
  PotentialField shifted_potential;  // V - rho
  double lambda1_shifted = 0.0;
  int escalations = 0;
};

// rho = magnitude * 1_U. The magnitude doubles until L + rho is positive
// definite (at most 8 times).
inline ShiftRecord make_shift(const OperatorBundle& L, const VertexSet& U, double magnitude,
                              const PotentialField& V = {}, double tol_pd = 1e-10, const SpectralOptions& opt = {}) {
  auto u = make_set(U);
  if (u.empty()) throw DomainError("shift set U is empty");
  if (!(magnitude >= 1.0)) throw DomainError("shift magnitude must be >= 1");
  const PotentialField v = V.size() ? V : PotentialField::zero(L.size());
  if (v.size() != L.size()) throw DimensionMismatch("potential size does not match base operator");
  ShiftRecord rec;
  rec.U = u;
  for (int attempt = 0; attempt <= 8; ++attempt) {
    std::vector<double> rho(L.size(), 0.0);
    for (Index x : u) rho.at(x) = magnitude;
    rec.rho = PotentialField(std::move(rho));
    rec.magnitude = magnitude;
    rec.escalations = attempt;
    rec.shifted_base = OperatorBundle(L.graph_ptr(), L.potential().plus(rec.rho));
    rec.lambda1_shifted = lambda1(rec.shifted_base, opt);
    if (rec.lambda1_shifted > tol_pd * rec.shifted_base.scale()) {
      rec.shifted_potential = v.plus(rec.rho.scaled(-1.0));
      return rec;
    }
    magnitude *= 2.0;
  }
  throw NotPositiveDefinite("shifted base is still not positive definite", rec.lambda1_shifted);
}

inline ShiftRecord auto_shift(const OperatorBundle& L, const PotentialField& V, double tol_pd = 1e-10,
                              const SpectralOptions& opt = {}) {
  auto U = V.support(1e-14 * std::max(1.0, V.max_abs()));
  U.push_back(0);
  return make_shift(L, make_set(std::move(U)), 1.0 + std::abs(std::min(0.0, V.min())), V, tol_pd, opt);
}

struct BSOperator {
  MatrixXd T;          // symmetrized representation
  PotentialField v_used;
  double asymmetry = 0.0;  // ||T - T^t|| / ||T|| before averaging
};

inline BSOperator build_bs(const OperatorBundle& L, const PotentialField& V, bool use_negative_part,
                           double tol_pd = 1e-10) {
  if (V.size() != L.size()) throw DimensionMismatch("potential size does not match base operator");
  auto f = inv_sqrt(L, tol_pd);
  BSOperator b;
  b.v_used = use_negative_part ? V.negative_part() : V;
  VectorXd mv = -to_eigen(b.v_used.values());
  b.T = f.R * mv.asDiagonal() * f.R;
  b.asymmetry = relative_asymmetry(b.T);
  b.T = 0.5 * (b.T + b.T.transpose());
  return b;
}

struct BSResult {
  int n_minus = 0;
  int bs_count = 0;
  bool holds = false;
  double tol = 1e-9;
  double threshold = 1.0;
  bool ambiguous = false;          // an eigenvalue of T sits in the band around 1
  bool n_minus_ambiguous = false;  // an eigenvalue of H sits in the band around 0
  std::optional<ShiftRecord> shift;
  std::string route;
  VectorXd t_eigenvalues;  // nonzero part, ascending
};

// n_minus(L + V) against #{eig T >= 1 - tol}.
inline BSResult bs_bound_check(const OperatorBundle& L, const PotentialField& V, const BSOptions& opt = {}) {
  if (V.size() != L.size()) throw DimensionMismatch("potential size does not match base operator");
  BSResult r;
  r.tol = opt.tol;
  OperatorBundle H(L.graph_ptr(), L.potential().plus(V));
  auto mi = morse_index(H, opt.tol_zero, opt.spectral);
  r.n_minus = mi.count;
  r.n_minus_ambiguous = mi.ambiguous;

  const OperatorBundle* base = &L;
  const PotentialField* pot = &V;
  if (!is_positive_definite(L, opt.tol_pd, opt.spectral)) {
    if (!opt.auto_shift) throw NotPositiveDefinite("base operator is not positive definite", 0.0);
    r.shift = auto_shift(L, V, opt.tol_pd, opt.spectral);
    base = &r.shift->shifted_base;
    pot = &r.shift->shifted_potential;
  }
  bool dense = opt.route == "dense" || (opt.route == "auto" && base->size() <= opt.spectral.dense_preferred);
  if (dense) {
    auto b = build_bs(*base, *pot, false, opt.tol_pd);
    r.t_eigenvalues = dense_eigh(b.T, false).values;
    r.route = "dense";
  } else {
    r.t_eigenvalues = compressed_bs_spectrum(base->form_matrix(), base->mu(), pot->values());
    r.route = "compressed";
  }
  double s = 1.0;
  for (Eigen::Index i = 0; i < r.t_eigenvalues.size(); ++i) s = std::max(s, std::abs(r.t_eigenvalues[i]));
  const double band = opt.tol * s;
  r.threshold = 1.0 - band;
  for (Eigen::Index i = 0; i < r.t_eigenvalues.size(); ++i) {
    double t = r.t_eigenvalues[i];
    if (t >= r.threshold) ++r.bs_count;
    if (t >= 1.0 - band && t <= 1.0 + band) r.ambiguous = true;
  }
  r.holds = r.n_minus <= r.bs_count;
  return r;
}

struct Certificate {
  double lhs = 0.0;  // ||v||^2, v = L^{1/2} u
  double rhs = 0.0;  // <T v, v>
  bool holds = false;
  double form_value = 0.0;  // <H u, u>_nu
};

// For <Hu, u> <= 0 the vector v = L^{1/2} u satisfies ||v||^2 <= <Tv, v>.
inline Certificate bs_vector_certificate(const BaseFunctions& Lf, const OperatorBundle& L, const PotentialField& V,
                                         const VectorXd& u) {
  if (u.size() != L.size()) throw DimensionMismatch("vector size does not match operator");
  OperatorBundle H(L.graph_ptr(), L.potential().plus(V));
  Certificate c;
  c.form_value = H.form(u, u);
  if (c.form_value > 0.0)
    throw CertificateInapplicable("certificate needs <Hu,u> <= 0, measured " + std::to_string(c.form_value),
                                  c.form_value);
  VectorXd us = L.to_sym(u);
  VectorXd v = Lf.sqrt_apply(us);
  VectorXd Rv = Lf.inv_sqrt_apply(v);
  c.lhs = v.squaredNorm();
  for (Index x = 0; x < L.size(); ++x) c.rhs += -V[x] * Rv[x] * Rv[x];
  c.holds = c.lhs <= c.rhs + 1e-9 * L.scale() * us.squaredNorm();
  return c;
}

inline Certificate bs_vector_certificate(const OperatorBundle& L, const PotentialField& V, const VectorXd& u,
                                         double tol_pd = 1e-10, const SpectralOptions& opt = {}) {
  BaseFunctions f(L, tol_pd, opt);
  return bs_vector_certificate(f, L, V, u);
}

struct KernelCheck {
  int kernel_dim = 0;
  std::vector<double> residuals;
  std::optional<ShiftRecord> shift;
};

// Kernel vectors u of H = L + V and the residual of
// (I + L^{-1/2} V L^{-1/2}) L^{1/2} u relative to ||L^{1/2} u||.
inline KernelCheck kernel_check(const OperatorBundle& L, const PotentialField& V, double tol_zero = 1e-8,
                                const BSOptions& opt = {}) {
  if (V.size() != L.size()) throw DimensionMismatch("potential size does not match base operator");
  OperatorBundle H(L.graph_ptr(), L.potential().plus(V));
  const double band = tol_zero * H.scale();
  MatrixXd kernel;  // symmetrized representation
  if (H.size() <= opt.spectral.dense_preferred) {
    auto e = dense_eigh(MatrixXd(H.sym_matrix()), true);
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
      if (std::abs(e.values[i]) <= band) idx.push_back(i);
    kernel.resize(H.size(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) kernel.col(static_cast<Eigen::Index>(j)) = e.vectors.col(idx[j]);
  } else {
    int below = inertia_count(H.sym_matrix(), -band);
    int k = below + 4;
    for (;;) {
      auto p = lowest_eigenpairs(H.sym_matrix(), std::min<int>(k, H.size()), detail::krylov_from(opt.spectral));
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < p.values.size(); ++i)
        if (std::abs(p.values[i]) <= band) idx.push_back(i);
      bool exhausted = p.values.size() == H.size() || p.values[p.values.size() - 1] > band;
      if (exhausted) {
        kernel.resize(H.size(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) kernel.col(static_cast<Eigen::Index>(j)) = p.vectors.col(idx[j]);
        break;
      }
      k *= 2;
    }
  }
  KernelCheck kc;
  kc.kernel_dim = static_cast<int>(kernel.cols());
  if (kc.kernel_dim == 0) return kc;

  const OperatorBundle* base = &L;
  const PotentialField* pot = &V;
  if (!is_positive_definite(L, opt.tol_pd, opt.spectral)) {
    if (!opt.auto_shift) throw NotPositiveDefinite("base operator is not positive definite", 0.0);
    kc.shift = auto_shift(L, V, opt.tol_pd, opt.spectral);
    base = &kc.shift->shifted_base;
    pot = &kc.shift->shifted_potential;
  }
  BaseFunctions f(*base, opt.tol_pd, opt.spectral);
  VectorXd vdiag = to_eigen(pot->values());
  for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
    VectorXd y = f.sqrt_apply(kernel.col(j));
    VectorXd z = f.inv_sqrt_apply(vdiag.cwiseProduct(f.inv_sqrt_apply(y)));
    kc.residuals.push_back((y + z).norm() / y.norm());
  }
  return kc;
}

}  // namespace finmorse
