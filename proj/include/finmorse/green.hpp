#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "finmorse/spectral.hpp"

namespace finmorse {

using SpdSolver = Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

namespace detail {

// Factor a matrix expected to be positive definite; pivots below
// 1e-12 * max pivot count as singular.
inline void factor_spd(SpdSolver& f, const SpMat& A, const std::string& what) {
  f.compute(A);
  if (f.info() != Eigen::Success) throw SingularError(what + ": factorization failed");
  const VectorXd& d = f.vectorD();
  double mx = d.cwiseAbs().maxCoeff();
  if (!(d.minCoeff() > 1e-12 * mx)) throw SingularError(what + ": singular or indefinite (pivot " + std::to_string(d.minCoeff()) + ")");
}

inline MatrixXd unit_columns(Index n, const VertexSet& cols) {
  MatrixXd E = MatrixXd::Zero(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) E(cols[j], static_cast<Eigen::Index>(j)) = 1.0;
  return E;
}

inline VertexSet positions_in(const VertexSet& outer, const VertexSet& inner, const char* what) {
  VertexSet pos;
  pos.reserve(inner.size());
  std::size_t j = 0;
  for (Index x : inner) {
    while (j < outer.size() && outer[j] < x) ++j;
    if (j == outer.size() || outer[j] != x) throw DomainError(std::string(what) + " is not contained in the level");
    pos.push_back(static_cast<Index>(j));
  }
  return pos;
}

inline void check_green_domain(const OperatorBundle& H, const VertexSet& region) {
  for (Index x : region)
    if (H.graph().W()[x] + H.potential()[x] < 0.0)
      throw DomainError("negative potential at vertex '" + H.graph().id(x) +
                        "': Green kernels need W + V >= 0, apply a shift first");
}

}  // namespace detail

// G = (A_region)^{-1}, so that (G f)(x) = sum_y G(x, y) f(y) mu(y) inverts
// the Dirichlet restriction of L. Rows and columns follow `region`.
inline MatrixXd green_kernel(const OperatorBundle& H, const VertexSet& region, Index dense_limit = 4000) {
  auto reg = make_set(region);
  if (reg.empty()) throw DomainError("region is empty");
  if (static_cast<Index>(reg.size()) > dense_limit)
    throw CapExceeded("dense Green kernel limited to " + std::to_string(dense_limit) + " vertices; use green_block");
  detail::check_green_domain(H, reg);
  SpdSolver f;
  detail::factor_spd(f, principal_submatrix(H.form_matrix(), reg), "parabolic-degenerate Dirichlet restriction");
  MatrixXd G = f.solve(MatrixXd::Identity(static_cast<Eigen::Index>(reg.size()), static_cast<Eigen::Index>(reg.size())));
  return 0.5 * (G + G.transpose());
}

// Block G_{probe, probe} of the Green kernel on `region`, via one solve per
// probe vertex.
inline MatrixXd green_block(const OperatorBundle& H, const VertexSet& region, const VertexSet& probe) {
  auto reg = make_set(region);
  auto pos = detail::positions_in(reg, make_set(probe), "probe");
  detail::check_green_domain(H, reg);
  SpdSolver f;
  detail::factor_spd(f, principal_submatrix(H.form_matrix(), reg), "parabolic-degenerate Dirichlet restriction");
  MatrixXd X = f.solve(detail::unit_columns(static_cast<Index>(reg.size()), pos));
  MatrixXd G(pos.size(), pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i)
    for (std::size_t j = 0; j < pos.size(); ++j) G(i, j) = X(pos[i], j);
  return 0.5 * (G + G.transpose());
}

struct DirichletConstant {
  double c = 0.0;
  VectorXd f;      // minimiser on the level (level order), ||f||_{nu, probe} = 1
  MatrixXd schur;  // Schur complement of the level form onto the probe
};

// inf { q(f) : sum_{probe} mu f^2 = 1, supp f in level } through elimination
// of level \ probe.
inline DirichletConstant dirichlet_constant(const OperatorBundle& H, const VertexSet& probe, const VertexSet& level) {
  auto lev = make_set(level);
  auto pr = make_set(probe);
  if (pr.empty()) throw DomainError("probe is empty");
  auto ppos = detail::positions_in(lev, pr, "probe");
  SpMat AL = principal_submatrix(H.form_matrix(), lev);
  VertexSet rpos = complement(static_cast<Index>(lev.size()), ppos);
  MatrixXd App = MatrixXd(principal_submatrix(AL, ppos));
  MatrixXd X;  // A_RR^{-1} A_RP
  MatrixXd Sigma = App;
  if (!rpos.empty()) {
    SpdSolver f;
    detail::factor_spd(f, principal_submatrix(AL, rpos), "elimination block");
    MatrixXd Arp = MatrixXd(submatrix(AL, rpos, ppos));
    X = f.solve(Arp);
    Sigma -= Arp.transpose() * X;
  }
  Sigma = 0.5 * (Sigma + Sigma.transpose());
  VectorXd ism(pr.size());
  for (std::size_t i = 0; i < pr.size(); ++i) ism[i] = 1.0 / std::sqrt(H.mu()[pr[i]]);
  MatrixXd B = ism.asDiagonal() * Sigma * ism.asDiagonal();
  auto e = dense_eigh(B, true);
  DirichletConstant out;
  out.c = e.values[0];
  out.schur = Sigma;
  VectorXd fp = ism.cwiseProduct(e.vectors.col(0));
  if (fp.sum() < 0.0) fp = -fp;
  out.f = VectorXd::Zero(static_cast<Eigen::Index>(lev.size()));
  for (std::size_t i = 0; i < ppos.size(); ++i) out.f[ppos[i]] = fp[i];
  if (!rpos.empty()) {
    VectorXd fr = -X * fp;
    for (std::size_t i = 0; i < rpos.size(); ++i) out.f[rpos[i]] = fr[i];
  }
  return out;
}

// Operator norm of L_level^{-1/2} on vectors supported in K (nu norms):
// sqrt(lambda_max(sqrt(mu_K) G_KK sqrt(mu_K))).
inline double restricted_inv_sqrt_norm(const OperatorBundle& H, const VertexSet& K, const VertexSet& level) {
  auto k = make_set(K);
  MatrixXd G = green_block(H, level, k);
  VectorXd sm(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) sm[i] = std::sqrt(H.mu()[k[i]]);
  MatrixXd B = sm.asDiagonal() * G * sm.asDiagonal();
  return std::sqrt(std::max(0.0, dense_eigh(B, false).values.maxCoeff()));
}

// ---------------------------------------------------------------------------
// Birman-Schwinger spectrum through the support of V

// Nonzero eigenvalues of T = S^{-1/2} diag(-V) S^{-1/2}, S = D^{-1/2} A D^{-1/2}
// positive definite, from the block of S^{-1} = D^{1/2} A^{-1} D^{1/2} on
// supp V: (S^{-1})_{SS} = C C^T and eig(T) \ {0} = eig(C^T diag(-V_S) C).
inline VectorXd compressed_bs_spectrum(const SpMat& A, const VectorXd& mu, const std::vector<double>& V,
                                       const std::string& what = "Birman-Schwinger base") {
  VertexSet supp;
  for (Index i = 0; i < static_cast<Index>(V.size()); ++i)
    if (V[i] != 0.0) supp.push_back(i);
  if (supp.empty()) return VectorXd(0);
  SpdSolver f;
  detail::factor_spd(f, A, what);
  MatrixXd X = f.solve(detail::unit_columns(static_cast<Index>(A.rows()), supp));
  const auto m = static_cast<Eigen::Index>(supp.size());
  MatrixXd Gs(m, m);
  VectorXd d(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    d[i] = -V[supp[i]];
    for (Eigen::Index j = 0; j < m; ++j) Gs(i, j) = std::sqrt(mu[supp[i]] * mu[supp[j]]) * X(supp[i], j);
  }
  Gs = 0.5 * (Gs + Gs.transpose());
  Eigen::LLT<MatrixXd> llt(Gs);
  if (llt.info() != Eigen::Success) throw SingularError(what + ": inverse block is not positive definite");
  MatrixXd C = llt.matrixL();
  MatrixXd K = C.transpose() * d.asDiagonal() * C;
  return dense_eigh(0.5 * (K + K.transpose()), false).values;
}

struct TailProfile {
  std::vector<VectorXd> spectra;  // nonzero part of eig(T) per level, ascending
  std::vector<int> counts;        // #{eig >= 1 - delta}
  std::vector<Index> level_sizes;
  int stable_from = -1;  // first level index after which the count never changes
  double delta = 1e-6;
};

// Eigenvalues of T = L^{-1/2}(-V)L^{-1/2} on each Dirichlet level. Only the
// part of the spectrum on the range of V is returned; the remaining
// eigenvalues are exactly zero.
inline TailProfile bs_tail_profile(const OperatorBundle& L, const PotentialField& V, const Exhaustion& ex,
                                   double delta = 1e-6) {
  if (V.size() != L.size()) throw DimensionMismatch("potential size does not match base operator");
  if (V.max() > 0.0) throw DomainError("tail profile needs V <= 0");
  auto supp = V.support();
  if (!is_subset(supp, ex.level(0))) throw DomainError("support of V escapes the first exhaustion level");
  TailProfile tp;
  tp.delta = delta;
  for (const auto& lev : ex.levels()) {
    std::vector<double> vl;
    vl.reserve(lev.size());
    for (Index x : lev) vl.push_back(V[x]);
    VectorXd mu(static_cast<Eigen::Index>(lev.size()));
    for (std::size_t i = 0; i < lev.size(); ++i) mu[i] = L.mu()[lev[i]];
    VectorXd ev = compressed_bs_spectrum(principal_submatrix(L.form_matrix(), lev), mu, vl, "Dirichlet level");
    int cnt = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (ev[i] >= 1.0 - delta) ++cnt;
    tp.spectra.push_back(ev);
    tp.counts.push_back(cnt);
    tp.level_sizes.push_back(static_cast<Index>(lev.size()));
  }
  int k = static_cast<int>(tp.counts.size()) - 1;
  while (k > 0 && tp.counts[k - 1] == tp.counts.back()) --k;
  tp.stable_from = k;
  return tp;
}

// ---------------------------------------------------------------------------
// Parabolicity

enum class Parabolicity { nonparabolic, parabolic_suspected, inconclusive };

inline const char* to_string(Parabolicity p) {
  switch (p) {
    case Parabolicity::nonparabolic: return "nonparabolic";
    case Parabolicity::parabolic_suspected: return "parabolic_suspected";
    default: return "inconclusive";
  }
}

struct ParabolicityDiagnostics {
  double c_rel_change = 0.0;      // over the last decay_window levels
  double green_rel_change = 0.0;  // same window, first probe vertex
  bool c_stalled = false;
  bool green_cauchy = false;
  bool decaying = false;
  std::string model = "none";  // "power" or "log"
  double slope = 0.0;          // power model exponent of c against radius
  double r2_power = 0.0;
  double r2_log = 0.0;
  std::vector<std::string> notes;
};

struct ParabolicityVerdict {
  Parabolicity verdict = Parabolicity::inconclusive;
  std::vector<double> c;                 // per level
  std::vector<MatrixXd> green_probe;     // G_{probe,probe} per level
  std::vector<double> green_value;       // G(p0, p0) per level
  std::vector<Index> level_sizes;
  std::vector<double> abscissa;          // radius (or level size) per level
  VertexSet probe;
  double stall_tol = 0.02;
  int decay_window = 3;
  ParabolicityDiagnostics diagnostics;
};

namespace detail {

// Least squares y = a + b x; returns (b, r^2).
inline std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
  if (vx <= 0.0) return {0.0, 0.0};
  double b = cxy / vx;
  double r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  return {b, r2};
}

}  // namespace detail

// Heuristic verdict from the constants c_k = inf q(f) / sum_probe f^2 mu and
// the probe Green values on each level. Never a proof.
inline ParabolicityVerdict parabolicity_test(const OperatorBundle& L, const Exhaustion& ex, const VertexSet& probe,
                                             double stall_tol = 0.02, int decay_window = 3) {
  if (decay_window < 1) throw DomainError("decay_window must be >= 1");
  if (static_cast<int>(ex.size()) < decay_window + 1)
    throw InsufficientDepth("parabolicity test needs at least decay_window + 1 = " + std::to_string(decay_window + 1) +
                            " levels, got " + std::to_string(ex.size()));
  auto pr = make_set(probe);
  if (pr.empty()) throw DomainError("probe is empty");
  if (!is_subset(pr, ex.level(0))) throw DomainError("probe must be contained in the first level");
  ParabolicityVerdict pv;
  pv.probe = pr;
  pv.stall_tol = stall_tol;
  pv.decay_window = decay_window;
  for (std::size_t k = 0; k < ex.size(); ++k) {
    detail::check_green_domain(L, ex.level(k));
    auto dc = dirichlet_constant(L, pr, ex.level(k));
    pv.c.push_back(dc.c);
    MatrixXd G;
    if (dc.c > 1e-12 * std::max(1.0, dc.schur.cwiseAbs().maxCoeff())) {
      G = dc.schur.inverse();
      G = 0.5 * (G + G.transpose());
    } else {
      G = MatrixXd::Constant(dc.schur.rows(), dc.schur.cols(), std::numeric_limits<double>::infinity());
    }
    pv.green_value.push_back(G(0, 0));
    pv.green_probe.push_back(std::move(G));
    pv.level_sizes.push_back(static_cast<Index>(ex.level(k).size()));
    pv.abscissa.push_back(ex.radii().empty() ? static_cast<double>(ex.level(k).size())
                                             : static_cast<double>(std::max(1, ex.radii()[k])));
  }
  auto& d = pv.diagnostics;
  const std::size_t m = pv.c.size();
  for (std::size_t k = 1; k < m; ++k) {
    if (pv.c[k] > pv.c[k - 1] + 1e-10)
      d.notes.push_back("c_k increased between levels " + std::to_string(k - 1) + " and " + std::to_string(k));
    if (pv.green_value[k] < pv.green_value[k - 1] - 1e-10)
      d.notes.push_back("probe Green value decreased between levels " + std::to_string(k - 1) + " and " +
                        std::to_string(k));
  }
  const std::size_t w0 = m - 1 - static_cast<std::size_t>(decay_window);
  const double c_last = pv.c.back();
  d.c_rel_change = c_last > 0.0 ? std::abs(pv.c[w0] - c_last) / c_last : std::numeric_limits<double>::infinity();
  const double g_last = pv.green_value.back();
  d.green_rel_change = std::isfinite(g_last) && g_last > 0.0 ? std::abs(g_last - pv.green_value[w0]) / g_last
                                                             : std::numeric_limits<double>::infinity();
  d.c_stalled = d.c_rel_change <= stall_tol && c_last > 10.0 * stall_tol;
  d.green_cauchy = d.green_rel_change <= stall_tol;

  std::vector<double> lx, lc, inv_c, llx;
  for (std::size_t k = 0; k < m; ++k) {
    if (!(pv.c[k] > 0.0)) continue;
    lx.push_back(std::log(pv.abscissa[k]));
    lc.push_back(std::log(pv.c[k]));
    inv_c.push_back(1.0 / pv.c[k]);
    llx.push_back(std::log(std::max(pv.abscissa[k], 1.0 + 1e-12)));
  }
  if (lx.size() >= 3) {
    auto [s, r2p] = detail::linear_fit(lx, lc);
    auto [b, r2l] = detail::linear_fit(llx, inv_c);
    d.slope = s;
    d.r2_power = r2p;
    d.r2_log = r2l;
    bool shrinking = pv.c.front() >= (1.0 + stall_tol) * c_last;
    bool power = s <= -0.1 && r2p >= 0.9;
    bool logm = b > 0.0 && r2l >= 0.9;
    d.decaying = shrinking && (power || logm);
    if (d.decaying) d.model = (power && (!logm || r2p >= r2l)) ? "power" : "log";
  }
  if (d.c_stalled && d.green_cauchy)
    pv.verdict = Parabolicity::nonparabolic;
  else if (d.decaying && c_last < 10.0 * stall_tol && !d.green_cauchy)
    pv.verdict = Parabolicity::parabolic_suspected;
  else
    pv.verdict = Parabolicity::inconclusive;
  if (d.c_stalled != d.green_cauchy) d.notes.push_back("c_k and Green probe signals disagree");
  d.notes.push_back("verdict is a numerical heuristic over finitely many levels and one probe set");
  return pv;
}

}  // namespace finmorse
