#include <gtest/gtest.h>

#include "frozen_values.hpp"
#include "support.hpp"

using namespace finmorse;
using namespace fmtest;

namespace {

WeightedGraph z1(int radius, double w_lo = 1.0, double w_hi = 1.0, std::uint64_t seed = 0) {
  LatticeOptions o;
  o.boundary = OuterBoundary::dirichlet;
  if (w_lo != w_hi) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    o.w = [=](std::span<const int>, std::span<const int>) { return uniform(*rng, w_lo, w_hi); };
  }
  return build_lattice(1, radius, o);
}

WeightedGraph z3(int radius, double w_lo = 1.0, double w_hi = 1.0, std::uint64_t seed = 0) {
  LatticeOptions o;
  o.boundary = OuterBoundary::dirichlet;
  o.vertex_cap = 100000;
  if (w_lo != w_hi) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    o.w = [=](std::span<const int>, std::span<const int>) { return uniform(*rng, w_lo, w_hi); };
  }
  return build_lattice(3, radius, o);
}

std::vector<int> range(int from, int to, int step = 1) {
  std::vector<int> r;
  for (int x = from; x <= to; x += step) r.push_back(x);
  return r;
}

WeightedGraph with_point_W(const WeightedGraph& g, const std::string& id, double eps) {
  auto W = g.W();
  W[g.index_of(id)] += eps;
  return g.with_W(W);
}

}  // namespace

TEST(GreenKernel, MiddleOfP3) {
  MatrixXd G = green_kernel(bundle(path(3)), {1});
  EXPECT_DOUBLE_EQ(G(0, 0), 0.5);
}

TEST(GreenKernel, MiddleBlockOfP4) {
  MatrixXd G = green_kernel(bundle(path(4)), {1, 2});
  MatrixXd want(2, 2);
  want << 2, 1, 1, 2;
  EXPECT_LE((G - want / 3.0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(GreenKernel, NestedOnP6) {
  auto H = bundle(path(6));
  MatrixXd G1 = green_kernel(H, {2, 3}), G2 = green_kernel(H, {1, 2, 3, 4});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_GE(G2(i + 1, j + 1), G1(i, j));
}

TEST(GreenKernel, Errors) {
  EXPECT_THROW(green_kernel(bundle(path(3)), {0, 1, 2}), SingularError);
  EXPECT_THROW(green_kernel(bundle(path(3), {0, -1, 0}), {1}), DomainError);
  EXPECT_THROW(green_kernel(bundle(path(3)), {1}, 0), CapExceeded);
}

TEST(GreenKernel, BlockMatchesKernel) {
  std::mt19937_64 rng(41);
  auto g = random_graph(rng, 40, 1.0, 0.5, 2.0, 0.3);
  auto H = bundle(g);
  VertexSet region;
  for (Index x = 0; x < 30; ++x) region.push_back(x);
  MatrixXd G = green_kernel(H, region);
  MatrixXd B = green_block(H, region, {3, 7, 20});
  VertexSet p{3, 7, 20};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(B(i, j), G(p[i], p[j]), 1e-13 * G.cwiseAbs().maxCoeff());
}

TEST(DirichletConstant, SingleVertex) {
  auto r = dirichlet_constant(bundle(path(3)), {1}, {1});
  EXPECT_DOUBLE_EQ(r.c, 2.0);
}

TEST(DirichletConstant, FreeEndsCostNothing) {
  auto r = dirichlet_constant(bundle(path(3)), {1}, {0, 1, 2});
  EXPECT_NEAR(r.c, 0.0, 1e-12);
}

TEST(DirichletConstant, HalfLineHarmonicMinimiser) {
  for (int k : {1, 5, 40, 200}) {
    auto H = bundle(build_half_line(k));
    VertexSet lev;
    for (int j = 0; j < k; ++j) lev.push_back(j);
    auto r = dirichlet_constant(H, {0}, lev);
    EXPECT_NEAR(r.c, 1.0 / k, 1e-12);
    for (int j = 0; j < k; ++j) EXPECT_NEAR(r.f[j], double(k - j) / k, 1e-12);
  }
}

TEST(Parabolicity, Z1Decays) {
  auto g = z1(400);
  auto H = bundle(g);
  auto ex = ball_exhaustion(g, "0", range(50, 400, 50));
  auto pv = parabolicity_test(H, ex, {g.index_of("0")});
  EXPECT_EQ(pv.verdict, Parabolicity::parabolic_suspected);
  for (std::size_t k = 0; k < pv.c.size(); ++k) EXPECT_NEAR(pv.c[k], 2.0 / (ex.radii()[k] + 1), 1e-12);
}

TEST(Parabolicity, Z3Nonparabolic) {
  auto g = z3(12);
  auto ex = ball_exhaustion(g, "0,0,0", range(3, 12), BallMetric::sup);
  auto pv = parabolicity_test(bundle(g), ex, {g.index_of("0,0,0")});
  EXPECT_EQ(pv.verdict, Parabolicity::nonparabolic);
  EXPECT_TRUE(pv.diagnostics.c_stalled);
  EXPECT_TRUE(pv.diagnostics.green_cauchy);
}

TEST(Parabolicity, PointMassOnZ1) {
  auto g = with_point_W(z1(400), "0", 1.0);
  auto ex = ball_exhaustion(g, "0", range(50, 400, 50));
  auto pv = parabolicity_test(bundle(g), ex, {g.index_of("0")});
  EXPECT_EQ(pv.verdict, Parabolicity::nonparabolic);
  for (double c : pv.c) EXPECT_GE(c, 1.0);
}

TEST(Parabolicity, Errors) {
  auto g = z1(20);
  auto ex = ball_exhaustion(g, "0", {2, 4});
  EXPECT_THROW(parabolicity_test(bundle(g), ex, {g.index_of("0")}), InsufficientDepth);
  auto ex2 = ball_exhaustion(g, "0", {1, 2, 3, 4});
  EXPECT_THROW(parabolicity_test(bundle(g), ex2, {g.index_of("5")}), DomainError);
}

TEST(RestrictedNorm, Examples) {
  WeightedGraph one({"x"}, {1}, {4}, {});
  EXPECT_DOUBLE_EQ(restricted_inv_sqrt_norm(bundle(one), {0}, {0}), 0.5);
  EXPECT_NEAR(restricted_inv_sqrt_norm(bundle(path(4)), {1}, {1, 2}), std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(RestrictedNorm, StabilizesOnZ3DivergesOnZ1) {
  auto g3 = z3(12);
  auto H3 = bundle(g3);
  auto K3 = ball_of(g3, g3.index_of("0,0,0"), 1);
  auto ex3 = ball_exhaustion(g3, "0,0,0", range(3, 12), BallMetric::sup);
  std::vector<double> n3;
  for (const auto& lev : ex3.levels()) n3.push_back(restricted_inv_sqrt_norm(H3, K3, lev));
  EXPECT_LE(std::abs(n3.back() - n3[n3.size() - 2]) / n3.back(), 0.02);
  EXPECT_TRUE(std::is_sorted(n3.begin(), n3.end()));

  auto g1 = z1(400);
  auto H1 = bundle(g1);
  auto K1 = ball_of(g1, g1.index_of("0"), 1);
  auto ex1 = ball_exhaustion(g1, "0", range(50, 400, 50));
  std::vector<double> n1;
  for (const auto& lev : ex1.levels()) n1.push_back(restricted_inv_sqrt_norm(H1, K1, lev));
  EXPECT_GE(n1.back(), 2.0 * n1.front());
}

TEST(TailProfile, ZeroPotential) {
  auto g = z3(4);
  auto ex = ball_exhaustion(g, "0,0,0", {1, 2, 3});
  auto tp = bs_tail_profile(bundle(g), PotentialField::zero(g.size()), ex);
  for (const auto& s : tp.spectra) EXPECT_EQ(s.size(), 0);
  for (int c : tp.counts) EXPECT_EQ(c, 0);
}

TEST(TailProfile, Z3WellStabilizes) {
  auto g = z3(12);
  auto d = graph_distances(g, g.index_of("0,0,0"));
  std::vector<double> v(g.size(), 0.0);
  for (Index x = 0; x < g.size(); ++x)
    if (d[x] <= 1) v[x] = -5.0;
  auto ex = ball_exhaustion(g, "0,0,0", range(2, 12));
  auto tp = bs_tail_profile(bundle(g), PotentialField(v), ex);
  for (std::size_t k = 0; k < tp.counts.size(); ++k) EXPECT_EQ(tp.counts[k], frozen::z3_tail_counts[k]);
  EXPECT_EQ(ex.radii()[tp.stable_from], frozen::z3_tail_rstar);
}

TEST(TailProfile, ShiftedZ1Stabilizes) {
  auto g = build_lattice(1, 200);
  auto o = g.index_of("0");
  auto L = bundle(g);
  auto shift = make_shift(L, {o}, 2.0);
  std::vector<double> v(g.size(), 0.0);
  for (Index x : ball_of(g, o, 2)) v[x] = -3.0;
  auto ex = ball_exhaustion(g, "0", range(5, 195, 10));
  auto tp = bs_tail_profile(shift.shifted_base, PotentialField(v), ex);
  ASSERT_GE(tp.stable_from, 0);
  EXPECT_LT(tp.stable_from, static_cast<int>(tp.counts.size()) - 3);
  EXPECT_GT(tp.counts.back(), 0);
}

// --- properties ------------------------------------------------------------

TEST(GreenProperty, NonnegativeAndMonotone) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 20; ++t) {
    int n = uniform_int(rng, 10, 80);
    auto g = random_graph(rng, n, 0.7, 0.5, 2.0, 0.5);
    auto H = bundle(g);
    auto d = graph_distances(g, 0);
    int dmax = *std::max_element(d.begin(), d.end());
    MatrixXd prev;
    VertexSet prev_lev;
    for (int r = 0; r <= dmax; ++r) {
      auto lev = ball(d, r);
      MatrixXd G;
      try {
        G = green_kernel(H, lev);
      } catch (const SingularError&) {
        continue;  // W vanishes on the whole component
      }
      EXPECT_GE(G.minCoeff(), -1e-12);
      if (prev.size()) {
        auto pos = detail::positions_in(lev, prev_lev, "level");
        for (std::size_t i = 0; i < pos.size(); ++i)
          for (std::size_t j = 0; j < pos.size(); ++j) EXPECT_GE(G(pos[i], pos[j]), prev(i, j) - 1e-12);
      }
      prev = G;
      prev_lev = lev;
    }
  }
}

TEST(GreenProperty, DirichletConstantMonotoneAndMinimal) {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 20; ++t) {
    int n = uniform_int(rng, 10, 80);
    auto g = random_graph(rng, n, 0.7, 0.5, 2.0, 0.2);
    auto H = bundle(g);
    auto d = graph_distances(g, 0);
    int dmax = *std::max_element(d.begin(), d.end());
    if (dmax < 2) continue;
    auto probe = ball(d, 1);
    SpMat A = H.form_matrix();
    double prev = std::numeric_limits<double>::infinity();
    for (int r = 1; r <= dmax; ++r) {
      auto lev = ball(d, r);
      auto dc = dirichlet_constant(H, probe, lev);
      EXPECT_LE(dc.c, prev + 1e-10);
      prev = dc.c;
      // the minimiser attains c, and perturbing it off the probe only raises the quotient
      SpMat AL = principal_submatrix(A, lev);
      auto ppos = detail::positions_in(lev, probe, "probe");
      auto quot = [&](const VectorXd& f) {
        double den = 0.0;
        for (Index i : ppos) den += H.mu()[lev[i]] * f[i] * f[i];
        return f.dot(AL * f) / den;
      };
      EXPECT_NEAR(quot(dc.f), dc.c, 1e-9 * std::max(1.0, dc.c));
      VectorXd h = random_vector(rng, static_cast<int>(lev.size()), -0.3, 0.3);
      for (Index i : ppos) h[i] = 0.0;
      EXPECT_GE(quot(dc.f + h), dc.c - 1e-9 * std::max(1.0, dc.c));
    }
  }
}

TEST(GreenProperty, VerdictIndependentOfProbe) {
  std::mt19937_64 rng(44);
  for (int t = 0; t < 20; ++t) {
    const int kind = t % 3;
    auto seed = rng();
    WeightedGraph g;
    Exhaustion ex;
    std::string center;
    if (kind == 1) {
      g = z3(10, 0.5, 2.0, seed);
      center = "0,0,0";
      ex = ball_exhaustion(g, center, range(3, 10), BallMetric::sup);
    } else {
      g = z1(400, 0.5, 2.0, seed);
      if (kind == 2) g = with_point_W(g, "0", uniform(rng, 0.5, 2.0));
      center = "0";
      ex = ball_exhaustion(g, center, range(50, 400, 50));
    }
    auto c = g.index_of(center);
    VertexSet p1{c};
    // the c_last floor is absolute, so probes stay single vertices near the centre
    auto near = ball_of(g, c, 1);
    VertexSet p2{near[uniform_int(rng, 0, static_cast<int>(near.size()) - 1)]};
    auto H = bundle(g);
    auto v1 = parabolicity_test(H, ex, p1).verdict, v2 = parabolicity_test(H, ex, p2).verdict;
    EXPECT_EQ(v1, v2) << "scenario " << t;
    EXPECT_NE(v1, Parabolicity::inconclusive) << "scenario " << t;
  }
}

TEST(GreenProperty, PointMassFlipsVerdict) {
  std::mt19937_64 rng(45);
  auto base = z1(400);
  auto ex = ball_exhaustion(base, "0", range(50, 400, 50));
  for (int t = 0; t < 5; ++t) {
    double eps = uniform(rng, 0.05, 2.0);
    auto id = std::to_string(uniform_int(rng, -40, 40));
    auto g = with_point_W(base, id, eps);
    auto pv = parabolicity_test(bundle(g), ex, {g.index_of(id)});
    EXPECT_EQ(pv.verdict, Parabolicity::nonparabolic) << "eps " << eps << " at " << id;
  }
}
