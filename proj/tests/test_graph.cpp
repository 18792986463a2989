#include <gtest/gtest.h>

#include "frozen_values.hpp"
#include "support.hpp"

using namespace finmorse;
using namespace fmtest;

TEST(Lattice, PathOfRadiusTwo) {
  auto g = build_lattice(1, 2);
  EXPECT_EQ(g.size(), 5);
  EXPECT_EQ(g.edge_count(), 4u);
  for (const auto& e : g.edges()) EXPECT_EQ(e.w, 1.0);
}

TEST(Lattice, GridOfRadiusOne) {
  auto g = build_lattice(2, 1);
  EXPECT_EQ(g.size(), 9);
  EXPECT_EQ(g.edge_count(), 12u);
}

TEST(Lattice, CubeOfRadiusEight) {
  auto g = build_lattice(3, 8);
  EXPECT_EQ(g.size(), frozen::z3_r8_vertices);
  EXPECT_EQ(static_cast<int>(g.edge_count()), frozen::z3_r8_edges);
}

TEST(Lattice, IdsAreCoordinates) {
  auto g = build_lattice(2, 1);
  EXPECT_EQ(g.id(0), "-1,-1");
  EXPECT_TRUE(g.find("0,0").has_value());
  EXPECT_EQ(g.coord(g.index_of("1,0")), (std::vector<int>{1, 0}));
}

TEST(Lattice, DirichletBoundaryGroundsMissingNeighbors) {
  LatticeOptions o;
  o.boundary = OuterBoundary::dirichlet;
  auto g = build_lattice(2, 1, o);
  EXPECT_EQ(g.boundary_mass()[g.index_of("0,0")], 0.0);
  EXPECT_EQ(g.boundary_mass()[g.index_of("1,0")], 1.0);
  EXPECT_EQ(g.boundary_mass()[g.index_of("1,1")], 2.0);
}

TEST(Lattice, VertexCap) {
  LatticeOptions o;
  o.vertex_cap = 100;
  EXPECT_THROW(build_lattice(3, 3, o), CapExceeded);
}

TEST(Lattice, ProfileViolation) {
  LatticeOptions o;
  o.mu = [](std::span<const int>) { return -1.0; };
  EXPECT_THROW(build_lattice(1, 2, o), ProfileViolation);
}

TEST(HalfLine, LengthThreeIsPathOnFour) {
  auto g = build_half_line(3);
  EXPECT_EQ(g.size(), 4);
  EXPECT_EQ(g.edge_count(), 3u);
  EXPECT_EQ(g.id(0), "0");
}

TEST(HalfLine, GeometricMeasure) {
  LatticeOptions o;
  o.mu = [](std::span<const int> x) { return std::pow(2.0, x[0]); };
  auto g = build_half_line(2, o);
  EXPECT_EQ(g.mu(), (std::vector<double>{1, 2, 4}));
}

TEST(HalfLine, LinearConductance) {
  LatticeOptions o;
  o.w = [](std::span<const int> a, std::span<const int> b) { return 1.0 + std::min(a[0], b[0]); };
  auto g = build_half_line(100, o);
  for (const auto& e : g.edges()) EXPECT_EQ(e.w, std::min(e.u, e.v) + 1.0);
}

TEST(Tree, Sizes) {
  auto t = build_tree(2, 2);
  EXPECT_EQ(t.size(), 7);
  EXPECT_EQ(t.edge_count(), 6u);
  EXPECT_EQ(build_tree(3, 1).size(), 4);
  EXPECT_EQ(build_tree(2, 10).size(), frozen::tree_2_10);
}

TEST(Graph, RejectsBadData) {
  std::vector<std::string> ids{"a", "b"};
  std::vector<double> one{1, 1}, zero{0, 0};
  EXPECT_THROW(WeightedGraph(ids, {1, 0}, zero, {{0, 1, 1.0}}), GraphError);
  EXPECT_THROW(WeightedGraph(ids, one, {0, -1}, {{0, 1, 1.0}}), GraphError);
  EXPECT_THROW(WeightedGraph(ids, one, zero, {{0, 1, 0.0}}), GraphError);
  EXPECT_THROW(WeightedGraph(ids, one, zero, {{0, 0, 1.0}}), GraphError);
  EXPECT_THROW(WeightedGraph(ids, one, zero, {{0, 1, 1.0}, {1, 0, 2.0}}), GraphError);
  EXPECT_THROW(WeightedGraph({"a", "a"}, one, zero, {}), GraphError);
  EXPECT_THROW(WeightedGraph(ids, {1}, zero, {}), DimensionMismatch);
}

TEST(Graph, Components) {
  WeightedGraph g({"a", "b", "c"}, {1, 1, 1}, {0, 0, 0}, {{0, 1, 1.0}});
  EXPECT_FALSE(g.connected());
  EXPECT_TRUE(path(3).connected());
}

TEST(Exhaustion, PathBalls) {
  auto g = path(5);
  auto ex = ball_exhaustion(g, "c", {1, 2});
  EXPECT_EQ(ex.level(0), (VertexSet{1, 2, 3}));
  EXPECT_EQ(ex.level(1), (VertexSet{0, 1, 2, 3, 4}));
}

TEST(Exhaustion, GridCorner) {
  auto g = build_lattice(2, 1);
  auto ex = ball_exhaustion(g, "-1,-1", {1});
  EXPECT_EQ(set_to_ids(g, ex.level(0)), (std::vector<std::string>{"-1,-1", "-1,0", "0,-1"}));
}

TEST(Exhaustion, SupBallsOnCube) {
  auto g = build_lattice(3, 8);
  auto ex = ball_exhaustion(g, "0,0,0", {2, 4, 6}, BallMetric::sup);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(static_cast<int>(ex.level(k).size()), frozen::z3_r8_sup_levels[k]);
}

TEST(Exhaustion, RejectsNonNested) {
  auto g = path(5);
  EXPECT_THROW(ball_exhaustion(g, "c", {2, 1}), DomainError);
  EXPECT_THROW(Exhaustion({{0, 1}, {1, 2}}), DomainError);
  EXPECT_THROW(Exhaustion(std::vector<VertexSet>{}), DomainError);
  EXPECT_THROW(ball_exhaustion(g, "z", {1}), GraphError);
}

TEST(Restriction, DirichletSingleMiddleVertex) {
  auto r = restrict_to(path(3), {1}, BoundaryKind::dirichlet);
  auto H = bundle(r.graph);
  EXPECT_DOUBLE_EQ(MatrixXd(H.form_matrix())(0, 0), 2.0);
}

TEST(Restriction, NeumannDropsCrossingEdge) {
  auto r = restrict_to(path(3), {0, 1}, BoundaryKind::neumann);
  MatrixXd A(bundle(r.graph).form_matrix());
  MatrixXd want(2, 2);
  want << 1, -1, -1, 1;
  EXPECT_EQ(A, want);
}

TEST(Restriction, DirichletMiddleBlockOfP4) {
  auto r = restrict_to(path(4), {1, 2}, BoundaryKind::dirichlet);
  MatrixXd A(bundle(r.graph).form_matrix());
  MatrixXd want(2, 2);
  want << 2, -1, -1, 2;
  EXPECT_EQ(A, want);
}

TEST(Restriction, RejectsBadRegions) {
  EXPECT_THROW(restrict_to(path(3), {}, BoundaryKind::dirichlet), DomainError);
  EXPECT_THROW(restrict_to(path(3), {5}, BoundaryKind::dirichlet), GraphError);
}

TEST(GraphIo, RoundTrip) {
  std::mt19937_64 rng(3);
  auto g = random_graph(rng, 12, 1.0, 0.5, 2.0, 1.0);
  auto h = graph_from_json(nlohmann::json::parse(graph_to_json(g).dump()));
  EXPECT_EQ(h.ids(), g.ids());
  EXPECT_EQ(h.mu(), g.mu());
  EXPECT_EQ(h.W(), g.W());
  ASSERT_EQ(h.edge_count(), g.edge_count());
}

TEST(GraphIo, ErrorsCarryPath) {
  auto doc = nlohmann::json::parse(R"({"vertices":[{"id":"a"},{"id":"b","mu":-1}],"edges":[]})");
  try {
    graph_from_json(doc);
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/vertices/1/mu"), std::string::npos) << e.what();
  }
  auto bad_edge = nlohmann::json::parse(R"({"vertices":[{"id":"a"}],"edges":[{"u":"a","v":"q"}]})");
  try {
    graph_from_json(bad_edge);
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/edges/0/v"), std::string::npos) << e.what();
  }
}

// --- properties ------------------------------------------------------------

TEST(GraphProperty, NestedDirichletEqualsOneStep) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 30; ++t) {
    auto g = random_graph(rng, uniform_int(rng, 6, 40));
    VertexSet outer, inner;
    for (Index x = 0; x < g.size(); ++x)
      if (uniform(rng, 0, 1) < 0.7) outer.push_back(x);
    if (outer.size() < 2) continue;
    VertexSet inner_local;
    for (std::size_t i = 0; i < outer.size(); ++i)
      if (uniform(rng, 0, 1) < 0.6) {
        inner_local.push_back(static_cast<Index>(i));
        inner.push_back(outer[i]);
      }
    if (inner.empty()) continue;
    auto two = restrict_to(restrict_to(g, outer, BoundaryKind::dirichlet).graph, inner_local, BoundaryKind::dirichlet);
    auto one = restrict_to(g, inner, BoundaryKind::dirichlet);
    // equal up to the order in which crossing conductances are summed
    MatrixXd a(bundle(two.graph).form_matrix()), b(bundle(one.graph).form_matrix());
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 4 * std::numeric_limits<double>::epsilon() * b.cwiseAbs().maxCoeff());
  }
}

TEST(GraphProperty, NeumannFormBelowDirichletForm) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 30; ++t) {
    auto g = random_graph(rng, uniform_int(rng, 6, 40));
    VertexSet region;
    for (Index x = 0; x < g.size(); ++x)
      if (uniform(rng, 0, 1) < 0.5) region.push_back(x);
    if (region.empty()) continue;
    auto N = bundle(restrict_to(g, region, BoundaryKind::neumann).graph);
    auto D = bundle(restrict_to(g, region, BoundaryKind::dirichlet).graph);
    for (int s = 0; s < 5; ++s) {
      auto f = random_vector(rng, N.size());
      double qn = quadratic_form(N, f), qd = quadratic_form(D, f);
      EXPECT_LE(qn, qd + 1e-12 * std::max(1.0, std::abs(qd)));
    }
  }
}

TEST(GraphProperty, ExhaustionNestedAndCovering) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 20; ++t) {
    auto g = random_graph(rng, uniform_int(rng, 5, 60), 0.5);
    auto d = graph_distances(g, 0);
    int diam = *std::max_element(d.begin(), d.end());
    std::vector<int> radii;
    for (int r = 0; r <= diam; ++r) radii.push_back(r);
    // strictly nested needs growth at every radius, which holds up to the eccentricity
    auto ex = ball_exhaustion(g, g.id(0), radii);
    for (std::size_t k = 1; k < ex.size(); ++k) EXPECT_TRUE(is_subset(ex.level(k - 1), ex.level(k)));
    EXPECT_EQ(static_cast<Index>(ex.last().size()), g.size());
  }
}
