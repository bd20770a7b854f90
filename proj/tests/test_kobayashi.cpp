#include "jdisk/kobayashi.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace jdisk;

namespace {

Vec v2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

StructureField standard() { return gallery("standard", GalleryParams{}); }

DomainDescriptor unit_ball() { return DomainDescriptor::chart_ball(Vec::Zero(2), 1.0); }

ChainLink affine_link(const Vec& p, const Vec& q, double t) {
    ChainLink l;
    l.disk.v = affine_target(p, q, t, make_grid(1.0, 17));
    l.disk.u = l.disk.v;
    l.disk.epsilon_used = 1.0;
    l.a = 0.0;
    l.b = t;
    l.cost = poincare_distance(l.a, l.b);
    l.start = p;
    l.end = q;
    return l;
}

ChainLink constant_link(const Vec& p, double b) {
    ChainLink l;
    l.disk.v = DiskMap::sample(make_grid(1.0, 17), {1}, [&](Complex) { return p; });
    l.disk.u = l.disk.v;
    l.a = 0.0;
    l.b = b;
    l.start = l.end = p;
    l.cost = poincare_distance(l.a, l.b);
    return l;
}

Chain one_link_chain(const Vec& p, const Vec& q, double t) {
    Chain c;
    c.domain = unit_ball();
    c.links.push_back(affine_link(p, q, t));
    c.waypoints = {p, q};
    return c;
}

DistanceOptions options(int k_max, std::vector<double> ts) {
    DistanceOptions o;
    o.k_max = k_max;
    o.t_grid = std::move(ts);
    o.cfg.grid_n = 33;
    return o;
}

} // namespace

TEST(Kobayashi, EmptyChainHasZeroCost) {
    Chain c;
    c.domain = unit_ball();
    c.waypoints = {v2(0.1, 0.1)};
    EXPECT_EQ(chain_cost(c), 0.0);
    c.waypoints.push_back(v2(0.2, 0.1));
    EXPECT_THROW(chain_cost(c), Error);
}

TEST(Kobayashi, SingleLinkCost) {
    EXPECT_NEAR(chain_cost(one_link_chain(v2(0, 0), v2(0.1, 0), 0.5)), std::atanh(0.5), 1e-15);
}

TEST(Kobayashi, IdenticalConstantLinksAddExactly) {
    const Vec p = v2(0.2, -0.1);
    Chain c;
    c.domain = unit_ball();
    c.links = {constant_link(p, 0.3), constant_link(p, 0.3)};
    c.waypoints = {p, p, p};
    EXPECT_EQ(chain_cost(c), 2.0 * c.links[0].cost);
}

TEST(Kobayashi, BrokenChainsAreRejected) {
    Chain c = one_link_chain(v2(0, 0), v2(0.1, 0), 0.5);
    c.links[0].end = v2(0.2, 0.0);
    EXPECT_THROW(chain_cost(c), Error);
    c = one_link_chain(v2(0, 0), v2(0.1, 0), 0.5);
    c.waypoints.back() = v2(0.3, 0.0);
    EXPECT_THROW(chain_cost(c), Error);
    c.waypoints.pop_back();
    EXPECT_THROW(chain_cost(c), Error);
}

TEST(Kobayashi, ReverseAndConcatenate) {
    const Chain c = one_link_chain(v2(0, 0), v2(0.1, 0), 0.5);
    const Chain r = reverse_chain(c);
    EXPECT_EQ(chain_cost(r), chain_cost(c));
    const Chain loop = concatenate(c, r);
    EXPECT_EQ(loop.links.size(), 2u);
    EXPECT_NEAR(chain_cost(loop), 2.0 * chain_cost(c), 1e-15);
    EXPECT_THROW(concatenate(c, c), Error);
}

TEST(Kobayashi, EqualPointsHaveZeroDistance) {
    const auto est = estimate_distance(standard(), unit_ball(), v2(0.1, 0.1), v2(0.1, 0.1), options(1, {0.5}));
    EXPECT_EQ(est.upper, 0.0);
    EXPECT_EQ(est.best_k, 0);
}

TEST(Kobayashi, StandardUpperBound) {
    // |q - p| = 0.05: the affine disk with t = 0.05 costs atanh(0.05).
    const Vec p = v2(0.0, 0.0), q = v2(0.05, 0.0);
    const auto coarse = estimate_distance(standard(), unit_ball(), p, q, options(1, {0.5}));
    EXPECT_NEAR(coarse.upper, std::atanh(0.5), 1e-12);
    const auto fine = estimate_distance(standard(), unit_ball(), p, q, options(2, {0.5, 0.25, 0.1, 0.05}));
    EXPECT_NEAR(fine.upper, std::atanh(0.05), 1e-12);
    EXPECT_LE(fine.upper, coarse.upper);
    EXPECT_NEAR(chain_cost(fine.best_chain), fine.upper, 1e-15);
}

TEST(Kobayashi, UpperBoundIsSymmetric) {
    const Vec p = v2(0.1, -0.05), q = v2(-0.05, 0.1);
    const auto o = options(2, {0.5, 0.3});
    const auto pq = estimate_distance(standard(), unit_ball(), p, q, o);
    const auto qp = estimate_distance(standard(), unit_ball(), q, p, o);
    EXPECT_NEAR(pq.upper, qp.upper, 1e-12);
    EXPECT_NEAR(chain_cost(reverse_chain(pq.best_chain)), pq.upper, 1e-12);
}

TEST(Kobayashi, TorusUsesShortestDisplacement) {
    GalleryParams gp;
    const auto J = gallery("torus-flat", gp);
    const auto dom = DomainDescriptor::flat_torus(1);
    const auto est = estimate_distance(J, dom, v2(0.0, 0.0), v2(0.5, 0.0), options(1, {0.5}));
    EXPECT_NEAR(est.upper, std::atanh(0.5), 1e-12);
    // (0.95, 0) is 0.05 away through the lattice.
    const auto wrap = estimate_distance(J, dom, v2(0.0, 0.0), v2(0.95, 0.0), options(1, {0.5, 0.05}));
    EXPECT_NEAR(wrap.upper, std::atanh(0.05), 1e-12);
}

TEST(Kobayashi, NoChainWhenEveryLinkFails) {
    // Flat disks always solve, so demand an unattainable residual instead.
    auto o = options(1, {0.5});
    o.residual_tol = -1.0;
    try {
        estimate_distance(standard(), unit_ball(), v2(0, 0), v2(0.1, 0), o);
        FAIL() << "expected NoChainFound";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoChainFound);
    }
}

TEST(Kobayashi, PointsOutsideTheDomainAreRejected) {
    EXPECT_THROW(estimate_distance(standard(), unit_ball(), v2(0, 0), v2(2.0, 0), options(1, {0.5})), Error);
}

TEST(Kobayashi, PushforwardPreservesCost) {
    const Chain c = one_link_chain(v2(0, 0), v2(0.1, 0.05), 0.5);
    const auto J = standard();
    const Chain id = pushforward_chain(c, translation_map(v2(0, 0)), J, unit_ball());
    EXPECT_EQ(chain_cost(id), chain_cost(c));

    GalleryParams gp;
    const auto T = gallery("torus-flat", gp);
    const Chain tr = pushforward_chain(c, translation_map(v2(0.37, -1.25)), T, DomainDescriptor::flat_torus(1));
    EXPECT_EQ(chain_cost(tr), chain_cost(c));

    Mat A(2, 2);
    A << 1.5, -0.5, 0.5, 1.5;   // multiplication by 1.5 + 0.5 i
    const Chain lin = pushforward_chain(c, linear_map(A), J, DomainDescriptor::chart_ball(Vec::Zero(2), 2.0));
    EXPECT_EQ(chain_cost(lin), chain_cost(c));
    EXPECT_LT(lin.links[0].disk.residual, 1e-12);
}

TEST(Kobayashi, AntiHolomorphicMapIsRejected) {
    const Chain c = one_link_chain(v2(0, 0), v2(0.1, 0.05), 0.5);
    Mat conj(2, 2);
    conj << 1.0, 0.0, 0.0, -1.0;
    try {
        pushforward_chain(c, linear_map(conj), standard(), unit_ball());
        FAIL() << "expected NotHolomorphicMap";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotHolomorphicMap);
    }
}

TEST(Kobayashi, DerivativeBoundChartVersusTorus) {
    SolverConfig cfg;
    cfg.grid_n = 33;
    const auto chart = derivative_bound(standard(), unit_ball(), v2(0, 0), v2(1, 0), 10.0, cfg);
    EXPECT_FALSE(chart.unbounded_suspected);
    EXPECT_NEAR(chart.lower, 1.0, 2e-3);

    GalleryParams gp;
    const auto torus = derivative_bound(gallery("torus-flat", gp), DomainDescriptor::flat_torus(1), v2(0, 0), v2(1, 0),
                                        1000.0, cfg);
    EXPECT_TRUE(torus.unbounded_suspected);
    EXPECT_EQ(torus.lower, 1000.0);

    EXPECT_THROW(derivative_bound(standard(), unit_ball(), v2(0, 0), v2(2, 0), 10.0, cfg), Error);
}
