#include "jdisk/diskgrid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace jdisk;

namespace {

DiskMap field(const GridPtr& g, const std::function<Complex(Complex)>& f) {
    return DiskMap::sample(g, ComplexConvention{1}, [&](Complex z) {
        const Complex w = f(z);
        Vec v(2);
        v << w.real(), w.imag();
        return v;
    });
}

Complex as_complex(const Vec& v) { return {v[0], v[1]}; }

Complex random_in_disk(std::mt19937_64& rng, double r) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Complex z;
    do z = {u(rng), u(rng)};
    while (std::abs(z) >= 1.0);
    return r * z;
}

/// Composite Simpson integral of the Poincare line element along [a, b] on the real axis.
double poincare_length_real(double a, double b) {
    const int m = 2000;
    const double h = (b - a) / m;
    double s = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double x = a + i * h;
        const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w / (1.0 - x * x);
    }
    return s * h / 3.0;
}

} // namespace

TEST(DiskGrid, SmallGridsHaveTheExpectedNodes) {
    const auto g3 = make_grid(1.0, 3);
    EXPECT_EQ(g3->node_count(), 5u);
    EXPECT_EQ(g3->node(g3->origin()), Complex(0.0, 0.0));
    const auto g9 = make_grid(1.0, 9);
    EXPECT_DOUBLE_EQ(g9->spacing(), 0.25);
}

TEST(DiskGrid, NodesStayInsideTheDisk) {
    const auto g = make_grid(2.0, 33);
    for (std::size_t k = 0; k < g->node_count(); ++k) EXPECT_LE(std::abs(g->node(k)), 2.0 * (1.0 + 1e-15));
    // The four axis points of the boundary are retained.
    for (auto [i, j] : {std::pair{0, 16}, {32, 16}, {16, 0}, {16, 32}}) EXPECT_GE(g->index(i, j), 0);
}

TEST(DiskGrid, InvalidGridsAreRejected) {
    EXPECT_THROW(make_grid(1.0, 4), Error);
    EXPECT_THROW(make_grid(1.0, 1), Error);
    EXPECT_THROW(make_grid(0.0, 9), Error);
}

TEST(DiskGrid, WirtingerDerivativesOfLinearMapsAreExact) {
    const auto g = make_grid(1.0, 17);
    const DiskMap z = field(g, [](Complex w) { return w; });
    const DiskMap zb = field(g, [](Complex w) { return std::conj(w); });
    for (std::size_t k = 0; k < g->node_count(); ++k) {
        EXPECT_LT(std::abs(as_complex(d_dz(z).at(k)) - 1.0), 1e-12);
        EXPECT_LT(std::abs(as_complex(d_dzbar(z).at(k))), 1e-12);
        EXPECT_LT(std::abs(as_complex(d_dz(zb).at(k))), 1e-12);
        EXPECT_LT(std::abs(as_complex(d_dzbar(zb).at(k)) - 1.0), 1e-12);
    }
}

TEST(DiskGrid, DerivativeIsSecondOrderInTheInterior) {
    std::vector<double> err;
    for (int N : {17, 33, 65}) {
        const auto g = make_grid(1.0, N);
        // z^3 would be differentiated exactly; |z|^2 z has d/dz = 2 |z|^2.
        const DiskMap d = d_dz(field(g, [](Complex w) { return std::norm(w) * w + std::exp(w.real()); }));
        double e = 0.0;
        for (std::size_t k : g->interior_nodes()) {
            const Complex z = g->node(k);
            e = std::max(e, std::abs(as_complex(d.at(k)) - (2.0 * std::norm(z) + 0.5 * std::exp(z.real()))));
        }
        err.push_back(e);
    }
    EXPECT_NEAR(err[0] / err[1], 4.0, 0.5);
    EXPECT_NEAR(err[1] / err[2], 4.0, 0.5);
}

TEST(DiskGrid, InterpolationHitsNodesAndReproducesAffineMaps) {
    const auto g = make_grid(1.0, 33);
    const auto affine = [](Complex w) { return Complex{0.3, -0.1} + Complex{1.5, 0.5} * w + 0.25 * std::conj(w); };
    const DiskMap u = field(g, affine);
    for (std::size_t k = 0; k < g->node_count(); ++k)
        EXPECT_LT((eval_interp(u, g->node(k)) - u.at(k)).norm(), 1e-14);
    std::mt19937_64 rng(3);
    for (int s = 0; s < 200; ++s) {
        const Complex z = random_in_disk(rng, 0.9);
        EXPECT_LT(std::abs(as_complex(eval_interp(u, z)) - affine(z)), 1e-13);
    }
}

TEST(DiskGrid, BilinearErrorIsSecondOrder) {
    std::vector<double> err;
    std::mt19937_64 rng(5);
    std::vector<Complex> pts;
    for (int s = 0; s < 200; ++s) pts.push_back(random_in_disk(rng, 0.8));
    for (int N : {33, 65, 129}) {
        const DiskMap u = field(make_grid(1.0, N), [](Complex w) { return w * w; });
        double e = 0.0;
        for (Complex z : pts) e = std::max(e, std::abs(as_complex(eval_interp(u, z)) - z * z));
        err.push_back(e);
    }
    EXPECT_GT(std::log2(err[0] / err[1]), 1.8);
    EXPECT_GT(std::log2(err[1] / err[2]), 1.8);
}

TEST(DiskGrid, CubicInterpolationIsExactForBicubicData) {
    const auto g = make_grid(1.0, 33);
    const auto f = [](Complex w) {
        const double x = w.real(), y = w.imag();
        return Complex{x * x * x * y * y * y - 2.0 * x * y * y, x * x * y + 0.5};
    };
    const DiskMap u = field(g, f);
    std::mt19937_64 rng(9);
    for (int s = 0; s < 200; ++s) {
        const Complex z = random_in_disk(rng, 0.8);
        EXPECT_LT(std::abs(as_complex(eval_interp(u, z, Interpolation::Cubic)) - f(z)), 1e-12);
    }
}

TEST(DiskGrid, InterpolationOutsideTheLatticeThrows) {
    const auto g = make_grid(1.0, 9);
    const DiskMap u = field(g, [](Complex w) { return w; });
    EXPECT_FALSE(interpolable(*g, {0.95, 0.3}));
    EXPECT_THROW(eval_interp(u, {0.95, 0.3}), Error);
}

TEST(DiskGrid, PoincareDistanceMatchesIntegratedLineElement) {
    EXPECT_NEAR(poincare_distance(0.0, 0.5), std::atanh(0.5), 1e-15);
    EXPECT_NEAR(poincare_distance(0.0, 0.5), poincare_length_real(0.0, 0.5), 1e-10);
    EXPECT_NEAR(poincare_distance(-0.2, 0.6), poincare_length_real(-0.2, 0.6), 1e-10);
    // Radius r: the metric is scaled so that distances depend on z / r only.
    EXPECT_NEAR(poincare_distance(0.0, 1.0, 2.0), std::atanh(0.5), 1e-15);
    EXPECT_THROW(poincare_distance(0.0, 1.0), Error);
}

TEST(DiskGrid, PoincareDistanceIsAMetric) {
    std::mt19937_64 rng(13);
    for (int s = 0; s < 1000; ++s) {
        const Complex a = random_in_disk(rng, 0.99), b = random_in_disk(rng, 0.99), c = random_in_disk(rng, 0.99);
        const double ab = poincare_distance(a, b), ba = poincare_distance(b, a);
        EXPECT_NEAR(ab, ba, 1e-12 * (1.0 + ab));
        EXPECT_LE(ab, poincare_distance(a, c) + poincare_distance(c, b) + 1e-12);
        EXPECT_EQ(poincare_distance(a, a), 0.0);
    }
}

TEST(DiskGrid, MobiusSwapExchangesZeroAndZ0) {
    const Complex z0{0.3, -0.4};
    const auto L = mobius_swap(z0);
    EXPECT_LT(std::abs(L(0.0) - z0), 1e-15);
    EXPECT_LT(std::abs(L(z0)), 1e-15);
    std::mt19937_64 rng(17);
    for (int s = 0; s < 100; ++s) {
        const Complex z = random_in_disk(rng, 0.95);
        EXPECT_LT(std::abs(L(L(z)) - z), 1e-13);
        const Complex w = random_in_disk(rng, 0.95);
        EXPECT_NEAR(poincare_distance(L(z), L(w)), poincare_distance(z, w), 1e-10);
    }
    EXPECT_THROW(mobius_swap({1.0, 0.0}), Error);
}

TEST(DiskGrid, WeightedDerivativeSupremum) {
    const auto g = make_grid(1.0, 129);
    const auto id = sup_poincare_derivative(field(g, [](Complex w) { return w; }));
    EXPECT_NEAR(id.value, 1.0, 1e-12);
    EXPECT_EQ(id.node, g->origin());
    EXPECT_EQ(sup_poincare_derivative(field(g, [](Complex) { return Complex{0.4, 0.1}; })).value, 0.0);
    const auto sq = sup_poincare_derivative(field(g, [](Complex w) { return w * w; }));
    EXPECT_NEAR(sq.value, 4.0 / (3.0 * std::sqrt(3.0)), 1e-3);
    EXPECT_NEAR(std::abs(g->node(sq.node)), 1.0 / std::sqrt(3.0), 2.0 * g->spacing());
}

TEST(DiskGrid, SupDistanceRejectsMismatchedGrids) {
    const DiskMap a = field(make_grid(1.0, 9), [](Complex w) { return w; });
    const DiskMap b = field(make_grid(1.0, 11), [](Complex w) { return w; });
    EXPECT_THROW(sup_distance(a, b), Error);
    EXPECT_EQ(sup_distance(a, a), 0.0);
}
