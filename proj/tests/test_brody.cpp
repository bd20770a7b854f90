#include "jdisk/brody.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace jdisk;

namespace {

Vec v2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

DiskMap field(const GridPtr& g, const std::function<Complex(Complex)>& f) {
    return DiskMap::sample(g, ComplexConvention{1}, [&](Complex z) {
        const Complex w = f(z);
        return v2(w.real(), w.imag());
    });
}

/// s(t) for f = z + z^2 from the closed form: the sup of t |1 + 2tz| (1 - |z|^2)
/// is attained on the positive real axis; dense scan in x.
double s_oracle(double t) {
    double best = 0.0;
    for (int i = 0; i <= 200000; ++i) {
        const double x = i / 200000.0;
        best = std::max(best, t * (1.0 + 2.0 * t * x) * (1.0 - x * x));
    }
    return best;
}

/// Smallest t with s(t) = c, by dense scan then bisection on the oracle.
double t0_oracle(double c) {
    double lo = 0.0, hi = 1.0;
    for (int i = 1; i <= 1000; ++i) {
        if (s_oracle(i / 1000.0) >= c) {
            hi = i / 1000.0;
            break;
        }
        lo = i / 1000.0;
    }
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (s_oracle(mid) >= c ? hi : lo) = mid;
    }
    return hi;
}

StructureField standard() { return gallery("standard", GalleryParams{}); }

} // namespace

TEST(Brody, ScalingSupremum) {
    const auto g = make_grid(1.0, 129);
    const DiskMap id = field(g, [](Complex z) { return z; });
    EXPECT_EQ(scaling_sup(id, 0.0).value, 0.0);
    EXPECT_NEAR(scaling_sup(id, 1.0).value, 1.0, 1e-12);
    const DiskMap sq = field(g, [](Complex z) { return z * z; });
    const double full = 4.0 / (3.0 * std::sqrt(3.0));
    EXPECT_NEAR(scaling_sup(sq, 1.0).value, full, 1e-3);
    EXPECT_NEAR(scaling_sup(sq, 0.5).value, 0.25 * full, 1e-3);
    EXPECT_THROW(scaling_sup(id, 1.5), Error);
}

TEST(Brody, IdentityNeedsNoReparametrization) {
    const auto g = make_grid(1.0, 65);
    const DiskMap id = field(g, [](Complex z) { return z; });
    const auto r = brody_reparametrize(id, 1.0);
    EXPECT_EQ(r.t0, 1.0);
    EXPECT_FALSE(r.z0.has_value());
    EXPECT_EQ((r.f_tilde.values - id.values).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Brody, LinearMapIsShrunkWithoutRecentering) {
    const auto g = make_grid(1.0, 65);
    const auto r = brody_reparametrize(field(g, [](Complex z) { return 2.0 * z; }), 1.0);
    EXPECT_NEAR(r.t0, 0.5, 1e-6);
    EXPECT_FALSE(r.z0.has_value());
    EXPECT_NEAR(r.s_at_0, 1.0, 1e-5);
}

TEST(Brody, QuadraticMapMatchesOracle) {
    const auto g = make_grid(1.0, 129);
    const auto r = brody_reparametrize(field(g, [](Complex z) { return z + z * z; }), 0.5);
    EXPECT_NEAR(r.t0, t0_oracle(0.5), 2e-3);
    ASSERT_TRUE(r.z0.has_value());
    EXPECT_NEAR(r.s_at_0, 0.5, r.tol);
    EXPECT_LE(r.s_sup, r.s_at_0 + r.tol);
}

TEST(Brody, HypothesisIsChecked) {
    const auto g = make_grid(1.0, 33);
    try {
        brody_reparametrize(field(g, [](Complex z) { return 0.1 * z; }), 0.5);
        FAIL() << "expected HypothesisViolated";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::HypothesisViolated);
    }
}

TEST(Brody, RescaleStep) {
    const auto g = make_grid(1.0, 33);
    const DiskMap gn = rescale_step(field(g, [](Complex z) { return 5.0 * z; }));
    EXPECT_NEAR(gn.grid->radius(), 5.0, 1e-12);
    for (std::size_t k = 0; k < gn.grid->node_count(); ++k) {
        const Complex z = gn.grid->node(k);
        EXPECT_LT((gn.at(k) - v2(z.real(), z.imag())).norm(), 1e-12);
    }
    EXPECT_NEAR(dx_at(gn, gn.grid->origin()).norm(), 1.0, 1e-12);
    try {
        rescale_step(field(g, [](Complex) { return Complex{0.3, 0.0}; }));
        FAIL() << "expected ZeroDerivative";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroDerivative);
    }
}

TEST(Brody, TorusDilationsGiveAFixedLine) {
    GalleryParams gp;
    const auto J = gallery("torus-flat", gp);
    const Vec p = v2(0.25, 0.5), nu = v2(1.0, 0.0);
    ExtractOptions opt;
    opt.n_max = 6;
    const auto rep = extract_line(J, dilation_family(p, nu, 65), opt);
    ASSERT_TRUE(rep.converged) << rep.message;
    ASSERT_TRUE(rep.line.has_value());
    EXPECT_NEAR(rep.line->derivative_at_0, 1.0, 1e-6);
    EXPECT_LT(rep.line->cr_residual, 1e-10);
    const DiskMap& line = rep.line->samples;
    for (std::size_t k = 0; k < line.grid->node_count(); ++k) {
        const Complex z = line.grid->node(k);
        EXPECT_LT((line.at(k) - (p + v2(z.real(), z.imag()))).norm(), 1e-10);
    }
}

TEST(Brody, ChartDerivativeLadderConverges) {
    SolverConfig cfg;
    cfg.grid_n = 33;
    ExtractOptions opt;
    opt.R = 1.5;
    opt.window_n = 33;
    opt.n_max = 6;
    const auto rep = extract_line(standard(), derivative_ladder(standard(), v2(0, 0), v2(0, 1), 2.0, 1.0, cfg), opt);
    ASSERT_TRUE(rep.converged) << rep.message;
    EXPECT_NEAR(rep.line->derivative_at_0, 1.0, 1e-6);
    for (const auto& s : rep.steps) EXPECT_NEAR(s.g_derivative, 1.0, 1e-6);
}

TEST(Brody, ExtractOptionsAreValidated) {
    ExtractOptions opt;
    opt.n_max = 0;
    EXPECT_THROW(extract_line(standard(), dilation_family(v2(0, 0), v2(1, 0), 33), opt), Error);
}
