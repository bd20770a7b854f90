#include "jdisk/solver.hpp"

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

StructureField conjugated(double eps) {
    GalleryParams gp;
    gp.epsilon = eps;
    return gallery("conjugated", gp);
}

SolverConfig small_cfg(double eps = 0.1, int n = 33) {
    SolverConfig c;
    c.epsilon = eps;
    c.grid_n = n;
    return c;
}

} // namespace

TEST(Solver, ConfigValidation) {
    SolverConfig c;
    EXPECT_NO_THROW(c.validate());
    c.epsilon = 0.0;
    EXPECT_THROW(c.validate(), Error);
    EXPECT_NO_THROW(c.validate(true));
    c.epsilon = 1.5;
    EXPECT_THROW(c.validate(true), Error);
    c = SolverConfig{};
    c.grid_n = 64;
    EXPECT_THROW(c.validate(), Error);
}

TEST(Solver, ZeroEpsilonReturnsTheTarget) {
    const auto g = make_grid(1.0, 17);
    const DiskMap h = affine_target(v2(0.1, 0.2), v2(0.3, -0.1), 0.5, g);
    const DiskSolution s = picard_solve(conjugated(0.1), small_cfg(0.0, 17), h);
    EXPECT_EQ((s.u.values - h.values).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Solver, StandardStructureIsAFixedPointImmediately) {
    const auto g = make_grid(1.0, 33);
    const DiskMap h = affine_target(v2(0.1, 0.2), v2(0.3, -0.1), 0.5, g);
    for (double eps : {0.0, 0.1, 0.5}) {
        const DiskSolution s = picard_solve(standard(), small_cfg(eps), h);
        EXPECT_EQ((s.u.values - h.values).cwiseAbs().maxCoeff(), 0.0) << eps;
        EXPECT_LE(s.iterations, 1);
    }
}

TEST(Solver, ConjugatedPicardContracts) {
    const auto g = make_grid(1.0, 33);
    const DiskMap h = affine_target(v2(0.6, -0.3), v2(-0.5, 0.7), 0.5, g);
    const DiskSolution s = picard_solve(conjugated(0.1), small_cfg(0.05), h);
    EXPECT_LT(s.step_history.back(), 1e-10);
    for (double r : s.contraction_ratios()) EXPECT_LT(r, 0.5);
    // v = eps u, exactly.
    EXPECT_EQ((s.v.values - s.epsilon_used * s.u.values).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT(s.residual, 1e-4);
}

TEST(Solver, AffineAndLinearTargets) {
    const auto g = make_grid(1.0, 9);
    const DiskMap h = affine_target(v2(1.0, 0.0), v2(0.0, 1.0), 0.5, g);
    EXPECT_LT((h.at(g->origin()) - v2(1.0, 0.0)).norm(), 1e-15);
    EXPECT_LT((eval_interp(h, {0.5, 0.0}) - v2(0.0, 1.0)).norm(), 1e-15);
    // h(z) = p + (z/t)(q - p): at z = -0.5, 2 - i.
    EXPECT_LT((eval_interp(h, {-0.5, 0.0}) - v2(2.0, -1.0)).norm(), 1e-15);
    EXPECT_THROW(affine_target(v2(0, 0), v2(1, 0), 1.0, g), Error);
    const DiskMap l = linear_target(v2(0.0, 0.0), v2(0.0, 2.0), g);
    EXPECT_LT((eval_interp(l, {0.5, 0.0}) - v2(0.0, 1.0)).norm(), 1e-15);
}

TEST(Solver, CauchyRiemannResidual) {
    const auto g = make_grid(1.0, 17);
    const DiskMap z = DiskMap::sample(g, {1}, [](Complex w) { return v2(w.real(), w.imag()); });
    const DiskMap zb = DiskMap::sample(g, {1}, [](Complex w) { return v2(w.real(), -w.imag()); });
    EXPECT_LT(cr_residual(standard(), z), 1e-12);
    EXPECT_NEAR(cr_residual(standard(), zb), 1.0, 1e-12);
}

TEST(Solver, TwoPointStandardIsAffine) {
    const Vec p = v2(0.1, -0.2), q = v2(0.4, 0.3);
    const DiskSolution s = two_point_disk(standard(), p, q, 0.5, small_cfg());
    const DiskMap h = affine_target(p, q, 0.5, s.v.grid);
    EXPECT_LT(sup_distance(s.v, h), 1e-12);
    EXPECT_LE(s.newton_steps, 2);
}

TEST(Solver, TwoPointEqualEndpointsGivesConstantDisk) {
    const Vec p = v2(0.2, 0.2);
    const DiskSolution s = two_point_disk(conjugated(0.1), p, p, 0.5, small_cfg());
    for (std::size_t k = 0; k < s.v.grid->node_count(); ++k) EXPECT_EQ((s.v.at(k) - p).norm(), 0.0);
}

TEST(Solver, TwoPointConjugatedHitsBothEndpoints) {
    const Vec p = v2(0.0, 0.0), q = v2(0.1, 0.0);
    const DiskSolution s = two_point_disk(conjugated(0.1), p, q, 0.5, small_cfg(0.1, 33));
    EXPECT_LT((s.v.at(s.v.grid->origin()) - p).norm(), 1e-8);
    EXPECT_LT((eval_interp(s.v, {0.5, 0.0}) - q).norm(), 1e-8);
    EXPECT_LT(s.residual, 1e-2);
}

TEST(Solver, DerivativeDisk) {
    const Vec p = v2(0.1, 0.0), w = v2(0.0, 0.3);
    const DiskSolution st = derivative_disk(standard(), p, w, small_cfg());
    EXPECT_LT(sup_distance(st.v, linear_target(p, w, st.v.grid)), 1e-12);

    const DiskSolution zero = derivative_disk(conjugated(0.1), p, v2(0.0, 0.0), small_cfg());
    EXPECT_EQ((zero.v.at(zero.v.grid->origin()) - p).norm(), 0.0);

    const Vec w2 = v2(0.12, 0.16);   // |w| = 0.2
    const DiskSolution cj = derivative_disk(conjugated(0.1), p, w2, small_cfg());
    const std::size_t o = cj.v.grid->origin();
    EXPECT_LT((cj.v.at(o) - p).norm(), 1e-6);
    EXPECT_LT((d_dz_at(cj.v, o) - w2).norm(), 1e-6);
}

TEST(Solver, DimensionMismatchIsInvalid) {
    Vec p3(3);
    p3.setZero();
    EXPECT_THROW(two_point_disk(standard(), p3, p3, 0.5, small_cfg()), Error);
    EXPECT_THROW(derivative_disk(standard(), v2(0, 0), p3, small_cfg()), Error);
}

TEST(Solver, ManufacturedSequenceBound) {
    // A converging Picard sequence has residual of its limit bounded by the
    // residual sequence tail: the steps decrease geometrically.
    const auto g = make_grid(1.0, 33);
    const DiskMap h = linear_target(v2(0.0, 0.0), v2(1.0, 0.5), g);
    const DiskSolution s = picard_solve(conjugated(0.1), small_cfg(0.1), h);
    const auto ratios = s.contraction_ratios();
    ASSERT_FALSE(ratios.empty());
    double tail = 0.0;
    for (std::size_t k = 1; k < s.step_history.size(); ++k) tail += s.step_history[k];
    EXPECT_LT(tail, s.step_history.front());
}
