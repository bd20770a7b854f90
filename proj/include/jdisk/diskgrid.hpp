#pragma once

// Cartesian grids on the closed disk of radius r, maps sampled on them,
// Wirtinger derivatives, Poincare geometry and Mobius automorphisms.

#include "jdisk/error.hpp"
#include "jdisk/structure.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace jdisk {

using Complex = std::complex<double>;

/// Lattice {(-r + i h, -r + j h)} with h = 2r/(N-1), restricted to |z| <= r.
/// Membership is decided in integer arithmetic so the origin and the four
/// axis points of the boundary circle are always retained.
class DiskGrid {
public:
    DiskGrid(double r, int n_axis) : r_(r), n_(n_axis) {
        if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorKind::InvalidGrid, "radius must be positive");
        if (n_axis < 3 || n_axis % 2 == 0) throw Error(ErrorKind::InvalidGrid, "node count per axis must be odd and >= 3");
        c_ = (n_ - 1) / 2;
        h_ = 2.0 * r_ / (n_ - 1);
        index_.assign(static_cast<std::size_t>(n_) * n_, -1);
        const long c2 = static_cast<long>(c_) * c_;
        const long inner = c_ >= 2 ? static_cast<long>(c_ - 2) * (c_ - 2) : -1;
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) {
                const long di = i - c_, dj = j - c_;
                const long rr = di * di + dj * dj;
                if (rr > c2) continue;
                index_[static_cast<std::size_t>(i) * n_ + j] = static_cast<std::ptrdiff_t>(ix_.size());
                if (di == 0 && dj == 0) origin_ = ix_.size();
                interior_flag_.push_back(rr <= inner);
                ix_.push_back(i);
                iy_.push_back(j);
            }
        }
        for (std::size_t k = 0; k < ix_.size(); ++k)
            if (interior_flag_[k]) interior_.push_back(k);
        std::stable_sort(interior_.begin(), interior_.end(), [this](std::size_t a, std::size_t b) {
            return lattice_radius2(a) < lattice_radius2(b);
        });
    }

    double radius() const noexcept { return r_; }
    int axis_count() const noexcept { return n_; }
    double spacing() const noexcept { return h_; }
    std::size_t node_count() const noexcept { return ix_.size(); }
    std::size_t origin() const noexcept { return origin_; }

    int ix(std::size_t k) const { return ix_[k]; }
    int iy(std::size_t k) const { return iy_[k]; }
    /// Integer lattice offsets from the origin.
    int di(std::size_t k) const { return ix_[k] - c_; }
    int dj(std::size_t k) const { return iy_[k] - c_; }
    long lattice_radius2(std::size_t k) const {
        const long a = di(k), b = dj(k);
        return a * a + b * b;
    }

    Complex node(std::size_t k) const { return {di(k) * h_, dj(k) * h_}; }

    /// Node index at lattice position (i, j), or -1 when not retained.
    std::ptrdiff_t index(int i, int j) const {
        if (i < 0 || j < 0 || i >= n_ || j >= n_) return -1;
        return index_[static_cast<std::size_t>(i) * n_ + j];
    }

    bool interior(std::size_t k) const { return interior_flag_[k]; }

    /// Nodes with |z| <= r - 2h, ordered by |z| then node index.
    const std::vector<std::size_t>& interior_nodes() const noexcept { return interior_; }

    bool same_layout(const DiskGrid& o) const noexcept { return n_ == o.n_ && r_ == o.r_; }

private:
    double r_;
    int n_;
    int c_ = 0;
    double h_ = 0.0;
    std::size_t origin_ = 0;
    std::vector<std::ptrdiff_t> index_;
    std::vector<int> ix_, iy_;
    std::vector<bool> interior_flag_;
    std::vector<std::size_t> interior_;
};

using GridPtr = std::shared_ptr<const DiskGrid>;

inline GridPtr make_grid(double r, int n_axis) { return std::make_shared<const DiskGrid>(r, n_axis); }

/// A map from the grid's disk to R^{2n}; column k holds the value at node k.
struct DiskMap {
    GridPtr grid;
    ComplexConvention convention;
    Mat values;

    int dim() const noexcept { return convention.dim(); }
    Vec at(std::size_t k) const { return values.col(static_cast<Eigen::Index>(k)); }

    static DiskMap zeros(GridPtr grid, ComplexConvention conv) {
        const auto m = static_cast<Eigen::Index>(grid->node_count());
        return {std::move(grid), conv, Mat::Zero(conv.dim(), m)};
    }

    static DiskMap sample(GridPtr grid, ComplexConvention conv, const std::function<Vec(Complex)>& f) {
        DiskMap out = zeros(std::move(grid), conv);
        for (std::size_t k = 0; k < out.grid->node_count(); ++k)
            out.values.col(static_cast<Eigen::Index>(k)) = f(out.grid->node(k));
        return out;
    }
};

inline void require_same_grid(const DiskMap& a, const DiskMap& b) {
    if (!a.grid->same_layout(*b.grid) || a.dim() != b.dim())
        throw Error(ErrorKind::GridMismatch, "maps live on different grids");
}

/// sup over nodes (optionally interior only) of the Euclidean norm of a - b.
inline double sup_distance(const DiskMap& a, const DiskMap& b, bool interior_only = false) {
    require_same_grid(a, b);
    double best = 0.0;
    for (std::size_t k = 0; k < a.grid->node_count(); ++k) {
        if (interior_only && !a.grid->interior(k)) continue;
        best = std::max(best, (a.values.col(k) - b.values.col(k)).norm());
    }
    return best;
}

// ---------------------------------------------------------------------------
// Derivatives

struct Partials {
    Mat dx;
    Mat dy;
};

namespace detail {

/// Derivative along one lattice axis at node k with no neighbour on that axis
/// (the extreme nodes of a row or column): the centered derivative is taken
/// from the nearest nodes inward along the other axis and extrapolated,
/// linearly when `second_order` and two such nodes exist, else constantly.
inline Vec isolated_axis_derivative(const DiskMap& u, std::size_t k, int ax, int ay, bool second_order) {
    const DiskGrid& g = *u.grid;
    const int i = g.ix(k), j = g.iy(k);
    const double h = g.spacing();
    auto centered = [&](std::ptrdiff_t q) -> std::optional<Vec> {
        const int qi = g.ix(static_cast<std::size_t>(q)), qj = g.iy(static_cast<std::size_t>(q));
        const auto f = g.index(qi + ax, qj + ay), b = g.index(qi - ax, qj - ay);
        if (f < 0 || b < 0) return std::nullopt;
        return Vec((u.values.col(f) - u.values.col(b)) / (2.0 * h));
    };
    for (int s : {-1, 1}) {
        // Step along the other axis, towards the centre first.
        const int di = ay * s, dj = ax * s;
        const int towards = (i - g.axis_count() / 2) * di + (j - g.axis_count() / 2) * dj;
        if (towards > 0) continue;
        const auto q1 = g.index(i + di, j + dj);
        if (q1 < 0) continue;
        const auto d1 = centered(q1);
        if (!d1) continue;
        if (second_order) {
            const auto q2 = g.index(i + 2 * di, j + 2 * dj);
            if (q2 >= 0)
                if (const auto d2 = centered(q2)) return Vec(2.0 * *d1 - *d2);
        }
        return *d1;
    }
    return Vec::Zero(u.dim());
}

/// Derivative along one lattice axis at node k. Centered when both neighbours
/// are retained, one-sided first order otherwise; nodes with no neighbour on
/// the axis extrapolate from inward nodes.
inline Vec axis_derivative(const DiskMap& u, std::size_t k, int ax, int ay) {
    const DiskGrid& g = *u.grid;
    const int i = g.ix(k), j = g.iy(k);
    const auto fwd = g.index(i + ax, j + ay);
    const auto bwd = g.index(i - ax, j - ay);
    const double h = g.spacing();
    if (fwd >= 0 && bwd >= 0) return (u.values.col(fwd) - u.values.col(bwd)) / (2.0 * h);
    if (fwd >= 0) return (u.values.col(fwd) - u.values.col(k)) / h;
    if (bwd >= 0) return (u.values.col(k) - u.values.col(bwd)) / h;
    return isolated_axis_derivative(u, k, ax, ay, false);
}

/// Like axis_derivative, but second-order one-sided (-3f0 + 4f1 - f2)/2h
/// where a neighbour is missing and two nodes are available on the other side.
inline Vec axis_derivative2(const DiskMap& u, std::size_t k, int ax, int ay) {
    const DiskGrid& g = *u.grid;
    const int i = g.ix(k), j = g.iy(k);
    const auto fwd = g.index(i + ax, j + ay);
    const auto bwd = g.index(i - ax, j - ay);
    const double h = g.spacing();
    if (fwd >= 0 && bwd >= 0) return (u.values.col(fwd) - u.values.col(bwd)) / (2.0 * h);
    if (fwd >= 0) {
        const auto fwd2 = g.index(i + 2 * ax, j + 2 * ay);
        if (fwd2 >= 0) return (-3.0 * u.values.col(k) + 4.0 * u.values.col(fwd) - u.values.col(fwd2)) / (2.0 * h);
        return (u.values.col(fwd) - u.values.col(k)) / h;
    }
    if (bwd >= 0) {
        const auto bwd2 = g.index(i - 2 * ax, j - 2 * ay);
        if (bwd2 >= 0) return (3.0 * u.values.col(k) - 4.0 * u.values.col(bwd) + u.values.col(bwd2)) / (2.0 * h);
        return (u.values.col(k) - u.values.col(bwd)) / h;
    }
    return isolated_axis_derivative(u, k, ax, ay, true);
}

inline Vec wirtinger(const Vec& ux, const Vec& uy, double sign) {
    return 0.5 * (ux + sign * times_i(uy));
}

} // namespace detail

inline Partials partials(const DiskMap& u) {
    Partials p{Mat(u.dim(), u.values.cols()), Mat(u.dim(), u.values.cols())};
    for (std::size_t k = 0; k < u.grid->node_count(); ++k) {
        p.dx.col(k) = detail::axis_derivative(u, k, 1, 0);
        p.dy.col(k) = detail::axis_derivative(u, k, 0, 1);
    }
    return p;
}

/// d/dx at a single node; its norm is the |f'(z)| used by the weighted suprema.
inline Vec dx_at(const DiskMap& u, std::size_t k) { return detail::axis_derivative(u, k, 1, 0); }

/// d/dz = (d/dx - i d/dy)/2 at a single node.
inline Vec d_dz_at(const DiskMap& u, std::size_t k) {
    return detail::wirtinger(detail::axis_derivative(u, k, 1, 0), detail::axis_derivative(u, k, 0, 1), -1.0);
}

inline DiskMap d_dz(const DiskMap& u) {
    DiskMap out = DiskMap::zeros(u.grid, u.convention);
    const Partials p = partials(u);
    for (Eigen::Index k = 0; k < out.values.cols(); ++k)
        out.values.col(k) = detail::wirtinger(p.dx.col(k), p.dy.col(k), -1.0);
    return out;
}

inline DiskMap d_dzbar(const DiskMap& u) {
    DiskMap out = DiskMap::zeros(u.grid, u.convention);
    const Partials p = partials(u);
    for (Eigen::Index k = 0; k < out.values.cols(); ++k)
        out.values.col(k) = detail::wirtinger(p.dx.col(k), p.dy.col(k), 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// Interpolation

/// True when z is a retained node or its enclosing lattice cell has all four corners retained.
inline bool interpolable(const DiskGrid& g, Complex z) {
    const double h = g.spacing(), r = g.radius();
    const double fx = (z.real() + r) / h, fy = (z.imag() + r) / h;
    if (!(fx >= 0.0 && fy >= 0.0 && fx <= g.axis_count() - 1 && fy <= g.axis_count() - 1)) return false;
    if (fx == std::floor(fx) && fy == std::floor(fy) && g.index(static_cast<int>(fx), static_cast<int>(fy)) >= 0)
        return true;
    const int i0 = std::min(static_cast<int>(std::floor(fx)), g.axis_count() - 2);
    const int j0 = std::min(static_cast<int>(std::floor(fy)), g.axis_count() - 2);
    return g.index(i0, j0) >= 0 && g.index(i0 + 1, j0) >= 0 && g.index(i0, j0 + 1) >= 0 &&
           g.index(i0 + 1, j0 + 1) >= 0;
}

/// Bilinear interpolation of the grid matrix `values` (one column per node).
/// Exact at nodes and for affine maps. Throws OutsideInterpolationRange when
/// the enclosing cell is not fully inside the grid.
inline Vec interp_columns(const DiskGrid& g, const Mat& values, Complex z) {
    const double h = g.spacing(), r = g.radius();
    const double fx = (z.real() + r) / h, fy = (z.imag() + r) / h;
    if (!(fx >= 0.0 && fy >= 0.0 && fx <= g.axis_count() - 1 && fy <= g.axis_count() - 1))
        throw Error(ErrorKind::OutsideInterpolationRange, "point outside the grid square");
    if (fx == std::floor(fx) && fy == std::floor(fy)) {
        const auto k = g.index(static_cast<int>(fx), static_cast<int>(fy));
        if (k >= 0) return values.col(k);
    }
    const int i0 = std::min(static_cast<int>(std::floor(fx)), g.axis_count() - 2);
    const int j0 = std::min(static_cast<int>(std::floor(fy)), g.axis_count() - 2);
    const auto k00 = g.index(i0, j0), k10 = g.index(i0 + 1, j0);
    const auto k01 = g.index(i0, j0 + 1), k11 = g.index(i0 + 1, j0 + 1);
    if (k00 < 0 || k10 < 0 || k01 < 0 || k11 < 0)
        throw Error(ErrorKind::OutsideInterpolationRange, "enclosing cell leaves the disk");
    const double a = fx - i0, b = fy - j0;
    if (a == 0.0 && b == 0.0) return values.col(k00);
    return (1.0 - a) * (1.0 - b) * values.col(k00) + a * (1.0 - b) * values.col(k10) +
           (1.0 - a) * b * values.col(k01) + a * b * values.col(k11);
}

/// Tensor cubic Lagrange interpolation on the 4x4 block around the enclosing
/// cell; falls back to bilinear when part of that block lies outside the disk.
inline Vec interp_cubic_columns(const DiskGrid& g, const Mat& values, Complex z) {
    const double h = g.spacing(), r = g.radius();
    const double fx = (z.real() + r) / h, fy = (z.imag() + r) / h;
    if (!(fx >= 0.0 && fy >= 0.0 && fx <= g.axis_count() - 1 && fy <= g.axis_count() - 1))
        throw Error(ErrorKind::OutsideInterpolationRange, "point outside the grid square");
    const int i0 = std::min(static_cast<int>(std::floor(fx)), g.axis_count() - 2);
    const int j0 = std::min(static_cast<int>(std::floor(fy)), g.axis_count() - 2);
    const double a = fx - i0, b = fy - j0;
    if (fx == std::floor(fx) && fy == std::floor(fy)) {
        const auto k = g.index(static_cast<int>(fx), static_cast<int>(fy));
        if (k >= 0) return values.col(k);
    }
    std::array<std::ptrdiff_t, 16> idx{};
    for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) {
            idx[p * 4 + q] = g.index(i0 - 1 + p, j0 - 1 + q);
            if (idx[p * 4 + q] < 0) return interp_columns(g, values, z);
        }
    const auto lagrange = [](double t) {
        return std::array<double, 4>{-t * (t - 1.0) * (t - 2.0) / 6.0, (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                                     -(t + 1.0) * t * (t - 2.0) / 2.0, (t + 1.0) * t * (t - 1.0) / 6.0};
    };
    const auto wx = lagrange(a), wy = lagrange(b);
    Vec out = Vec::Zero(values.rows());
    for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) out += (wx[p] * wy[q]) * values.col(idx[p * 4 + q]);
    return out;
}

enum class Interpolation { Bilinear, Cubic };

inline Vec eval_interp(const DiskMap& u, Complex z, Interpolation kind = Interpolation::Bilinear) {
    return kind == Interpolation::Cubic ? interp_cubic_columns(*u.grid, u.values, z)
                                        : interp_columns(*u.grid, u.values, z);
}

/// Resamples `src` at the points point_of(z) for every node z of `grid`.
inline DiskMap resample(const DiskMap& src, GridPtr grid, const std::function<Complex(Complex)>& point_of,
                        Interpolation kind = Interpolation::Bilinear) {
    DiskMap out = DiskMap::zeros(std::move(grid), src.convention);
    for (std::size_t k = 0; k < out.grid->node_count(); ++k)
        out.values.col(k) = eval_interp(src, point_of(out.grid->node(k)), kind);
    return out;
}

// ---------------------------------------------------------------------------
// Poincare geometry of the disk of radius r

/// Distance for the metric r^2 |dz| / (r^2 - |z|^2):
/// arctanh(|r (a - b)| / |r^2 - conj(a) b|).
inline double poincare_distance(Complex a, Complex b, double r = 1.0) {
    if (!(std::abs(a) < r) || !(std::abs(b) < r))
        throw Error(ErrorKind::OutsideDisk, "points must lie strictly inside the disk");
    if (a == b) return 0.0;
    const double ratio = std::abs(r * (a - b)) / std::abs(r * r - std::conj(a) * b);
    return std::atanh(std::min(ratio, 1.0));
}

/// Involutive automorphism of the disk of radius r exchanging 0 and z0:
/// L(z) = r^2 (z0 - z) / (r^2 - conj(z0) z).
struct MobiusAutomorphism {
    Complex z0;
    double r = 1.0;

    Complex operator()(Complex z) const { return r * r * (z0 - z) / (r * r - std::conj(z0) * z); }

    /// Complex derivative L'(z).
    Complex derivative(Complex z) const {
        const Complex den = r * r - std::conj(z0) * z;
        return r * r * (std::norm(z0) - r * r) / (den * den);
    }
};

inline MobiusAutomorphism mobius_swap(Complex z0, double r = 1.0) {
    if (!(std::abs(z0) < r)) throw Error(ErrorKind::OutsideDisk, "z0 must lie strictly inside the disk");
    return {z0, r};
}

// ---------------------------------------------------------------------------
// Poincare-weighted derivative supremum

struct WeightedSup {
    double value = 0.0;
    std::size_t node = 0;
};

namespace detail {

/// Max over interior nodes of speed(k) * (r^2 - |z|^2)/r^2. Ties go to the
/// smallest |z|, then to the lowest node index (lexicographic in (ix, iy)).
template <typename Speed>
WeightedSup weighted_sup(const DiskGrid& g, Speed&& speed) {
    WeightedSup best{0.0, g.origin()};
    bool first = true;
    const double r2 = g.radius() * g.radius();
    // interior_nodes() is ordered by (|z|, node index), so the first maximum wins ties.
    for (std::size_t k : g.interior_nodes()) {
        const double s = speed(k) * (r2 - std::norm(g.node(k))) / r2;
        if (first || s > best.value) {
            best = {s, k};
            first = false;
        }
    }
    return best;
}

} // namespace detail

/// sup over the interior of |f'(z)| (r^2 - |z|^2)/r^2 with |f'(z)| the
/// Euclidean norm of d f / d x, and the attaining node.
inline WeightedSup sup_poincare_derivative(const DiskMap& f) {
    const Partials p = partials(f);
    return detail::weighted_sup(*f.grid, [&](std::size_t k) { return p.dx.col(k).norm(); });
}

} // namespace jdisk
