#pragma once

// Discrete solid Cauchy transform on the disk,
//   (P phi)(z) = (1/pi) \int phi(zeta) / (z - zeta) dA(zeta),
// normalized so that d/dzbar (P phi) = phi.

#include "jdisk/diskgrid.hpp"
#include "jdisk/error.hpp"
#include "jdisk/parallel.hpp"
#include "jdisk/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <tuple>
#include <utility>
#include <vector>

namespace jdisk {

namespace detail {

/// Antiderivative F with d^2F/dxdy = 1/(x + i y); valid away from the axes.
inline Complex inverse_kernel_antiderivative(double x, double y) {
    const double l = std::log(x * x + y * y);
    const double re = 0.5 * y * l + x * std::atan(y / x);
    const double im = -(0.5 * x * l + y * std::atan(x / y));
    return {re, im};
}

/// One oriented piece of the boundary of (cell ∩ disk).
struct BoundaryPiece {
    bool arc = false;
    Complex a, b;              ///< segment endpoints
    double theta0 = 0.0;       ///< arc start angle
    double theta1 = 0.0;       ///< arc end angle (theta1 > theta0, counterclockwise)
};

/// Counterclockwise boundary of the closed square [x1,x2]x[y1,y2] intersected
/// with the disk |zeta| <= r, as straight and circular pieces.
inline std::vector<BoundaryPiece> clipped_cell_boundary(double x1, double x2, double y1, double y2, double r) {
    std::vector<BoundaryPiece> pieces;
    const Complex corners[4] = {{x1, y1}, {x2, y1}, {x2, y2}, {x1, y2}};
    for (int e = 0; e < 4; ++e) {
        const Complex p = corners[e], q = corners[(e + 1) % 4];
        const Complex d = q - p;
        const double a = std::norm(d);
        const double bb = (std::conj(p) * d).real();
        const double c = std::norm(p) - r * r;
        const double disc = bb * bb - a * c;
        if (disc <= 0.0) continue;
        const double sq = std::sqrt(disc);
        const double s0 = std::max(0.0, (-bb - sq) / a), s1 = std::min(1.0, (-bb + sq) / a);
        if (s1 - s0 <= 0.0) continue;
        pieces.push_back({false, p + s0 * d, p + s1 * d, 0.0, 0.0});
    }

    // Circle crossings with the four edge lines, restricted to the edges.
    std::vector<double> angles;
    auto add_angle = [&](Complex z) {
        double t = std::atan2(z.imag(), z.real());
        if (t < 0.0) t += 2.0 * std::numbers::pi;
        angles.push_back(t);
    };
    for (double x : {x1, x2}) {
        if (std::abs(x) > r) continue;
        const double y = std::sqrt(r * r - x * x);
        for (double yy : {y, -y})
            if (yy >= y1 && yy <= y2) add_angle({x, yy});
    }
    for (double y : {y1, y2}) {
        if (std::abs(y) > r) continue;
        const double x = std::sqrt(r * r - y * y);
        for (double xx : {x, -x})
            if (xx >= x1 && xx <= x2) add_angle({xx, y});
    }
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end()), angles.end());
    const std::size_t na = angles.size();
    for (std::size_t i = 0; i < na; ++i) {
        const double t0 = angles[i];
        const double t1 = i + 1 < na ? angles[i + 1] : angles[0] + 2.0 * std::numbers::pi;
        if (t1 - t0 <= 0.0) continue;
        const double tm = 0.5 * (t0 + t1);
        const Complex m{r * std::cos(tm), r * std::sin(tm)};
        if (m.real() >= x1 && m.real() <= x2 && m.imag() >= y1 && m.imag() <= y2)
            pieces.push_back({true, {}, {}, t0, t1});
    }
    return pieces;
}

/// (1/2i) \oint f(zeta) dzeta over the pieces, composite Gauss on each piece.
inline Complex contour_integral(const std::vector<BoundaryPiece>& pieces, double r,
                                const std::function<Complex(Complex)>& f, const GaussRule& rule,
                                int panels) {
    Complex total{};
    for (const auto& pc : pieces) {
        for (int s = 0; s < panels; ++s) {
            const double lo = static_cast<double>(s) / panels, hi = static_cast<double>(s + 1) / panels;
            for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
                const double u = lo + (hi - lo) * 0.5 * (rule.nodes[g] + 1.0);
                const double w = (hi - lo) * 0.5 * rule.weights[g];
                if (pc.arc) {
                    const double th = pc.theta0 + u * (pc.theta1 - pc.theta0);
                    const Complex z{r * std::cos(th), r * std::sin(th)};
                    const Complex dz = Complex(0.0, 1.0) * z * (pc.theta1 - pc.theta0);
                    total += w * f(z) * dz;
                } else {
                    const Complex z = pc.a + u * (pc.b - pc.a);
                    total += w * f(z) * (pc.b - pc.a);
                }
            }
        }
    }
    return total / Complex(0.0, 2.0);
}

} // namespace detail

/// Exact value of (1/pi) \int_Q dA(w) / w over the axis-aligned square Q of
/// side h centered at w0. Zero when w0 = 0 (odd kernel on a centered square).
inline Complex cell_kernel_integral(Complex w0, double h) {
    if (w0 == Complex(0.0, 0.0)) return {0.0, 0.0};
    const double x1 = w0.real() - 0.5 * h, x2 = w0.real() + 0.5 * h;
    const double y1 = w0.imag() - 0.5 * h, y2 = w0.imag() + 0.5 * h;
    using detail::inverse_kernel_antiderivative;
    const Complex s = inverse_kernel_antiderivative(x2, y2) - inverse_kernel_antiderivative(x1, y2) -
                      inverse_kernel_antiderivative(x2, y1) + inverse_kernel_antiderivative(x1, y1);
    return s / std::numbers::pi;
}

/// Precomputed quadrature for P on one grid.
///
/// Cells fully inside the disk have translation-invariant weights, stored as
/// an offset table K of size (2N-1)^2: offsets within `near_cells`
/// (Chebyshev) use the exact cell integral, farther ones its Laurent series
/// h^2 / (pi w) + mu_4 / (pi w^5) + ... (the midpoint rule plus corrections).
///
/// Cells cut by the circle are integrated over cell ∩ disk exactly in the
/// geometry, through Green's theorem, with phi replaced by its first-order
/// Taylor model at a source node (the cell's own node, or the nearest retained
/// one when the centre lies outside the disk). Far targets use the complex
/// moments of the clipped cell in a Laurent series; targets closer than
/// `near_boundary_cells` spacings use direct contour integrals.
class CGOperator {
public:
    static constexpr int near_cells = 2;
    static constexpr double near_boundary_cells = 2.5;
    static constexpr int max_moments = 28;

    explicit CGOperator(GridPtr grid) : grid_(std::move(grid)) {
        const DiskGrid& g = *grid_;
        const int n = g.axis_count();
        const double h = g.spacing();
        const double r = g.radius();
        h_ = h;
        stride_ = 2 * n - 1;
        kernel_.assign(static_cast<std::size_t>(stride_) * stride_, {});
        const auto square = square_moments(h);
        const GaussRule rule = gauss_legendre(16);
        const double hh = 0.5 * h;
        const std::vector<detail::BoundaryPiece> unit_square = {
            {false, {-hh, -hh}, {hh, -hh}, 0.0, 0.0},
            {false, {hh, -hh}, {hh, hh}, 0.0, 0.0},
            {false, {hh, hh}, {-hh, hh}, 0.0, 0.0},
            {false, {-hh, hh}, {-hh, -hh}, 0.0, 0.0},
        };
        for (int a = -(n - 1); a <= n - 1; ++a) {
            for (int b = -(n - 1); b <= n - 1; ++b) {
                const Complex w{a * h, b * h};
                auto& entry = kernel_[table_index(a, b)];
                if (std::max(std::abs(a), std::abs(b)) <= near_cells) {
                    entry[0] = cell_kernel_integral(w, h);
                    entry[1] = detail::contour_integral(
                                   unit_square, r, [&](Complex q) { return std::conj(q - w) * q / (w - q); },
                                   rule, 8) /
                               std::numbers::pi;
                    const Complex wc = std::conj(w);
                    entry[2] = detail::contour_integral(
                                   unit_square, r,
                                   [&](Complex q) { return 0.5 * (std::conj(q) * std::conj(q) - wc * wc) / (w - q); },
                                   rule, 8) /
                               std::numbers::pi;
                    continue;
                }
                // Laurent expansions in t = 1/w; on the square only moments with
                // p = 0 mod 4 (plain) and p = 1 mod 4 (conjugate) survive.
                const Complex t = 1.0 / w, t4 = (t * t) * (t * t);
                Complex s0{}, s1{}, s2{}, power = t;
                for (std::size_t q = 0; q < square.plain.size(); ++q) {
                    s0 += square.plain[q] * power;
                    if (q + 1 < square.plain.size()) s1 += square.plain[q + 1] * power * t * t * t;
                    s2 += square.conj[q] * power * t;
                    power *= t4;
                }
                entry = {s0 / std::numbers::pi, s1 / std::numbers::pi, s2 / std::numbers::pi};
            }
        }

        const std::size_t m = g.node_count();
        full_.assign(m, 0);
        fraction_.assign(m, 1.0);
        const double half_diag = 0.5 * h * std::numbers::sqrt2;
        for (std::size_t j = 0; j < m; ++j) {
            full_[j] = std::abs(g.node(j)) + half_diag <= r ? 1 : 0;
            if (full_[j]) full_nodes_.push_back(j);
        }
        // Full cells of one lattice row are consecutive in node order.
        for (std::size_t j : full_nodes_) {
            if (!segments_.empty() && segments_.back().row == g.ix(j) && segments_.back().last + 1 == j) {
                ++segments_.back().last;
            } else {
                segments_.push_back({g.ix(j), j, j});
            }
        }
        // Column-mirrored copies, so that a row segment of sources reads the
        // table forwards.
        for (int part = 0; part < 3; ++part) {
            table_re_[part].resize(kernel_.size());
            table_im_[part].resize(kernel_.size());
            for (int a = -(n - 1); a <= n - 1; ++a) {
                for (int b = -(n - 1); b <= n - 1; ++b) {
                    const std::size_t e = table_index(a, -b);
                    table_re_[part][e] = kernel_[table_index(a, b)][part].real();
                    table_im_[part][e] = kernel_[table_index(a, b)][part].imag();
                }
            }
        }

        // Cut cells: every lattice cell meeting the disk that is not full.
        const int c = (n - 1) / 2;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const Complex center{(i - c) * h, (j - c) * h};
                if (std::abs(center) - half_diag > r) continue;
                const auto node = g.index(i, j);
                if (node >= 0 && full_[node]) continue;
                CutCell cell;
                cell.center = center;
                cell.x1 = center.real() - 0.5 * h;
                cell.x2 = center.real() + 0.5 * h;
                cell.y1 = center.imag() - 0.5 * h;
                cell.y2 = center.imag() + 0.5 * h;
                cell.source = node >= 0 ? static_cast<std::size_t>(node) : nearest_retained(i, j);
                cell.gradient = gradient_stencil(cell.source);
                const auto pieces = detail::clipped_cell_boundary(cell.x1, cell.x2, cell.y1, cell.y2, r);
                if (pieces.empty()) continue;
                cell.moments.resize(max_moments + 1);
                cell.conj_moments.resize(max_moments);
                for (int p = 0; p <= max_moments; ++p) {
                    cell.moments[p] = detail::contour_integral(
                        pieces, r,
                        [&](Complex z) {
                            const Complex d = z - center;
                            return std::conj(d) * std::pow(d, p);
                        },
                        rule, 1);
                    if (p == max_moments) break;
                    cell.conj_moments[p] = detail::contour_integral(
                        pieces, r,
                        [&](Complex z) {
                            const Complex d = z - center;
                            return 0.5 * std::conj(d) * std::conj(d) * std::pow(d, p);
                        },
                        rule, 1);
                }
                if (std::abs(cell.moments[0]) <= 0.0) continue;
                if (node >= 0) fraction_[node] = cell.moments[0].real() / (h * h);
                cells_.push_back(std::move(cell));
            }
        }

        // Direct contour integrals for targets close to a cut cell.
        near_.assign(m, {});
        for (std::size_t b = 0; b < cells_.size(); ++b) {
            const CutCell& cell = cells_[b];
            const Complex cc = cell.center;
            const auto pieces = detail::clipped_cell_boundary(cell.x1, cell.x2, cell.y1, cell.y2, r);
            for (std::size_t k = 0; k < m; ++k) {
                const Complex z = g.node(k);
                if (std::abs(z - cc) >= near_boundary_cells * h) continue;
                NearWeight nw;
                nw.cell = b;
                nw.w[0] = detail::contour_integral(
                    pieces, r, [&](Complex q) { return std::conj(q - z) / (z - q); }, rule, 8);
                nw.w[1] = detail::contour_integral(
                    pieces, r, [&](Complex q) { return std::conj(q - z) * (q - cc) / (z - q); }, rule, 8);
                const Complex zc = std::conj(z - cc);
                nw.w[2] = detail::contour_integral(
                    pieces, r,
                    [&](Complex q) {
                        const Complex qc = std::conj(q - cc);
                        return 0.5 * (qc * qc - zc * zc) / (z - q);
                    },
                    rule, 8);
                for (auto& w : nw.w) w /= std::numbers::pi;
                near_[k].push_back(nw);
            }
        }
    }

    const GridPtr& grid() const noexcept { return grid_; }

    /// Kernel table entry for lattice offset (a, b) between full cells: the
    /// weights of 1, (zeta - c) and conj(zeta - c) over the source cell.
    const std::array<Complex, 3>& kernel(int a, int b) const { return kernel_[table_index(a, b)]; }

    /// Fraction of the retained node's cell lying inside the disk.
    double area_fraction(std::size_t j) const { return fraction_[j]; }

    bool full_cell(std::size_t j) const { return full_[j] != 0; }

    std::size_t cut_cell_count() const noexcept { return cells_.size(); }

    /// Applies P to `phi` component-wise; out is resized to (dim x nodes).
    /// phi is modelled on every cell as v + a (zeta - c) + b conj(zeta - c),
    /// with a = d phi/dz and b = d phi/dzbar from the grid stencils.
    void apply(const Mat& phi, Mat& out) const {
        const std::size_t m = grid_->node_count();
        const int ncomp = static_cast<int>(phi.rows()) / 2;
        out.setZero(phi.rows(), static_cast<Eigen::Index>(m));
        if (phi.isZero(0.0)) return;

        const DiskMap view{grid_, ComplexConvention{ncomp}, phi};
        const Partials d = partials(view);
        auto slot = [](const Mat& x, Eigen::Index col, int c) { return Complex{x(2 * c, col), x(2 * c + 1, col)}; };
        // Per node and component: value, d/dz, d/dzbar.
        std::vector<std::array<Complex, 3>> src(m * ncomp);
        for (std::size_t j = 0; j < m; ++j) {
            const auto col = static_cast<Eigen::Index>(j);
            for (int c = 0; c < ncomp; ++c) {
                const Complex ux = slot(d.dx, col, c), uy = slot(d.dy, col, c);
                src[j * ncomp + c] = {slot(phi, col, c), 0.5 * (ux - Complex(0.0, 1.0) * uy),
                                      0.5 * (ux + Complex(0.0, 1.0) * uy)};
            }
        }
        // Cut cells re-expand the source node's model about the cell centre,
        // with the gradient from a least-squares stencil (boundary nodes can
        // lack neighbours along an axis).
        std::vector<std::array<Complex, 3>> model(cells_.size() * ncomp);
        for (std::size_t b = 0; b < cells_.size(); ++b) {
            const CutCell& cell = cells_[b];
            const std::size_t s = cell.source;
            const Complex shift = cell.center - grid_->node(s);
            for (int c = 0; c < ncomp; ++c) {
                Complex ux{}, uy{};
                for (const auto& [node, wx, wy] : cell.gradient) {
                    const Complex v = src[node * ncomp + c][0];
                    ux += wx * v;
                    uy += wy * v;
                }
                const Complex a = 0.5 * (ux - Complex(0.0, 1.0) * uy);
                const Complex bb = 0.5 * (ux + Complex(0.0, 1.0) * uy);
                model[b * ncomp + c] = {src[s * ncomp + c][0] + a * shift + bb * std::conj(shift), a, bb};
            }
        }
        // Far targets only need the moments of the whole model.
        std::vector<Complex> eff(cells_.size() * ncomp * max_moments);
        for (std::size_t b = 0; b < cells_.size(); ++b)
            for (int c = 0; c < ncomp; ++c)
                effective_moments(cells_[b], model[b * ncomp + c], &eff[(b * ncomp + c) * max_moments]);

        // Split layout for the full-cell sums: [component][value, d/dz, d/dzbar].
        std::vector<std::array<std::vector<double>, 6>> split(ncomp);
        for (int c = 0; c < ncomp; ++c) {
            for (auto& arr : split[c]) arr.resize(m);
            for (std::size_t j = 0; j < m; ++j) {
                for (int part = 0; part < 3; ++part) {
                    split[c][2 * part][j] = src[j * ncomp + c][part].real();
                    split[c][2 * part + 1][j] = src[j * ncomp + c][part].imag();
                }
            }
        }

        const int half = stride_ / 2;
        parallel_for(m, [&](std::size_t k) {
            Complex acc[4] = {};
            const int ti = grid_->ix(k), tj = grid_->iy(k);
            for (const Segment& seg : segments_) {
                // Source (row, col) uses offset (ti - row, tj - col); in the
                // mirrored table that is column col - tj + half.
                const int j0 = grid_->iy(seg.first);
                const std::size_t count = seg.last - seg.first + 1;
                const std::size_t top = static_cast<std::size_t>(ti - seg.row + half) * stride_ +
                                        static_cast<std::size_t>(j0 - tj + half);
                for (int c = 0; c < ncomp; ++c) {
                    const auto& sc = split[c];
                    double re = 0.0, im = 0.0;
                    for (int part = 0; part < 3; ++part) {
                        const double* kr = table_re_[part].data() + top;
                        const double* ki = table_im_[part].data() + top;
                        const double* vr = sc[2 * part].data() + seg.first;
                        const double* vi = sc[2 * part + 1].data() + seg.first;
#pragma omp simd reduction(+ : re, im)
                        for (std::size_t q = 0; q < count; ++q) {
                            const double a = kr[q];
                            const double b = ki[q];
                            re += a * vr[q] - b * vi[q];
                            im += a * vi[q] + b * vr[q];
                        }
                    }
                    acc[c] += Complex{re, im};
                }
            }
            const Complex z = grid_->node(k);
            const auto& near = near_[k];
            std::size_t next = 0;
            for (std::size_t b = 0; b < cells_.size(); ++b) {
                const auto* coef = &model[b * ncomp];
                if (next < near.size() && near[next].cell == b) {
                    const auto& w = near[next++].w;
                    for (int c = 0; c < ncomp; ++c)
                        acc[c] += w[0] * coef[c][0] + w[1] * coef[c][1] + w[2] * coef[c][2];
                } else {
                    const Complex t = reciprocal(z - cells_[b].center);
                    const int terms = series_terms(t);
                    for (int c = 0; c < ncomp; ++c)
                        acc[c] += horner(&eff[(b * ncomp + c) * max_moments], terms, t);
                }
            }
            for (int c = 0; c < ncomp; ++c) {
                out(2 * c, k) = acc[c].real();
                out(2 * c + 1, k) = acc[c].imag();
            }
        });
    }

    /// Weight of the clipped cut cell `b` at target z for a constant phi.
    Complex cut_cell_weight(std::size_t b, std::size_t target) const {
        for (const auto& nw : near_[target])
            if (nw.cell == b) return nw.w[0];
        std::vector<Complex> eff(max_moments);
        effective_moments(cells_[b], {Complex{1.0, 0.0}, Complex{}, Complex{}}, eff.data());
        const Complex t = reciprocal(grid_->node(target) - cells_[b].center);
        return horner(eff.data(), series_terms(t), t);
    }

private:
    struct CutCell {
        Complex center;
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
        std::size_t source = 0;
        std::vector<std::tuple<std::size_t, double, double>> gradient;   ///< (node, d/dx, d/dy weights)
        std::vector<Complex> moments;        ///< \int (zeta - c)^p dA over cell ∩ disk
        std::vector<Complex> conj_moments;   ///< \int conj(zeta - c) (zeta - c)^p dA
    };

    struct NearWeight {
        std::size_t cell = 0;
        std::array<Complex, 3> w{};   ///< weights of 1, (zeta - c), conj(zeta - c)
    };

    struct SquareMoments {
        std::array<Complex, 4> plain{};   ///< \int zeta^p dA, p = 0, 4, 8, 12
        std::array<Complex, 4> conj{};    ///< \int conj(zeta) zeta^p dA, p = 1, 5, 9, 13
    };

    /// Moments of the centered square of side h (tensor Gauss, exact here).
    static SquareMoments square_moments(double h) {
        const GaussRule rule = gauss_legendre(12);
        SquareMoments mu;
        for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
            for (std::size_t b = 0; b < rule.nodes.size(); ++b) {
                const Complex z{0.5 * h * rule.nodes[a], 0.5 * h * rule.nodes[b]};
                const double w = 0.25 * h * h * rule.weights[a] * rule.weights[b];
                const Complex z4 = (z * z) * (z * z);
                Complex power{1.0, 0.0};
                for (std::size_t q = 0; q < 4; ++q) {
                    mu.plain[q] += w * power;
                    mu.conj[q] += w * std::conj(z) * z * power;
                    power *= z4;
                }
            }
        }
        return mu;
    }

    /// Moments of the cell model v + a (zeta - c) + b conj(zeta - c), scaled
    /// by 1/pi: out[p] = (1/pi) \int model (zeta - c)^p dA.
    static void effective_moments(const CutCell& cell, const std::array<Complex, 3>& coef, Complex* out) {
        for (int p = 0; p < max_moments; ++p)
            out[p] = (coef[0] * cell.moments[p] + coef[1] * cell.moments[p + 1] + coef[2] * cell.conj_moments[p]) /
                     std::numbers::pi;
    }

    /// Laurent terms needed at t = 1/(z - c): the geometric tail (cell radius
    /// h/sqrt2 times |t|) must drop below 1e-17. Single moments can vanish by
    /// symmetry, so the cutoff must not look at individual terms.
    int series_terms(Complex t) const {
        const double ratio = 0.5 * h_ * std::numbers::sqrt2 * std::sqrt(t.real() * t.real() + t.imag() * t.imag());
        if (!(ratio < 1.0)) return max_moments;
        const int n = static_cast<int>(std::ceil(std::log(1e-17) / std::log(ratio)));
        return std::clamp(n, 1, max_moments);
    }

    /// sum_{p < terms} m[p] t^{p+1}, with plain real arithmetic (no
    /// inf/nan recovery is needed: t is finite).
    static Complex horner(const Complex* m, int terms, Complex t) {
        const double tr = t.real(), ti = t.imag();
        double sr = 0.0, si = 0.0;
        for (int p = terms - 1; p >= 0; --p) {
            const double nr = sr * tr - si * ti + m[p].real();
            const double ni = sr * ti + si * tr + m[p].imag();
            sr = nr;
            si = ni;
        }
        return {sr * tr - si * ti, sr * ti + si * tr};
    }

    static Complex reciprocal(Complex w) {
        const double d = w.real() * w.real() + w.imag() * w.imag();
        return {w.real() / d, -w.imag() / d};
    }

    /// Least-squares fit of an affine function to the retained nodes in the
    /// smallest lattice block around k (3x3, widened if degenerate); returns
    /// the weights that produce d/dx and d/dy. Exact for affine data.
    std::vector<std::tuple<std::size_t, double, double>> gradient_stencil(std::size_t k) const {
        const DiskGrid& g = *grid_;
        const double h = g.spacing();
        for (int reach = 1; reach <= 3; ++reach) {
            std::vector<std::size_t> nodes;
            std::vector<std::array<double, 3>> rows;
            for (int a = -reach; a <= reach; ++a) {
                for (int b = -reach; b <= reach; ++b) {
                    const auto q = g.index(g.ix(k) + a, g.iy(k) + b);
                    if (q < 0) continue;
                    nodes.push_back(static_cast<std::size_t>(q));
                    rows.push_back({1.0, a * h, b * h});
                }
            }
            Mat A(static_cast<Eigen::Index>(rows.size()), 3);
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (int c = 0; c < 3; ++c) A(static_cast<Eigen::Index>(i), c) = rows[i][c];
            const Mat normal = A.transpose() * A;
            Eigen::FullPivLU<Mat> lu(normal);
            if (lu.rank() < 3) continue;
            const Mat pinv = lu.solve(A.transpose());   // 3 x nodes
            std::vector<std::tuple<std::size_t, double, double>> out;
            for (std::size_t i = 0; i < nodes.size(); ++i)
                out.emplace_back(nodes[i], pinv(1, static_cast<Eigen::Index>(i)), pinv(2, static_cast<Eigen::Index>(i)));
            return out;
        }
        return {};
    }

    std::size_t nearest_retained(int i, int j) const {
        const DiskGrid& g = *grid_;
        double best = std::numeric_limits<double>::infinity();
        std::size_t pick = g.origin();
        for (int a = -3; a <= 3; ++a) {
            for (int b = -3; b <= 3; ++b) {
                const auto k = g.index(i + a, j + b);
                if (k < 0) continue;
                const double d = a * a + b * b;
                if (d < best) {
                    best = d;
                    pick = static_cast<std::size_t>(k);
                }
            }
        }
        return pick;
    }

    std::size_t table_index(int a, int b) const {
        const int half = stride_ / 2;
        return static_cast<std::size_t>(a + half) * stride_ + static_cast<std::size_t>(b + half);
    }

    GridPtr grid_;
    int stride_ = 0;
    double h_ = 0.0;
    std::vector<std::array<Complex, 3>> kernel_;
    std::vector<char> full_;
    std::vector<std::size_t> full_nodes_;
    struct Segment {
        int row = 0;
        std::size_t first = 0, last = 0;
    };
    std::vector<Segment> segments_;
    std::array<std::vector<double>, 3> table_re_, table_im_;
    std::vector<double> fraction_;
    std::vector<CutCell> cells_;
    std::vector<std::vector<NearWeight>> near_;
};

/// Empirical sup-norm gain of P: max over a few probe inputs of
/// sup|P phi| / sup|phi| (a discrete stand-in for the operator bound).
inline double cg_measured_gain(const CGOperator& op) {
    const GridPtr& g = op.grid();
    const double r = g->radius();
    const std::function<Complex(Complex)> probes[] = {
        [](Complex) { return Complex{1.0, 0.0}; },
        [r](Complex z) { return z / r; },
        [r](Complex z) { return std::conj(z) / r; },
        [r](Complex z) { return Complex{std::cos(3.0 * z.real() / r), std::sin(2.0 * z.imag() / r)}; },
    };
    double best = 0.0;
    Mat out;
    for (const auto& f : probes) {
        Mat phi(2, static_cast<Eigen::Index>(g->node_count()));
        double in = 0.0;
        for (std::size_t k = 0; k < g->node_count(); ++k) {
            const Complex v = f(g->node(k));
            phi(0, k) = v.real();
            phi(1, k) = v.imag();
            in = std::max(in, std::abs(v));
        }
        op.apply(phi, out);
        double sup = 0.0;
        for (Eigen::Index k = 0; k < out.cols(); ++k) sup = std::max(sup, out.col(k).norm());
        best = std::max(best, sup / in);
    }
    return best;
}

inline CGOperator cg_build(GridPtr grid) { return CGOperator(std::move(grid)); }

inline DiskMap cg_apply(const CGOperator& op, const DiskMap& phi) {
    if (!op.grid()->same_layout(*phi.grid)) throw Error(ErrorKind::GridMismatch, "phi is not on the operator grid");
    if (phi.dim() > 8) throw Error(ErrorKind::InvalidParams, "at most 4 complex components are supported");
    DiskMap out = DiskMap::zeros(phi.grid, phi.convention);
    op.apply(phi.values, out.values);
    return out;
}

/// sup over the interior of || d/dzbar (P phi) - phi ||.
inline double cg_residual(const CGOperator& op, const DiskMap& phi) {
    const DiskMap dbar = d_dzbar(cg_apply(op, phi));
    double best = 0.0;
    for (std::size_t k : phi.grid->interior_nodes())
        best = std::max(best, (dbar.values.col(k) - phi.values.col(k)).norm());
    return best;
}

} // namespace jdisk
