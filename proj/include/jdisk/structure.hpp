#pragma once

// Almost complex structures on chart balls and flat tori, and the complex
// dilatation q_J = (Jst + J)^{-1} (Jst - J).

#include "jdisk/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace jdisk {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Real representation of C^n with interleaved coordinates (x_1, y_1, ..., x_n, y_n).
struct ComplexConvention {
    int n = 1;

    int dim() const noexcept { return 2 * n; }

    /// Block diagonal [[0, -1], [1, 0]]; multiplication by i on each complex slot.
    Mat jst() const {
        Mat m = Mat::Zero(dim(), dim());
        for (int k = 0; k < n; ++k) {
            m(2 * k, 2 * k + 1) = -1.0;
            m(2 * k + 1, 2 * k) = 1.0;
        }
        return m;
    }

    bool operator==(const ComplexConvention&) const = default;
};

/// Multiplies every complex slot of `v` by i. Exact (only swaps and negations).
inline Vec times_i(const Vec& v) {
    Vec out(v.size());
    for (Eigen::Index k = 0; k + 1 < v.size(); k += 2) {
        out[k] = -v[k + 1];
        out[k + 1] = v[k];
    }
    return out;
}

/// Complex scalar times complex vector, in the real representation.
inline Vec complex_scale(std::complex<double> c, const Vec& v) {
    Vec out(v.size());
    for (Eigen::Index k = 0; k + 1 < v.size(); k += 2) {
        out[k] = c.real() * v[k] - c.imag() * v[k + 1];
        out[k + 1] = c.imag() * v[k] + c.real() * v[k + 1];
    }
    return out;
}

/// Where a structure lives: a Euclidean chart ball or the flat torus R^{2n}/Z^{2n}
/// (points are kept in the universal cover).
struct DomainDescriptor {
    enum class Kind { ChartBall, FlatTorus };

    Kind kind = Kind::ChartBall;
    Vec center;
    double radius = 1.0;

    static DomainDescriptor chart_ball(Vec center, double radius) {
        if (!(radius > 0.0)) throw Error(ErrorKind::InvalidParams, "chart ball radius must be positive");
        return {Kind::ChartBall, std::move(center), radius};
    }

    static DomainDescriptor flat_torus(int n) { return {Kind::FlatTorus, Vec::Zero(2 * n), 1.0}; }

    bool is_torus() const noexcept { return kind == Kind::FlatTorus; }

    bool contains(const Vec& p, double slack = 1e-12) const {
        if (is_torus()) return p.allFinite();
        return (p - center).norm() <= radius * (1.0 + slack);
    }

    /// Displacement from a to b; on the torus, the shortest lattice representative.
    Vec displacement(const Vec& a, const Vec& b) const {
        Vec d = b - a;
        if (is_torus()) {
            for (Eigen::Index k = 0; k < d.size(); ++k) d[k] -= std::round(d[k]);
        }
        return d;
    }

    double distance(const Vec& a, const Vec& b) const { return displacement(a, b).norm(); }
};

/// A point-dependent almost complex structure J(p), J(p)^2 = -Id.
struct StructureField {
    ComplexConvention convention;
    std::function<Mat(const Vec&)> eval;
    DomainDescriptor domain;
    std::string name;
    std::string smoothness_note = "C2";

    Mat operator()(const Vec& p) const { return eval(p); }
};

struct ValidationReport {
    std::size_t samples = 0;
    double max_residual = 0.0;      ///< max over samples of ||J(p)^2 + Id||_inf
    double tol = 0.0;
    bool pass = false;
    /// Largest 2-norm condition number of (Jst + J(p)); predicts where q_J is solvable.
    double max_condition = 0.0;
    std::vector<std::size_t> invalid_samples;
};

/// Checks J^2 = -Id on the given samples. Evaluation failures are recorded as
/// invalid samples rather than propagated.
inline ValidationReport validate_structure(const StructureField& J, std::span<const Vec> samples,
                                           double tol = 1e-10) {
    ValidationReport rep;
    rep.samples = samples.size();
    rep.tol = tol;
    const int d = J.convention.dim();
    const Mat id = Mat::Identity(d, d);
    const Mat jst = J.convention.jst();
    for (std::size_t s = 0; s < samples.size(); ++s) {
        try {
            const Mat m = J(samples[s]);
            if (m.rows() != d || m.cols() != d || !m.allFinite()) {
                rep.invalid_samples.push_back(s);
                continue;
            }
            rep.max_residual = std::max(rep.max_residual, (m * m + id).cwiseAbs().maxCoeff());
            Eigen::JacobiSVD<Mat> svd(jst + m);
            const auto& sv = svd.singularValues();
            const double cond = sv[d - 1] > 0.0 ? sv[0] / sv[d - 1] : std::numeric_limits<double>::infinity();
            rep.max_condition = std::max(rep.max_condition, cond);
        } catch (const std::exception&) {
            rep.invalid_samples.push_back(s);
        }
    }
    rep.pass = rep.invalid_samples.empty() && rep.max_residual <= tol;
    return rep;
}

inline constexpr double kDefaultConditionCap = 1e8;

/// q_J(v) = (Jst + J(v))^{-1} (Jst - J(v)). Throws Singular when Jst + J(v)
/// is not safely invertible (reciprocal condition below 1/cond_cap).
inline Mat q_matrix(const StructureField& J, const Vec& v, double cond_cap = kDefaultConditionCap) {
    const Mat jv = J(v);
    const Mat jst = J.convention.jst();
    const Mat diff = jst - jv;
    if (diff.isZero(0.0)) return Mat::Zero(jv.rows(), jv.cols());
    Eigen::PartialPivLU<Mat> lu(jst + jv);
    const double rc = lu.rcond();
    if (!(rc > 1.0 / cond_cap)) throw Error(ErrorKind::Singular, "Jst + J(v) is not invertible at this point");
    return lu.solve(diff);
}

// ---------------------------------------------------------------------------
// Gallery

struct GalleryParams {
    int n = 1;
    double epsilon = 0.0;
    std::string perturbation = "sin";  ///< "sin" (1-periodic) or "linear" (chart only)
    double radius = 1.0;               ///< chart ball radius
};

namespace detail {

/// Bounded smooth perturbation field B(p); vanishes at the origin.
inline Mat perturbation_field(const std::string& shape, const Vec& p) {
    const auto d = p.size();
    Mat b(d, d);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index k = 0; k < d; ++k) {
            const double a = p[(j + k) % d];
            const double c = p[(j + 2 * k + 1) % d];
            if (shape == "sin")
                b(j, k) = std::sin(two_pi * a) + 0.5 * std::sin(two_pi * c);
            else
                b(j, k) = a + 0.5 * c;
        }
    }
    return b;
}

/// Points used to certify a gallery structure: a lattice over the unit cell
/// (torus) or over the chart ball.
inline std::vector<Vec> validation_lattice(const DomainDescriptor& dom, int dim) {
    const int per_axis = dim <= 2 ? 17 : (dim <= 4 ? 7 : 3);
    std::vector<Vec> pts;
    std::vector<int> idx(dim, 0);
    while (true) {
        Vec p(dim);
        for (int k = 0; k < dim; ++k) {
            const double s = static_cast<double>(idx[k]) / (per_axis - 1);
            p[k] = dom.is_torus() ? s : dom.center[k] + dom.radius * (2.0 * s - 1.0);
        }
        if (dom.contains(p)) pts.push_back(std::move(p));
        int k = 0;
        while (k < dim && ++idx[k] == per_axis) idx[k++] = 0;
        if (k == dim) break;
    }
    return pts;
}

} // namespace detail

/// Builds a named structure: standard, conjugated, torus-flat, torus-perturbed.
/// Conjugated variants are J(p) = S(p) Jst S(p)^{-1} with S = Id + epsilon B(p).
inline StructureField gallery(const std::string& name, const GalleryParams& params) {
    if (params.n < 1 || params.n > 4) throw Error(ErrorKind::InvalidParams, "n must be in [1, 4]");
    if (!(params.epsilon >= 0.0) || !std::isfinite(params.epsilon))
        throw Error(ErrorKind::InvalidParams, "epsilon must be finite and non-negative");
    if (params.perturbation != "sin" && params.perturbation != "linear")
        throw Error(ErrorKind::InvalidParams, "unknown perturbation shape '" + params.perturbation + "'");

    const ComplexConvention conv{params.n};
    const int d = conv.dim();
    StructureField field;
    field.convention = conv;
    field.name = name;

    if (name == "standard" || name == "torus-flat") {
        field.domain = name == "standard" ? DomainDescriptor::chart_ball(Vec::Zero(d), params.radius)
                                          : DomainDescriptor::flat_torus(params.n);
        const Mat jst = conv.jst();
        field.eval = [jst](const Vec&) { return jst; };
        return field;
    }
    if (name != "conjugated" && name != "torus-perturbed")
        throw Error(ErrorKind::UnknownName, "no gallery structure named '" + name + "'");

    const bool torus = name == "torus-perturbed";
    if (torus && params.perturbation != "sin")
        throw Error(ErrorKind::InvalidParams, "torus structures need a periodic perturbation");
    field.domain = torus ? DomainDescriptor::flat_torus(params.n)
                         : DomainDescriptor::chart_ball(Vec::Zero(d), params.radius);
    const Mat jst = conv.jst();
    const double eps = params.epsilon;
    const std::string shape = params.perturbation;
    field.eval = [jst, eps, shape, d](const Vec& p) -> Mat {
        const Mat s = Mat::Identity(d, d) + eps * detail::perturbation_field(shape, p);
        return s * jst * s.inverse();
    };

    const auto lattice = detail::validation_lattice(field.domain, d);
    for (const Vec& p : lattice) {
        const Mat s = Mat::Identity(d, d) + eps * detail::perturbation_field(shape, p);
        if (!(s.partialPivLu().rcond() > 1e-8))
            throw Error(ErrorKind::InvalidParams, "Id + epsilon B(p) is singular on the validation lattice");
    }
    const auto rep = validate_structure(field, lattice);
    if (!rep.pass) throw Error(ErrorKind::InvalidParams, "structure fails J^2 = -Id on the validation lattice");
    return field;
}

} // namespace jdisk
