#pragma once

// Uniform grid on (0,1) with the weighted quadrature data for 1/sigma and
// 1/(sigma d), discrete members of H^1_{1/sigma}, and the Hardy-Poincare
// constant C_HP.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "degwave/coefficients.hpp"
#include "degwave/errors.hpp"
#include "degwave/tridiagonal.hpp"

namespace degwave {

/// n interior nodes x_i = i h (i = 1..n, h = 1/(n+1)); stored 0-based.
class Grid {
public:
    static std::shared_ptr<const Grid> build(std::size_t n, const CoefficientSet& set) {
        if (n < 3) throw Error("grid needs at least 3 interior nodes");
        require_positive(set.a, "a");
        require_positive(set.d, "d");
        auto g = std::shared_ptr<Grid>(new Grid());
        g->set_ = set;
        g->n_ = n;
        g->h_ = 1.0 / static_cast<double>(n + 1);
        const double h = g->h_;

        // Nodes and midpoints interleaved: 0, h/2, h, 3h/2, ..., 1.
        std::vector<double> pts(2 * n + 3);
        for (std::size_t j = 0; j < pts.size(); ++j) pts[j] = 0.5 * h * static_cast<double>(j);
        pts.back() = 1.0;
        const FellerWeight w(set);
        const auto eta_all = w.on_points(pts);

        g->x_.resize(n);
        g->eta_node_.resize(n);
        g->inv_sigma_.resize(n);
        g->inv_sigma_d_.resize(n);
        g->eta_mid_.resize(n + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = h * static_cast<double>(i + 1);
            g->x_[i] = x;
            const double e = eta_all[2 * (i + 1)];
            const double a = set.a.value_at(x);
            g->eta_node_[i] = e;
            g->inv_sigma_[i] = e / a;
            g->inv_sigma_d_[i] = e / (a * set.d.value_at(x));
        }
        for (std::size_t i = 0; i <= n; ++i) g->eta_mid_[i] = eta_all[2 * i + 1];
        g->eta0_ = eta_all.front();
        g->eta1_ = eta_all.back();
        const double a1 = set.a.value_at(1.0);
        g->inv_sigma1_ = g->eta1_ / a1;
        g->inv_sigma_d1_ = g->eta1_ / (a1 * set.d.value_at(1.0));
        g->eta_min_ = *std::min_element(eta_all.begin(), eta_all.end());
        g->eta_max_ = *std::max_element(eta_all.begin(), eta_all.end());
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(g->inv_sigma_[i]) || !(g->inv_sigma_[i] > 0.0) || !std::isfinite(g->inv_sigma_d_[i]) ||
                !(g->inv_sigma_d_[i] > 0.0))
                throw NotPositive("grid weights must be finite and positive");
        }
        return g;
    }

    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] double h() const { return h_; }
    [[nodiscard]] const CoefficientSet& coefficients() const { return set_; }
    [[nodiscard]] std::span<const double> nodes() const { return x_; }
    [[nodiscard]] std::span<const double> eta_nodes() const { return eta_node_; }
    [[nodiscard]] std::span<const double> eta_mid() const { return eta_mid_; }  ///< n+1 values at x_{i+1/2}
    [[nodiscard]] std::span<const double> inv_sigma() const { return inv_sigma_; }
    [[nodiscard]] std::span<const double> inv_sigma_d() const { return inv_sigma_d_; }
    [[nodiscard]] double eta_left() const { return eta0_; }
    [[nodiscard]] double eta_right() const { return eta1_; }
    [[nodiscard]] double inv_sigma_right() const { return inv_sigma1_; }
    [[nodiscard]] double inv_sigma_d_right() const { return inv_sigma_d1_; }
    [[nodiscard]] double eta_min() const { return eta_min_; }
    [[nodiscard]] double eta_max() const { return eta_max_; }

private:
    Grid() = default;
    CoefficientSet set_;
    std::size_t n_ = 0;
    double h_ = 0.0;
    std::vector<double> x_, eta_node_, eta_mid_, inv_sigma_, inv_sigma_d_;
    double eta0_ = 1.0, eta1_ = 1.0, inv_sigma1_ = 1.0, inv_sigma_d1_ = 1.0;
    double eta_min_ = 1.0, eta_max_ = 1.0;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Values at the interior nodes plus separately stored boundary values.
struct GridFunction {
    GridPtr grid;
    std::vector<double> values;
    double left = 0.0;
    double right = 0.0;

    GridFunction() = default;
    explicit GridFunction(GridPtr g) : grid(std::move(g)), values(grid->size(), 0.0) {}
    GridFunction(GridPtr g, std::vector<double> v, double l = 0.0, double r = 0.0)
        : grid(std::move(g)), values(std::move(v)), left(l), right(r) {
        if (values.size() != grid->size()) throw GridMismatch("values do not match grid size");
    }

    /// Samples f at the interior nodes; boundary values stay 0.
    static GridFunction sample(const GridPtr& g, const std::function<double(double)>& f) {
        GridFunction u(g);
        const auto xs = g->nodes();
        for (std::size_t i = 0; i < xs.size(); ++i) u.values[i] = f(xs[i]);
        return u;
    }

    /// Samples f at the interior nodes and at both endpoints.
    static GridFunction sample_with_boundary(const GridPtr& g, const std::function<double(double)>& f) {
        GridFunction u = sample(g, f);
        u.left = f(0.0);
        u.right = f(1.0);
        return u;
    }

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] bool is_zero() const {
        return left == 0.0 && right == 0.0 &&
               std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
    }

    GridFunction& operator+=(const GridFunction& o) {
        check_same(o);
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
        left += o.left;
        right += o.right;
        return *this;
    }
    GridFunction& operator-=(const GridFunction& o) {
        check_same(o);
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
        left -= o.left;
        right -= o.right;
        return *this;
    }
    GridFunction& operator*=(double s) {
        for (double& v : values) v *= s;
        left *= s;
        right *= s;
        return *this;
    }
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

    void check_same(const GridFunction& o) const {
        if (grid != o.grid && (!grid || !o.grid || grid->size() != o.grid->size() || grid->h() != o.grid->h()))
            throw GridMismatch("grid functions live on different grids");
        if (values.size() != o.values.size()) throw GridMismatch("grid functions differ in length");
    }
};

namespace detail {

/// Boundary half-cell term: product of boundary values times the weight,
/// skipped when either value vanishes so an infinite weight at a
/// degenerate endpoint never multiplies zero data.
inline double boundary_term(double u, double v, double weight) {
    const double p = u * v;
    return p == 0.0 ? 0.0 : p * weight;
}

inline double left_weight(const Grid& g, bool with_d) {
    const auto& s = g.coefficients();
    const double a0 = s.a.value_at(0.0);
    const double denom = with_d ? a0 * s.d.value_at(0.0) : a0;
    return denom == 0.0 ? std::numeric_limits<double>::infinity() : g.eta_left() / denom;
}

}  // namespace detail

/// Composite trapezoid for int_0^1 u v / sigma dx with the boundary half cells.
[[nodiscard]] inline double inner_l2_sigma(const GridFunction& u, const GridFunction& v) {
    u.check_same(v);
    const Grid& g = *u.grid;
    const auto w = g.inv_sigma();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += u.values[i] * v.values[i] * w[i];
    s += 0.5 * detail::boundary_term(u.right, v.right, g.inv_sigma_right());
    s += 0.5 * detail::boundary_term(u.left, v.left, detail::left_weight(g, false));
    return g.h() * s;
}

/// int_0^1 u v / (sigma d) dx by the same rule.
[[nodiscard]] inline double inner_singular(const GridFunction& u, const GridFunction& v) {
    u.check_same(v);
    const Grid& g = *u.grid;
    const auto w = g.inv_sigma_d();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += u.values[i] * v.values[i] * w[i];
    s += 0.5 * detail::boundary_term(u.right, v.right, g.inv_sigma_d_right());
    s += 0.5 * detail::boundary_term(u.left, v.left, detail::left_weight(g, true));
    return g.h() * s;
}

/// sum_i eta_{i+1/2} (u_{i+1} - u_i)(v_{i+1} - v_i) / h, boundary values included.
[[nodiscard]] inline double stiffness_form(const GridFunction& u, const GridFunction& v) {
    u.check_same(v);
    const Grid& g = *u.grid;
    const auto em = g.eta_mid();
    const std::size_t n = g.size();
    auto at = [n](const GridFunction& f, std::size_t j) {
        return j == 0 ? f.left : (j == n + 1 ? f.right : f.values[j - 1]);
    };
    double s = 0.0;
    for (std::size_t j = 0; j <= n; ++j) s += em[j] * (at(u, j + 1) - at(u, j)) * (at(v, j + 1) - at(v, j));
    return s / g.h();
}

[[nodiscard]] inline double norm_l2_sigma(const GridFunction& u) { return std::sqrt(inner_l2_sigma(u, u)); }

/// The lambda-free norm of H^1_{1/sigma}.
[[nodiscard]] inline double norm_h1_sigma(const GridFunction& u) {
    return std::sqrt(inner_l2_sigma(u, u) + stiffness_form(u, u));
}

/// sqrt(|u|^2_{1/sigma} + int eta u'^2 - lambda int u^2/(sigma d)).
[[nodiscard]] inline double norm_h1_lambda(const GridFunction& u, double lambda) {
    const double q = inner_l2_sigma(u, u) + stiffness_form(u, u) - lambda * inner_singular(u, u);
    if (q < 0.0) throw NegativeSquare("lambda-weighted norm squared is negative; lambda >= 1/C_HP");
    return std::sqrt(q);
}

[[nodiscard]] inline double norm_h1_lambda(const GridFunction& u) {
    return norm_h1_lambda(u, u.grid->coefficients().lambda);
}

/// Stiffness matrix K (eta at midpoints, Dirichlet closure).
[[nodiscard]] inline SymTridiag stiffness_matrix(const Grid& g) {
    const std::size_t n = g.size();
    const auto em = g.eta_mid();
    const double h = g.h();
    SymTridiag k;
    k.diag.resize(n);
    k.off.resize(n - 1);
    for (std::size_t i = 0; i < n; ++i) k.diag[i] = (em[i] + em[i + 1]) / h;
    for (std::size_t i = 0; i + 1 < n; ++i) k.off[i] = -em[i + 1] / h;
    return k;
}

/// Best constant of sum u^2 h/(sigma d) <= C sum eta u'^2 h over Dirichlet
/// grid functions: the reciprocal of the smallest eigenvalue of the pencil
/// (K, diag(h / (sigma d))).
[[nodiscard]] inline double estimate_chp(const Grid& g) {
    const SymTridiag k = stiffness_matrix(g);
    const auto w = g.inv_sigma_d();
    const double h = g.h();
    SymTridiag s;
    s.diag.resize(g.size());
    s.off.resize(g.size() - 1);
    std::vector<double> r(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) r[i] = 1.0 / std::sqrt(h * w[i]);
    for (std::size_t i = 0; i < g.size(); ++i) s.diag[i] = k.diag[i] * r[i] * r[i];
    for (std::size_t i = 0; i + 1 < g.size(); ++i) s.off[i] = k.off[i] * r[i] * r[i + 1];
    const double mu = smallest_eigenvalue(s);
    if (!(mu > 0.0) || !std::isfinite(mu)) throw EigensolveFailure("smallest Hardy-Poincare eigenvalue is not positive");
    return 1.0 / mu;
}

[[nodiscard]] inline double estimate_chp(std::size_t n, const CoefficientSet& set) {
    return estimate_chp(*Grid::build(n, set));
}

struct ChpExtrapolation {
    double value = 0.0;           ///< extrapolated constant
    std::array<double, 3> raw{};  ///< estimates on n/4, n/2, n
    bool extrapolated = false;    ///< false when the log model did not fit
};

/// Extrapolates grid estimates of C_HP to the continuum. The smallest
/// eigenvalue mu(n) = 1/C(n) is modelled as mu_inf + c / (ln n + s)^2, the
/// form that arises when the Hardy constant is approached through a
/// logarithmically slow family of minimizers; for regular pencils the
/// three estimates agree and the model is bypassed.
[[nodiscard]] inline ChpExtrapolation extrapolate_chp(const CoefficientSet& set, std::size_t n) {
    ChpExtrapolation out;
    const std::array<std::size_t, 3> ns{n / 4, n / 2, n};
    for (std::size_t j = 0; j < 3; ++j) out.raw[j] = estimate_chp(ns[j], set);
    out.value = out.raw[2];
    const double m1 = 1.0 / out.raw[0], m2 = 1.0 / out.raw[1], m3 = 1.0 / out.raw[2];
    const double d12 = m1 - m2, d23 = m2 - m3;
    if (!(d12 > 0.0 && d23 > 0.0) || std::abs(d23) < 1e-9 * m3) return out;
    const double target = d12 / d23;
    const double l1 = std::log(static_cast<double>(ns[0] + 1));
    const double l2 = std::log(static_cast<double>(ns[1] + 1));
    const double l3 = std::log(static_cast<double>(ns[2] + 1));
    auto ratio = [&](double s) {
        const double p1 = 1.0 / ((l1 + s) * (l1 + s)), p2 = 1.0 / ((l2 + s) * (l2 + s)),
                     p3 = 1.0 / ((l3 + s) * (l3 + s));
        return (p1 - p2) / (p2 - p3);
    };
    // The model ratio decreases from +inf (s -> -l1) toward the power-law
    // limit as s grows; bracket and bisect.
    double lo = -l1 + 1e-9, hi = 1e6;
    const double flo = ratio(lo) - target, fhi = ratio(hi) - target;
    if (!(flo > 0.0 && fhi < 0.0)) return out;
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ratio(mid) - target > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double s = 0.5 * (lo + hi);
    const double p2 = 1.0 / ((l2 + s) * (l2 + s)), p3 = 1.0 / ((l3 + s) * (l3 + s));
    const double c = d23 / (p2 - p3);
    const double mu_inf = m3 - c * p3;
    if (!(mu_inf > 0.0)) return out;
    out.value = 1.0 / mu_inf;
    out.extrapolated = true;
    return out;
}

/// 4 max eta / (a(1) d(1) min eta) with eta sampled on the grid (nodes,
/// midpoints and both endpoints).
[[nodiscard]] inline double chp_closed_form_bound(const Grid& g) {
    const auto& s = g.coefficients();
    if (s.a.value_at(0.0) == 0.0 && class_of(degeneracy_exponent(s.a)) == DegeneracyClass::None)
        throw ClassRequired("a must be (WD) or (SD)");
    if (s.d.value_at(0.0) == 0.0 && class_of(degeneracy_exponent(s.d)) == DegeneracyClass::None)
        throw ClassRequired("d must be (WD) or (SD)");
    return 4.0 * g.eta_max() / (s.a.value_at(1.0) * s.d.value_at(1.0) * g.eta_min());
}

[[nodiscard]] inline double chp_closed_form_bound(const CoefficientSet& set, std::size_t n = 1023) {
    return chp_closed_form_bound(*Grid::build(n, set));
}

}  // namespace degwave
