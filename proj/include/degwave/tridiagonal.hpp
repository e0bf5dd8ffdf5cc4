#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "degwave/errors.hpp"

namespace degwave {

/// Symmetric tridiagonal matrix: `diag` has n entries, `off` has n - 1.
struct SymTridiag {
    std::vector<double> diag;
    std::vector<double> off;

    [[nodiscard]] std::size_t size() const { return diag.size(); }

    void apply(std::span<const double> x, std::span<double> y) const {
        const std::size_t n = diag.size();
        for (std::size_t i = 0; i < n; ++i) {
            double s = diag[i] * x[i];
            if (i > 0) s += off[i - 1] * x[i - 1];
            if (i + 1 < n) s += off[i] * x[i + 1];
            y[i] = s;
        }
    }

    [[nodiscard]] std::vector<double> operator*(std::span<const double> x) const {
        std::vector<double> y(x.size());
        apply(x, y);
        return y;
    }

    /// alpha * diag(D) + beta * this
    [[nodiscard]] SymTridiag combine(double alpha, std::span<const double> D, double beta) const {
        SymTridiag r;
        r.diag.resize(diag.size());
        r.off.resize(off.size());
        for (std::size_t i = 0; i < diag.size(); ++i) r.diag[i] = alpha * D[i] + beta * diag[i];
        for (std::size_t i = 0; i < off.size(); ++i) r.off[i] = beta * off[i];
        return r;
    }
};

/// L D L^T factorization of a symmetric positive definite tridiagonal matrix.
class LdltFactor {
public:
    explicit LdltFactor(const SymTridiag& m) : l_(m.off.size()), d_(m.diag.size()) {
        const std::size_t n = m.diag.size();
        double scale = 0.0;
        for (double v : m.diag) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < n; ++i) {
            double piv = m.diag[i];
            if (i > 0) piv -= l_[i - 1] * l_[i - 1] * d_[i - 1];
            if (!(piv > 1e-14 * scale)) throw SolverFailure("tridiagonal system is not positive definite");
            d_[i] = piv;
            if (i + 1 < n) l_[i] = m.off[i] / piv;
        }
    }

    void solve_in_place(std::span<double> x) const {
        const std::size_t n = d_.size();
        for (std::size_t i = 1; i < n; ++i) x[i] -= l_[i - 1] * x[i - 1];
        for (std::size_t i = 0; i < n; ++i) x[i] /= d_[i];
        for (std::size_t i = n - 1; i-- > 0;) x[i] -= l_[i] * x[i + 1];
    }

    [[nodiscard]] std::vector<double> solve(std::span<const double> b) const {
        std::vector<double> x(b.begin(), b.end());
        solve_in_place(x);
        return x;
    }

private:
    std::vector<double> l_;
    std::vector<double> d_;
};

/// Number of eigenvalues strictly below `x` (Sturm count).
[[nodiscard]] inline std::size_t sturm_count(const SymTridiag& m, double x) {
    std::size_t count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < m.diag.size(); ++i) {
        const double b2 = i > 0 ? m.off[i - 1] * m.off[i - 1] : 0.0;
        q = (m.diag[i] - x) - (i > 0 ? b2 / q : 0.0);
        if (q == 0.0) q = -1e-300;
        if (q < 0.0) ++count;
    }
    return count;
}

/// Smallest eigenvalue by bisection on the Sturm count.
[[nodiscard]] inline double smallest_eigenvalue(const SymTridiag& m, double rel_tol = 1e-13) {
    if (m.diag.empty()) throw EigensolveFailure("empty matrix");
    double lo = m.diag[0], hi = m.diag[0];
    for (std::size_t i = 0; i < m.diag.size(); ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(m.off[i - 1]);
        if (i < m.off.size()) r += std::abs(m.off[i]);
        lo = std::min(lo, m.diag[i] - r);
        hi = std::max(hi, m.diag[i] + r);
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw EigensolveFailure("non-finite matrix entries");
    for (int it = 0; it < 2000 && hi - lo > rel_tol * std::max(std::abs(lo), std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (sturm_count(m, mid) >= 1)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace degwave
