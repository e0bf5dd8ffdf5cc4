#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "degwave/errors.hpp"
#include "degwave/tridiagonal.hpp"
#include "degwave/weighted_spaces.hpp"

namespace degwave {

/// Discrete A_lambda u = sigma (eta u')' + lambda u / d in divergence form.
///
/// In matrix terms, with M = diag(h / sigma_i), M_sd = diag(h / (sigma_i d_i))
/// and the eta stiffness K, the operator is A_lambda = -M^{-1} (K - lambda M_sd)
/// on Dirichlet vectors. L = K - lambda M_sd is the energy matrix.
class DiscreteOperator {
public:
    static DiscreteOperator assemble(GridPtr grid) { return assemble(grid, grid->coefficients().lambda); }

    static DiscreteOperator assemble(GridPtr grid, double lambda) {
        DiscreteOperator op;
        const Grid& g = *grid;
        const double h = g.h();
        op.lambda_ = lambda;
        op.stiffness_ = stiffness_matrix(g);
        op.mass_.resize(g.size());
        op.singular_mass_.resize(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            op.mass_[i] = h * g.inv_sigma()[i];
            op.singular_mass_[i] = h * g.inv_sigma_d()[i];
        }
        op.energy_ = op.stiffness_.combine(-lambda, op.singular_mass_, 1.0);
        op.coupling_ = g.eta_mid().back() / h;
        op.grid_ = std::move(grid);
        return op;
    }

    [[nodiscard]] const Grid& grid() const { return *grid_; }
    [[nodiscard]] const GridPtr& grid_ptr() const { return grid_; }
    [[nodiscard]] std::size_t size() const { return mass_.size(); }
    [[nodiscard]] double lambda() const { return lambda_; }
    [[nodiscard]] const SymTridiag& stiffness() const { return stiffness_; }
    [[nodiscard]] const SymTridiag& energy_matrix() const { return energy_; }
    [[nodiscard]] std::span<const double> mass() const { return mass_; }
    [[nodiscard]] std::span<const double> singular_mass() const { return singular_mass_; }
    /// eta_{n+1/2} / h: the weight with which the value at x = 1 enters the last row of K.
    [[nodiscard]] double boundary_coupling() const { return coupling_; }

    /// A_0 u at the interior nodes, closing the stencil with u.left and u.right.
    [[nodiscard]] GridFunction apply_principal(const GridFunction& u) const {
        check(u);
        GridFunction r(grid_);
        const std::size_t n = size();
        const auto em = grid_->eta_mid();
        const double h = grid_->h();
        for (std::size_t i = 0; i < n; ++i) {
            const double ul = i == 0 ? u.left : u.values[i - 1];
            const double ur = i + 1 == n ? u.right : u.values[i + 1];
            const double flux = em[i + 1] * (ur - u.values[i]) - em[i] * (u.values[i] - ul);
            r.values[i] = flux / (h * mass_[i]);
        }
        return r;
    }

    /// A_lambda u = A_0 u + lambda u / d.
    [[nodiscard]] GridFunction apply(const GridFunction& u) const {
        GridFunction r = apply_principal(u);
        if (lambda_ != 0.0)
            for (std::size_t i = 0; i < size(); ++i) r.values[i] += lambda_ * u.values[i] * singular_mass_[i] / mass_[i];
        return r;
    }

    /// Cached factorization of alpha M + beta L.
    [[nodiscard]] std::shared_ptr<const LdltFactor> factor(double alpha, double beta) const {
        const std::lock_guard lock(cache_->mutex);
        auto& slot = cache_->factors[{alpha, beta}];
        if (!slot) slot = std::make_shared<const LdltFactor>(energy_.combine(alpha, mass_, beta));
        return slot;
    }

    void check(const GridFunction& u) const {
        if (!u.grid || u.size() != size() || u.grid->h() != grid_->h())
            throw GridMismatch("grid function does not live on the operator's grid");
    }

private:
    struct FactorCache {
        std::mutex mutex;
        std::map<std::pair<double, double>, std::shared_ptr<const LdltFactor>> factors;
    };

    GridPtr grid_;
    double lambda_ = 0.0;
    SymTridiag stiffness_;
    SymTridiag energy_;
    std::vector<double> mass_;
    std::vector<double> singular_mass_;
    double coupling_ = 0.0;
    std::shared_ptr<FactorCache> cache_ = std::make_shared<FactorCache>();
};

/// | <A_0 u, v>_{1/sigma,h} + sum eta_{i+1/2} (u_{i+1}-u_i)(v_{i+1}-v_i)/h |
[[nodiscard]] inline double green_identity_defect(const DiscreteOperator& op, const GridFunction& u,
                                                  const GridFunction& v) {
    op.check(u);
    op.check(v);
    return std::abs(inner_l2_sigma(op.apply_principal(u), v) + stiffness_form(u, v));
}

struct ResolventSolution {
    GridFunction u;
    GridFunction v;
    double residual = 0.0;  ///< relative residual of the linear solve
};

/// Solves (mu^2 - A_lambda) u = mu f + g in weak form,
/// (mu^2 M + L) u = M (mu f + g), and returns v = mu u - f.
[[nodiscard]] inline ResolventSolution solve_resolvent(const DiscreteOperator& op, const GridFunction& f,
                                                       const GridFunction& g, double mu) {
    op.check(f);
    op.check(g);
    if (!(mu > 0.0)) throw Error("resolvent parameter mu must be positive");
    const std::size_t n = op.size();
    const auto m = op.mass();
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = m[i] * (mu * f.values[i] + g.values[i]);
    const auto fac = op.factor(mu * mu, 1.0);
    std::vector<double> x = fac->solve(rhs);

    std::vector<double> ax(n);
    op.energy_matrix().apply(x, ax);
    double rn = 0.0, bn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = mu * mu * m[i] * x[i] + ax[i] - rhs[i];
        rn += r * r;
        bn += rhs[i] * rhs[i];
    }
    const double rel = bn > 0.0 ? std::sqrt(rn / bn) : std::sqrt(rn);
    if (!(rel <= 1e-10)) throw SolverFailure("resolvent residual above 1e-10");

    ResolventSolution out{GridFunction(op.grid_ptr(), std::move(x)), GridFunction(op.grid_ptr()), rel};
    for (std::size_t i = 0; i < n; ++i) out.v.values[i] = mu * out.u.values[i] - f.values[i];
    return out;
}

}  // namespace degwave
