#pragma once

// Boundary null control by the Hilbert Uniqueness Method on the discrete
// system. Final data V = (v0, v1) of the backward problem live in
// H0 = H^1 x L^2 with inner product <V, W> = v0^T L w0 + v1^T M w1.
//
// For the implicit-midpoint scheme the bilinear form
//     omega(z, w) = z_y^T M w_p - z_p^T M w_y
// satisfies, along a controlled run u and a homogeneous run w,
//     omega(u_m, w_m) - omega(u_0, w_0) = sum_k dt eta_{n+1/2} fbar_k taubar_k(w)
// with tau = (w(1) - w_n) / h and bars denoting averages of consecutive
// time levels. Taking
//     Lambda(V, W) = eta_{n+1/2} sum_k dt taubar_k(V) taubar_k(W),
//     L(W)        = u0^T M w_p(0) - u1^T M w_y(0),
// the minimizer of 1/2 Lambda(V, V) - L(V) gives the control f = -tau(V)
// that steers (u0, u1) exactly to rest at t = T in the discrete system.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "degwave/errors.hpp"
#include "degwave/evolution.hpp"
#include "degwave/observability.hpp"
#include "degwave/operator.hpp"
#include "degwave/weighted_spaces.hpp"

namespace degwave {

struct FinalData {
    GridFunction v0;
    GridFunction v1;

    static FinalData zeros(const GridPtr& g) { return {GridFunction(g), GridFunction(g)}; }
};

struct HumOptions {
    double tol = 1e-8;
    std::size_t max_iter = 500;
    std::optional<double> T0;  ///< threshold time; absent means coercivity is unproven
    SimulationOptions sim{};
};

struct ControlResult {
    double dt = 0.0;
    std::vector<double> times;
    std::vector<double> f;
    std::vector<double> cg_residuals;  ///< H0 norm of the residual, relative to the initial one
    std::vector<double> objective;     ///< J(V_k) = 1/2 Lambda(V_k, V_k) - L(V_k)
    std::size_t iterations = 0;
    std::size_t best_iteration = 0;
    bool converged = false;
    bool coercivity_warning = false;
    FinalData optimal;
    double final_y_norm = 0.0;
    double final_yt_norm = 0.0;
    double initial_norm = 0.0;  ///< sqrt(|u0|^2 + |u1|_*^2)
    double transposition_residual = 0.0;

    [[nodiscard]] double relative_final_norm() const {
        const double fin = std::hypot(final_y_norm, final_yt_norm);
        return initial_norm > 0.0 ? fin / initial_norm : fin;
    }
};

struct NullControlCheck {
    double final_y_norm = 0.0;   ///< |u(T)|_{L^2_{1/sigma}} on the interior nodes
    double final_yt_norm = 0.0;  ///< |u_t(T)| in the discrete dual norm (M + L)^{-1}
    double initial_y_norm = 0.0;
    double initial_yt_norm = 0.0;
    double transposition_residual = 0.0;  ///< max over probes, relative to the size of the terms
};

class HumProblem {
public:
    HumProblem(const DiscreteOperator& op, double T, SimulationOptions sim = {})
        : op_(&op), T_(T), sim_(sim), grid_(make_time_grid(op.grid().h(), T, sim)) {
        if (!(T > 0.0)) throw Error("control horizon must be positive");
    }

    [[nodiscard]] double horizon() const { return T_; }
    [[nodiscard]] const TimeGrid& time_grid() const { return grid_; }
    [[nodiscard]] const DiscreteOperator& op() const { return *op_; }

    /// v on [0, T] with v(T) = v0, v_t(T) = v1, via y(t) = v(T - t).
    [[nodiscard]] Trajectory solve_backward(const FinalData& V) const {
        GridFunction minus_v1 = -1.0 * V.v1;
        Trajectory y = simulate_homogeneous(*op_, V.v0, minus_v1, T_, sim_);
        Trajectory v;
        v.dt = y.dt;
        const std::size_t m = y.times.size();
        v.times.resize(m);
        for (std::size_t k = 0; k < m; ++k) v.times[k] = y.times[k];
        v.energy.assign(y.energy.rbegin(), y.energy.rend());
        v.trace.assign(y.trace.rbegin(), y.trace.rend());
        v.flux_trace.assign(y.flux_trace.rbegin(), y.flux_trace.rend());
        v.final_state = {y.final_state.y, -1.0 * y.final_state.yt, 0.0};
        v.max_relative_drift = y.max_relative_drift;
        v.energy_drift_exceeded = y.energy_drift_exceeded;
        return v;
    }

    /// Midpoint averages of the flux trace tau(V) over the m time slabs.
    [[nodiscard]] std::vector<double> averaged_trace(const FinalData& V) const {
        const auto v = solve_backward(V);
        std::vector<double> out(v.flux_trace.size() - 1);
        for (std::size_t k = 0; k + 1 < v.flux_trace.size(); ++k)
            out[k] = 0.5 * (v.flux_trace[k] + v.flux_trace[k + 1]);
        return out;
    }

    [[nodiscard]] double lambda_form(const FinalData& V, const FinalData& W) const {
        return pair_traces(averaged_trace(V), averaged_trace(W));
    }

    /// L(W) = u0^T M w_t(0) - u1^T M w(0), u1 paired through the weighted L^2 product.
    [[nodiscard]] double rhs_functional(const FinalData& W, const GridFunction& u0, const GridFunction& u1) const {
        const auto w = solve_backward(W);
        const auto m = op_->mass();
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i)
            s += m[i] * (u0.values[i] * w.final_state.yt.values[i] - u1.values[i] * w.final_state.y.values[i]);
        return s;
    }

    [[nodiscard]] double h0_inner(const FinalData& V, const FinalData& W) const {
        const auto m = op_->mass();
        const auto Lw = op_->energy_matrix() * W.v0.values;
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) s += V.v0.values[i] * Lw[i] + m[i] * V.v1.values[i] * W.v1.values[i];
        return s;
    }

    /// Riesz representative in H0 of the functional W -> omega(z, W).
    [[nodiscard]] FinalData riesz_of_symplectic(std::span<const double> zy, std::span<const double> zp) const {
        const auto m = op_->mass();
        std::vector<double> rhs(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) rhs[i] = -m[i] * zp[i];
        op_->factor(0.0, 1.0)->solve_in_place(rhs);
        return {GridFunction(op_->grid_ptr(), std::move(rhs)),
                GridFunction(op_->grid_ptr(), std::vector<double>(zy.begin(), zy.end()))};
    }

    /// H0 representative of Lambda(V, .): the state reached from rest under f = tau(V).
    [[nodiscard]] FinalData apply_gramian(const FinalData& V) const {
        const auto v = solve_backward(V);
        const GridFunction zero(op_->grid_ptr());
        const auto run = detail::run(*op_, zero, zero, v.flux_trace, T_, sim_, 1.0);
        return riesz_of_symplectic(run.final_state.y.values, run.final_state.yt.values);
    }

    /// H0 representative of L: the free evolution of (u0, u1) to t = T.
    [[nodiscard]] FinalData rhs_representative(const GridFunction& u0, const GridFunction& u1) const {
        const auto run = simulate_homogeneous(*op_, u0, u1, T_, sim_);
        return riesz_of_symplectic(run.final_state.y.values, run.final_state.yt.values);
    }

    [[nodiscard]] ControlResult solve(const GridFunction& u0, const GridFunction& u1, const HumOptions& opts = {}) const {
        op_->check(u0);
        op_->check(u1);
        ControlResult res;
        res.dt = grid_.dt;
        res.times.resize(grid_.steps + 1);
        for (std::size_t k = 0; k <= grid_.steps; ++k) res.times[k] = static_cast<double>(k) * grid_.dt;
        res.coercivity_warning = !opts.T0 || !(T_ > *opts.T0);
        const GridPtr& g = op_->grid_ptr();

        FinalData V = FinalData::zeros(g);
        FinalData r = rhs_representative(u0, u1);
        const FinalData b = r;
        double rr = h0_inner(r, r);
        const double r0 = std::sqrt(rr);
        res.optimal = V;
        if (r0 == 0.0) {
            res.f.assign(grid_.steps + 1, 0.0);
            res.converged = true;
            finish(res, u0, u1);
            return res;
        }
        res.cg_residuals.push_back(1.0);
        res.objective.push_back(0.0);
        FinalData p = r;
        double best = 1.0;
        for (std::size_t it = 1; it <= opts.max_iter; ++it) {
            const FinalData Ap = apply_gramian(p);
            const double pAp = h0_inner(p, Ap);
            if (!(pAp > 0.0)) break;
            const double alpha = rr / pAp;
            axpy(V, alpha, p);
            axpy(r, -alpha, Ap);
            const double rr_new = h0_inner(r, r);
            const double rel = std::sqrt(rr_new) / r0;
            res.iterations = it;
            res.cg_residuals.push_back(rel);
            FinalData bpr = b;
            axpy(bpr, 1.0, r);
            res.objective.push_back(-0.5 * h0_inner(V, bpr));
            if (rel < best) {
                best = rel;
                res.optimal = V;
                res.best_iteration = it;
            }
            if (rel <= opts.tol) {
                res.converged = true;
                break;
            }
            const double beta = rr_new / rr;
            rr = rr_new;
            FinalData next = r;
            axpy(next, beta, p);
            p = std::move(next);
        }
        const auto v = solve_backward(res.optimal);
        res.f.resize(v.flux_trace.size());
        for (std::size_t k = 0; k < v.flux_trace.size(); ++k) res.f[k] = -v.flux_trace[k];
        finish(res, u0, u1);
        return res;
    }

    [[nodiscard]] NullControlCheck verify(std::span<const double> f, const GridFunction& u0, const GridFunction& u1,
                                          std::uint64_t seed = 0, std::size_t probes = 10) const {
        NullControlCheck out;
        const auto run = simulate_controlled(*op_, u0, u1, f, T_, sim_);
        out.final_y_norm = l2_norm(run.final_state.y.values);
        out.final_yt_norm = dual_norm(run.final_state.yt.values);
        out.initial_y_norm = l2_norm(u0.values);
        out.initial_yt_norm = dual_norm(u1.values);

        std::mt19937_64 rng(seed);
        const auto m = op_->mass();
        for (std::size_t q = 0; q < probes; ++q) {
            const auto d = gaussian_data(*op_, rng);
            const FinalData W{d.y0, d.y1};
            const auto w = solve_backward(W);
            double lhs = 0.0, t1 = 0.0, t2 = 0.0;
            for (std::size_t i = 0; i < m.size(); ++i) {
                lhs += m[i] * (run.final_state.yt.values[i] * W.v0.values[i] -
                               run.final_state.y.values[i] * W.v1.values[i]);
                t1 += m[i] * u1.values[i] * w.final_state.y.values[i];
                t2 += m[i] * u0.values[i] * w.final_state.yt.values[i];
            }
            double flux = 0.0;
            const double c = op_->grid().eta_mid().back();
            for (std::size_t k = 0; k + 1 < w.flux_trace.size(); ++k) {
                const double fbar = 0.5 * (f[k] + f[k + 1]);
                const double tbar = 0.5 * (w.flux_trace[k] + w.flux_trace[k + 1]);
                flux += grid_.dt * c * fbar * tbar;
            }
            const double rhs = t1 - t2 - flux;
            const double scale = std::abs(lhs) + std::abs(t1) + std::abs(t2) + std::abs(flux);
            const double resid = scale > 0.0 ? std::abs(lhs - rhs) / scale : 0.0;
            out.transposition_residual = std::max(out.transposition_residual, resid);
        }
        return out;
    }

    [[nodiscard]] double l2_norm(std::span<const double> y) const {
        const auto m = op_->mass();
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) s += m[i] * y[i] * y[i];
        return std::sqrt(s);
    }

    /// sqrt(g^T M (M + L)^{-1} M g), the norm dual to H^1 through the weighted pivot.
    [[nodiscard]] double dual_norm(std::span<const double> g) const {
        const auto m = op_->mass();
        std::vector<double> mg(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) mg[i] = m[i] * g[i];
        const auto x = op_->factor(1.0, 1.0)->solve(mg);
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) s += mg[i] * x[i];
        return std::sqrt(std::max(0.0, s));
    }

private:
    double pair_traces(std::span<const double> a, std::span<const double> b) const {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
        return op_->grid().eta_mid().back() * grid_.dt * s;
    }

    static void axpy(FinalData& y, double a, const FinalData& x) {
        for (std::size_t i = 0; i < y.v0.values.size(); ++i) {
            y.v0.values[i] += a * x.v0.values[i];
            y.v1.values[i] += a * x.v1.values[i];
        }
    }

    void finish(ControlResult& res, const GridFunction& u0, const GridFunction& u1) const {
        const auto chk = verify(res.f, u0, u1);
        res.final_y_norm = chk.final_y_norm;
        res.final_yt_norm = chk.final_yt_norm;
        res.initial_norm = std::hypot(chk.initial_y_norm, chk.initial_yt_norm);
        res.transposition_residual = chk.transposition_residual;
    }

    const DiscreteOperator* op_;
    double T_;
    SimulationOptions sim_;
    TimeGrid grid_;
};

[[nodiscard]] inline Trajectory solve_backward(const DiscreteOperator& op, const FinalData& V, double T,
                                               const SimulationOptions& sim = {}) {
    return HumProblem(op, T, sim).solve_backward(V);
}

[[nodiscard]] inline double lambda_form(const DiscreteOperator& op, const FinalData& V, const FinalData& W, double T,
                                        const SimulationOptions& sim = {}) {
    return HumProblem(op, T, sim).lambda_form(V, W);
}

[[nodiscard]] inline double rhs_functional(const DiscreteOperator& op, const FinalData& W, const GridFunction& u0,
                                           const GridFunction& u1_dual, double T, const SimulationOptions& sim = {}) {
    return HumProblem(op, T, sim).rhs_functional(W, u0, u1_dual);
}

[[nodiscard]] inline ControlResult solve_hum(const DiscreteOperator& op, const GridFunction& u0,
                                             const GridFunction& u1_dual, double T, const HumOptions& opts = {}) {
    return HumProblem(op, T, opts.sim).solve(u0, u1_dual, opts);
}

[[nodiscard]] inline NullControlCheck verify_null_control(const DiscreteOperator& op, const ControlResult& result,
                                                          const GridFunction& u0, const GridFunction& u1_dual,
                                                          double T, std::uint64_t seed = 0,
                                                          const SimulationOptions& sim = {}) {
    return HumProblem(op, T, sim).verify(result.f, u0, u1_dual, seed);
}

/// Relative L^2(0,T) distance between two sampled controls on possibly
/// different time grids; the coarser one is interpolated linearly.
[[nodiscard]] inline double control_relative_difference(const ControlResult& a, const ControlResult& b) {
    const ControlResult& fine = a.f.size() >= b.f.size() ? a : b;
    const ControlResult& coarse = a.f.size() >= b.f.size() ? b : a;
    std::vector<double> diff(fine.f.size());
    for (std::size_t k = 0; k < fine.f.size(); ++k) {
        const double t = fine.times[k];
        const double pos = std::clamp(t / coarse.dt, 0.0, static_cast<double>(coarse.f.size() - 1));
        const auto j = std::min(static_cast<std::size_t>(pos), coarse.f.size() - 2);
        const double w = pos - static_cast<double>(j);
        diff[k] = fine.f[k] - ((1.0 - w) * coarse.f[j] + w * coarse.f[j + 1]);
    }
    const double num = squared_integral(diff, fine.dt);
    const double den = squared_integral(fine.f, fine.dt);
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace degwave
