#pragma once

// Direct and inverse boundary-trace inequalities with explicit constants,
// the threshold time T0, randomized inequality suites and sampled estimates
// of the observability constant C_T.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "degwave/coefficients.hpp"
#include "degwave/errors.hpp"
#include "degwave/evolution.hpp"
#include "degwave/operator.hpp"
#include "degwave/weighted_spaces.hpp"

namespace degwave {

struct ObservabilityConstants {
    double C1 = 0.0;
    double C2 = 0.0;
    double C3 = 0.0;
    double C4 = 0.0;
    double C5 = 0.0;
    double C6 = 0.0;
    std::optional<double> epsilon;  ///< 1 - lambda C_HP for lambda in (0, 1/C_HP)
    double T0 = std::numeric_limits<double>::infinity();
    double eta1 = 1.0;
    int which_case = 0;   ///< bullet of the controllability hypothesis (1..4)
    double chp = 0.0;     ///< C_HP entering the formulas
    double M_used = 0.0;  ///< M, or M_inf in the K_a > 1 branch

    [[nodiscard]] bool negative_lambda_branch() const { return which_case == 1 || which_case == 3; }
    /// Slope and offset (C, C') of the lower bound (C T - C') / eta(1).
    [[nodiscard]] double slope() const { return negative_lambda_branch() ? C4 : C6; }
    [[nodiscard]] double offset() const { return negative_lambda_branch() ? C3 : C5; }
};

namespace detail {
inline DegeneracyReport with_lambda(DegeneracyReport r, double lambda) {
    r.lambda = lambda;
    return r;
}
}  // namespace detail

/// C1 = 2 max{1/a(1), 1},
/// C2 = max{|lambda| (2 + K_a + K_d + M) C_HP + M + 2, 2 + K_a + M}.
[[nodiscard]] inline std::pair<double, double> direct_constants(const DegeneracyReport& report, double chp,
                                                                double lambda) {
    const auto r = detail::with_lambda(report, lambda);
    const auto v = check_hypotheses(r, chp);
    if (!v.hyp_3_5.pass) throw HypothesisViolated("hyp 3.5 fails: " + v.hyp_3_5.detail);
    const double M = v.hyp_4_2.pass ? *r.M_inf : r.M;
    const double C1 = 2.0 * std::max(1.0 / r.a1, 1.0);
    const double C2 =
        std::max(std::abs(lambda) * (2.0 + r.K_a + r.K_d + M) * chp + M + 2.0, 2.0 + r.K_a + M);
    return {C1, C2};
}

/// All observability constants for the active controllability bullet.
[[nodiscard]] inline ObservabilityConstants inverse_constants(const DegeneracyReport& report, double chp,
                                                              double lambda) {
    const auto r = detail::with_lambda(report, lambda);
    const auto v = check_hypotheses(r, chp);
    if (!v.hyp_4_7.pass) {
        std::string why = v.hyp_4_7.detail;
        if (!v.hyp_3_5.pass) why = "hyp 3.5 fails: " + v.hyp_3_5.detail;
        throw HypothesisViolated("hyp 4.7 fails: " + why);
    }
    ObservabilityConstants c;
    std::tie(c.C1, c.C2) = direct_constants(r, chp, lambda);
    c.which_case = v.controllability_case;
    c.chp = chp;
    c.eta1 = r.eta1;
    const double M = v.effective_M;
    c.M_used = M;
    const double Ka = r.K_a, Kd = r.K_d;
    const double tail = Ka * std::max(1.0, chp * r.d_max);
    c.C3 = 4.0 * std::max(1.0, 1.0 / r.a1) + tail;
    c.C4 = 2.0 * (1.0 - Ka / 2.0 - M) - std::abs(lambda) * chp * (1.0 + 1.5 * Ka + Kd + M);
    c.C5 = 4.0 * std::max(1.0 / r.a1, 1.0) + tail;
    c.C6 = 1.0 - Ka / 2.0 - M;
    if (lambda > 0.0 && lambda < 1.0 / chp) c.epsilon = 1.0 - lambda * chp;
    if (c.negative_lambda_branch()) {
        if (!(c.C4 > 0.0)) throw HypothesisViolated("C4 = " + std::to_string(c.C4) + " is not positive");
        c.T0 = c.C3 / c.C4;
    } else {
        if (!(c.C6 > 0.0)) throw HypothesisViolated("C6 = 1 - K_a/2 - M = " + std::to_string(c.C6) + " is not positive");
        c.T0 = c.C5 / c.C6;
    }
    return c;
}

/// (C1 E0 + C2 T E0) - eta(1) int_0^T y_x(t,1)^2 dt.
[[nodiscard]] inline double check_direct_inequality(const Trajectory& tr, const ObservabilityConstants& c,
                                                    double E0, double T) {
    return (c.C1 * E0 + c.C2 * T * E0) - c.eta1 * trace_integral(tr);
}

/// eta(1) int_0^T y_x(t,1)^2 dt - (C T - C') E0, with (C, C') = (C4, C3) or (C6, C5).
[[nodiscard]] inline double check_inverse_inequality(const Trajectory& tr, const ObservabilityConstants& c,
                                                     double E0, double T) {
    if (!(T > c.T0)) throw TimeTooShort("T = " + std::to_string(T) + " does not exceed T0 = " + std::to_string(c.T0));
    return c.eta1 * trace_integral(tr) - (c.slope() * T - c.offset()) * E0;
}

enum class Sampler { Gaussian, Localized, Mixed };

inline const char* to_string(Sampler s) {
    switch (s) {
        case Sampler::Gaussian: return "gaussian";
        case Sampler::Localized: return "localized";
        case Sampler::Mixed: return "mixed";
    }
    return "gaussian";
}

struct InitialData {
    GridFunction y0;
    GridFunction y1;
};

/// Energy of (y0, y1) in the discrete pairing used by the integrator.
[[nodiscard]] inline double data_energy(const DiscreteOperator& op, const InitialData& d) {
    std::vector<double> work(op.size());
    return detail::discrete_energy(op, d.y0.values, d.y1.values, work);
}

inline void normalize_energy(const DiscreteOperator& op, InitialData& d) {
    const double e = data_energy(op, d);
    if (e > 0.0) {
        const double s = 1.0 / std::sqrt(e);
        d.y0 *= s;
        d.y1 *= s;
    }
}

/// Smooth random data: sine modes k = 1..16 with N(0,1) coefficients
/// scaled by 1/k^2 (displacement) and 1/k (velocity).
[[nodiscard]] inline InitialData gaussian_data(const DiscreteOperator& op, std::mt19937_64& rng, int modes = 16) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> cy(modes), cv(modes);
    for (int k = 0; k < modes; ++k) {
        cy[k] = normal(rng) / ((k + 1.0) * (k + 1.0));
        cv[k] = normal(rng) / (k + 1.0);
    }
    InitialData d{GridFunction(op.grid_ptr()), GridFunction(op.grid_ptr())};
    const auto xs = op.grid().nodes();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double a = 0.0, b = 0.0;
        for (int k = 0; k < modes; ++k) {
            const double s = std::sin((k + 1.0) * std::numbers::pi * xs[i]);
            a += cy[k] * s;
            b += cv[k] * s;
        }
        d.y0.values[i] = a;
        d.y1.values[i] = b;
    }
    normalize_energy(op, d);
    return d;
}

/// Left-moving bump y0 = phi, y1 = phi' with phi(x) = cos^4 on
/// [c - w, c + w]; for the unit string it travels toward x = 0 and stays
/// invisible at x = 1 until time 1 + c - w.
[[nodiscard]] inline InitialData bump_data(const DiscreteOperator& op, double center, double width) {
    InitialData d{GridFunction(op.grid_ptr()), GridFunction(op.grid_ptr())};
    const auto xs = op.grid().nodes();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double z = (xs[i] - center) / width;
        if (std::abs(z) >= 1.0) continue;
        const double c = std::cos(0.5 * std::numbers::pi * z);
        const double s = std::sin(0.5 * std::numbers::pi * z);
        d.y0.values[i] = c * c * c * c;
        d.y1.values[i] = -4.0 * c * c * c * s * 0.5 * std::numbers::pi / width;
    }
    normalize_energy(op, d);
    return d;
}

[[nodiscard]] inline InitialData localized_data(const DiscreteOperator& op, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uc(0.05, 0.5);
    const double center = uc(rng);
    std::uniform_real_distribution<double> uw(std::max(0.02, 6.0 * op.grid().h()), std::max(0.03, center));
    const double width = std::min(uw(rng), center);
    return bump_data(op, center, width);
}

[[nodiscard]] inline InitialData sample_data(const DiscreteOperator& op, Sampler s, std::mt19937_64& rng,
                                             std::size_t index) {
    switch (s) {
        case Sampler::Gaussian: return gaussian_data(op, rng);
        case Sampler::Localized: return localized_data(op, rng);
        case Sampler::Mixed: return index % 2 == 0 ? gaussian_data(op, rng) : localized_data(op, rng);
    }
    return gaussian_data(op, rng);
}

namespace detail {

/// Runs `count` independent tasks on a small worker pool; results keep their index order.
template <class Result, class Task>
std::vector<Result> parallel_map(std::size_t count, Task task) {
    std::vector<Result> out(count);
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = task(i);
        return out;
    }
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w)
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < count; i += workers) out[i] = task(i);
        }));
    for (auto& j : jobs) j.get();
    return out;
}

}  // namespace detail

struct CTEstimate {
    double CT_hat = 0.0;
    double c_T = std::numeric_limits<double>::infinity();
    double best_sample_ratio = 0.0;  ///< smallest ratio among the raw samples
    std::size_t samples = 0;
    std::vector<double> worst_coefficients;  ///< refined minimizer in the span of the samples
};

struct CTOptions {
    Sampler sampler = Sampler::Mixed;
    std::size_t budget = 256;
    std::size_t sweeps = 64;
    std::uint64_t seed = 0;
    SimulationOptions sim{};
};

/// Rayleigh-type estimate of C_T = inf int_0^T y_x(t,1)^2 dt / E(0).
///
/// Each sample is simulated once; because the trace is linear in the data,
/// the ratio of any combination sum c_j (y0_j, y1_j) is the quotient
/// c^T O c / c^T E c of two Gram matrices. Starting from the worst sample,
/// coordinate descent minimizes that quotient over span{c, e_j} for each j
/// (a 2x2 generalized eigenproblem). The result is attained by actual
/// discrete data and is therefore an upper bound on the discrete C_T.
[[nodiscard]] inline CTEstimate estimate_CT(const DiscreteOperator& op, double T, const CTOptions& opts = {}) {
    if (opts.budget == 0) throw BudgetZero("estimate_CT needs at least one sample");
    if (!(T > 0.0)) throw Error("observation time must be positive");
    const std::size_t B = opts.budget;
    std::mt19937_64 rng(opts.seed);
    std::vector<InitialData> data;
    data.reserve(B);
    for (std::size_t j = 0; j < B; ++j) data.push_back(sample_data(op, opts.sampler, rng, j));

    auto traces = detail::parallel_map<std::vector<double>>(B, [&](std::size_t j) {
        return simulate_homogeneous(op, data[j].y0, data[j].y1, T, opts.sim).trace;
    });
    const double dt = make_time_grid(op.grid().h(), T, opts.sim).dt;

    std::vector<double> O(B * B), E(B * B);
    std::vector<std::vector<double>> Ly(B);
    for (std::size_t j = 0; j < B; ++j) Ly[j] = op.energy_matrix() * data[j].y0.values;
    const auto m = op.mass();
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = i; j < B; ++j) {
            const auto& ti = traces[i];
            const auto& tj = traces[j];
            double o = 0.5 * (ti.front() * tj.front() + ti.back() * tj.back());
            for (std::size_t k = 1; k + 1 < ti.size(); ++k) o += ti[k] * tj[k];
            o *= dt;
            double e = 0.0;
            for (std::size_t q = 0; q < op.size(); ++q)
                e += m[q] * data[i].y1.values[q] * data[j].y1.values[q] + data[i].y0.values[q] * Ly[j][q];
            e *= 0.5;
            O[i * B + j] = O[j * B + i] = o;
            E[i * B + j] = E[j * B + i] = e;
        }
    }

    CTEstimate out;
    out.samples = B;
    std::size_t worst = 0;
    double worst_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < B; ++j) {
        const double e = E[j * B + j];
        if (!(e > 0.0)) continue;
        const double r = O[j * B + j] / e;
        if (r < worst_ratio) {
            worst_ratio = r;
            worst = j;
        }
    }
    out.best_sample_ratio = worst_ratio;

    std::vector<double> c(B, 0.0), Oc(B), Ec(B);
    c[worst] = 1.0;
    for (std::size_t i = 0; i < B; ++i) {
        Oc[i] = O[i * B + worst];
        Ec[i] = E[i * B + worst];
    }
    double cOc = O[worst * B + worst], cEc = E[worst * B + worst];
    for (std::size_t sweep = 0; sweep < opts.sweeps; ++sweep) {
        const double before = cOc / cEc;
        for (std::size_t j = 0; j < B; ++j) {
            // Minimize (x^T A x)/(x^T G x) for x = (alpha, beta) in span{c, e_j}.
            const double a11 = cOc, a12 = Oc[j], a22 = O[j * B + j];
            const double g11 = cEc, g12 = Ec[j], g22 = E[j * B + j];
            const double qa = g11 * g22 - g12 * g12;
            if (!(qa > 1e-14 * g11 * g22)) continue;
            const double qb = -(a11 * g22 + a22 * g11 - 2.0 * a12 * g12);
            const double qc = a11 * a22 - a12 * a12;
            const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
            const double mu = (-qb - std::sqrt(disc)) / (2.0 * qa);
            if (!(mu < cOc / cEc)) continue;
            // Null vector of (A - mu G).
            double alpha = -(a12 - mu * g12), beta = a11 - mu * g11;
            if (std::abs(alpha) + std::abs(beta) < 1e-300) continue;
            if (std::abs(alpha) < 1e-300) {
                alpha = a22 - mu * g22;
                beta = -(a12 - mu * g12);
            }
            if (alpha == 0.0) continue;
            const double ratio = beta / alpha;
            c[j] += ratio;
            for (std::size_t i = 0; i < B; ++i) {
                Oc[i] += ratio * O[i * B + j];
                Ec[i] += ratio * E[i * B + j];
            }
            cOc = 0.0;
            cEc = 0.0;
            for (std::size_t i = 0; i < B; ++i) {
                cOc += c[i] * Oc[i];
                cEc += c[i] * Ec[i];
            }
            const double scale = 1.0 / std::sqrt(cEc);
            for (std::size_t i = 0; i < B; ++i) {
                c[i] *= scale;
                Oc[i] *= scale;
                Ec[i] *= scale;
            }
            cOc *= scale * scale;
            cEc *= scale * scale;
        }
        const double after = cOc / cEc;
        if (before - after <= 1e-12 * std::abs(before)) break;
    }
    out.CT_hat = std::max(0.0, std::min(worst_ratio, cOc / cEc));
    out.c_T = out.CT_hat > 0.0 ? 1.0 / out.CT_hat : std::numeric_limits<double>::infinity();
    const double norm = std::sqrt(cEc);
    for (double& v : c) v /= norm;
    out.worst_coefficients = std::move(c);
    return out;
}

struct InequalitySuite {
    std::size_t runs = 0;
    double min_direct_margin = std::numeric_limits<double>::infinity();   ///< in units of E0
    double min_inverse_margin = std::numeric_limits<double>::infinity();  ///< relative to (C T - C') E0
    double max_energy_drift = 0.0;
    bool inverse_evaluated = false;
    std::vector<double> direct_margins;
    std::vector<double> inverse_margins;
};

/// Runs `count` random homogeneous problems on [0, T] and records the
/// normalized margins of both inequalities. The inverse margin is skipped
/// when T <= T0.
[[nodiscard]] inline InequalitySuite inequality_suite(const DiscreteOperator& op, const ObservabilityConstants& c,
                                                      double T, std::size_t count, std::uint64_t seed,
                                                      Sampler sampler = Sampler::Gaussian,
                                                      const SimulationOptions& sim = {}) {
    std::mt19937_64 rng(seed);
    std::vector<InitialData> data;
    for (std::size_t j = 0; j < count; ++j) data.push_back(sample_data(op, sampler, rng, j));
    struct Row {
        double direct = 0, inverse = 0, drift = 0;
    };
    const bool inverse = T > c.T0;
    const double bound = c.slope() * T - c.offset();
    auto rows = detail::parallel_map<Row>(count, [&](std::size_t j) {
        const auto tr = simulate_homogeneous(op, data[j].y0, data[j].y1, T, sim);
        const double e0 = tr.energy.front();
        Row r;
        r.drift = tr.max_relative_drift;
        r.direct = check_direct_inequality(tr, c, e0, T) / e0;
        if (inverse) r.inverse = check_inverse_inequality(tr, c, e0, T) / (bound * e0);
        return r;
    });
    InequalitySuite s;
    s.runs = count;
    s.inverse_evaluated = inverse;
    for (const auto& r : rows) {
        s.direct_margins.push_back(r.direct);
        s.min_direct_margin = std::min(s.min_direct_margin, r.direct);
        s.max_energy_drift = std::max(s.max_energy_drift, r.drift);
        if (inverse) {
            s.inverse_margins.push_back(r.inverse);
            s.min_inverse_margin = std::min(s.min_inverse_margin, r.inverse);
        }
    }
    return s;
}

}  // namespace degwave
