#pragma once

// Subcommands of the degwave tool. Each returns the process exit code:
// 0 success, 1 configuration error, 2 hypothesis or tolerance violation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "degwave/coefficients.hpp"
#include "degwave/config.hpp"
#include "degwave/errors.hpp"
#include "degwave/evolution.hpp"
#include "degwave/hum_control.hpp"
#include "degwave/observability.hpp"
#include "degwave/operator.hpp"
#include "degwave/weighted_spaces.hpp"

namespace degwave {

enum ExitCode : int { kOk = 0, kConfigError = 1, kViolation = 2 };

/// Everything derived from the coefficient block before any time stepping.
struct Analysis {
    CoefficientSet set;
    DegeneracyReport report;
    std::optional<double> chp_estimate;
    std::optional<double> chp_bound;
    double chp_used = std::numeric_limits<double>::quiet_NaN();
    std::string chp_source;
    HypothesisVerdicts verdicts;
    std::optional<std::pair<double, double>> direct;
    std::optional<ObservabilityConstants> constants;
    std::string constants_error;
    std::optional<double> T;
    std::vector<std::string> notes;

    [[nodiscard]] bool admissible() const { return verdicts.all_required_pass(); }
};

[[nodiscard]] inline Analysis analyze(const RunConfig& cfg, const CoefficientSet& base,
                                      std::optional<double> lambda_chp, std::optional<double> T_factor) {
    Analysis an;
    an.set = base;
    an.set.lambda = 0.0;
    an.report = degeneracy_report(an.set, cfg.drift_cap);
    if (an.report.b_over_a_integrable) {
        an.chp_estimate = cfg.chp_extrapolate ? extrapolate_chp(an.set, cfg.chp_n).value : estimate_chp(cfg.chp_n, an.set);
        an.chp_source = cfg.chp_extrapolate ? "estimate (extrapolated)" : "estimate";
        try {
            an.chp_bound = chp_closed_form_bound(an.set);
        } catch (const ClassRequired& e) {
            an.notes.push_back(std::string("closed-form C_HP bound unavailable: ") + e.what());
        }
        if (cfg.conservative) {
            if (!an.chp_bound) throw ConfigError("--conservative needs the closed-form C_HP bound, which is unavailable");
            an.chp_used = *an.chp_bound;
            an.chp_source = "closed-form bound";
        } else {
            an.chp_used = *an.chp_estimate;
        }
    }
    double lambda = 0.0;
    if (cfg.lambda)
        lambda = *cfg.lambda;
    else if (lambda_chp)
        lambda = std::isfinite(an.chp_used) ? *lambda_chp / an.chp_used : std::numeric_limits<double>::quiet_NaN();
    an.set.lambda = lambda;
    an.report.lambda = lambda;
    if (!std::isfinite(an.chp_used)) {
        an.verdicts.drift_integrable = {false, "b/a not integrable"};
        an.verdicts.hyp_2_1 = an.verdicts.hyp_2_4 = an.verdicts.hyp_2_6 = an.verdicts.hyp_3_5 = {false, "b/a not integrable"};
        an.verdicts.hyp_3_6 = an.verdicts.hyp_4_2 = an.verdicts.hyp_4_7 = {false, "b/a not integrable"};
        an.constants_error = "b/a not integrable";
        return an;
    }
    an.verdicts = check_hypotheses(an.report, an.chp_used);
    if (an.verdicts.retained_term_negative)
        an.notes.push_back("1 - K_a/2 - K_d - M < 0: the lambda-dependent term kept in the lower energy estimate is "
                           "negative while the observability constants drop it");
    if (an.report.K_a + 2.0 * an.report.K_d > 2.0) an.notes.push_back("outside Hyp 2.6 (K_a + 2 K_d > 2)");
    try {
        an.direct = direct_constants(an.report, an.chp_used, lambda);
        an.constants = inverse_constants(an.report, an.chp_used, lambda);
    } catch (const HypothesisViolated& e) {
        an.constants_error = e.what();
    }
    if (cfg.T)
        an.T = *cfg.T;
    else if (an.constants)
        an.T = T_factor.value_or(cfg.T_factor) * an.constants->T0;
    return an;
}

[[nodiscard]] inline Analysis analyze(const RunConfig& cfg) {
    CoefficientSet base{cfg.a, cfg.b, cfg.d, 0.0};
    return analyze(cfg, base, cfg.lambda_chp, std::nullopt);
}

namespace detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

inline std::string opt(const std::optional<double>& v) { return v ? num(*v) : "absent"; }

inline const char* mark(bool pass) { return pass ? "pass" : "FAIL"; }

inline void ensure_dir(const std::filesystem::path& p) {
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw ConfigError("cannot create output directory " + p.string() + ": " + ec.message());
}

inline std::vector<std::pair<std::string, const Verdict*>> verdict_list(const HypothesisVerdicts& v) {
    return {{"Hyp 2.1", &v.hyp_2_1}, {"Hyp 2.4", &v.hyp_2_4}, {"Hyp 2.6", &v.hyp_2_6}, {"Hyp 3.5", &v.hyp_3_5},
            {"Hyp 3.6", &v.hyp_3_6}, {"Hyp 4.2", &v.hyp_4_2}, {"Hyp 4.7", &v.hyp_4_7}};
}

}  // namespace detail

/// Text block with every constant and verdict.
inline void write_report_text(std::ostream& os, const Analysis& an) {
    using detail::num;
    const auto& r = an.report;
    os << "[coefficients]\n";
    os << "a = " << an.set.a.describe() << "\nb = " << an.set.b.describe() << "\nd = " << an.set.d.describe() << '\n';
    os << "lambda = " << num(an.set.lambda) << '\n';
    os << "K_a = " << num(r.K_a) << "  class_a = " << to_string(r.class_a) << (r.a_degenerate ? "" : " (regular at 0)")
       << '\n';
    os << "K_d = " << num(r.K_d) << "  class_d = " << to_string(r.class_d) << (r.d_degenerate ? "" : " (regular at 0)")
       << '\n';
    os << "M = " << num(r.M) << "\nM_inf = " << detail::opt(r.M_inf) << '\n';
    os << "b/a integrable = " << (r.b_over_a_integrable ? "yes" : "no") << '\n';
    os << "eta(1) = " << num(r.eta1) << "\na(1) = " << num(r.a1) << "\nd(1) = " << num(r.d1)
       << "\nmax d = " << num(r.d_max) << '\n';
    os << "\n[hardy-poincare]\n";
    os << "C_HP estimate = " << detail::opt(an.chp_estimate) << '\n';
    os << "C_HP closed-form bound = " << detail::opt(an.chp_bound) << '\n';
    os << "C_HP used = " << num(an.chp_used) << " (" << an.chp_source << ")\n";
    os << "1/C_HP = " << num(1.0 / an.chp_used) << '\n';
    os << "\n[hypotheses]\n";
    for (const auto& [name, v] : detail::verdict_list(an.verdicts))
        os << name << ": " << detail::mark(v->pass) << "  (" << v->detail << ")\n";
    os << "active Hyp 4.7 bullet = " << an.verdicts.controllability_case << '\n';
    os << "\n[constants]\n";
    if (an.direct) os << "C1 = " << num(an.direct->first) << "\nC2 = " << num(an.direct->second) << '\n';
    if (an.constants) {
        const auto& c = *an.constants;
        os << "C3 = " << num(c.C3) << "\nC4 = " << num(c.C4) << "\nC5 = " << num(c.C5) << "\nC6 = " << num(c.C6) << '\n';
        os << "epsilon = " << detail::opt(c.epsilon) << '\n';
        os << "M used = " << num(c.M_used) << '\n';
        os << "T0 = " << num(c.T0) << (c.negative_lambda_branch() ? "  (C3/C4)" : "  (C5/C6)") << '\n';
    } else {
        os << "inverse constants unavailable: " << an.constants_error << '\n';
    }
    if (an.T) os << "T = " << num(*an.T) << '\n';
    if (!an.notes.empty()) {
        os << "\n[notes]\n";
        for (const auto& n : an.notes) os << "- " << n << '\n';
    }
}

[[nodiscard]] inline nlohmann::json report_json(const Analysis& an) {
    nlohmann::json j;
    auto opt = [](const std::optional<double>& v) -> nlohmann::json { return v ? nlohmann::json(*v) : nlohmann::json(); };
    const auto& r = an.report;
    j["coefficients"] = {{"a", an.set.a.describe()}, {"b", an.set.b.describe()}, {"d", an.set.d.describe()},
                         {"lambda", an.set.lambda}};
    j["K_a"] = r.K_a;
    j["K_d"] = r.K_d;
    j["class_a"] = to_string(r.class_a);
    j["class_d"] = to_string(r.class_d);
    j["M"] = r.M;
    j["M_inf"] = opt(r.M_inf);
    j["b_over_a_integrable"] = r.b_over_a_integrable;
    j["eta1"] = r.eta1;
    j["chp_estimate"] = opt(an.chp_estimate);
    j["chp_bound"] = opt(an.chp_bound);
    j["chp_used"] = an.chp_used;
    for (const auto& [name, v] : detail::verdict_list(an.verdicts))
        j["hypotheses"][name] = {{"pass", v->pass}, {"detail", v->detail}};
    j["hyp_4_7_bullet"] = an.verdicts.controllability_case;
    if (an.direct) {
        j["C1"] = an.direct->first;
        j["C2"] = an.direct->second;
    }
    if (an.constants) {
        const auto& c = *an.constants;
        j["C3"] = c.C3;
        j["C4"] = c.C4;
        j["C5"] = c.C5;
        j["C6"] = c.C6;
        j["epsilon"] = opt(c.epsilon);
        j["T0"] = c.T0;
    }
    j["T"] = opt(an.T);
    j["notes"] = an.notes;
    return j;
}

/// First failing required hypothesis, formatted as "Hyp X failed (...)".
[[nodiscard]] inline std::string failure_summary(const Analysis& an) {
    const auto& v = an.verdicts;
    if (!v.hyp_2_4.pass) return "Hyp 2.4 failed (" + v.hyp_2_4.detail + ")";
    if (!v.hyp_3_5.pass) return "Hyp 3.5 failed (" + v.hyp_3_5.detail + ")";
    if (!v.hyp_4_7.pass) return "Hyp 4.7 failed (" + v.hyp_4_7.detail + ")";
    if (!an.constants) return "constants unavailable (" + an.constants_error + ")";
    return "";
}

/// Interior-node samples of a data description.
[[nodiscard]] inline GridFunction build_data(const DataSpec& spec, const DiscreteOperator& op, std::mt19937_64& rng) {
    const GridPtr& g = op.grid_ptr();
    if (spec.kind == "zero") return GridFunction(g);
    if (spec.kind == "sine")
        return GridFunction::sample(g, [&](double x) { return spec.amplitude * std::sin(spec.mode * std::numbers::pi * x); });
    if (spec.kind == "bump")
        return GridFunction::sample(g, [&](double x) {
            const double z = (x - spec.center) / spec.width;
            if (std::abs(z) >= 1.0) return 0.0;
            const double c = std::cos(0.5 * std::numbers::pi * z);
            return spec.amplitude * c * c * c * c;
        });
    if (spec.kind == "random") {
        auto d = gaussian_data(op, rng);
        d.y0 *= spec.amplitude;
        return d.y0;
    }
    std::ifstream in(spec.path);
    if (!in) throw ConfigError("cannot open data file " + spec.path.string());
    std::vector<double> xs, vs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double x = 0, v = 0;
        if (!(row >> x >> v)) {
            if (xs.empty()) continue;
            throw ConfigError("malformed row in " + spec.path.string());
        }
        if (!xs.empty() && !(x > xs.back())) throw ConfigError("data abscissae must increase in " + spec.path.string());
        xs.push_back(x);
        vs.push_back(v);
    }
    if (xs.size() < 2) throw ConfigError("data file needs at least two rows: " + spec.path.string());
    return GridFunction::sample(g, [&](double x) {
        if (x < xs.front() || x > xs.back()) return 0.0;
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - xs.begin()), xs.size() - 1);
        const std::size_t i = j - 1;
        const double w = (x - xs[i]) / (xs[j] - xs[i]);
        return (1.0 - w) * vs[i] + w * vs[j];
    });
}

[[nodiscard]] inline SimulationOptions simulation_options(const RunConfig& cfg) {
    SimulationOptions s;
    s.dt_factor = cfg.dt_factor;
    s.energy_tol = cfg.energy_tol;
    s.snapshot_every = cfg.snapshot_every;
    return s;
}

inline int cmd_report(const RunConfig& cfg, std::ostream& log) {
    const Analysis an = analyze(cfg);
    detail::ensure_dir(cfg.out_dir);
    {
        std::ofstream txt(cfg.out_dir / "report.txt");
        write_report_text(txt, an);
        std::ofstream js(cfg.out_dir / "report.json");
        js << report_json(an).dump(2) << '\n';
    }
    write_report_text(log, an);
    const std::string failure = failure_summary(an);
    if (!failure.empty()) {
        log << failure << '\n';
        return kViolation;
    }
    return kOk;
}

namespace detail {
inline double require_T(const Analysis& an) {
    if (!an.T) throw ConfigError("time.T is required when T0 is unavailable (" + an.constants_error + ")");
    return *an.T;
}

inline bool is_classical_string(const CoefficientSet& s) {
    const auto* a = s.a.as_power_law();
    return a && a->exponent == 0.0 && a->scale == 1.0 && s.b.is_zero() && s.lambda == 0.0;
}
}  // namespace detail

inline int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    const Analysis an = analyze(cfg);
    const double T = detail::require_T(an);
    const auto op = DiscreteOperator::assemble(Grid::build(cfg.n, an.set));
    std::mt19937_64 rng(cfg.seed);
    const GridFunction u0 = build_data(cfg.u0, op, rng);
    const GridFunction u1 = build_data(cfg.u1, op, rng);
    const auto sim = simulation_options(cfg);
    const Trajectory tr = simulate_homogeneous(op, u0, u1, T, sim);
    detail::ensure_dir(cfg.out_dir);
    write_trajectory_csv(cfg.out_dir / "trajectory.csv", tr);
    if (cfg.snapshot_every > 0) {
        std::vector<WaveState> snaps = tr.snapshots;
        if (tr.steps() % cfg.snapshot_every != 0) snaps.push_back(tr.final_state);
        write_snapshots_bin(cfg.out_dir / "snapshots.bin", snaps);
    }

    const double E0 = tr.energy.front();
    int code = kOk;
    std::ostringstream out;
    out << std::setprecision(12);
    out << "n = " << cfg.n << "\nT = " << T << "\ndt = " << tr.dt << "\nsteps = " << tr.steps() << '\n';
    out << "E0 = " << E0 << "\nmax relative energy drift = " << tr.max_relative_drift << '\n';
    out << "int_0^T y_x(t,1)^2 dt = " << trace_integral(tr) << '\n';
    if (tr.energy_drift_exceeded) {
        out << "energy drift exceeds tolerance " << cfg.energy_tol << '\n';
        code = kViolation;
    }
    if (an.direct) {
        ObservabilityConstants c;
        c.C1 = an.direct->first;
        c.C2 = an.direct->second;
        c.eta1 = an.report.eta1;
        const double margin = check_direct_inequality(tr, c, E0, T);
        out << "direct inequality margin = " << margin << " (" << (E0 > 0 ? margin / E0 : 0.0) << " E0)\n";
        if (margin < -cfg.inequality_tol * E0) {
            out << "direct inequality violated beyond tolerance " << cfg.inequality_tol << '\n';
            code = kViolation;
        }
    } else {
        out << "direct inequality skipped: " << failure_summary(an) << '\n';
    }
    if (detail::is_classical_string(an.set) && T >= 2.0) {
        const Trajectory period = simulate_homogeneous(op, u0, u1, 2.0, sim);
        const GridFunction diff = period.final_state.y - u0;
        const double base = norm_l2_sigma(u0);
        out << "recurrence |y(2) - y0| / |y0| = " << (base > 0 ? norm_l2_sigma(diff) / base : norm_l2_sigma(diff))
            << '\n';
    }
    for (const auto& s : boundary_diagnostics(tr.final_state).series)
        out << "near-zero " << s.name << ": slope " << s.slope << (s.applicable ? (s.decays ? " decays" : " does not decay") : " (not applicable)")
            << '\n';
    std::ofstream(cfg.out_dir / "simulate.txt") << out.str();
    log << out.str();
    return code;
}

inline int cmd_observe(const RunConfig& cfg, std::ostream& log) {
    const Analysis an = analyze(cfg);
    if (!an.constants) {
        log << failure_summary(an) << '\n';
        return kViolation;
    }
    const auto& c = *an.constants;
    const double T = detail::require_T(an);
    const auto op = DiscreteOperator::assemble(Grid::build(cfg.n, an.set));
    const auto sim = simulation_options(cfg);
    detail::ensure_dir(cfg.out_dir);
    std::ostringstream out;
    out << std::setprecision(12);
    out << "T = " << T << "\nT0 = " << c.T0 << '\n';
    int code = kOk;

    std::ofstream margins(cfg.out_dir / "margins.csv");
    margins << "run,direct_margin,inverse_margin\n" << std::setprecision(17);
    if (!(T > c.T0)) {
        out << "warning: TimeTooShort, T = " << T << " <= T0 = " << c.T0 << "; inequality suite skipped\n";
    } else {
        const auto suite = inequality_suite(op, c, T, cfg.suite_runs, cfg.seed, Sampler::Gaussian, sim);
        for (std::size_t k = 0; k < suite.runs; ++k)
            margins << k << ',' << suite.direct_margins[k] << ',' << suite.inverse_margins[k] << '\n';
        out << "runs = " << suite.runs << '\n';
        out << "min direct margin / E0 = " << suite.min_direct_margin << '\n';
        out << "min inverse margin / ((C T - C') E0) = " << suite.min_inverse_margin << '\n';
        out << "max energy drift = " << suite.max_energy_drift << '\n';
        if (suite.min_direct_margin < -cfg.inequality_tol || suite.min_inverse_margin < -cfg.inequality_tol) {
            out << "inequality violated beyond tolerance " << cfg.inequality_tol << '\n';
            code = kViolation;
        }
    }
    CTOptions ct;
    ct.sampler = cfg.sampler;
    ct.budget = cfg.ct_samples;
    ct.sweeps = cfg.ct_sweeps;
    ct.seed = cfg.seed;
    ct.sim = sim;
    const auto est = estimate_CT(op, T, ct);
    out << "CT_hat = " << est.CT_hat << "\nc_T = " << est.c_T << "\nbest raw sample ratio = " << est.best_sample_ratio
        << '\n';
    out << "lower bound (C T - C')/eta(1) = " << (c.slope() * T - c.offset()) / c.eta1 << '\n';
    std::ofstream(cfg.out_dir / "observe.txt") << out.str();
    log << out.str();
    return code;
}

inline int cmd_control(const RunConfig& cfg, std::ostream& log) {
    const Analysis an = analyze(cfg);
    const double T = detail::require_T(an);
    const auto op = DiscreteOperator::assemble(Grid::build(cfg.n, an.set));
    std::mt19937_64 rng(cfg.seed);
    const GridFunction u0 = build_data(cfg.u0, op, rng);
    const GridFunction u1 = build_data(cfg.u1, op, rng);
    HumOptions opts;
    opts.tol = cfg.cg_tol;
    opts.max_iter = cfg.max_iter;
    if (an.constants) opts.T0 = an.constants->T0;
    opts.sim = simulation_options(cfg);
    const ControlResult res = solve_hum(op, u0, u1, T, opts);

    detail::ensure_dir(cfg.out_dir);
    {
        std::ofstream csv(cfg.out_dir / "control.csv");
        csv << "t,f\n" << std::setprecision(17);
        for (std::size_t k = 0; k < res.f.size(); ++k) csv << res.times[k] << ',' << res.f[k] << '\n';
    }
    std::ostringstream out;
    out << std::setprecision(12);
    out << "T = " << T << '\n';
    if (an.constants) out << "T0 = " << an.constants->T0 << '\n';
    if (res.coercivity_warning)
        out << "warning: CoercivityWarning, T does not exceed T0 (or T0 unavailable); coercivity of Lambda is unproven\n";
    out << "iterations = " << res.iterations << " (best iterate " << res.best_iteration << ")\n";
    out << "converged = " << (res.converged ? "yes" : "no") << '\n';
    if (!res.converged) out << "warning: NoConvergence after " << res.iterations << " iterations; best iterate returned\n";
    out << "final residual = " << (res.cg_residuals.empty() ? 0.0 : res.cg_residuals.back()) << '\n';
    out << "final |u(T)| = " << res.final_y_norm << "\nfinal |u_t(T)|_* = " << res.final_yt_norm << '\n';
    out << "relative final norm = " << res.relative_final_norm() << '\n';
    out << "transposition residual = " << res.transposition_residual << '\n';
    int code = kOk;
    if (res.relative_final_norm() > cfg.control_tol) {
        out << "final norm exceeds tolerance " << cfg.control_tol << '\n';
        code = kViolation;
    }
    std::ofstream(cfg.out_dir / "control.txt") << out.str();
    log << out.str();
    return code;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
    const auto* pa = cfg.a.as_power_law();
    const auto* pd = cfg.d.as_power_law();
    const std::vector<double> Kas = cfg.sweep_K_a.value_or(std::vector<double>{pa ? pa->exponent : std::nan("")});
    const std::vector<double> Kds = cfg.sweep_K_d.value_or(std::vector<double>{pd ? pd->exponent : std::nan("")});
    std::vector<std::optional<double>> lams;
    if (cfg.sweep_lambda_chp)
        for (double l : *cfg.sweep_lambda_chp) lams.emplace_back(l);
    else
        lams.push_back(cfg.lambda_chp);
    std::vector<std::optional<double>> tfs;
    if (cfg.sweep_T_factor)
        for (double t : *cfg.sweep_T_factor) tfs.emplace_back(t);
    else
        tfs.push_back(std::nullopt);

    struct Cell {
        double Ka, Kd;
        std::optional<double> lam;
        std::optional<double> tf;
    };
    std::vector<Cell> cells;
    for (double Ka : Kas)
        for (double Kd : Kds)
            for (const auto& l : lams)
                for (const auto& t : tfs) cells.push_back({Ka, Kd, l, t});

    struct Row {
        std::string line;
        bool ok = false;
    };
    auto rows = detail::parallel_map<Row>(cells.size(), [&](std::size_t i) {
        const Cell& cell = cells[i];
        CoefficientSet base{cfg.a, cfg.b, cfg.d, 0.0};
        if (cfg.sweep_K_a) base.a = CoefficientProfile::power(cell.Ka, pa->scale);
        if (cfg.sweep_K_d) base.d = CoefficientProfile::power(cell.Kd, pd->scale);
        Row row;
        std::ostringstream os;
        os << std::setprecision(12);
        try {
            const Analysis an = analyze(cfg, base, cell.lam, cell.tf);
            const auto& v = an.verdicts;
            os << an.report.K_a << ',' << an.report.K_d << ',' << an.set.lambda << ','
               << (cell.lam ? detail::num(*cell.lam) : "") << ',' << (an.T ? detail::num(*an.T) : "") << ','
               << an.chp_used << ',' << (an.constants ? detail::num(an.constants->T0) : "") << ','
               << v.controllability_case;
            for (const auto& [name, vv] : detail::verdict_list(v)) os << ',' << (vv->pass ? 1 : 0);
            if (an.constants) {
                const auto& c = *an.constants;
                os << ',' << c.C1 << ',' << c.C2 << ',' << c.C3 << ',' << c.C4 << ',' << c.C5 << ',' << c.C6 << ','
                   << detail::opt(c.epsilon);
            } else {
                os << ",,,,,,,";
            }
            const std::string failure = failure_summary(an);
            row.ok = failure.empty();
            os << ',' << (row.ok ? "ok" : "\"" + failure + "\"");
        } catch (const Error& e) {
            os << cell.Ka << ',' << cell.Kd << std::string(20, ',') << ",\"" << e.what() << '"';
        }
        row.line = os.str();
        return row;
    });

    detail::ensure_dir(cfg.out_dir);
    std::ofstream csv(cfg.out_dir / "sweep.csv");
    const std::string header =
        "K_a,K_d,lambda,lambda_chp,T,chp,T0,hyp_4_7_bullet,hyp_2_1,hyp_2_4,hyp_2_6,hyp_3_5,hyp_3_6,hyp_4_2,hyp_4_7,"
        "C1,C2,C3,C4,C5,C6,epsilon,status";
    csv << header << '\n';
    bool all_ok = true;
    for (const auto& r : rows) {
        csv << r.line << '\n';
        all_ok = all_ok && r.ok;
    }
    log << "sweep cells = " << rows.size() << ", admissible = "
        << std::count_if(rows.begin(), rows.end(), [](const Row& r) { return r.ok; }) << '\n';
    return all_ok ? kOk : kViolation;
}

}  // namespace degwave
