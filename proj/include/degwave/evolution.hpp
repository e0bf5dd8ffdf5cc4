#pragma once

// Implicit-midpoint integration of the homogeneous and the boundary
// controlled wave systems, energy and boundary-trace channels, snapshot
// export, and near-zero diagnostics of the solution profile.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "degwave/errors.hpp"
#include "degwave/operator.hpp"
#include "degwave/weighted_spaces.hpp"

namespace degwave {

struct WaveState {
    GridFunction y;
    GridFunction yt;
    double t = 0.0;
};

/// E = 1/2 [ |y_t|^2_{1/sigma} + int eta y_x^2 - lambda int y^2/(sigma d) ].
[[nodiscard]] inline double energy(const WaveState& s, double lambda) {
    return 0.5 * (inner_l2_sigma(s.yt, s.yt) + stiffness_form(s.y, s.y) - lambda * inner_singular(s.y, s.y));
}

[[nodiscard]] inline double energy(const WaveState& s) {
    return energy(s, s.y.grid->coefficients().lambda);
}

struct SimulationOptions {
    double dt_factor = 1.0;   ///< dt = dt_factor * h, then shrunk so that T / dt is an integer
    double energy_tol = 1e-8;
    std::size_t snapshot_every = 0;  ///< 0 disables intermediate snapshots
};

struct TimeGrid {
    std::size_t steps = 0;
    double dt = 0.0;
};

[[nodiscard]] inline TimeGrid make_time_grid(double h, double T, const SimulationOptions& opts = {}) {
    if (!(T > 0.0)) throw Error("final time must be positive");
    if (!(opts.dt_factor > 0.0)) throw Error("dt_factor must be positive");
    const double nominal = opts.dt_factor * h;
    const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(T / nominal - 1e-9)));
    return {m, T / static_cast<double>(m)};
}

struct Trajectory {
    double dt = 0.0;
    std::vector<double> times;
    std::vector<double> energy;
    std::vector<double> trace;       ///< y_x(t_k, 1), one-sided three-point difference
    std::vector<double> flux_trace;  ///< (y(t_k,1) - y_n(t_k)) / h, the trace that pairs exactly with the scheme
    std::vector<WaveState> snapshots;
    WaveState final_state;
    double max_relative_drift = 0.0;
    bool energy_drift_exceeded = false;

    [[nodiscard]] std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
};

/// One implicit-midpoint step of M y'' = -L y + c f e_n, where L is the
/// energy matrix and c the boundary coupling, written for (y, p = y').
///
///   (M + dt^2/4 L) y+ = (M - dt^2/4 L) y + dt M p + dt^2/2 c fbar e_n
///   p+ = p - dt/2 M^{-1} L (y + y+) + dt M^{-1} c fbar e_n
///
/// Negative dt runs the same map backward in time.
class MidpointStepper {
public:
    MidpointStepper(const DiscreteOperator& op, double dt)
        : op_(&op), dt_(dt), factor_(op.factor(1.0, 0.25 * dt * dt)), work_(op.size()), sum_(op.size()) {}

    [[nodiscard]] double dt() const { return dt_; }

    void advance(std::vector<double>& y, std::vector<double>& p, double fbar = 0.0) {
        const std::size_t n = y.size();
        const auto m = op_->mass();
        const auto& L = op_->energy_matrix();
        const double q = 0.25 * dt_ * dt_;
        L.apply(y, work_);
        for (std::size_t i = 0; i < n; ++i) sum_[i] = m[i] * y[i] - q * work_[i] + dt_ * m[i] * p[i];
        if (fbar != 0.0) sum_[n - 1] += 2.0 * q * op_->boundary_coupling() * fbar;
        factor_->solve_in_place(sum_);
        for (std::size_t i = 0; i < n; ++i) y[i] += sum_[i];
        L.apply(y, work_);
        for (std::size_t i = 0; i < n; ++i) p[i] -= 0.5 * dt_ * work_[i] / m[i];
        if (fbar != 0.0) p[n - 1] += dt_ * op_->boundary_coupling() * fbar / m[n - 1];
        for (std::size_t i = 0; i < n; ++i) y[i] = sum_[i];
    }

private:
    const DiscreteOperator* op_;
    double dt_;
    std::shared_ptr<const LdltFactor> factor_;
    std::vector<double> work_;
    std::vector<double> sum_;
};

/// One step from `state`; the boundary value at x = 1 is f_now at t and f_next at t + dt.
[[nodiscard]] inline WaveState step_midpoint(const WaveState& state, const DiscreteOperator& op, double dt,
                                             double f_now = 0.0, double f_next = 0.0) {
    op.check(state.y);
    op.check(state.yt);
    MidpointStepper stepper(op, dt);
    std::vector<double> y = state.y.values, p = state.yt.values;
    stepper.advance(y, p, 0.5 * (f_now + f_next));
    WaveState out{GridFunction(op.grid_ptr(), std::move(y), 0.0, f_next), GridFunction(op.grid_ptr(), std::move(p)),
                  state.t + dt};
    return out;
}

namespace detail {

inline double discrete_energy(const DiscreteOperator& op, std::span<const double> y, std::span<const double> p,
                              std::vector<double>& work) {
    const auto m = op.mass();
    op.energy_matrix().apply(y, work);
    double e = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) e += m[i] * p[i] * p[i] + y[i] * work[i];
    return 0.5 * e;
}

inline double trace3(std::span<const double> y, double boundary, double h) {
    const std::size_t n = y.size();
    return (3.0 * boundary - 4.0 * y[n - 1] + y[n - 2]) / (2.0 * h);
}

inline WaveState make_state(const DiscreteOperator& op, const std::vector<double>& y, const std::vector<double>& p,
                            double boundary, double t) {
    return {GridFunction(op.grid_ptr(), y, 0.0, boundary), GridFunction(op.grid_ptr(), p), t};
}

/// Shared driver of the homogeneous and the controlled runs. An empty `f`
/// means f = 0; adding the boundary term only where fbar != 0 keeps the two
/// runs bit-identical in that case.
inline Trajectory run(const DiscreteOperator& op, const GridFunction& y0, const GridFunction& y1,
                      std::span<const double> f, double T, const SimulationOptions& opts, double direction) {
    op.check(y0);
    op.check(y1);
    const TimeGrid tg = make_time_grid(op.grid().h(), T, opts);
    if (!f.empty() && f.size() != tg.steps + 1)
        throw GridMismatch("control samples do not match the time grid (" + std::to_string(tg.steps + 1) +
                           " expected)");
    const double h = op.grid().h();
    auto fval = [&](std::size_t k) { return f.empty() ? 0.0 : f[k]; };

    Trajectory tr;
    tr.dt = tg.dt;
    tr.times.reserve(tg.steps + 1);
    tr.energy.reserve(tg.steps + 1);
    tr.trace.reserve(tg.steps + 1);
    tr.flux_trace.reserve(tg.steps + 1);
    std::vector<double> y = y0.values, p = y1.values, work(op.size());
    MidpointStepper stepper(op, direction * tg.dt);

    auto record = [&](std::size_t k) {
        const double t = direction * static_cast<double>(k) * tg.dt;
        const double fb = fval(k);
        tr.times.push_back(t);
        tr.energy.push_back(discrete_energy(op, y, p, work));
        tr.trace.push_back(trace3(y, fb, h));
        tr.flux_trace.push_back((fb - y.back()) / h);
        if (opts.snapshot_every > 0 && k % opts.snapshot_every == 0) tr.snapshots.push_back(make_state(op, y, p, fb, t));
    };
    record(0);
    for (std::size_t k = 0; k < tg.steps; ++k) {
        const double fbar = 0.5 * (fval(k) + fval(k + 1));
        stepper.advance(y, p, fbar);
        record(k + 1);
    }
    tr.final_state = make_state(op, y, p, fval(tg.steps), direction * T);

    const double e0 = tr.energy.front();
    double drift = 0.0;
    for (double e : tr.energy) drift = std::max(drift, std::abs(e - e0));
    tr.max_relative_drift = e0 > 0.0 ? drift / e0 : drift;
    tr.energy_drift_exceeded = f.empty() && tr.max_relative_drift > opts.energy_tol;
    return tr;
}

}  // namespace detail

/// Homogeneous run on [0, T] from (y0, y1); the energy drift is checked
/// against opts.energy_tol and flagged, not thrown.
[[nodiscard]] inline Trajectory simulate_homogeneous(const DiscreteOperator& op, const GridFunction& y0,
                                                     const GridFunction& y1, double T,
                                                     const SimulationOptions& opts = {}) {
    return detail::run(op, y0, y1, {}, T, opts, 1.0);
}

/// Same scheme run toward negative times: returns the state at t = -T.
[[nodiscard]] inline Trajectory simulate_reversed(const DiscreteOperator& op, const GridFunction& y0,
                                                  const GridFunction& y1, double T,
                                                  const SimulationOptions& opts = {}) {
    return detail::run(op, y0, y1, {}, T, opts, -1.0);
}

/// Run with u(t,1) = f(t); f must hold one sample per time level.
[[nodiscard]] inline Trajectory simulate_controlled(const DiscreteOperator& op, const GridFunction& u0,
                                                    const GridFunction& u1, std::span<const double> f, double T,
                                                    const SimulationOptions& opts = {}) {
    if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; }))
        return detail::run(op, u0, u1, {}, T, opts, 1.0);
    return detail::run(op, u0, u1, f, T, opts, 1.0);
}

[[nodiscard]] inline std::vector<double> boundary_trace_extract(const Trajectory& tr) { return tr.trace; }

/// Trapezoid in time of a sampled series squared.
[[nodiscard]] inline double squared_integral(std::span<const double> s, double dt) {
    if (s.size() < 2) return 0.0;
    double acc = 0.5 * (s.front() * s.front() + s.back() * s.back());
    for (std::size_t k = 1; k + 1 < s.size(); ++k) acc += s[k] * s[k];
    return acc * dt;
}

/// int_0^T y_x(t,1)^2 dt.
[[nodiscard]] inline double trace_integral(const Trajectory& tr) { return squared_integral(tr.trace, tr.dt); }

struct LimitSeries {
    std::string name;
    std::array<double, 8> x{};
    std::array<double, 8> value{};
    double slope = 0.0;    ///< least-squares slope of log value against log x
    bool applicable = true;
    bool decays = true;    ///< value shrinks toward x = 0
};

struct BoundaryDiagnostics {
    double t = 0.0;
    std::vector<LimitSeries> series;
    [[nodiscard]] bool all_decay() const {
        return std::all_of(series.begin(), series.end(), [](const LimitSeries& s) { return !s.applicable || s.decays; });
    }
};

/// Evaluates (x/a) y^2, x^2/(a d) y^2, x^2 y_x^2 and x y_x^2 on the first
/// eight nodes. The last series is applicable when K_a <= 1, or when
/// K_a > 1 and x b / a is bounded.
[[nodiscard]] inline BoundaryDiagnostics boundary_diagnostics(const WaveState& s) {
    const Grid& g = *s.y.grid;
    const auto& set = g.coefficients();
    const std::size_t count = std::min<std::size_t>(8, g.size() - 1);
    const double h = g.h();
    const double K_a = degeneracy_exponent(set.a);
    const auto dc = drift_constants(set);
    const bool last_applicable = K_a <= 1.0 || dc.M_inf.has_value();

    BoundaryDiagnostics out;
    out.t = s.t;
    const char* names[4] = {"(x/a) y^2", "x^2/(a d) y^2", "x^2 y_x^2", "x y_x^2"};
    for (int q = 0; q < 4; ++q) {
        LimitSeries ls;
        ls.name = names[q];
        ls.applicable = q < 3 || last_applicable;
        for (std::size_t i = 0; i < count; ++i) {
            const double x = g.nodes()[i];
            const double y = s.y.values[i];
            const double yl = i == 0 ? s.y.left : s.y.values[i - 1];
            const double yx = (s.y.values[i + 1] - yl) / (2.0 * h);
            const double a = set.a.value_at(x), d = set.d.value_at(x);
            double v = 0.0;
            switch (q) {
                case 0: v = x / a * y * y; break;
                case 1: v = x * x / (a * d) * y * y; break;
                case 2: v = x * x * yx * yx; break;
                default: v = x * yx * yx; break;
            }
            ls.x[i] = x;
            ls.value[i] = v;
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < count; ++i) {
            if (!(ls.value[i] > 0.0)) continue;
            const double lx = std::log(ls.x[i]), ly = std::log(ls.value[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++used;
        }
        if (used >= 2) {
            const double nn = static_cast<double>(used);
            ls.slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
            ls.decays = ls.slope > 0.0;
        } else {
            ls.slope = 0.0;
            ls.decays = true;
        }
        out.series.push_back(ls);
    }
    return out;
}

/// Diagnostics at every snapshot of the trajectory, and at its final state.
[[nodiscard]] inline std::vector<BoundaryDiagnostics> boundary_diagnostics(const Trajectory& tr) {
    std::vector<BoundaryDiagnostics> out;
    for (const auto& s : tr.snapshots) out.push_back(boundary_diagnostics(s));
    out.push_back(boundary_diagnostics(tr.final_state));
    return out;
}

/// CSV with header t,E,"y_x(t,1)"; the last name is quoted because it holds a comma.
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "t,E,\"y_x(t,1)\"\n" << std::setprecision(17);
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        out << tr.times[k] << ',' << tr.energy[k] << ',' << tr.trace[k] << '\n';
}

namespace detail {
inline void put_le(std::ofstream& out, std::uint64_t bits) {
    unsigned char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
    out.write(reinterpret_cast<const char*>(buf), 8);
}
inline void put_f64(std::ofstream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
}  // namespace detail

/// Snapshot file layout (every field little-endian):
///
///   bytes 0..7   magic "DGWSNAP1"
///   uint64       n, interior node count
///   uint64       S, snapshot count
///   S records of (1 + 2 (n + 2)) float64:
///       t, y(x_0..x_{n+1}), y_t(x_0..x_{n+1})   with x_j = j / (n + 1)
inline void write_snapshots_bin(const std::filesystem::path& path, std::span<const WaveState> snaps) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write("DGWSNAP1", 8);
    const std::uint64_t n = snaps.empty() ? 0 : snaps.front().y.size();
    detail::put_le(out, n);
    detail::put_le(out, snaps.size());
    for (const auto& s : snaps) {
        detail::put_f64(out, s.t);
        for (const GridFunction* gf : {&s.y, &s.yt}) {
            detail::put_f64(out, gf->left);
            for (double v : gf->values) detail::put_f64(out, v);
            detail::put_f64(out, gf->right);
        }
    }
}

struct SnapshotFile {
    std::uint64_t n = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> y;   ///< n + 2 values each
    std::vector<std::vector<double>> yt;  ///< n + 2 values each
};

inline SnapshotFile read_snapshots_bin(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "DGWSNAP1", 8) != 0) throw Error("not a snapshot file: " + path.string());
    auto get = [&in]() {
        unsigned char buf[8];
        in.read(reinterpret_cast<char*>(buf), 8);
        if (!in) throw Error("truncated snapshot file");
        std::uint64_t v = 0;
        for (int b = 7; b >= 0; --b) v = (v << 8) | buf[b];
        return v;
    };
    SnapshotFile f;
    f.n = get();
    const std::uint64_t count = get();
    for (std::uint64_t s = 0; s < count; ++s) {
        f.times.push_back(std::bit_cast<double>(get()));
        for (auto* dest : {&f.y, &f.yt}) {
            std::vector<double> row(f.n + 2);
            for (double& v : row) v = std::bit_cast<double>(get());
            dest->push_back(std::move(row));
        }
    }
    return f;
}

}  // namespace degwave
