#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "degwave/evolution.hpp"
#include "oracles.hpp"

using namespace degwave;
using Catch::Approx;

namespace {

const CoefficientProfile kZero = CoefficientProfile::power(0.0, 0.0);
const double kPi = std::numbers::pi;

CoefficientSet unit_string() { return {CoefficientProfile::constant(1.0), kZero, CoefficientProfile::constant(1.0), 0.0}; }

// lambda given as a multiple of 1/C_HP on the grid
DiscreteOperator scaled_operator(std::size_t n, CoefficientSet set, double lambda_chp) {
    auto probe = Grid::build(n, set);
    set.lambda = lambda_chp / estimate_chp(*probe);
    return DiscreteOperator::assemble(Grid::build(n, set));
}

std::vector<std::pair<CoefficientSet, double>> evolution_sets() {
    return {
        {{CoefficientProfile::power(0.5), kZero, CoefficientProfile::power(0.5), 0.0}, 0.0},
        {{CoefficientProfile::power(0.5), kZero, CoefficientProfile::power(0.5), 0.0}, 0.5},
        {{CoefficientProfile::power(1.0), CoefficientProfile::power(1.0), CoefficientProfile::power(1.0), 0.0}, -1.0},
        {{CoefficientProfile::power(1.5), CoefficientProfile::power(0.6, 0.05), CoefficientProfile::power(0.15), 0.0}, 0.3},
        {unit_string(), 0.0},
    };
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

std::filesystem::path scratch_dir() {
    auto dir = std::filesystem::temp_directory_path() / "degwave_evolution_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("energy of the zero state", "[evolution]") {
    const auto g = Grid::build(40, unit_string());
    CHECK(energy(WaveState{GridFunction(g), GridFunction(g), 0.0}) == 0.0);
}

TEST_CASE("energy of a uniform velocity on the unit string", "[evolution]") {
    const auto g = Grid::build(100, unit_string());
    const WaveState s{GridFunction(g), GridFunction::sample_with_boundary(g, [](double) { return 1.0; }), 0.0};
    CHECK(energy(s) == Approx(0.5).epsilon(1e-13));
}

TEST_CASE("energy with a negative singular term against quadrature", "[evolution]") {
    // a = d = sqrt(x): sigma d = x, eta = 1
    const double stiff = oracle::integrate([](double x) { return (1 - 2 * x) * (1 - 2 * x); });
    const double sing = oracle::integrate([](double x) { return x * (1 - x) * (1 - x); });
    const double exact = 0.5 * (stiff + sing);
    REQUIRE(exact == Approx(5.0 / 24.0).epsilon(1e-14));
    const auto g = Grid::build(400, CoefficientSet{CoefficientProfile::power(0.5), kZero, CoefficientProfile::power(0.5), -1.0});
    const WaveState s{GridFunction::sample(g, [](double x) { return x * (1 - x); }), GridFunction(g), 0.0};
    CHECK(std::abs(energy(s) - exact) < 1e-4);
}

TEST_CASE("time grid divides the horizon", "[evolution]") {
    const auto tg = make_time_grid(0.01, 2.345);
    CHECK(tg.dt <= 0.01);
    CHECK(tg.dt * static_cast<double>(tg.steps) == Approx(2.345).epsilon(1e-14));
    CHECK_THROWS_AS(make_time_grid(0.01, 0.0), Error);
}

TEST_CASE("zero data stays at rest", "[evolution]") {
    const auto op = DiscreteOperator::assemble(Grid::build(50, evolution_sets()[0].first));
    const GridFunction z(op.grid_ptr());
    const auto tr = simulate_homogeneous(op, z, z, 1.0);
    CHECK(tr.final_state.y.is_zero());
    CHECK(tr.final_state.yt.is_zero());
    CHECK(max_abs(tr.energy) == 0.0);
    CHECK(max_abs(tr.trace) == 0.0);
    CHECK_FALSE(tr.energy_drift_exceeded);
}

TEST_CASE("one step keeps the energy", "[evolution]") {
    std::mt19937_64 rng(21);
    for (const auto& [set, lc] : evolution_sets()) {
        const auto op = scaled_operator(120, set, lc);
        WaveState s{oracle::random_smooth(op.grid_ptr(), rng), oracle::random_smooth(op.grid_ptr(), rng), 0.0};
        const double e0 = energy(s);
        for (int k = 0; k < 20; ++k) {
            s = step_midpoint(s, op, op.grid().h());
            CHECK(std::abs(energy(s) - e0) <= 1e-11 * e0);
        }
    }
}

TEST_CASE("energy is conserved over long runs", "[evolution]") {
    std::mt19937_64 rng(22);
    for (const auto& [set, lc] : evolution_sets()) {
        const auto op = scaled_operator(200, set, lc);
        const auto y0 = oracle::random_smooth(op.grid_ptr(), rng);
        const auto y1 = oracle::random_rough(op.grid_ptr(), rng);
        const auto tr = simulate_homogeneous(op, y0, y1, 5.0);
        CHECK(tr.max_relative_drift < 1e-10);
        CHECK_FALSE(tr.energy_drift_exceeded);
        if (op.lambda() <= 0.0) {
            for (double e : tr.energy) CHECK(e <= tr.energy.front() * (1.0 + 1e-11));
        }
    }
}

TEST_CASE("a step forward and back is the identity", "[evolution]") {
    std::mt19937_64 rng(23);
    const auto op = scaled_operator(100, evolution_sets()[3].first, 0.3);
    const WaveState s{oracle::random_smooth(op.grid_ptr(), rng), oracle::random_smooth(op.grid_ptr(), rng), 0.0};
    const double dt = op.grid().h();
    const auto back = step_midpoint(step_midpoint(s, op, dt), op, -dt);
    CHECK(max_abs_diff(back.y.values, s.y.values) < 1e-12 * max_abs(s.y.values));
    CHECK(max_abs_diff(back.yt.values, s.yt.values) < 1e-12 * max_abs(s.yt.values));
    CHECK(back.t == Approx(0.0).margin(1e-15));
}

TEST_CASE("reversed run returns to the initial data", "[evolution]") {
    std::mt19937_64 rng(24);
    for (const auto& [set, lc] : evolution_sets()) {
        const auto op = scaled_operator(150, set, lc);
        const auto y0 = oracle::random_smooth(op.grid_ptr(), rng);
        const auto y1 = oracle::random_smooth(op.grid_ptr(), rng);
        const auto fwd = simulate_homogeneous(op, y0, y1, 3.0);
        const auto bwd = simulate_reversed(op, fwd.final_state.y, fwd.final_state.yt, 3.0);
        CHECK(max_abs_diff(bwd.final_state.y.values, y0.values) < 1e-8 * max_abs(y0.values));
        CHECK(max_abs_diff(bwd.final_state.yt.values, y1.values) < 1e-8 * max_abs(y1.values));
        CHECK(bwd.final_state.t == Approx(-3.0));
    }
}

TEST_CASE("unit string returns after one period", "[evolution]") {
    double prev = 0.0;
    for (std::size_t n : {99, 199, 399}) {
        const auto op = DiscreteOperator::assemble(Grid::build(n, unit_string()));
        const auto y0 = GridFunction::sample(op.grid_ptr(), [](double x) { return std::sin(kPi * x); });
        const auto tr = simulate_homogeneous(op, y0, GridFunction(op.grid_ptr()), 2.0);
        const double err = max_abs_diff(tr.final_state.y.values, y0.values);
        CHECK(err < 2e-3);
        if (prev > 0.0) CHECK(err < 0.3 * prev);
        prev = err;
    }
}

TEST_CASE("unit string boundary trace follows the standing wave", "[evolution]") {
    // y = sin(pi x) cos(pi t): y_x(t, 1) = -pi cos(pi t)
    const auto op = DiscreteOperator::assemble(Grid::build(199, unit_string()));
    const auto y0 = GridFunction::sample(op.grid_ptr(), [](double x) { return std::sin(kPi * x); });
    const auto tr = simulate_homogeneous(op, y0, GridFunction(op.grid_ptr()), 2.0);
    double err = 0.0;
    for (std::size_t k = 0; k < tr.times.size(); ++k)
        err = std::max(err, std::abs(tr.trace[k] + kPi * std::cos(kPi * tr.times[k])));
    CHECK(err < 0.01);
    CHECK(trace_integral(tr) == Approx(kPi * kPi).epsilon(2e-3));
    CHECK(boundary_trace_extract(tr) == tr.trace);
}

TEST_CASE("degenerate boundary trace is mesh stable", "[evolution]") {
    const auto set = evolution_sets()[0].first;
    auto integral = [&](std::size_t n) {
        const auto op = DiscreteOperator::assemble(Grid::build(n, set));
        const auto y0 = GridFunction::sample(op.grid_ptr(), [](double x) { return x * std::sin(kPi * x); });
        const auto y1 = GridFunction::sample(op.grid_ptr(), [](double x) { return x * x * (1 - x); });
        return trace_integral(simulate_homogeneous(op, y0, y1, 2.0));
    };
    const double i1 = integral(200), i2 = integral(400);
    CHECK(i1 > 0.0);
    CHECK(std::abs(i2 - i1) / i2 < 0.01);
}

TEST_CASE("zero control reproduces the free run bit for bit", "[evolution]") {
    std::mt19937_64 rng(25);
    const auto op = scaled_operator(80, evolution_sets()[1].first, 0.5);
    const auto y0 = oracle::random_smooth(op.grid_ptr(), rng);
    const auto y1 = oracle::random_smooth(op.grid_ptr(), rng);
    const auto tg = make_time_grid(op.grid().h(), 1.5);
    const std::vector<double> f(tg.steps + 1, 0.0);
    const auto a = simulate_homogeneous(op, y0, y1, 1.5);
    const auto b = simulate_controlled(op, y0, y1, f, 1.5);
    CHECK(a.final_state.y.values == b.final_state.y.values);
    CHECK(a.final_state.yt.values == b.final_state.yt.values);
    CHECK(a.energy == b.energy);
    CHECK(a.trace == b.trace);
}

TEST_CASE("controlled runs superpose", "[evolution]") {
    std::mt19937_64 rng(26);
    const auto op = scaled_operator(80, evolution_sets()[2].first, -1.0);
    const auto y0 = oracle::random_smooth(op.grid_ptr(), rng);
    const auto y1 = oracle::random_smooth(op.grid_ptr(), rng);
    const GridFunction z(op.grid_ptr());
    const double T = 1.25;
    const auto tg = make_time_grid(op.grid().h(), T);
    std::vector<double> f(tg.steps + 1);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double t = static_cast<double>(k) * tg.dt;
        f[k] = std::sin(3.0 * t) * std::exp(-t);
    }
    const auto both = simulate_controlled(op, y0, y1, f, T);
    const auto data = simulate_homogeneous(op, y0, y1, T);
    const auto ctrl = simulate_controlled(op, z, z, f, T);
    const double size = max_abs(both.final_state.y.values) + 1.0;
    for (std::size_t i = 0; i < op.size(); ++i) {
        CHECK(std::abs(both.final_state.y.values[i] - data.final_state.y.values[i] - ctrl.final_state.y.values[i]) <
              1e-12 * size);
    }
    CHECK(both.final_state.y.right == f.back());
    CHECK_FALSE(ctrl.final_state.y.is_zero());
    const std::vector<double> wrong(f.size() + 1, 1.0);
    CHECK_THROWS_AS(simulate_controlled(op, z, z, wrong, T), GridMismatch);
}

TEST_CASE("boundary diagnostics of the zero state", "[evolution]") {
    const auto g = Grid::build(60, evolution_sets()[0].first);
    const auto d = boundary_diagnostics(WaveState{GridFunction(g), GridFunction(g), 0.0});
    REQUIRE(d.series.size() == 4);
    for (const auto& s : d.series) CHECK(max_abs(s.value) == 0.0);
    CHECK(d.all_decay());
}

TEST_CASE("boundary diagnostics decay for smooth states", "[evolution]") {
    for (std::size_t which : {0u, 3u}) {
        const auto g = Grid::build(400, evolution_sets()[which].first);
        const WaveState s{GridFunction::sample(g, [](double x) { return std::sin(kPi * x); }), GridFunction(g), 0.0};
        const auto d = boundary_diagnostics(s);
        CHECK(d.all_decay());
        for (const auto& ls : d.series) {
            CHECK(ls.applicable);
            CHECK(ls.slope > 0.5);
        }
    }
    // (x/a) y^2 with a = sqrt(x), y ~ pi x: slope 2.5
    const auto g = Grid::build(4000, evolution_sets()[0].first);
    const WaveState s{GridFunction::sample(g, [](double x) { return std::sin(kPi * x); }), GridFunction(g), 0.0};
    CHECK(boundary_diagnostics(s).series[0].slope == Approx(2.5).epsilon(0.01));
}

TEST_CASE("trajectory CSV header and row count", "[evolution]") {
    const auto op = DiscreteOperator::assemble(Grid::build(30, unit_string()));
    const auto y0 = GridFunction::sample(op.grid_ptr(), [](double x) { return std::sin(kPi * x); });
    const auto tr = simulate_homogeneous(op, y0, GridFunction(op.grid_ptr()), 0.5);
    const auto path = scratch_dir() / "traj.csv";
    write_trajectory_csv(path, tr);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,E,\"y_x(t,1)\"");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == tr.times.size());
}

TEST_CASE("snapshot file round trip and layout", "[evolution]") {
    std::mt19937_64 rng(27);
    const auto op = DiscreteOperator::assemble(Grid::build(25, evolution_sets()[0].first));
    SimulationOptions opts;
    opts.snapshot_every = 5;
    const auto tr = simulate_homogeneous(op, oracle::random_smooth(op.grid_ptr(), rng),
                                         oracle::random_smooth(op.grid_ptr(), rng), 1.0, opts);
    REQUIRE(tr.snapshots.size() >= 2);
    const auto path = scratch_dir() / "snap.bin";
    write_snapshots_bin(path, tr.snapshots);

    const std::size_t n = 25, S = tr.snapshots.size();
    CHECK(std::filesystem::file_size(path) == 24 + S * 8 * (1 + 2 * (n + 2)));

    std::ifstream raw(path, std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "DGWSNAP1");
    CHECK(bytes[8] == 25);
    for (int b = 9; b < 16; ++b) CHECK(bytes[b] == 0);
    CHECK(bytes[16] == S);

    const auto f = read_snapshots_bin(path);
    CHECK(f.n == n);
    REQUIRE(f.times.size() == S);
    for (std::size_t s = 0; s < S; ++s) {
        const auto& st = tr.snapshots[s];
        CHECK(f.times[s] == st.t);
        CHECK(f.y[s].front() == 0.0);
        CHECK(f.y[s].back() == st.y.right);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(f.y[s][i + 1] == st.y.values[i]);
            CHECK(f.yt[s][i + 1] == st.yt.values[i]);
        }
    }

    std::ofstream(scratch_dir() / "junk.bin") << "not a snapshot";
    CHECK_THROWS_AS(read_snapshots_bin(scratch_dir() / "junk.bin"), Error);
}
