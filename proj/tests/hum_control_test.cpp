#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "degwave/hum_control.hpp"
#include "oracles.hpp"

using namespace degwave;
using Catch::Approx;

namespace {

const CoefficientProfile kZero = CoefficientProfile::power(0.0, 0.0);
const double kPi = std::numbers::pi;

CoefficientSet sqrt_set(double lambda = 0.0) {
    return {CoefficientProfile::power(0.5), kZero, CoefficientProfile::power(0.5), lambda};
}

CoefficientSet unit_string() { return {CoefficientProfile::constant(1.0), kZero, CoefficientProfile::constant(1.0), 0.0}; }

FinalData random_final(const GridPtr& g, std::mt19937_64& rng) {
    return {oracle::random_smooth(g, rng), oracle::random_smooth(g, rng)};
}

double weighted_norm(const DiscreteOperator& op, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += op.mass()[i] * y[i] * y[i];
    return std::sqrt(s);
}

struct DegenerateCase {
    GridPtr grid;
    DiscreteOperator op;
    ObservabilityConstants constants;
    double T;
};

// a = d = sqrt(x), lambda = 0.1 / C_HP, T = 1.5 T0
DegenerateCase degenerate_case(std::size_t n) {
    const auto probe = Grid::build(n, sqrt_set());
    const double chp = estimate_chp(*probe);
    const double lambda = 0.1 / chp;
    auto grid = Grid::build(n, sqrt_set(lambda));
    auto op = DiscreteOperator::assemble(grid);
    const auto c = inverse_constants(degeneracy_report(sqrt_set(lambda)), chp, lambda);
    return {grid, std::move(op), c, 1.5 * c.T0};
}

GridFunction bump(const GridPtr& g) {
    return GridFunction::sample(g, [](double x) { return x * std::sin(kPi * x); });
}

}  // namespace

TEST_CASE("observation form vanishes against zero data", "[hum_control]") {
    std::mt19937_64 rng(1);
    const auto op = DiscreteOperator::assemble(Grid::build(60, sqrt_set()));
    const HumProblem hum(op, 2.0);
    const auto V = random_final(op.grid_ptr(), rng);
    CHECK(hum.lambda_form(V, FinalData::zeros(op.grid_ptr())) == 0.0);
    CHECK(hum.lambda_form(V, V) > 0.0);
}

TEST_CASE("observation form is symmetric", "[hum_control]") {
    std::mt19937_64 rng(2);
    const auto op = DiscreteOperator::assemble(Grid::build(60, sqrt_set()));
    for (int t = 0; t < 10; ++t) {
        const auto V = random_final(op.grid_ptr(), rng);
        const auto W = random_final(op.grid_ptr(), rng);
        const double vw = lambda_form(op, V, W, 3.0);
        const double wv = lambda_form(op, W, V, 3.0);
        const double size = std::sqrt(lambda_form(op, V, V, 3.0) * lambda_form(op, W, W, 3.0));
        CHECK(std::abs(vw - wv) <= 1e-12 * size);
        CHECK(std::abs(vw) <= size * (1.0 + 1e-12));
    }
}

TEST_CASE("data functional is linear", "[hum_control]") {
    std::mt19937_64 rng(3);
    const auto op = DiscreteOperator::assemble(Grid::build(60, sqrt_set()));
    const auto u0 = oracle::random_smooth(op.grid_ptr(), rng);
    const auto u1 = oracle::random_smooth(op.grid_ptr(), rng);
    const auto V = random_final(op.grid_ptr(), rng);
    const auto W = random_final(op.grid_ptr(), rng);
    const FinalData sum{V.v0 + 2.0 * W.v0, V.v1 + 2.0 * W.v1};
    const double lhs = rhs_functional(op, sum, u0, u1, 2.0);
    const double rhs = rhs_functional(op, V, u0, u1, 2.0) + 2.0 * rhs_functional(op, W, u0, u1, 2.0);
    CHECK(lhs == Approx(rhs).margin(1e-12 * (std::abs(lhs) + 1.0)));
    CHECK(rhs_functional(op, V, GridFunction(op.grid_ptr()), GridFunction(op.grid_ptr()), 2.0) == 0.0);
}

TEST_CASE("backward solve hits the final data", "[hum_control]") {
    std::mt19937_64 rng(4);
    const auto op = DiscreteOperator::assemble(Grid::build(80, sqrt_set()));
    const auto V = random_final(op.grid_ptr(), rng);
    const auto v = solve_backward(op, V, 2.5);
    CHECK(v.final_state.t == 0.0);
    const auto fwd = simulate_homogeneous(op, v.final_state.y, v.final_state.yt, 2.5);
    for (std::size_t i = 0; i < op.size(); ++i) {
        CHECK(fwd.final_state.y.values[i] == Approx(V.v0.values[i]).margin(1e-9));
        CHECK(fwd.final_state.yt.values[i] == Approx(V.v1.values[i]).margin(1e-9));
    }
    CHECK(v.trace.back() == Approx(fwd.trace.back()).margin(1e-9));
}

TEST_CASE("zero data needs no control", "[hum_control]") {
    const auto op = DiscreteOperator::assemble(Grid::build(50, sqrt_set()));
    const GridFunction z(op.grid_ptr());
    const auto res = solve_hum(op, z, z, 8.0);
    CHECK(res.iterations == 0);
    CHECK(res.converged);
    CHECK(res.f.size() == res.times.size());
    for (double v : res.f) CHECK(v == 0.0);
    CHECK(res.relative_final_norm() == 0.0);
}

TEST_CASE("degenerate null control is accurate and optimal", "[hum_control]") {
    const auto dc = degenerate_case(100);
    const auto u0 = bump(dc.grid);
    const GridFunction u1(dc.grid);
    HumOptions opts;
    opts.T0 = dc.constants.T0;
    const auto res = solve_hum(dc.op, u0, u1, dc.T, opts);
    CHECK(res.converged);
    CHECK_FALSE(res.coercivity_warning);
    CHECK(res.relative_final_norm() < 1e-6);
    CHECK(res.transposition_residual <= 1e-2);

    // the control applied through the plain evolution leaves the string at rest
    const auto run = simulate_controlled(dc.op, u0, u1, res.f, dc.T);
    CHECK(weighted_norm(dc.op, run.final_state.y.values) < 1e-6 * weighted_norm(dc.op, u0.values));
    CHECK(run.final_state.y.right == res.f.back());

    // stationarity: Lambda(V, W) = L(W) for every W
    const HumProblem hum(dc.op, dc.T);
    std::mt19937_64 rng(5);
    for (int q = 0; q < 20; ++q) {
        const auto W = random_final(dc.grid, rng);
        const double a = hum.lambda_form(res.optimal, W);
        const double l = hum.rhs_functional(W, u0, u1);
        CHECK(std::abs(a - l) <= 1e-6 * (std::abs(a) + std::abs(l)));
    }

    for (std::size_t k = 1; k < res.objective.size(); ++k)
        CHECK(res.objective[k] <= res.objective[k - 1] + 1e-12 * std::abs(res.objective[k - 1]));
    CHECK(res.objective.back() < 0.0);
}

TEST_CASE("controls are stable under mesh refinement", "[hum_control]") {
    const auto coarse = degenerate_case(100);
    const auto fine = degenerate_case(200);
    HumOptions opts;
    opts.T0 = coarse.constants.T0;
    const auto a = solve_hum(coarse.op, bump(coarse.grid), GridFunction(coarse.grid), coarse.T, opts);
    const auto b = solve_hum(fine.op, bump(fine.grid), GridFunction(fine.grid), fine.T, opts);
    CHECK(control_relative_difference(a, b) <= 0.05);
    CHECK(control_relative_difference(a, a) < 1e-14);
    CHECK(b.relative_final_norm() <= 1e-2);
}

TEST_CASE("classical string is driven to rest", "[hum_control]") {
    const auto op = DiscreteOperator::assemble(Grid::build(200, unit_string()));
    const auto u0 = GridFunction::sample(op.grid_ptr(), [](double x) { return std::sin(kPi * x); });
    HumOptions opts;
    opts.tol = 1e-3;
    opts.max_iter = 200;
    const auto res = solve_hum(op, u0, GridFunction(op.grid_ptr()), 3.0, opts);
    CHECK(res.iterations <= 200);
    CHECK(res.relative_final_norm() <= 1e-3);
    CHECK(res.cg_residuals[res.best_iteration] == Approx(*std::min_element(res.cg_residuals.begin(), res.cg_residuals.end())));
}

TEST_CASE("verification of the zero control reports the free evolution", "[hum_control]") {
    std::mt19937_64 rng(6);
    const auto op = DiscreteOperator::assemble(Grid::build(80, sqrt_set()));
    const auto u0 = oracle::random_smooth(op.grid_ptr(), rng);
    const GridFunction u1(op.grid_ptr());
    const double T = 4.0;
    const HumProblem hum(op, T);
    const std::vector<double> f(hum.time_grid().steps + 1, 0.0);
    const auto chk = hum.verify(f, u0, u1);
    const auto free = simulate_homogeneous(op, u0, u1, T);
    CHECK(chk.final_y_norm == Approx(weighted_norm(op, free.final_state.y.values)).epsilon(1e-12));
    CHECK(chk.initial_y_norm == Approx(weighted_norm(op, u0.values)).epsilon(1e-12));
    CHECK(chk.initial_yt_norm == 0.0);
    CHECK(chk.transposition_residual < 1e-10);
}

TEST_CASE("short horizons raise the coercivity warning", "[hum_control]") {
    const auto dc = degenerate_case(60);
    HumOptions opts;
    opts.T0 = dc.constants.T0;
    opts.max_iter = 30;
    const auto short_run = solve_hum(dc.op, bump(dc.grid), GridFunction(dc.grid), 0.5 * dc.constants.T0, opts);
    CHECK(short_run.coercivity_warning);
    HumOptions unknown;
    unknown.max_iter = 5;
    CHECK(solve_hum(dc.op, bump(dc.grid), GridFunction(dc.grid), dc.T, unknown).coercivity_warning);
}
