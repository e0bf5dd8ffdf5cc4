#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "degwave/cli.hpp"

using namespace degwave;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

const std::filesystem::path kConfigs = DEGWAVE_CONFIG_DIR;

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "degwave_cli_test" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct Outcome {
    int code = -1;
    std::string output;
};

// Runs the built binary; stdout and stderr are captured together.
Outcome run_binary(const std::string& args, const std::filesystem::path& out_dir) {
    const auto log = out_dir / "console.log";
    const std::string cmd = std::string("\"") + DEGWAVE_BINARY + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    Outcome o;
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    o.output = ss.str();
    return o;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        bool quoted = false;
        for (char c : line) {
            if (c == '"') {
                quoted = !quoted;
            } else if (c == ',' && !quoted) {
                cells.push_back(cell);
                cell.clear();
            } else {
                cell += c;
            }
        }
        cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

RunConfig config(const std::string& name, const std::filesystem::path& out) {
    auto c = load_run_config(kConfigs / name);
    c.out_dir = out;
    return c;
}

}  // namespace

TEST_CASE("report on the square-root example", "[cli]") {
    const auto out = fresh_dir("report");
    const auto cfg = config("sqrt_degenerate.cfg", out);
    std::ostringstream log;
    CHECK(cmd_report(cfg, log) == kOk);
    CHECK_THAT(log.str(), ContainsSubstring("T0 = 6"));

    CoefficientSet set{cfg.a, cfg.b, cfg.d, 0.0};
    const double chp = estimate_chp(cfg.chp_n, set);
    const auto c = inverse_constants(degeneracy_report(set), chp, 0.0);
    const auto j = nlohmann::json::parse(slurp(out / "report.json"));
    CHECK(j["T0"].get<double>() == Approx(c.T0).epsilon(1e-12));
    CHECK(j["chp_used"].get<double>() == Approx(chp).epsilon(1e-12));
    CHECK(j["hypotheses"]["Hyp 2.4"]["pass"].get<bool>());
    CHECK(std::filesystem::exists(out / "report.txt"));
}

TEST_CASE("conservative flag switches to the closed-form bound", "[cli]") {
    const auto out = fresh_dir("conservative");
    const auto r = run_binary("report --conservative --config \"" + (kConfigs / "sqrt_degenerate.cfg").string() +
                                  "\" --out \"" + out.string() + "\"",
                              out);
    CHECK(r.code == 0);
    CHECK_THAT(r.output, ContainsSubstring("C_HP used = 4 (closed-form bound)"));
}

TEST_CASE("potential at the Hardy threshold is rejected", "[cli]") {
    const auto out = fresh_dir("threshold");
    const auto r = run_binary("report --config \"" + (kConfigs / "lambda_threshold.cfg").string() + "\" --out \"" +
                                  out.string() + "\"",
                              out);
    CHECK(r.code == 2);
    CHECK_THAT(r.output, ContainsSubstring("Hyp 2.4 failed"));
}

TEST_CASE("configuration errors exit with 1", "[cli]") {
    const auto out = fresh_dir("config_errors");
    for (const char* name : {"malformed.cfg", "unknown_key.cfg", "missing.cfg"}) {
        INFO(name);
        const auto r = run_binary("report --config \"" + (kConfigs / name).string() + "\" --out \"" + out.string() + "\"", out);
        CHECK(r.code == 1);
        CHECK_THAT(r.output, ContainsSubstring("config error"));
    }
    const auto budget = run_binary("observe --config \"" + (kConfigs / "budget_zero.cfg").string() + "\" --out \"" +
                                       out.string() + "\"",
                                   out);
    CHECK(budget.code == 1);
    CHECK(run_binary("report", out).code == 1);
    CHECK(run_binary("transform --config x.cfg", out).code == 1);
    CHECK(run_binary("report --config \"" + (kConfigs / "sqrt_degenerate.cfg").string() + "\" --tol -1", out).code == 1);
    // nothing was solved
    CHECK_FALSE(std::filesystem::exists(out / "report.txt"));
}

TEST_CASE("zero data simulates to an empty trace", "[cli]") {
    const auto out = fresh_dir("zero_sim");
    std::ostringstream log;
    CHECK(cmd_simulate(config("zero_data.cfg", out), log) == kOk);
    const auto rows = read_csv(out / "trajectory.csv");
    REQUIRE(rows.size() > 2);
    CHECK(rows[0] == std::vector<std::string>{"t", "E", "y_x(t,1)"});
    for (std::size_t k = 1; k < rows.size(); ++k) {
        CHECK(std::stod(rows[k][1]) == 0.0);
        CHECK(std::stod(rows[k][2]) == 0.0);
    }
}

TEST_CASE("simulate reports recurrence and conservation", "[cli]") {
    const auto out = fresh_dir("sim");
    std::ostringstream log;
    CHECK(cmd_simulate(config("classical_string.cfg", out), log) == kOk);
    CHECK_THAT(log.str(), ContainsSubstring("recurrence |y(2) - y0| / |y0|"));

    auto degenerate = config("sqrt_degenerate.cfg", out);
    degenerate.snapshot_every = 100;
    std::ostringstream log2;
    CHECK(cmd_simulate(degenerate, log2) == kOk);
    const auto rows = read_csv(out / "trajectory.csv");
    const double e0 = std::stod(rows[1][1]);
    for (std::size_t k = 1; k < rows.size(); ++k) CHECK(std::abs(std::stod(rows[k][1]) - e0) <= 1e-8 * e0);
    const auto snaps = read_snapshots_bin(out / "snapshots.bin");
    CHECK(snaps.n == degenerate.n);
    CHECK(snaps.times.back() == Approx(12.0));
}

TEST_CASE("energy tolerance override flags drift", "[cli]") {
    const auto out = fresh_dir("drift");
    const auto r = run_binary("simulate --tol 1e-300 --config \"" + (kConfigs / "sqrt_degenerate.cfg").string() +
                                  "\" --out \"" + out.string() + "\"",
                              out);
    CHECK(r.code == 2);
    CHECK_THAT(r.output, ContainsSubstring("energy drift exceeds tolerance"));
}

TEST_CASE("observe below T0 skips the suite", "[cli]") {
    const auto out = fresh_dir("observe_short");
    auto cfg = config("sqrt_degenerate.cfg", out);
    cfg.T = 3.0;
    cfg.ct_samples = 8;
    std::ostringstream log;
    CHECK(cmd_observe(cfg, log) == kOk);
    CHECK_THAT(log.str(), ContainsSubstring("TimeTooShort"));
}

TEST_CASE("observe at twice T0 logs the margins", "[cli]") {
    const auto out = fresh_dir("observe");
    auto cfg = config("sqrt_degenerate.cfg", out);
    cfg.suite_runs = 10;
    cfg.ct_samples = 16;
    std::ostringstream log;
    CHECK(cmd_observe(cfg, log) == kOk);
    CHECK_THAT(log.str(), ContainsSubstring("min inverse margin"));
    const auto rows = read_csv(out / "margins.csv");
    REQUIRE(rows.size() == 11);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        CHECK(std::stod(rows[k][1]) > 0.0);
        CHECK(std::stod(rows[k][2]) > 0.0);
    }
}

TEST_CASE("zero data needs the zero control", "[cli]") {
    const auto out = fresh_dir("zero_control");
    std::ostringstream log;
    CHECK(cmd_control(config("zero_data.cfg", out), log) == kOk);
    const auto rows = read_csv(out / "control.csv");
    REQUIRE(rows.size() > 2);
    CHECK(rows[0] == std::vector<std::string>{"t", "f"});
    for (std::size_t k = 1; k < rows.size(); ++k) CHECK(std::stod(rows[k][1]) == 0.0);
}

TEST_CASE("classical string control meets its tolerance", "[cli]") {
    const auto out = fresh_dir("string_control");
    const auto r = run_binary("control --config \"" + (kConfigs / "classical_string.cfg").string() + "\" --out \"" +
                                  out.string() + "\"",
                              out);
    CHECK(r.code == 0);
    CHECK_THAT(r.output, ContainsSubstring("converged = yes"));
    const auto tight = run_binary("control --tol 1e-9 --config \"" + (kConfigs / "classical_string.cfg").string() +
                                      "\" --out \"" + out.string() + "\"",
                                  out);
    CHECK(tight.code == 2);
    CHECK_THAT(tight.output, ContainsSubstring("final norm exceeds tolerance"));
}

TEST_CASE("short horizon raises the coercivity warning", "[cli]") {
    const auto out = fresh_dir("short_control");
    std::ostringstream log;
    cmd_control(config("short_horizon.cfg", out), log);
    CHECK_THAT(log.str(), ContainsSubstring("CoercivityWarning"));
}

TEST_CASE("single-cell sweep matches the report", "[cli]") {
    const auto out = fresh_dir("sweep1");
    auto cfg = config("sqrt_degenerate.cfg", out);
    std::ostringstream log;
    CHECK(cmd_sweep(cfg, log) == kOk);
    const auto rows = read_csv(out / "sweep.csv");
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].size() == rows[1].size());
    CHECK(cmd_report(cfg, log) == kOk);
    const auto j = nlohmann::json::parse(slurp(out / "report.json"));
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < rows[0].size(); ++i)
            if (rows[0][i] == name) return std::stod(rows[1][i]);
        FAIL("missing column " << name);
        return 0.0;
    };
    for (const char* key : {"T0", "C1", "C2", "C3", "C4", "C5", "C6"}) {
        INFO(key);
        CHECK(col(key) == Approx(j[key].get<double>()).epsilon(1e-10));
    }
    CHECK(col("chp") == Approx(j["chp_used"].get<double>()).epsilon(1e-10));
    CHECK(rows[1].back() == "ok");
}

TEST_CASE("two by two sweep emits four rows", "[cli]") {
    const auto out = fresh_dir("sweep4");
    std::ostringstream log;
    CHECK(cmd_sweep(config("sweep_2x2.cfg", out), log) == kOk);
    const auto rows = read_csv(out / "sweep.csv");
    REQUIRE(rows.size() == 5);
    for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k].size() == rows[0].size());
    CHECK(std::stod(rows[1][0]) == 0.3);
    CHECK(std::stod(rows[3][0]) == 0.6);
    CHECK(std::stod(rows[1][3]) == -0.5);
    CHECK(std::stod(rows[2][3]) == 0.5);
}

TEST_CASE("T0 stays finite across the admissible potential window", "[cli]") {
    const auto out = fresh_dir("sweep_lambda");
    std::ostringstream log;
    CHECK(cmd_sweep(config("sweep_lambda.cfg", out), log) == kOk);
    const auto rows = read_csv(out / "sweep.csv");
    REQUIRE(rows.size() == 6);
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double T0 = std::stod(rows[k][6]);
        CHECK(std::isfinite(T0));
        CHECK(T0 > 0.0);
    }
}

TEST_CASE("identical configuration and seed give identical files", "[cli]") {
    const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
    for (const auto& dir : {a, b}) {
        auto cfg = config("sqrt_degenerate.cfg", dir);
        cfg.u0.kind = "random";
        cfg.seed = 99;
        cfg.suite_runs = 6;
        cfg.ct_samples = 12;
        std::ostringstream log;
        CHECK(cmd_simulate(cfg, log) == kOk);
        CHECK(cmd_observe(cfg, log) == kOk);
        CHECK(cmd_sweep(config("sweep_2x2.cfg", dir), log) == kOk);
    }
    for (const char* file : {"trajectory.csv", "margins.csv", "sweep.csv"}) {
        INFO(file);
        CHECK(slurp(a / file) == slurp(b / file));
        CHECK_FALSE(slurp(a / file).empty());
    }
    auto other = config("sqrt_degenerate.cfg", fresh_dir("det_c"));
    other.u0.kind = "random";
    other.seed = 100;
    std::ostringstream log;
    CHECK(cmd_simulate(other, log) == kOk);
    CHECK(slurp(a / "trajectory.csv") != slurp(other.out_dir / "trajectory.csv"));
}
