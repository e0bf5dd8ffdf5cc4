#pragma once

// Run configuration: a flat "key = value" text file with [section] headers
// or dotted keys. Values are numbers, booleans, quoted strings, inline
// tables {k=v, ...} and arrays [v, ...]. Every key must be known.
//
//   [coefficients]
//   a = {kind="power", K=0.5, scale=1.0}
//   d = {kind="tabulated", path="d.csv", interp="loglog"}
//   lambda_chp = 0.1
//
//   grid.n = 200

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "degwave/coefficients.hpp"
#include "degwave/errors.hpp"
#include "degwave/observability.hpp"

namespace degwave {

struct ConfigValue;
using ConfigTable = std::map<std::string, ConfigValue>;
using ConfigArray = std::vector<ConfigValue>;

struct ConfigValue {
    std::variant<double, bool, std::string, std::shared_ptr<ConfigTable>, std::shared_ptr<ConfigArray>> v;
    int line = 0;

    [[nodiscard]] const char* type_name() const {
        static constexpr const char* names[] = {"number", "boolean", "string", "table", "array"};
        return names[v.index()];
    }
};

namespace detail {

class ConfigLexer {
public:
    ConfigLexer(std::string text, int line) : s_(std::move(text)), line_(line) {}

    ConfigValue value() {
        skip();
        if (at_end()) fail("missing value");
        const char c = s_[pos_];
        ConfigValue out;
        out.line = line_;
        if (c == '"') {
            out.v = string();
        } else if (c == '{') {
            ++pos_;
            auto table = std::make_shared<ConfigTable>();
            skip();
            if (peek() == '}') {
                ++pos_;
            } else {
                for (;;) {
                    const std::string key = bare_key();
                    skip();
                    expect('=');
                    if (table->count(key)) fail("duplicate key '" + key + "' in inline table");
                    (*table)[key] = value();
                    skip();
                    if (peek() == ',') {
                        ++pos_;
                        continue;
                    }
                    expect('}');
                    break;
                }
            }
            out.v = table;
        } else if (c == '[') {
            ++pos_;
            auto arr = std::make_shared<ConfigArray>();
            skip();
            if (peek() == ']') {
                ++pos_;
            } else {
                for (;;) {
                    arr->push_back(value());
                    skip();
                    if (peek() == ',') {
                        ++pos_;
                        continue;
                    }
                    expect(']');
                    break;
                }
            }
            out.v = arr;
        } else {
            std::size_t end = pos_;
            while (end < s_.size() && s_[end] != ',' && s_[end] != '}' && s_[end] != ']' &&
                   !std::isspace(static_cast<unsigned char>(s_[end])))
                ++end;
            const std::string tok = s_.substr(pos_, end - pos_);
            pos_ = end;
            if (tok == "true" || tok == "false") {
                out.v = tok == "true";
            } else {
                std::size_t used = 0;
                double d = 0.0;
                try {
                    d = std::stod(tok, &used);
                } catch (const std::exception&) {
                    fail("cannot parse value '" + tok + "'");
                }
                if (used != tok.size() || !std::isfinite(d)) fail("cannot parse value '" + tok + "'");
                out.v = d;
            }
        }
        return out;
    }

    void finish() {
        skip();
        if (!at_end()) fail("unexpected trailing text '" + s_.substr(pos_) + "'");
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("line " + std::to_string(line_) + ": " + msg);
    }
    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }
    void skip() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    void expect(char c) {
        skip();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }
    std::string string() {
        ++pos_;
        std::string out;
        while (!at_end() && s_[pos_] != '"') {
            if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
            out += s_[pos_++];
        }
        if (at_end()) fail("unterminated string");
        ++pos_;
        return out;
    }
    std::string bare_key() {
        skip();
        std::size_t end = pos_;
        while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) ++end;
        if (end == pos_) fail("expected a key");
        std::string k = s_.substr(pos_, end - pos_);
        pos_ = end;
        return k;
    }

    std::string s_;
    std::size_t pos_ = 0;
    int line_;
};

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (!quoted && line[i] == '#') return line.substr(0, i);
    }
    return line;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parsed file: dotted key -> value, with a record of which keys were read.
class ConfigDocument {
public:
    static ConfigDocument parse(const std::string& text) {
        ConfigDocument doc;
        std::istringstream in(text);
        std::string raw, section;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            const std::string s = detail::trim(detail::strip_comment(raw));
            if (s.empty()) continue;
            if (s.front() == '[' && s.find('=') == std::string::npos) {
                if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": malformed section header");
                section = detail::trim(s.substr(1, s.size() - 2));
                if (section.empty()) throw ConfigError("line " + std::to_string(line) + ": empty section name");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
            const std::string key = detail::trim(s.substr(0, eq));
            if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": missing key");
            for (char c : key)
                if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
                    throw ConfigError("line " + std::to_string(line) + ": invalid key '" + key + "'");
            const std::string full = section.empty() ? key : section + "." + key;
            detail::ConfigLexer lex(s.substr(eq + 1), line);
            ConfigValue v = lex.value();
            lex.finish();
            if (doc.values_.count(full)) throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + full + "'");
            doc.values_[full] = std::move(v);
        }
        return doc;
    }

    static ConfigDocument load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        auto doc = parse(ss.str());
        doc.base_ = path.parent_path();
        return doc;
    }

    [[nodiscard]] const ConfigValue* find(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return nullptr;
        used_.insert(key);
        return &it->second;
    }

    [[nodiscard]] double number(const std::string& key, double fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        return as_number(*v, key);
    }
    [[nodiscard]] std::optional<double> optional_number(const std::string& key) const {
        const auto* v = find(key);
        if (!v) return std::nullopt;
        return as_number(*v, key);
    }
    [[nodiscard]] bool boolean(const std::string& key, bool fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (const auto* b = std::get_if<bool>(&v->v)) return *b;
        throw ConfigError(key + ": expected a boolean, got " + v->type_name());
    }
    [[nodiscard]] std::string string(const std::string& key, const std::string& fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (const auto* s = std::get_if<std::string>(&v->v)) return *s;
        throw ConfigError(key + ": expected a string, got " + v->type_name());
    }
    [[nodiscard]] std::optional<std::vector<double>> numbers(const std::string& key) const {
        const auto* v = find(key);
        if (!v) return std::nullopt;
        std::vector<double> out;
        if (const auto* arr = std::get_if<std::shared_ptr<ConfigArray>>(&v->v)) {
            for (const auto& e : **arr) out.push_back(as_number(e, key));
        } else {
            out.push_back(as_number(*v, key));
        }
        if (out.empty()) throw ConfigError(key + ": empty array");
        return out;
    }

    /// Keys present in the file but never read.
    [[nodiscard]] std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

    [[nodiscard]] const std::filesystem::path& base_dir() const { return base_; }

    static double as_number(const ConfigValue& v, const std::string& key) {
        if (const auto* d = std::get_if<double>(&v.v)) return *d;
        throw ConfigError(key + ": expected a number, got " + v.type_name());
    }

private:
    std::map<std::string, ConfigValue> values_;
    mutable std::set<std::string> used_;
    std::filesystem::path base_;
};

/// Initial-data description for simulate and control runs.
struct DataSpec {
    std::string kind = "zero";  ///< zero | sine | bump | csv | random
    double mode = 1.0;
    double amplitude = 1.0;
    double center = 0.3;
    double width = 0.1;
    std::filesystem::path path;
};

[[nodiscard]] inline DataSpec sine_data() {
    DataSpec d;
    d.kind = "sine";
    return d;
}

struct RunConfig {
    CoefficientProfile a = CoefficientProfile::power(0.5);
    CoefficientProfile b = CoefficientProfile::power(0.0, 0.0);
    CoefficientProfile d = CoefficientProfile::power(0.5);
    std::optional<double> lambda;      ///< absolute lambda
    std::optional<double> lambda_chp;  ///< lambda = lambda_chp / C_HP
    double drift_cap = 1e6;

    std::size_t n = 200;
    double dt_factor = 1.0;

    std::optional<double> T;
    double T_factor = 2.0;

    std::size_t chp_n = 2048;
    bool chp_extrapolate = false;

    DataSpec u0 = sine_data();
    DataSpec u1{};

    double energy_tol = 1e-8;
    double inequality_tol = 0.02;
    double cg_tol = 1e-8;
    double control_tol = 1e-3;
    std::size_t max_iter = 500;

    std::size_t ct_samples = 256;
    std::size_t ct_sweeps = 64;
    std::size_t suite_runs = 100;
    Sampler sampler = Sampler::Mixed;

    std::size_t snapshot_every = 0;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 0;
    bool conservative = false;

    std::optional<std::vector<double>> sweep_K_a, sweep_K_d, sweep_lambda_chp, sweep_T_factor;
};

namespace detail {

inline CoefficientProfile parse_profile(const ConfigDocument& doc, const std::string& key,
                                        const CoefficientProfile& fallback) {
    const auto* v = doc.find(key);
    if (!v) return fallback;
    if (const auto* num = std::get_if<double>(&v->v)) return CoefficientProfile::constant(*num);
    const auto* tp = std::get_if<std::shared_ptr<ConfigTable>>(&v->v);
    if (!tp) throw ConfigError(key + ": expected an inline table such as {kind=\"power\", K=0.5, scale=1.0}");
    const ConfigTable& t = **tp;
    auto str = [&](const char* k, const std::string& def) {
        const auto it = t.find(k);
        if (it == t.end()) return def;
        if (const auto* s = std::get_if<std::string>(&it->second.v)) return *s;
        throw ConfigError(key + "." + k + ": expected a string");
    };
    auto num = [&](const char* k, double def) {
        const auto it = t.find(k);
        if (it == t.end()) return def;
        return ConfigDocument::as_number(it->second, key + "." + k);
    };
    const std::string kind = str("kind", "");
    std::set<std::string> allowed{"kind"};
    CoefficientProfile out;
    try {
        if (kind == "power") {
            allowed.insert({"K", "scale"});
            out = CoefficientProfile::power(num("K", 0.0), num("scale", 1.0));
        } else if (kind == "constant") {
            allowed.insert("value");
            out = CoefficientProfile::constant(num("value", 1.0));
        } else if (kind == "tabulated") {
            allowed.insert({"path", "interp"});
            const std::string interp = str("interp", "loglog");
            if (interp != "loglog" && interp != "linear") throw ConfigError(key + ".interp must be \"loglog\" or \"linear\"");
            std::filesystem::path p = str("path", "");
            if (p.empty()) throw ConfigError(key + ".path is required for tabulated profiles");
            if (p.is_relative()) p = doc.base_dir() / p;
            out = CoefficientProfile::load_csv(p, interp == "linear" ? Interpolation::Linear : Interpolation::LogLog);
        } else {
            throw ConfigError(key + ".kind must be \"power\", \"constant\" or \"tabulated\"");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(key + ": " + e.what());
    }
    for (const auto& [k, _] : t)
        if (!allowed.count(k)) throw ConfigError(key + ": unknown field '" + k + "'");
    return out;
}

inline DataSpec parse_data(const ConfigDocument& doc, const std::string& key, DataSpec fallback) {
    const auto* v = doc.find(key);
    if (!v) return fallback;
    const auto* tp = std::get_if<std::shared_ptr<ConfigTable>>(&v->v);
    if (!tp) throw ConfigError(key + ": expected an inline table such as {kind=\"sine\", mode=1}");
    DataSpec d;
    std::set<std::string> allowed{"kind"};
    const ConfigTable& t = **tp;
    auto num = [&](const char* k, double def) {
        const auto it = t.find(k);
        if (it == t.end()) return def;
        return ConfigDocument::as_number(it->second, key + "." + k);
    };
    const auto kit = t.find("kind");
    if (kit == t.end() || !std::holds_alternative<std::string>(kit->second.v))
        throw ConfigError(key + ".kind is required");
    d.kind = std::get<std::string>(kit->second.v);
    if (d.kind == "zero") {
    } else if (d.kind == "sine") {
        allowed.insert({"mode", "amplitude"});
        d.mode = num("mode", 1.0);
        d.amplitude = num("amplitude", 1.0);
        if (d.mode < 1.0 || d.mode != std::floor(d.mode)) throw ConfigError(key + ".mode must be a positive integer");
    } else if (d.kind == "bump") {
        allowed.insert({"center", "width", "amplitude"});
        d.center = num("center", 0.3);
        d.width = num("width", 0.1);
        d.amplitude = num("amplitude", 1.0);
        if (!(d.width > 0.0) || d.center - d.width < 0.0 || d.center + d.width > 1.0)
            throw ConfigError(key + ": bump support must lie inside [0,1]");
    } else if (d.kind == "random") {
        allowed.insert("amplitude");
        d.amplitude = num("amplitude", 1.0);
    } else if (d.kind == "csv") {
        allowed.insert("path");
        const auto pit = t.find("path");
        if (pit == t.end() || !std::holds_alternative<std::string>(pit->second.v))
            throw ConfigError(key + ".path is required for csv data");
        d.path = std::get<std::string>(pit->second.v);
        if (d.path.is_relative()) d.path = doc.base_dir() / d.path;
    } else {
        throw ConfigError(key + ".kind must be zero, sine, bump, random or csv");
    }
    for (const auto& [k, _] : t)
        if (!allowed.count(k)) throw ConfigError(key + ": unknown field '" + k + "'");
    return d;
}

inline std::size_t positive_count(const ConfigDocument& doc, const std::string& key, std::size_t fallback,
                                  std::size_t minimum) {
    const double v = doc.number(key, static_cast<double>(fallback));
    if (v != std::floor(v) || v < static_cast<double>(minimum))
        throw ConfigError(key + " must be an integer >= " + std::to_string(minimum));
    return static_cast<std::size_t>(v);
}

inline double positive(const ConfigDocument& doc, const std::string& key, double fallback) {
    const double v = doc.number(key, fallback);
    if (!(v > 0.0)) throw ConfigError(key + " must be positive");
    return v;
}

}  // namespace detail

/// Validates every field and rejects unknown keys.
[[nodiscard]] inline RunConfig load_run_config(const ConfigDocument& doc) {
    RunConfig c;
    c.a = detail::parse_profile(doc, "coefficients.a", c.a);
    c.b = detail::parse_profile(doc, "coefficients.b", c.b);
    c.d = detail::parse_profile(doc, "coefficients.d", c.d);
    c.lambda = doc.optional_number("coefficients.lambda");
    c.lambda_chp = doc.optional_number("coefficients.lambda_chp");
    if (c.lambda && c.lambda_chp) throw ConfigError("coefficients.lambda and coefficients.lambda_chp are exclusive");
    c.drift_cap = detail::positive(doc, "coefficients.drift_cap", c.drift_cap);

    c.n = detail::positive_count(doc, "grid.n", c.n, 8);
    c.dt_factor = detail::positive(doc, "grid.dt_factor", c.dt_factor);

    c.T = doc.optional_number("time.T");
    if (c.T && !(*c.T > 0.0)) throw ConfigError("time.T must be positive");
    c.T_factor = detail::positive(doc, "time.T_factor", c.T_factor);

    c.chp_n = detail::positive_count(doc, "chp.n", c.chp_n, 16);
    c.chp_extrapolate = doc.boolean("chp.extrapolate", c.chp_extrapolate);

    c.u0 = detail::parse_data(doc, "data.u0", c.u0);
    c.u1 = detail::parse_data(doc, "data.u1", c.u1);

    c.energy_tol = detail::positive(doc, "tolerances.energy", c.energy_tol);
    c.inequality_tol = detail::positive(doc, "tolerances.inequality", c.inequality_tol);
    c.cg_tol = detail::positive(doc, "tolerances.cg", c.cg_tol);
    c.control_tol = detail::positive(doc, "tolerances.control", c.control_tol);

    c.max_iter = detail::positive_count(doc, "control.max_iter", c.max_iter, 1);

    c.ct_samples = detail::positive_count(doc, "observe.samples", c.ct_samples, 1);
    c.ct_sweeps = detail::positive_count(doc, "observe.sweeps", c.ct_sweeps, 0);
    c.suite_runs = detail::positive_count(doc, "observe.runs", c.suite_runs, 1);
    const std::string sampler = doc.string("observe.sampler", "mixed");
    if (sampler == "gaussian")
        c.sampler = Sampler::Gaussian;
    else if (sampler == "localized")
        c.sampler = Sampler::Localized;
    else if (sampler == "mixed")
        c.sampler = Sampler::Mixed;
    else
        throw ConfigError("observe.sampler must be gaussian, localized or mixed");

    c.snapshot_every = detail::positive_count(doc, "output.snapshot_every", c.snapshot_every, 0);
    c.out_dir = doc.string("output.dir", c.out_dir.string());
    const double seed = doc.number("run.seed", 0.0);
    if (seed < 0.0 || seed != std::floor(seed)) throw ConfigError("run.seed must be a non-negative integer");
    c.seed = static_cast<std::uint64_t>(seed);
    c.conservative = doc.boolean("run.conservative", c.conservative);

    c.sweep_K_a = doc.numbers("sweep.K_a");
    c.sweep_K_d = doc.numbers("sweep.K_d");
    c.sweep_lambda_chp = doc.numbers("sweep.lambda_chp");
    c.sweep_T_factor = doc.numbers("sweep.T_factor");
    if ((c.sweep_K_a && !c.a.is_power_law()) || (c.sweep_K_d && !c.d.is_power_law()))
        throw ConfigError("sweeping an exponent requires a power-law base profile");
    if (c.sweep_lambda_chp && c.lambda) throw ConfigError("sweep.lambda_chp cannot be combined with coefficients.lambda");
    for (const auto* arr : {&c.sweep_K_a, &c.sweep_K_d})
        if (*arr)
            for (double k : **arr)
                if (!(k > 0.0)) throw ConfigError("swept exponents must be positive");
    if (c.sweep_T_factor)
        for (double f : *c.sweep_T_factor)
            if (!(f > 0.0)) throw ConfigError("sweep.T_factor entries must be positive");

    const auto extra = doc.unused();
    if (!extra.empty()) {
        std::string list;
        for (const auto& k : extra) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError("unknown configuration keys: " + list);
    }
    return c;
}

[[nodiscard]] inline RunConfig load_run_config(const std::filesystem::path& path) {
    return load_run_config(ConfigDocument::load(path));
}

}  // namespace degwave
