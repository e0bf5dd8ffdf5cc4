#pragma once

// Coefficient profiles a, b, d of the degenerate/singular wave operator
//
//     u_tt - a(x) u_xx - (lambda / d(x)) u - b(x) u_x = 0   on (0,1),
//
// their degeneracy classification at x = 0, the Feller weight
// eta(x) = exp(int_{1/2}^x b/a) with sigma = a / eta, the drift constants
// M and M_inf, and the hypothesis verdicts that gate every later stage.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "degwave/errors.hpp"

namespace degwave {

enum class Interpolation { Linear, LogLog };

enum class DegeneracyClass { WD, SD, None };

inline const char* to_string(DegeneracyClass c) {
    switch (c) {
        case DegeneracyClass::WD: return "WD";
        case DegeneracyClass::SD: return "SD";
        case DegeneracyClass::None: return "None";
    }
    return "None";
}

struct PowerLaw {
    double exponent = 0.0;
    double scale = 1.0;
};

struct Tabulated {
    std::vector<double> x;
    std::vector<double> g;
    Interpolation rule = Interpolation::LogLog;
};

/// A scalar profile on [0,1]: either c * x^K or a table interpolated
/// piecewise (linearly, or linearly in log-log coordinates). Below the first
/// tabulated abscissa the first segment is extended, so a log-log table
/// behaves like a power law near 0.
class CoefficientProfile {
public:
    CoefficientProfile() = default;

    static CoefficientProfile power(double exponent, double scale = 1.0) {
        if (!(exponent >= 0.0) || !std::isfinite(exponent) || !std::isfinite(scale))
            throw Error("power-law profile needs a finite exponent >= 0 and a finite scale");
        CoefficientProfile p;
        p.kind_ = PowerLaw{exponent, scale};
        return p;
    }

    static CoefficientProfile constant(double value) { return power(0.0, value); }

    static CoefficientProfile tabulated(std::vector<double> x, std::vector<double> g,
                                        Interpolation rule = Interpolation::LogLog) {
        if (x.size() != g.size() || x.size() < 2)
            throw Error("tabulated profile needs at least two (x, g) samples of equal length");
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!(x[i] > 0.0 && x[i] <= 1.0) || !std::isfinite(g[i]))
                throw Error("tabulated abscissae must lie in (0,1] with finite values");
            if (i > 0 && !(x[i] > x[i - 1])) throw Error("tabulated abscissae must increase strictly");
            if (rule == Interpolation::LogLog && !(g[i] > 0.0))
                throw NotPositive("log-log interpolation requires strictly positive samples");
        }
        CoefficientProfile p;
        Tabulated t{std::move(x), std::move(g), rule};
        if (rule == Interpolation::LogLog) {
            p.log_x_.resize(t.x.size());
            p.log_g_.resize(t.x.size());
            for (std::size_t i = 0; i < t.x.size(); ++i) {
                p.log_x_[i] = std::log(t.x[i]);
                p.log_g_[i] = std::log(t.g[i]);
            }
        }
        p.kind_ = std::move(t);
        return p;
    }

    /// Two-column CSV "x, g(x)". Lines starting with '#' and a non-numeric
    /// header line are skipped.
    static CoefficientProfile load_csv(const std::filesystem::path& path,
                                       Interpolation rule = Interpolation::LogLog) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open profile table " + path.string());
        std::vector<double> xs, gs;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream row(line);
            double xv = 0.0, gv = 0.0;
            if (!(row >> xv >> gv)) {
                if (xs.empty()) continue;
                throw Error("malformed row in " + path.string() + ": " + line);
            }
            xs.push_back(xv);
            gs.push_back(gv);
        }
        return tabulated(std::move(xs), std::move(gs), rule);
    }

    [[nodiscard]] bool is_power_law() const { return std::holds_alternative<PowerLaw>(kind_); }
    [[nodiscard]] const PowerLaw* as_power_law() const { return std::get_if<PowerLaw>(&kind_); }
    [[nodiscard]] const Tabulated* as_tabulated() const { return std::get_if<Tabulated>(&kind_); }

    /// True when the profile is identically zero (a zero-scale power law or an all-zero table).
    [[nodiscard]] bool is_zero() const {
        if (const auto* p = as_power_law()) return p->scale == 0.0;
        const auto& t = std::get<Tabulated>(kind_);
        return std::all_of(t.g.begin(), t.g.end(), [](double v) { return v == 0.0; });
    }

    [[nodiscard]] double value_at(double x) const {
        if (const auto* p = as_power_law()) {
            if (p->exponent == 0.0) return p->scale;
            if (x == 0.0) return 0.0;
            return p->scale * std::pow(x, p->exponent);
        }
        const auto& t = std::get<Tabulated>(kind_);
        const std::size_t i = segment(t, x);
        if (t.rule == Interpolation::Linear) {
            const double s = (t.g[i + 1] - t.g[i]) / (t.x[i + 1] - t.x[i]);
            return t.g[i] + s * (x - t.x[i]);
        }
        const double s = loglog_slope(i);
        if (x <= 0.0) {
            if (s > 0.0) return 0.0;
            if (s == 0.0) return t.g[0];
            return std::numeric_limits<double>::infinity();
        }
        return std::exp(log_g_[i] + s * (std::log(x) - log_x_[i]));
    }

    [[nodiscard]] double derivative_at(double x) const {
        if (const auto* p = as_power_law()) {
            if (p->exponent == 0.0) return 0.0;
            if (x == 0.0) {
                if (p->exponent > 1.0) return 0.0;
                if (p->exponent == 1.0) return p->scale;
                return std::numeric_limits<double>::infinity();
            }
            return p->scale * p->exponent * std::pow(x, p->exponent - 1.0);
        }
        const auto& t = std::get<Tabulated>(kind_);
        const std::size_t i = segment(t, x);
        if (t.rule == Interpolation::Linear) return (t.g[i + 1] - t.g[i]) / (t.x[i + 1] - t.x[i]);
        if (x <= 0.0) return std::numeric_limits<double>::quiet_NaN();
        return value_at(x) * loglog_slope(i) / x;
    }

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        if (const auto* p = as_power_law()) {
            os << "{kind=\"power\", K=" << p->exponent << ", scale=" << p->scale << "}";
        } else {
            const auto& t = std::get<Tabulated>(kind_);
            os << "{kind=\"tabulated\", samples=" << t.x.size() << ", interp=\""
               << (t.rule == Interpolation::Linear ? "linear" : "loglog") << "\"}";
        }
        return os.str();
    }

private:
    static std::size_t segment(const Tabulated& t, double x) {
        const auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
        std::size_t i = it == t.x.begin() ? 0 : static_cast<std::size_t>(it - t.x.begin()) - 1;
        return std::min(i, t.x.size() - 2);
    }
    double loglog_slope(std::size_t i) const {
        return (log_g_[i + 1] - log_g_[i]) / (log_x_[i + 1] - log_x_[i]);
    }

    std::variant<PowerLaw, Tabulated> kind_{PowerLaw{}};
    std::vector<double> log_x_, log_g_;
};

/// The triple (a, b, d) together with the singular-potential strength lambda.
struct CoefficientSet {
    CoefficientProfile a = CoefficientProfile::power(0.5);
    CoefficientProfile b = CoefficientProfile::power(0.0, 0.0);
    CoefficientProfile d = CoefficientProfile::power(0.5);
    double lambda = 0.0;
};

namespace detail {

/// 2048 log-spaced abscissae spanning [1e-8, 1].
inline const std::vector<double>& log_sample() {
    static const std::vector<double> pts = [] {
        constexpr std::size_t count = 2048;
        std::vector<double> v(count);
        for (std::size_t j = 0; j < count; ++j)
            v[j] = std::pow(10.0, -8.0 * (1.0 - static_cast<double>(j) / (count - 1)));
        v.back() = 1.0;
        return v;
    }();
    return pts;
}

/// Uniform sample of [0,1] merged with the log sample (sorted, unique).
inline const std::vector<double>& unit_sample() {
    static const std::vector<double> pts = [] {
        std::vector<double> v = log_sample();
        for (int j = 0; j <= 1024; ++j) v.push_back(j / 1024.0);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    }();
    return pts;
}

inline double drift_ratio(const CoefficientSet& set, double s) {
    const double bv = set.b.value_at(s);
    if (bv == 0.0) return 0.0;
    return bv / set.a.value_at(s);
}

/// Adaptive Gauss-Kronrod integral of b/a over [lo, hi] with 0 < lo <= hi,
/// split at the dyadic points 2^-k so that integrable blow-up at 0 is
/// resolved piece by piece.
inline double integrate_drift(const CoefficientSet& set, double lo, double hi, bool absolute = false) {
    if (lo == hi || set.b.is_zero()) return 0.0;
    auto f = [&](double s) {
        const double r = drift_ratio(set, s);
        return absolute ? std::abs(r) : r;
    };
    double total = 0.0;
    double left = lo;
    while (left < hi) {
        int e = 0;
        std::frexp(left, &e);  // left in [2^(e-1), 2^e)
        double right = std::min(hi, std::ldexp(1.0, e));
        if (right <= left) right = hi;
        // mapped to [0,1] so the error test is relative to the integrand, not to the tiny shell width
        const double w = right - left;
        auto g = [&](double t) { return f(left + w * t); };
        total += w * boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, 0.0, 1.0, 10, 1e-12);
        left = right;
    }
    return total;
}

struct DriftNearZero {
    bool integrable = true;
    double abs_integral = 0.0;     ///< int_0^1 |b/a|
    double signed_integral = 0.0;  ///< int_0^{1/2} b/a
};

/// Integrability probe for b/a on dyadic shells [2^-(k+1), 2^-k]. The tail
/// beyond the last shell is extrapolated geometrically; a shell ratio that
/// does not fall below one, or a total above `cap`, is declared divergent.
inline DriftNearZero probe_drift(const CoefficientSet& set, double cap, int shells = 200) {
    DriftNearZero out;
    if (set.b.is_zero()) return out;
    double abs_sum = integrate_drift(set, 0.5, 1.0, true);
    double signed_sum = 0.0;
    double prev_abs = 0.0, last_abs = 0.0, last_signed = 0.0, prev_signed = 0.0;
    for (int k = 1; k <= shells; ++k) {
        const double hi = std::ldexp(1.0, -k), lo = std::ldexp(1.0, -k - 1);
        const double pa = integrate_drift(set, lo, hi, true);
        const double ps = integrate_drift(set, lo, hi, false);
        if (!std::isfinite(pa)) {
            out.integrable = false;
            return out;
        }
        prev_abs = last_abs;
        prev_signed = last_signed;
        last_abs = pa;
        last_signed = ps;
        abs_sum += pa;
        signed_sum += ps;
        if (abs_sum > cap) {
            out.integrable = false;
            return out;
        }
    }
    if (last_abs > 0.0) {
        const double r = prev_abs > 0.0 ? last_abs / prev_abs : 0.0;
        if (r >= 1.0 - 1e-9) {
            out.integrable = false;
            return out;
        }
        const double tail = last_abs * r / (1.0 - r);
        abs_sum += tail;
        if (prev_signed != 0.0) {
            const double rs = last_signed / prev_signed;
            if (rs > 0.0 && rs < 1.0) signed_sum += last_signed * rs / (1.0 - rs);
        }
    }
    if (!(abs_sum <= cap)) out.integrable = false;
    out.abs_integral = abs_sum;
    out.signed_integral = signed_sum;
    return out;
}

}  // namespace detail

/// Feller weight eta(x) = exp(int_{1/2}^x b(s)/a(s) ds) for one coefficient
/// set. Construction runs the integrability probe once.
class FellerWeight {
public:
    explicit FellerWeight(const CoefficientSet& set, double cap = 1e6) : set_(set) {
        const auto probe = detail::probe_drift(set_, cap);
        if (!probe.integrable)
            throw NonIntegrableDrift("b/a is not integrable near x = 0 (dyadic shell sums diverge)");
        eta_zero_ = std::exp(-probe.signed_integral);
    }

    [[nodiscard]] double operator()(double x) const {
        if (x == 0.5) return 1.0;
        if (x <= 0.0) return eta_zero_;
        if (x < 0.5) return std::exp(-detail::integrate_drift(set_, x, 0.5));
        return std::exp(detail::integrate_drift(set_, 0.5, x));
    }

    [[nodiscard]] double at_zero() const { return eta_zero_; }

    /// eta at ascending points in [0,1], accumulating the integral between
    /// neighbours outward from x = 1/2.
    [[nodiscard]] std::vector<double> on_points(std::span<const double> xs) const {
        std::vector<double> out(xs.size());
        const auto mid = std::lower_bound(xs.begin(), xs.end(), 0.5);
        const auto split = static_cast<std::size_t>(mid - xs.begin());
        double acc = 0.0, at = 0.5;
        for (std::size_t i = split; i < xs.size(); ++i) {
            acc += detail::integrate_drift(set_, at, xs[i]);
            at = xs[i];
            out[i] = std::exp(acc);
        }
        acc = 0.0;
        at = 0.5;
        for (std::size_t i = split; i-- > 0;) {
            if (xs[i] <= 0.0) {
                out[i] = eta_zero_;
                continue;
            }
            acc -= detail::integrate_drift(set_, xs[i], at);
            at = xs[i];
            out[i] = std::exp(acc);
        }
        return out;
    }

private:
    CoefficientSet set_;
    double eta_zero_ = 1.0;
};

[[nodiscard]] inline double eta(double x, const CoefficientSet& set) { return FellerWeight(set)(x); }

[[nodiscard]] inline double sigma(double x, const CoefficientSet& set) {
    return set.a.value_at(x) / eta(x, set);
}

struct DegeneracyClassification {
    double K = 0.0;
    DegeneracyClass cls = DegeneracyClass::None;
};

[[nodiscard]] inline DegeneracyClass class_of(double K) {
    if (K > 0.0 && K < 1.0) return DegeneracyClass::WD;
    if (K >= 1.0 && K < 2.0) return DegeneracyClass::SD;
    return DegeneracyClass::None;
}

/// sup_{x in (0,1]} x |g'(x)| / g(x). Exact for power laws; for tables the
/// maximum over the 2048-point log sample with centred differences, which is
/// an estimate of the supremum rather than a certified bound.
[[nodiscard]] inline double degeneracy_exponent(const CoefficientProfile& g) {
    if (const auto* p = g.as_power_law()) return p->exponent;
    double k = 0.0;
    for (double x : detail::log_sample()) {
        const double step = 1e-4 * x;
        const double slope = x + step <= 1.0
                                 ? (g.value_at(x + step) - g.value_at(x - step)) / (2.0 * step)
                                 : (3.0 * g.value_at(x) - 4.0 * g.value_at(x - step) + g.value_at(x - 2.0 * step)) /
                                       (2.0 * step);
        k = std::max(k, x * std::abs(slope) / g.value_at(x));
    }
    return k;
}

inline void require_positive(const CoefficientProfile& g, const char* name) {
    for (double x : detail::unit_sample()) {
        if (x == 0.0) continue;
        const double v = g.value_at(x);
        if (!(v > 0.0) || !std::isfinite(v))
            throw NotPositive(std::string(name) + " must be strictly positive on (0,1]");
    }
}

[[nodiscard]] inline DegeneracyClassification classify_degeneracy(const CoefficientProfile& g) {
    if (g.value_at(0.0) != 0.0) throw NonDegenerate("profile does not vanish at x = 0");
    require_positive(g, "profile");
    const double K = degeneracy_exponent(g);
    return {K, class_of(K)};
}

struct DriftConstants {
    double M = 0.0;
    std::optional<double> M_inf;
};

/// M = sup|b| / a(1) and M_inf = sup |x b / a| (absent when unbounded).
[[nodiscard]] inline DriftConstants drift_constants(const CoefficientSet& set) {
    DriftConstants out;
    const double a1 = set.a.value_at(1.0);
    const auto* pa = set.a.as_power_law();
    const auto* pb = set.b.as_power_law();
    if (pa && pb) {
        out.M = std::abs(pb->scale) / a1;
        const double growth = 1.0 + pb->exponent - pa->exponent;
        if (pb->scale == 0.0)
            out.M_inf = 0.0;
        else if (growth >= 0.0)
            out.M_inf = std::abs(pb->scale) / pa->scale;
        return out;
    }
    double sup_b = 0.0;
    for (double x : detail::unit_sample()) sup_b = std::max(sup_b, std::abs(set.b.value_at(x)));
    out.M = sup_b / a1;

    // Unbounded x b / a shows up as growth over the last decades toward 0.
    double sup_xba = 0.0;
    for (double x : detail::log_sample()) sup_xba = std::max(sup_xba, std::abs(x * detail::drift_ratio(set, x)));
    const double near = std::abs(1e-8 * detail::drift_ratio(set, 1e-8));
    const double mid = std::abs(1e-5 * detail::drift_ratio(set, 1e-5));
    const bool unbounded = !std::isfinite(sup_xba) || (near > 10.0 * mid && near > 1e-12);
    if (!unbounded) out.M_inf = sup_xba;
    return out;
}

/// Everything the constants and verdicts need about one coefficient set.
struct DegeneracyReport {
    double K_a = 0.0;
    double K_d = 0.0;
    DegeneracyClass class_a = DegeneracyClass::None;
    DegeneracyClass class_d = DegeneracyClass::None;
    bool a_degenerate = true;  ///< a(0) == 0
    bool d_degenerate = true;  ///< d(0) == 0
    double M = 0.0;
    std::optional<double> M_inf;
    bool b_over_a_integrable = true;
    double a1 = 1.0;
    double d1 = 1.0;
    double d_max = 1.0;  ///< max_[0,1] d
    double eta1 = 1.0;
    double eta_min = 1.0;
    double eta_max = 1.0;
    double lambda = 0.0;
};

[[nodiscard]] inline DegeneracyReport degeneracy_report(const CoefficientSet& set, double cap = 1e6) {
    require_positive(set.a, "a");
    require_positive(set.d, "d");
    DegeneracyReport r;
    r.lambda = set.lambda;
    r.a_degenerate = set.a.value_at(0.0) == 0.0;
    r.d_degenerate = set.d.value_at(0.0) == 0.0;
    r.K_a = degeneracy_exponent(set.a);
    r.K_d = degeneracy_exponent(set.d);
    r.class_a = r.a_degenerate ? class_of(r.K_a) : DegeneracyClass::None;
    r.class_d = r.d_degenerate ? class_of(r.K_d) : DegeneracyClass::None;
    const auto dc = drift_constants(set);
    r.M = dc.M;
    r.M_inf = dc.M_inf;
    r.a1 = set.a.value_at(1.0);
    r.d1 = set.d.value_at(1.0);
    r.d_max = 0.0;
    for (double x : detail::unit_sample()) r.d_max = std::max(r.d_max, set.d.value_at(x));
    r.b_over_a_integrable = detail::probe_drift(set, cap).integrable;
    if (r.b_over_a_integrable) {
        const FellerWeight w(set, cap);
        const auto& xs = detail::unit_sample();
        const auto vals = w.on_points(xs);
        r.eta1 = vals.back();
        r.eta_min = *std::min_element(vals.begin(), vals.end());
        r.eta_max = *std::max_element(vals.begin(), vals.end());
    }
    return r;
}

/// a profile is usable where the theory asks for (WD) or (SD): either it
/// degenerates with K in (0,2), or it is regular at 0 (a(0) > 0) with K < 2,
/// the nondegenerate limit of the same estimates.
[[nodiscard]] inline bool admissible_profile(DegeneracyClass cls, bool degenerate, double K) {
    if (degenerate) return cls != DegeneracyClass::None;
    return K < 2.0;
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct HypothesisVerdicts {
    Verdict drift_integrable;  ///< b/a in L^1(0,1)
    Verdict hyp_2_1;           ///< degeneracy at 0 and K_a + K_d <= 2
    Verdict hyp_2_4;           ///< lambda < 1/C_HP
    Verdict hyp_2_6;           ///< hyp 2.1 with K_a + 2 K_d <= 2
    Verdict hyp_3_5;           ///< 2.4 + integrable drift + (WD)/(SD) with K_a + 2 K_d <= 2
    Verdict hyp_3_6;           ///< 3.5 with K_a <= 1
    Verdict hyp_4_2;           ///< 3.5 with K_a > 1 and x b / a bounded
    Verdict hyp_4_7;           ///< one of the four controllability bullets (time condition excluded)
    int controllability_case = 0;  ///< 1..4, which bullet applies; 0 if none
    double effective_M = 0.0;      ///< M, or M_inf in the K_a > 1 branch
    bool retained_term_negative = false;  ///< 1 - K_a/2 - K_d - M < 0 for lambda > 0

    /// Hypotheses required for the observability and control statements.
    [[nodiscard]] bool all_required_pass() const { return hyp_2_4.pass && hyp_3_5.pass && hyp_4_7.pass; }
};

namespace detail {
inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}
}  // namespace detail

/// Lower end of the admissible negative-lambda window.
[[nodiscard]] inline double negative_lambda_floor(const DegeneracyReport& r, double chp, double M) {
    return -(2.0 - r.K_a - 2.0 * M) / (chp * (1.0 + 1.5 * r.K_a + r.K_d + M));
}

[[nodiscard]] inline HypothesisVerdicts check_hypotheses(const DegeneracyReport& r, double chp) {
    using detail::fmt;
    HypothesisVerdicts v;
    const double lam = r.lambda;
    v.drift_integrable = {r.b_over_a_integrable, r.b_over_a_integrable ? "b/a in L^1" : "b/a not integrable"};

    const double s1 = r.K_a + r.K_d;
    const double s2 = r.K_a + 2.0 * r.K_d;
    const bool degenerate = r.a_degenerate && r.d_degenerate;
    v.hyp_2_1.pass = r.b_over_a_integrable && degenerate && s1 <= 2.0;
    v.hyp_2_1.detail = !degenerate ? "a(0) = d(0) = 0 fails"
                                   : "K_a + K_d = " + fmt(s1) + (s1 <= 2.0 ? " <= 2" : " > 2");
    if (!r.b_over_a_integrable) v.hyp_2_1.detail = "b/a not integrable";

    v.hyp_2_4.pass = lam < 1.0 / chp;
    v.hyp_2_4.detail = "lambda = " + fmt(lam) + (v.hyp_2_4.pass ? " < " : " >= ") + "1/C_HP = " + fmt(1.0 / chp);

    v.hyp_2_6.pass = v.hyp_2_1.pass && s2 <= 2.0;
    v.hyp_2_6.detail = "K_a + 2 K_d = " + fmt(s2) + (s2 <= 2.0 ? " <= 2" : " > 2");

    const bool a_ok = admissible_profile(r.class_a, r.a_degenerate, r.K_a);
    const bool d_ok = admissible_profile(r.class_d, r.d_degenerate, r.K_d);
    v.hyp_3_5.pass = v.hyp_2_4.pass && r.b_over_a_integrable && a_ok && d_ok && s2 <= 2.0;
    if (!v.hyp_2_4.pass)
        v.hyp_3_5.detail = "requires " + v.hyp_2_4.detail;
    else if (!r.b_over_a_integrable)
        v.hyp_3_5.detail = "b/a not integrable";
    else if (!a_ok || !d_ok)
        v.hyp_3_5.detail = std::string("a is ") + to_string(r.class_a) + ", d is " + to_string(r.class_d) +
                           "; (WD) or (SD) required";
    else
        v.hyp_3_5.detail = v.hyp_2_6.detail;

    v.hyp_3_6.pass = v.hyp_3_5.pass && r.K_a <= 1.0;
    v.hyp_3_6.detail = "K_a = " + fmt(r.K_a) + (r.K_a <= 1.0 ? " <= 1" : " > 1");

    v.hyp_4_2.pass = v.hyp_3_5.pass && r.K_a > 1.0 && r.M_inf.has_value();
    v.hyp_4_2.detail = r.K_a > 1.0 ? (r.M_inf ? "K_a > 1, M_inf = " + fmt(*r.M_inf) : "x b / a unbounded")
                                   : "K_a <= 1";

    const bool branch3 = v.hyp_3_6.pass;
    const bool branch4 = v.hyp_4_2.pass;
    const double M = branch4 ? *r.M_inf : r.M;
    v.effective_M = M;
    if (!branch3 && !branch4) {
        v.hyp_4_7 = {false, "neither hyp 3.6 nor hyp 4.2 holds"};
    } else if (lam < 0.0) {
        const double floor = negative_lambda_floor(r, chp, M);
        const bool ka_ok = r.K_a < 2.0 - 2.0 * M;
        const bool lam_ok = lam > floor;
        v.hyp_4_7.pass = ka_ok && lam_ok;
        v.controllability_case = v.hyp_4_7.pass ? (branch3 ? 1 : 3) : 0;
        if (!ka_ok)
            v.hyp_4_7.detail = "K_a = " + fmt(r.K_a) + " >= 2 - 2M = " + fmt(2.0 - 2.0 * M);
        else if (!lam_ok)
            v.hyp_4_7.detail = "lambda = " + fmt(lam) + " <= -(2-K_a-2M)/(C_HP(1+3K_a/2+K_d+M)) = " + fmt(floor);
        else
            v.hyp_4_7.detail = "lambda in (" + fmt(floor) + ", 0)";
    } else {
        const double rhs = 2.0 - 2.0 * M;
        v.hyp_4_7.pass = s2 <= rhs;
        v.controllability_case = v.hyp_4_7.pass ? (branch3 ? 2 : 4) : 0;
        v.hyp_4_7.detail = "K_a + 2 K_d = " + fmt(s2) + (v.hyp_4_7.pass ? " <= " : " > ") + "2 - 2M = " + fmt(rhs);
        v.retained_term_negative = lam > 0.0 && (1.0 - 0.5 * r.K_a - r.K_d - M) < 0.0;
    }
    return v;
}

}  // namespace degwave
