#pragma once

/*
 * Run configuration: a flat `key = value` document with dotted keys.
 * Lines starting with '#' are comments. Unknown or duplicate keys are errors.
 *
 *   method               fssh | qcle | oracle | compare      (required)
 *   model.kind           single-avoided-crossing | dual-avoided-crossing |
 *                        extended-coupling | constant-gap     (required)
 *   model.A .. model.E0, model.gap, model.mass
 *   initial.P0                                                (required)
 *   initial.R0, initial.sigma_R, initial.state
 *   initial.pairs        "s s' re im; s s' re im; ..."
 *   dt, n_steps, n_traj, seed, save_interval, workers
 *   electronic.substeps, filter.bound, output.dir
 *   oracle.n_grid, oracle.R_min, oracle.R_max, oracle.dt, analysis.R_cut
 */

#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nadyn/errors.hpp"
#include "nadyn/models.hpp"
#include "nadyn/oracle.hpp"

namespace nadyn {

enum class Method { fssh, qcle, oracle, compare };

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::fssh: return "fssh";
    case Method::qcle: return "qcle";
    case Method::oracle: return "oracle";
    case Method::compare: return "compare";
    }
    return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) {
    for (auto m : {Method::fssh, Method::qcle, Method::oracle, Method::compare})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

/// One term of a mixed electronic initial condition.
struct PairAmplitude {
    int s = 0;
    int sp = 0;
    std::complex<double> amplitude{1.0, 0.0};

    bool operator==(const PairAmplitude&) const = default;
};

inline constexpr double min_sigma_R = 1e-3;

struct RunConfig {
    Method method = Method::fssh;
    DiabaticModel model;

    double R0 = -9.0;
    double P0 = 20.0;
    double sigma_R = 0.5;
    int state = 0;
    std::vector<PairAmplitude> pairs;

    double dt = 0.1;
    std::int64_t n_steps = 20000;
    std::int64_t n_traj = 1000;
    std::uint64_t seed = 1;
    std::int64_t save_interval = 10;
    int electronic_substeps = 10;
    double filter_bound = std::numeric_limits<double>::infinity();
    std::string out_dir = ".";
    int workers = 1;

    GridSpec oracle_grid;
    double oracle_dt = 0.05;
    double R_cut = 10.0;

    bool operator==(const RunConfig&) const = default;

    double sigma_P() const { return 0.5 / sigma_R; }
    std::int64_t n_saves() const { return n_steps / save_interval + 1; }
    double save_period() const { return dt * static_cast<double>(save_interval); }

    /// Oracle steps per save interval; throws unless it is an integer.
    std::int64_t oracle_steps_per_save() const {
        const double ratio = save_period() / oracle_dt;
        const double rounded = std::round(ratio);
        if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio)
            throw ConfigError("oracle.dt", "must divide dt * save_interval");
        return static_cast<std::int64_t>(rounded);
    }

    /// Throws ConfigError naming the first offending key.
    void validate() const {
        model.validate();
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be > 0");
        if (n_steps < 0) throw ConfigError("n_steps", "must be >= 0");
        if (n_traj < 1) throw ConfigError("n_traj", "must be >= 1");
        if (save_interval < 1) throw ConfigError("save_interval", "must be >= 1");
        if (electronic_substeps < 1) throw ConfigError("electronic.substeps", "must be >= 1");
        if (!(filter_bound > 1.0)) throw ConfigError("filter.bound", "must be > 1");
        if (workers < 1) throw ConfigError("workers", "must be >= 1");
        if (!(sigma_R >= min_sigma_R) || !std::isfinite(sigma_R))
            throw ConfigError("initial.sigma_R", "must be finite and >= 1e-3");
        if (!std::isfinite(R0)) throw ConfigError("initial.R0", "must be finite");
        if (!std::isfinite(P0)) throw ConfigError("initial.P0", "must be finite");
        if (state < 0 || state >= n_states) throw ConfigError("initial.state", "must be 0 or 1");
        for (const auto& p : pairs)
            if (p.s < 0 || p.s >= n_states || p.sp < 0 || p.sp >= n_states)
                throw ConfigError("initial.pairs", "state indices must be 0 or 1");
        if (!oracle_grid.valid()) throw ConfigError("oracle.n_grid", "must be a power of two >= 8 with R_max > R_min");
        if (!(oracle_dt > 0.0)) throw ConfigError("oracle.dt", "must be > 0");
        if (!(R_cut >= 0.0)) throw ConfigError("analysis.R_cut", "must be >= 0");
        if (method == Method::oracle || method == Method::compare) oracle_steps_per_save();
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, std::string_view v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) throw ConfigError(key, "expected a number, got '" + std::string(v) + "'");
    return out;
}

template <typename Int>
Int parse_int(const std::string& key, std::string_view v) {
    Int out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || ptr != end) throw ConfigError(key, "expected an integer, got '" + std::string(v) + "'");
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::vector<PairAmplitude> parse_pairs(const std::string& key, std::string_view v) {
    std::vector<PairAmplitude> out;
    while (!v.empty()) {
        const auto semi = v.find(';');
        const auto item = trim(v.substr(0, semi));
        v = semi == std::string_view::npos ? std::string_view{} : v.substr(semi + 1);
        if (item.empty()) continue;
        std::istringstream in{std::string(item)};
        std::string s, sp, re, im, extra;
        if (!(in >> s >> sp >> re >> im) || (in >> extra))
            throw ConfigError(key, "each term must be 's s' re im'");
        out.push_back({parse_int<int>(key, s), parse_int<int>(key, sp),
                       {parse_double(key, re), parse_double(key, im)}});
    }
    return out;
}

} // namespace detail

inline RunConfig parse_config(std::string_view text) {
    std::map<std::string, std::string, std::less<>> kv;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = detail::trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
        std::string key(detail::trim(line.substr(0, eq)));
        std::string value(detail::trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
        if (!kv.emplace(key, value).second) throw ConfigError(key, "duplicate key");
    }

    RunConfig cfg;
    auto take = [&](std::string_view key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        auto v = it->second;
        kv.erase(it);
        return v;
    };
    auto require = [&](std::string_view key) {
        auto v = take(key);
        if (!v) throw ConfigError(std::string(key), "required key missing");
        return *v;
    };
    auto num = [&](std::string_view key, double& dst) {
        if (auto v = take(key)) dst = detail::parse_double(std::string(key), *v);
    };
    auto integer = [&](std::string_view key, auto& dst) {
        if (auto v = take(key)) dst = detail::parse_int<std::remove_reference_t<decltype(dst)>>(std::string(key), *v);
    };

    const auto method = require("method");
    if (auto m = parse_method(method))
        cfg.method = *m;
    else
        throw ConfigError("method", "unknown method '" + method + "'");
    const auto kind = require("model.kind");
    if (auto k = parse_model_kind(kind))
        cfg.model = DiabaticModel::make(*k);
    else
        throw ConfigError("model.kind", "unknown model '" + kind + "'");
    cfg.P0 = detail::parse_double("initial.P0", require("initial.P0"));

    num("model.A", cfg.model.params.A);
    num("model.B", cfg.model.params.B);
    num("model.C", cfg.model.params.C);
    num("model.D", cfg.model.params.D);
    num("model.E0", cfg.model.params.E0);
    num("model.gap", cfg.model.params.gap);
    num("model.mass", cfg.model.mass);
    num("initial.R0", cfg.R0);
    num("initial.sigma_R", cfg.sigma_R);
    integer("initial.state", cfg.state);
    if (auto v = take("initial.pairs")) cfg.pairs = detail::parse_pairs("initial.pairs", *v);
    num("dt", cfg.dt);
    integer("n_steps", cfg.n_steps);
    integer("n_traj", cfg.n_traj);
    integer("seed", cfg.seed);
    integer("save_interval", cfg.save_interval);
    integer("workers", cfg.workers);
    integer("electronic.substeps", cfg.electronic_substeps);
    num("filter.bound", cfg.filter_bound);
    if (auto v = take("output.dir")) cfg.out_dir = *v;
    integer("oracle.n_grid", cfg.oracle_grid.n);
    num("oracle.R_min", cfg.oracle_grid.R_min);
    num("oracle.R_max", cfg.oracle_grid.R_max);
    num("oracle.dt", cfg.oracle_dt);
    num("analysis.R_cut", cfg.R_cut);

    if (!kv.empty()) throw ConfigError(kv.begin()->first, "unknown key");
    cfg.validate();
    return cfg;
}

/// Canonical form: every key, fixed order, shortest round-trip numbers.
inline std::string emit_config(const RunConfig& c) {
    using detail::format_double;
    std::ostringstream o;
    auto line = [&](std::string_view k, const std::string& v) { o << k << " = " << v << '\n'; };
    line("method", std::string(to_string(c.method)));
    line("model.kind", std::string(to_string(c.model.kind)));
    line("model.A", format_double(c.model.params.A));
    line("model.B", format_double(c.model.params.B));
    line("model.C", format_double(c.model.params.C));
    line("model.D", format_double(c.model.params.D));
    line("model.E0", format_double(c.model.params.E0));
    line("model.gap", format_double(c.model.params.gap));
    line("model.mass", format_double(c.model.mass));
    line("initial.R0", format_double(c.R0));
    line("initial.P0", format_double(c.P0));
    line("initial.sigma_R", format_double(c.sigma_R));
    line("initial.state", std::to_string(c.state));
    if (!c.pairs.empty()) {
        std::string s;
        for (const auto& p : c.pairs) {
            if (!s.empty()) s += "; ";
            s += std::to_string(p.s) + " " + std::to_string(p.sp) + " " + format_double(p.amplitude.real()) + " " +
                 format_double(p.amplitude.imag());
        }
        line("initial.pairs", s);
    }
    line("dt", format_double(c.dt));
    line("n_steps", std::to_string(c.n_steps));
    line("n_traj", std::to_string(c.n_traj));
    line("seed", std::to_string(c.seed));
    line("save_interval", std::to_string(c.save_interval));
    line("workers", std::to_string(c.workers));
    line("electronic.substeps", std::to_string(c.electronic_substeps));
    line("filter.bound", format_double(c.filter_bound));
    line("output.dir", c.out_dir);
    line("oracle.n_grid", std::to_string(c.oracle_grid.n));
    line("oracle.R_min", format_double(c.oracle_grid.R_min));
    line("oracle.R_max", format_double(c.oracle_grid.R_max));
    line("oracle.dt", format_double(c.oracle_dt));
    line("analysis.R_cut", format_double(c.R_cut));
    return o.str();
}

} // namespace nadyn
