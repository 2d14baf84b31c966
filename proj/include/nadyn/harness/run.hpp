#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "nadyn/harness/config.hpp"
#include "nadyn/harness/ensemble.hpp"

namespace nadyn {

inline constexpr int schema_version = 1;
inline constexpr std::string_view timeseries_header = "t,pop0,pop1,coh_re,coh_im,energy,n_alive,weight_var,se_pop0,se_pop1";

inline std::string format_timeseries(const std::vector<TimeSeriesRecord>& series) {
    using detail::fmt;
    std::string out(timeseries_header);
    out += '\n';
    for (const auto& r : series) {
        out += fmt(r.t) + ',' + fmt(r.pop0) + ',' + fmt(r.pop1) + ',' + fmt(r.coh_re) + ',' + fmt(r.coh_im) + ',' +
               fmt(r.energy) + ',' + fmt(r.n_alive) + ',' + fmt(r.weight_var) + ',' + fmt(r.se_pop0) + ',' +
               fmt(r.se_pop1) + '\n';
    }
    return out;
}

inline std::string format_summary(const Summary& s) {
    std::string out = "schema_version = " + std::to_string(schema_version) + '\n';
    for (const auto& [k, v] : s) out += k + " = " + v + '\n';
    return out;
}

/// Largest |pop_method - pop_oracle| over the shared time grid, with the
/// method's standard error at that point.
struct Deviation {
    double max_abs = 0.0;
    double t = 0.0;
    double se = 0.0;
};

inline Deviation max_deviation(const std::vector<TimeSeriesRecord>& method,
                               const std::vector<TimeSeriesRecord>& reference) {
    Deviation d;
    const auto n = std::min(method.size(), reference.size());
    for (std::size_t k = 0; k < n; ++k) {
        const double dev0 = std::abs(method[k].pop0 - reference[k].pop0);
        const double dev1 = std::abs(method[k].pop1 - reference[k].pop1);
        if (dev0 > d.max_abs) d = {dev0, method[k].t, method[k].se_pop0};
        if (dev1 > d.max_abs) d = {dev1, method[k].t, method[k].se_pop1};
    }
    return d;
}

inline std::string format_compare(const std::vector<TimeSeriesRecord>& oracle, const std::vector<TimeSeriesRecord>& fssh,
                                  const std::vector<TimeSeriesRecord>& qcle) {
    using detail::fmt;
    std::string out = "t,oracle_pop0,oracle_pop1,fssh_pop0,fssh_pop1,fssh_se_pop1,qcle_pop0,qcle_pop1,qcle_se_pop1,qcle_n_alive\n";
    const auto n = std::min({oracle.size(), fssh.size(), qcle.size()});
    for (std::size_t k = 0; k < n; ++k)
        out += fmt(oracle[k].t) + ',' + fmt(oracle[k].pop0) + ',' + fmt(oracle[k].pop1) + ',' + fmt(fssh[k].pop0) +
               ',' + fmt(fssh[k].pop1) + ',' + fmt(fssh[k].se_pop1) + ',' + fmt(qcle[k].pop0) + ',' +
               fmt(qcle[k].pop1) + ',' + fmt(qcle[k].se_pop1) + ',' + fmt(qcle[k].n_alive) + '\n';
    return out;
}

struct RunOutput {
    std::vector<MethodResult> results;
    std::vector<std::filesystem::path> files;
    Summary summary;
};

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot open " + p.string() + " for writing");
    f << text;
    if (!f) throw Error("failed writing " + p.string());
}

} // namespace detail

/// Executes the configured method and writes its outputs under cfg.out_dir.
/// Single methods write timeseries.csv and summary.txt; compare writes one
/// table per engine, the joined compare.csv and summary.txt. Wall time goes
/// to timing.txt so the other files stay reproducible byte for byte.
inline RunOutput run(const RunConfig& cfg) {
    cfg.validate();
    validate_initial(cfg);
    const auto start = std::chrono::steady_clock::now();
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);

    RunOutput out;
    auto emit = [&](const std::string& name, const std::string& text) {
        detail::write_file(dir / name, text);
        out.files.push_back(dir / name);
    };

    if (cfg.method == Method::compare) {
        auto fcfg = cfg, qcfg = cfg, ocfg = cfg;
        fcfg.method = Method::fssh;
        qcfg.method = Method::qcle;
        ocfg.method = Method::oracle;
        auto oracle = run_oracle_reference(ocfg);
        auto fssh = run_fssh_ensemble(fcfg);
        auto qcle = run_qcle_ensemble(qcfg);
        emit("oracle.csv", format_timeseries(oracle.series));
        emit("fssh.csv", format_timeseries(fssh.series));
        emit("qcle.csv", format_timeseries(qcle.series));
        emit("compare.csv", format_compare(oracle.series, fssh.series, qcle.series));
        const auto df = max_deviation(fssh.series, oracle.series);
        const auto dq = max_deviation(qcle.series, oracle.series);
        out.summary = {{"method", "compare"}};
        out.summary.emplace_back("fssh_max_deviation", detail::fmt(df.max_abs));
        out.summary.emplace_back("fssh_max_deviation_t", detail::fmt(df.t));
        out.summary.emplace_back("fssh_max_deviation_se", detail::fmt(df.se));
        out.summary.emplace_back("qcle_max_deviation", detail::fmt(dq.max_abs));
        out.summary.emplace_back("qcle_max_deviation_t", detail::fmt(dq.t));
        out.summary.emplace_back("qcle_max_deviation_se", detail::fmt(dq.se));
        const double ratio = fssh.final_pop1_variance > 0.0
                                 ? qcle.final_pop1_variance / fssh.final_pop1_variance
                                 : std::numeric_limits<double>::infinity();
        out.summary.emplace_back("pop1_variance_ratio_qcle_over_fssh", detail::fmt(ratio));
        for (const auto* r : {&oracle, &fssh, &qcle})
            for (const auto& [k, v] : r->summary)
                if (k != "method") out.summary.emplace_back(std::string(to_string(r->method)) + "." + k, v);
        out.results = {std::move(oracle), std::move(fssh), std::move(qcle)};
    } else {
        MethodResult r = cfg.method == Method::fssh   ? run_fssh_ensemble(cfg)
                         : cfg.method == Method::qcle ? run_qcle_ensemble(cfg)
                                                      : run_oracle_reference(cfg);
        emit("timeseries.csv", format_timeseries(r.series));
        out.summary = r.summary;
        out.results.push_back(std::move(r));
    }
    emit("summary.txt", format_summary(out.summary));
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
    emit("timing.txt", "wall_time_s = " + detail::fmt(wall.count()) + '\n');
    return out;
}

} // namespace nadyn
