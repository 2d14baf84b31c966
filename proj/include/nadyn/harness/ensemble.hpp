#pragma once

/*
 * Seeded ensemble execution of the three engines.
 *
 * Trajectory i draws its whole random stream from Rng(seed, i). Trajectories
 * are split into contiguous batches; a batch is always processed by a single
 * worker in index order and batches are reduced in batch order, so every
 * estimate is bit-identical for any worker count.
 */

#include <algorithm>
#include <atomic>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nadyn/errors.hpp"
#include "nadyn/fssh.hpp"
#include "nadyn/harness/config.hpp"
#include "nadyn/oracle.hpp"
#include "nadyn/qcle.hpp"
#include "nadyn/rng.hpp"
#include "nadyn/stats.hpp"

namespace nadyn {

inline constexpr std::size_t default_batches = 20;

/// One row of the emitted time series.
struct TimeSeriesRecord {
    double t = 0.0;
    double pop0 = 0.0;
    double pop1 = 0.0;
    double coh_re = 0.0;
    double coh_im = 0.0;
    double energy = 0.0;
    std::int64_t n_alive = 0;
    double weight_var = 0.0;
    double se_pop0 = 0.0;
    double se_pop1 = 0.0;
};

using Summary = std::vector<std::pair<std::string, std::string>>;

struct MethodResult {
    Method method = Method::fssh;
    std::vector<TimeSeriesRecord> series;
    Summary summary;
    ChannelProbabilities channels;
    /// Per-sample variance of the final state-1 population estimator.
    double final_pop1_variance = 0.0;
};

struct InitialCondition {
    double R = 0.0;
    double P = 0.0;
    int s = 0;         // walker pair
    int sp = 0;
    cplx weight{1.0, 0.0};
    Mat2c rho = Mat2c::Zero(); // FSSH electronic density
    int active = 0;
};

/// Checks the electronic initial condition for the engines the method uses.
inline void validate_initial(const RunConfig& cfg) {
    if (cfg.pairs.empty()) return;
    double total = 0.0;
    for (const auto& p : cfg.pairs) total += std::abs(p.amplitude);
    if (!(total > 0.0)) throw ConfigError("initial.pairs", "all amplitudes are zero");
    if (cfg.method == Method::fssh || cfg.method == Method::compare) {
        Mat2c rho = Mat2c::Zero();
        for (const auto& p : cfg.pairs) rho(p.s, p.sp) += p.amplitude;
        if ((rho - rho.adjoint()).norm() > 1e-12)
            throw ConfigError("initial.pairs", "density for fssh must be Hermitian");
        if (std::abs(rho.trace() - 1.0) > 1e-12 || rho(0, 0).real() < 0.0 || rho(1, 1).real() < 0.0)
            throw ConfigError("initial.pairs", "density for fssh must have nonnegative populations summing to 1");
    }
}

/// Draws the nuclear phase point from the minimum-uncertainty Wigner
/// Gaussian and the electronic labels from the configured amplitudes.
/// Consumes exactly two normals and one uniform.
inline InitialCondition sample_initial_condition(const RunConfig& cfg, Rng& rng) {
    InitialCondition ic;
    const double sigma_R = std::max(cfg.sigma_R, min_sigma_R);
    ic.R = rng.normal(cfg.R0, sigma_R);
    ic.P = rng.normal(cfg.P0, 0.5 / sigma_R);
    const double xi = rng.uniform();
    if (cfg.pairs.empty()) {
        ic.s = ic.sp = ic.active = cfg.state;
        ic.rho = pure_density(cfg.state);
        return ic;
    }
    double total = 0.0;
    for (const auto& p : cfg.pairs) total += std::abs(p.amplitude);
    double acc = 0.0;
    for (const auto& p : cfg.pairs) {
        acc += std::abs(p.amplitude) / total;
        if (xi < acc || &p == &cfg.pairs.back()) {
            ic.s = p.s;
            ic.sp = p.sp;
            ic.weight = std::polar(total, std::arg(p.amplitude));
            break;
        }
    }
    for (const auto& p : cfg.pairs) ic.rho(p.s, p.sp) += p.amplitude;
    ic.active = xi < ic.rho(0, 0).real() ? 0 : 1;
    return ic;
}

inline std::vector<InitialCondition> sample_initial_conditions(const RunConfig& cfg, std::size_t count) {
    std::vector<InitialCondition> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(cfg.seed, i);
        out.push_back(sample_initial_condition(cfg, rng));
    }
    return out;
}

/// Runs fn(batch) for every batch on up to `workers` threads. The first
/// failing batch (by index) determines the rethrown exception.
template <typename Fn>
void for_each_batch(std::size_t n_batches, int workers, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n_batches);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_batches) return;
            try {
                fn(b);
            } catch (...) {
                errors[b] = std::current_exception();
            }
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n_batches);
    if (n_threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> threads;
        for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(work);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct BatchRange {
    std::size_t begin = 0;
    std::size_t end = 0;
};

inline BatchRange batch_range(std::size_t b, std::size_t n, std::size_t n_batches) {
    return {b * n / n_batches, (b + 1) * n / n_batches};
}

namespace detail {

inline std::string fmt(double v) { return format_double(v); }
inline std::string fmt(std::int64_t v) { return std::to_string(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }

inline void add_channels(Summary& s, const ChannelProbabilities& c) {
    s.emplace_back("transmitted_lower", fmt(c.transmitted_lower));
    s.emplace_back("transmitted_upper", fmt(c.transmitted_upper));
    s.emplace_back("reflected_lower", fmt(c.reflected_lower));
    s.emplace_back("reflected_upper", fmt(c.reflected_upper));
}

template <typename Body>
void guarded(std::size_t index, Body&& body) {
    try {
        body();
    } catch (const EngineError&) {
        throw;
    } catch (const Error& e) {
        throw EngineError(index, e.what());
    }
}

} // namespace detail

inline MethodResult run_fssh_ensemble(const RunConfig& cfg) {
    validate_initial(cfg);
    const auto N = static_cast<std::size_t>(cfg.n_traj);
    const auto n_saves = static_cast<std::size_t>(cfg.n_saves());
    const std::size_t nb = std::min(default_batches, N);
    const FsshOptions opt{cfg.dt, cfg.electronic_substeps};

    struct Cell {
        CompensatedSum on[2], rho_pop[2], coh_re, coh_im, energy;
    };
    struct Final {
        std::size_t applied = 0, frustrated = 0;
        double channel[4] = {0, 0, 0, 0};
    };
    std::vector<Cell> cells(n_saves * nb);
    std::vector<Final> finals(nb);

    for_each_batch(nb, cfg.workers, [&](std::size_t b) {
        const auto range = batch_range(b, N, nb);
        for (std::size_t i = range.begin; i < range.end; ++i) {
            detail::guarded(i, [&] {
                Rng rng(cfg.seed, i);
                const auto ic = sample_initial_condition(cfg, rng);
                auto traj = make_fssh_trajectory(cfg.model, ic.R, ic.P, ic.active, ic.rho, std::move(rng));
                const auto snaps = run_fssh(cfg.model, traj, opt, cfg.n_steps, cfg.save_interval);
                for (std::size_t k = 0; k < snaps.size(); ++k) {
                    auto& c = cells[k * nb + b];
                    const auto& s = snaps[k];
                    c.on[0] += s.active == 0 ? 1.0 : 0.0;
                    c.on[1] += s.active == 1 ? 1.0 : 0.0;
                    c.rho_pop[0] += s.rho(0, 0).real();
                    c.rho_pop[1] += s.rho(1, 1).real();
                    c.coh_re += s.rho(0, 1).real();
                    c.coh_im += s.rho(0, 1).imag();
                    c.energy += s.energy;
                }
                auto& f = finals[b];
                for (const auto& h : traj.hop_log) (h.status == JumpStatus::applied ? f.applied : f.frustrated)++;
                if (traj.R > cfg.R_cut) f.channel[traj.active] += 1.0;
                if (traj.R < -cfg.R_cut) f.channel[2 + traj.active] += 1.0;
            });
        }
    });

    MethodResult res;
    res.method = Method::fssh;
    std::vector<double> bm0(nb), bm1(nb);
    double final_rho11 = 0.0;
    for (std::size_t k = 0; k < n_saves; ++k) {
        CompensatedSum on0, on1, cre, cim, en, r11;
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& c = cells[k * nb + b];
            const auto range = batch_range(b, N, nb);
            const double nbatch = static_cast<double>(range.end - range.begin);
            on0 += c.on[0];
            on1 += c.on[1];
            cre += c.coh_re;
            cim += c.coh_im;
            en += c.energy;
            r11 += c.rho_pop[1];
            bm0[b] = c.on[0].value() / nbatch;
            bm1[b] = c.on[1].value() / nbatch;
        }
        const double n = static_cast<double>(N);
        TimeSeriesRecord r;
        r.t = static_cast<double>(k) * cfg.save_period();
        r.pop0 = on0.value() / n;
        r.pop1 = on1.value() / n;
        r.coh_re = cre.value() / n;
        r.coh_im = cim.value() / n;
        r.energy = en.value() / n;
        r.n_alive = cfg.n_traj;
        r.se_pop0 = batch_statistics(bm0).std_error;
        r.se_pop1 = batch_statistics(bm1).std_error;
        res.series.push_back(r);
        final_rho11 = r11.value() / n;
    }
    std::size_t applied = 0, frustrated = 0;
    double ch[4] = {0, 0, 0, 0};
    for (const auto& f : finals) {
        applied += f.applied;
        frustrated += f.frustrated;
        for (int j = 0; j < 4; ++j) ch[j] += f.channel[j];
    }
    const double n = static_cast<double>(N);
    res.channels = {ch[0] / n, ch[1] / n, ch[2] / n, ch[3] / n};
    const double p1 = res.series.back().pop1;
    res.final_pop1_variance = p1 * (1.0 - p1);
    res.summary = {{"method", "fssh"},
                   {"n_traj", detail::fmt(N)},
                   {"hops_applied", detail::fmt(applied)},
                   {"hops_frustrated", detail::fmt(frustrated)},
                   {"final_pop1", detail::fmt(p1)},
                   {"final_mean_rho11", detail::fmt(final_rho11)}};
    detail::add_channels(res.summary, res.channels);
    res.summary.emplace_back("final_pop1_sample_variance", detail::fmt(res.final_pop1_variance));
    return res;
}

inline MethodResult run_qcle_ensemble(const RunConfig& cfg) {
    validate_initial(cfg);
    const auto N = static_cast<std::size_t>(cfg.n_traj);
    const auto n_saves = static_cast<std::size_t>(cfg.n_saves());
    const std::size_t nb = std::min(default_batches, N);
    const double M = cfg.model.mass;

    QcleAccumulator acc(n_saves, nb);
    struct Final {
        std::size_t transitions = 0, filtered = 0;
        CompensatedSum channel[4];
        CompensatedSum x, x2;
    };
    std::vector<Final> finals(nb);

    for_each_batch(nb, cfg.workers, [&](std::size_t b) {
        const auto range = batch_range(b, N, nb);
        for (std::size_t i = range.begin; i < range.end; ++i) {
            detail::guarded(i, [&] {
                Rng rng(cfg.seed, i);
                const auto ic = sample_initial_condition(cfg, rng);
                auto w = make_walker(cfg.model, ic.R, ic.P, ic.s, ic.sp, ic.weight);
                auto& f = finals[b];
                std::size_t k = 0;
                acc.add(k++, b, w, M);
                for (std::int64_t step = 1; step <= cfg.n_steps; ++step) {
                    if (w.alive) {
                        qcle_step(cfg.model, w, cfg.dt, rng);
                        if (std::abs(w.weight) > cfg.filter_bound) {
                            w.alive = false;
                            ++f.filtered;
                        }
                    }
                    if (step % cfg.save_interval == 0) acc.add(k++, b, w, M);
                }
                f.transitions += w.transition_log.size();
                if (w.alive && w.s == w.sp) {
                    const double x = w.weight.real();
                    if (w.R > cfg.R_cut) f.channel[w.s] += x;
                    if (w.R < -cfg.R_cut) f.channel[2 + w.s] += x;
                    if (w.s == 1) {
                        f.x += x;
                        f.x2 += x * x;
                    }
                }
            });
        }
    });

    std::vector<double> times(n_saves);
    for (std::size_t k = 0; k < n_saves; ++k) times[k] = static_cast<double>(k) * cfg.save_period();
    const auto p0 = acc.estimate(Observable::population(0), times);
    const auto p1 = acc.estimate(Observable::population(1), times);
    const auto coh = acc.estimate(Observable::coherence(), times);

    MethodResult res;
    res.method = Method::qcle;
    for (std::size_t k = 0; k < n_saves; ++k) {
        TimeSeriesRecord r;
        r.t = times[k];
        r.pop0 = p0.values[k].real();
        r.pop1 = p1.values[k].real();
        r.coh_re = coh.values[k].real();
        r.coh_im = coh.values[k].imag();
        r.energy = acc.mean_energy(k);
        r.n_alive = static_cast<std::int64_t>(p0.n_alive[k]);
        r.weight_var = p0.weight_variance[k];
        r.se_pop0 = p0.se_real[k];
        r.se_pop1 = p1.se_real[k];
        res.series.push_back(r);
    }
    std::size_t transitions = 0, filtered = 0;
    CompensatedSum ch[4], x, x2;
    for (const auto& f : finals) {
        transitions += f.transitions;
        filtered += f.filtered;
        for (int j = 0; j < 4; ++j) ch[j] += f.channel[j];
        x += f.x;
        x2 += f.x2;
    }
    const double n = static_cast<double>(N);
    res.channels = {ch[0].value() / n, ch[1].value() / n, ch[2].value() / n, ch[3].value() / n};
    const double mean_x = x.value() / n;
    res.final_pop1_variance = std::max(0.0, x2.value() / n - mean_x * mean_x);
    res.summary = {{"method", "qcle"},
                   {"n_traj", detail::fmt(N)},
                   {"transitions", detail::fmt(transitions)},
                   {"filtered", detail::fmt(filtered)},
                   {"final_n_alive", detail::fmt(res.series.back().n_alive)},
                   {"final_weight_variance", detail::fmt(res.series.back().weight_var)},
                   {"final_pop1", detail::fmt(res.series.back().pop1)}};
    detail::add_channels(res.summary, res.channels);
    res.summary.emplace_back("final_pop1_sample_variance", detail::fmt(res.final_pop1_variance));
    return res;
}

inline MethodResult run_oracle_reference(const RunConfig& cfg) {
    cfg.validate();
    const auto per_save = static_cast<std::size_t>(cfg.oracle_steps_per_save());
    WavepacketPropagator prop(cfg.model, cfg.oracle_grid, cfg.oracle_dt);
    auto wp = init_packet(cfg.model, cfg.oracle_grid, cfg.R0, cfg.P0, cfg.sigma_R, cfg.state);
    const auto U = grid_eigenvectors(cfg.model, cfg.oracle_grid);

    MethodResult res;
    res.method = Method::oracle;
    double max_boundary = 0.0;
    double e0 = 0.0, max_drift = 0.0;
    for (std::int64_t k = 0; k < cfg.n_saves(); ++k) {
        if (k > 0)
            for (std::size_t j = 0; j < per_save; ++j) prop.step(wp);
        const auto a = analyze(wp, cfg.model, U, cfg.R_cut);
        if (k == 0) e0 = a.energy;
        max_drift = std::max(max_drift, std::abs(a.energy - e0));
        max_boundary = std::max(max_boundary, a.boundary_amplitude);
        TimeSeriesRecord r;
        r.t = static_cast<double>(k) * cfg.save_period();
        r.pop0 = a.population[0];
        r.pop1 = a.population[1];
        r.coh_re = a.coherence.real();
        r.coh_im = a.coherence.imag();
        r.energy = a.energy;
        r.n_alive = 1;
        res.series.push_back(r);
        res.channels = a.channels;
    }
    const double p1 = res.series.back().pop1;
    res.final_pop1_variance = 0.0;
    res.summary = {{"method", "oracle"},
                   {"n_grid", detail::fmt(cfg.oracle_grid.n)},
                   {"oracle_dt", detail::fmt(cfg.oracle_dt)},
                   {"final_pop1", detail::fmt(p1)},
                   {"final_norm", detail::fmt(wp.norm())},
                   {"max_energy_drift", detail::fmt(max_drift)},
                   {"max_boundary_amplitude", detail::fmt(max_boundary)}};
    detail::add_channels(res.summary, res.channels);
    return res;
}

} // namespace nadyn
