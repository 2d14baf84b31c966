#pragma once

/*
 * Trotter-based surface-hopping solution of the quantum-classical Liouville
 * equation in the adiabatic basis, with momentum jumps.
 *
 * A walker carries an ordered pair (s, s') of adiabatic indices. Each segment
 * it moves on the mean surface (E_s + E_s')/2 and picks up the phase
 * exp(-i w_{ss'} dt). At the end of the segment one index may change:
 *   first index   s  -> b  with amplitude -(P/M) d_{b s}
 *   second index  s' -> b' with amplitude -(P/M) d*_{b' s'}
 * (the coupling factors of the backward chain product, read in the walker's
 * forward direction), each accompanied by the single-scale jump with the gap of the changing
 * index. Transitions are sampled with probability pi = a / (1 + a),
 * a = |(P/M) d_01| dt, and the weight is corrected by 1/(1 - pi) or by
 * amplitude * dt / (pi / n_channels), so the walker average is an unbiased
 * estimate of the deterministic sum over all index chains.
 *
 * Channels whose jump would be frustrated are not offered at all; a step with
 * no open channel is a plain no-transition step with unit weight.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nadyn/errors.hpp"
#include "nadyn/jumpop.hpp"
#include "nadyn/models.hpp"
#include "nadyn/rng.hpp"
#include "nadyn/stats.hpp"

namespace nadyn {

using cplx = std::complex<double>;

struct TransitionEvent {
    double t = 0.0;
    int s_from = 0, sp_from = 0;
    int s_to = 0, sp_to = 0;
    double energy_before = 0.0;
    double energy_after = 0.0;
};

struct QcleWalker {
    double t = 0.0;
    double R = 0.0;
    double P = 0.0;
    int s = 0;
    int sp = 0;
    cplx weight{1.0, 0.0};
    bool alive = true;
    std::vector<TransitionEvent> transition_log;
    AdiabaticFrame frame;

    double mean_surface() const { return 0.5 * (frame.E[s] + frame.E[sp]); }
    double mean_force() const { return 0.5 * (frame.F[s] + frame.F[sp]); }
    double energy(double mass) const { return mean_surface() + 0.5 * P * P / mass; }
};

inline QcleWalker make_walker(const DiabaticModel& model, double R, double P, int s, int sp,
                              cplx weight = {1.0, 0.0}) {
    QcleWalker w;
    w.R = R;
    w.P = P;
    w.s = s;
    w.sp = sp;
    w.weight = weight;
    w.frame = frame_at(model, R);
    return w;
}

/// Velocity Verlet on the mean surface plus the midpoint phase factor.
inline void segment_step(const DiabaticModel& model, QcleWalker& w, double dt) {
    const double M = model.mass;
    const double R0 = w.R;
    const double P_half = w.P + 0.5 * dt * w.mean_force();
    w.R += dt * P_half / M;
    w.frame = frame_at(model, w.R, w.frame);
    w.P = P_half + 0.5 * dt * w.mean_force();
    if (w.s != w.sp) {
        const auto E = adiabatic_energies(diabatic_hamiltonian(model, 0.5 * (R0 + w.R)));
        const double omega = E[w.s] - E[w.sp];
        w.weight *= std::polar(1.0, -omega * dt);
    }
    w.t += dt;
}

/// One open index-change channel at the walker's current phase point.
struct TransitionChannel {
    bool first_index = true;
    int to = 0;
    double amplitude = 0.0; // coupling amplitude per unit time
    double new_P = 0.0;
};

struct TransitionChannels {
    std::array<TransitionChannel, 2 * (n_states - 1)> items{};
    int count = 0;
};

/// Enumerates the channels that have nonzero coupling and an unfrustrated
/// single-scale jump.
inline TransitionChannels transition_channels(const QcleWalker& w, double mass) {
    TransitionChannels out;
    const auto& f = w.frame;
    auto consider = [&](bool first, int from, int to) {
        const double d = f.d(from, to);
        if (d == 0.0) return;
        const JumpSpec<1> spec{{jump_sign(d)}, f.gap(from, to), mass, JumpScale::qcle_single};
        const auto jump = apply_jump(Vec<1>{w.P}, spec);
        if (!jump.applied()) return;
        out.items[out.count++] = {first, to, -(w.P / mass) * f.d(to, from), (*jump.new_p)[0]};
    };
    for (int b = 0; b < n_states; ++b)
        if (b != w.s) consider(true, w.s, b);
    for (int b = 0; b < n_states; ++b)
        if (b != w.sp) consider(false, w.sp, b);
    return out;
}

inline double transition_probability(const QcleWalker& w, double dt, double mass) {
    if (transition_channels(w, mass).count == 0) return 0.0;
    const double a = std::abs(w.P / mass * w.frame.d(0, 1)) * dt;
    return a / (1.0 + a);
}

inline void apply_channel(QcleWalker& w, const TransitionChannel& c, double mass) {
    TransitionEvent ev{w.t, w.s, w.sp, w.s, w.sp, w.energy(mass), 0.0};
    (c.first_index ? w.s : w.sp) = c.to;
    w.P = c.new_P;
    ev.s_to = w.s;
    ev.sp_to = w.sp;
    ev.energy_after = w.energy(mass);
    w.transition_log.push_back(ev);
}

/// Samples the end-of-segment transition and applies the Monte Carlo reweighting.
inline void sample_transition(QcleWalker& w, double dt, double mass, Rng& rng) {
    const auto channels = transition_channels(w, mass);
    if (channels.count == 0) return;
    const double a = std::abs(w.P / mass * w.frame.d(0, 1)) * dt;
    const double pi = a / (1.0 + a);
    if (rng.uniform() >= pi) {
        w.weight /= (1.0 - pi);
        return;
    }
    const int k = std::min(channels.count - 1, static_cast<int>(rng.uniform() * channels.count));
    const auto& c = channels.items[k];
    w.weight *= c.amplitude * dt / (pi / channels.count);
    apply_channel(w, c, mass);
}

/// One Trotter segment: mean-surface motion with phase, then a sampled transition.
inline void qcle_step(const DiabaticModel& model, QcleWalker& w, double dt, Rng& rng) {
    segment_step(model, w, dt);
    sample_transition(w, dt, model.mass, rng);
}

/// Maximum number of segments the exhaustive chain sum accepts.
inline constexpr int max_path_sum_steps = 6;

namespace detail {

inline void expand_chains(const DiabaticModel& model, QcleWalker w, double dt, int steps_left, Mat2c& acc) {
    if (steps_left == 0) {
        acc(w.s, w.sp) += w.weight;
        return;
    }
    segment_step(model, w, dt);
    const auto channels = transition_channels(w, model.mass);
    for (int i = 0; i < channels.count; ++i) {
        QcleWalker branch = w;
        branch.weight *= channels.items[i].amplitude * dt;
        apply_channel(branch, channels.items[i], model.mass);
        expand_chains(model, std::move(branch), dt, steps_left - 1, acc);
    }
    expand_chains(model, std::move(w), dt, steps_left - 1, acc);
}

} // namespace detail

/// Deterministic sum over every index chain of the Trotterized propagator,
/// starting from one walker. Entry (a, b) is the total weight that ends in
/// pair (a, b) after `n_steps` segments.
inline Mat2c brute_force_path_sum(const DiabaticModel& model, const QcleWalker& start, double dt, int n_steps) {
    if (n_steps > max_path_sum_steps)
        throw BranchExplosion("brute_force_path_sum: " + std::to_string(n_steps) + " steps exceeds limit of " +
                              std::to_string(max_path_sum_steps));
    Mat2c acc = Mat2c::Zero();
    QcleWalker w = start;
    w.transition_log.clear();
    detail::expand_chains(model, std::move(w), dt, std::max(0, n_steps), acc);
    return acc;
}

/// Marks walkers whose weight modulus exceeds `bound` as dead. Returns how
/// many were newly filtered.
inline std::size_t filter_weights(std::span<QcleWalker> walkers, double bound) {
    std::size_t n = 0;
    for (auto& w : walkers)
        if (w.alive && std::abs(w.weight) > bound) {
            w.alive = false;
            ++n;
        }
    return n;
}

/// Density-matrix element (s, s') estimated as the walker mean of
/// weight * [pair == (s, s')].
struct Observable {
    int s = 0;
    int sp = 0;

    static Observable population(int state) { return {state, state}; }
    static Observable coherence() { return {0, 1}; }
};

struct EnsembleEstimate {
    Observable observable;
    std::vector<double> times;
    std::vector<cplx> values;
    std::vector<double> se_real;
    std::vector<double> se_imag;
    std::vector<std::size_t> n_alive;
    std::vector<double> weight_variance;
};

/// Time-binned, batch-partitioned accumulator of walker contributions. Each
/// (time, batch) cell is touched by one worker only, and cells are reduced in
/// a fixed order, so results do not depend on how batches are scheduled.
class QcleAccumulator {
public:
    QcleAccumulator(std::size_t n_times, std::size_t n_batches)
        : n_times_(n_times), n_batches_(std::max<std::size_t>(1, n_batches)), cells_(n_times_ * n_batches_) {}

    std::size_t n_times() const { return n_times_; }
    std::size_t n_batches() const { return n_batches_; }

    /// Records walker `w` at time index `ti` into `batch`. Dead walkers count
    /// toward normalization with zero contribution.
    void add(std::size_t ti, std::size_t batch, const QcleWalker& w, double mass) {
        auto& c = cell(ti, batch);
        ++c.n;
        if (!w.alive) return;
        ++c.n_alive;
        const int k = 2 * w.s + w.sp;
        c.re[k] += w.weight.real();
        c.im[k] += w.weight.imag();
        c.w_re += w.weight.real();
        c.w_im += w.weight.imag();
        c.w_norm2 += std::norm(w.weight);
        c.energy += w.energy(mass);
    }

    EnsembleEstimate estimate(Observable obs, std::span<const double> times) const {
        EnsembleEstimate e;
        e.observable = obs;
        e.times.assign(times.begin(), times.end());
        const int k = 2 * obs.s + obs.sp;
        std::vector<double> bre(n_batches_), bim(n_batches_);
        for (std::size_t ti = 0; ti < n_times_; ++ti) {
            CompensatedSum re, im;
            std::size_t n = 0, alive = 0;
            std::size_t used = 0;
            for (std::size_t b = 0; b < n_batches_; ++b) {
                const auto& c = cell(ti, b);
                re += c.re[k];
                im += c.im[k];
                n += c.n;
                alive += c.n_alive;
                if (c.n > 0) {
                    bre[used] = c.re[k].value() / static_cast<double>(c.n);
                    bim[used] = c.im[k].value() / static_cast<double>(c.n);
                    ++used;
                }
            }
            if (n == 0) throw EmptyEnsemble("no walkers recorded at time index " + std::to_string(ti));
            e.values.emplace_back(re.value() / static_cast<double>(n), im.value() / static_cast<double>(n));
            e.se_real.push_back(batch_statistics(std::span(bre.data(), used)).std_error);
            e.se_imag.push_back(batch_statistics(std::span(bim.data(), used)).std_error);
            e.n_alive.push_back(alive);
            e.weight_variance.push_back(weight_variance(ti));
        }
        return e;
    }

    std::size_t n_recorded(std::size_t ti) const {
        std::size_t n = 0;
        for (std::size_t b = 0; b < n_batches_; ++b) n += cell(ti, b).n;
        return n;
    }

    /// Variance of the complex weights of alive walkers, E|w|^2 - |E w|^2.
    double weight_variance(std::size_t ti) const {
        CompensatedSum wr, wi, w2;
        std::size_t alive = 0;
        for (std::size_t b = 0; b < n_batches_; ++b) {
            const auto& c = cell(ti, b);
            wr += c.w_re;
            wi += c.w_im;
            w2 += c.w_norm2;
            alive += c.n_alive;
        }
        if (alive == 0) return 0.0;
        const double n = static_cast<double>(alive);
        const cplx mean(wr.value() / n, wi.value() / n);
        return std::max(0.0, w2.value() / n - std::norm(mean));
    }

    /// Unweighted mean walker energy over alive walkers.
    double mean_energy(std::size_t ti) const {
        CompensatedSum e;
        std::size_t alive = 0;
        for (std::size_t b = 0; b < n_batches_; ++b) {
            e += cell(ti, b).energy;
            alive += cell(ti, b).n_alive;
        }
        return alive == 0 ? 0.0 : e.value() / static_cast<double>(alive);
    }

private:
    struct Cell {
        std::array<CompensatedSum, 4> re{}, im{};
        CompensatedSum w_re, w_im, w_norm2, energy;
        std::size_t n = 0;
        std::size_t n_alive = 0;
    };

    Cell& cell(std::size_t ti, std::size_t b) { return cells_[ti * n_batches_ + b]; }
    const Cell& cell(std::size_t ti, std::size_t b) const { return cells_[ti * n_batches_ + b]; }

    std::size_t n_times_;
    std::size_t n_batches_;
    std::vector<Cell> cells_;
};

/// Single-time estimate over a walker population, batch means over
/// `n_batches` contiguous blocks.
inline EnsembleEstimate estimate_observable(std::span<const QcleWalker> walkers, Observable obs, double mass,
                                            std::size_t n_batches = 20) {
    if (walkers.empty()) throw EmptyEnsemble("estimate_observable: no walkers");
    const std::size_t nb = std::min(n_batches, walkers.size());
    QcleAccumulator acc(1, nb);
    for (std::size_t i = 0; i < walkers.size(); ++i) acc.add(0, batch_of(i, walkers.size(), nb), walkers[i], mass);
    const double t = walkers.front().t;
    return acc.estimate(obs, std::span(&t, 1));
}

/// Gaussian momentum profile of an analytic density, used for the
/// log-derivative d(ln rho)/dP = -(P - P0) / sigma^2.
struct GaussianMomentumDensity {
    double P0 = 0.0;
    double sigma = 1.0;

    double log_derivative(double P) const { return -(P - P0) / (sigma * sigma); }
};

/// Decoherence rate of element (a, a') seen from active surface nu:
///   1/2 (dF_{a nu} + dF_{a' nu}) * d(ln rho)/dP,  dF_{a nu} = F_a - F_nu.
inline double decoherence_factor(const AdiabaticFrame& f, int a, int ap, int nu,
                                 const GaussianMomentumDensity& density, double P) {
    return 0.5 * ((f.F[a] - f.F[nu]) + (f.F[ap] - f.F[nu])) * density.log_derivative(P);
}

/// Same rate for an element whose first index is the active state.
inline double decoherence_factor_active(const AdiabaticFrame& f, int ap, int nu,
                                        const GaussianMomentumDensity& density, double P) {
    return 0.5 * (f.F[ap] - f.F[nu]) * density.log_derivative(P);
}

} // namespace nadyn
