#pragma once

/*
 * Fewest-switches surface hopping on a two-state model.
 *
 * One step: velocity Verlet on the active surface, then RK4 integration of the
 * electronic density matrix over the same interval with the adiabatic
 * energies and the velocity-coupling product (P/M) d linearly interpolated
 * between the step endpoints, then one hop attempt using end-of-step
 * quantities.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "nadyn/errors.hpp"
#include "nadyn/jumpop.hpp"
#include "nadyn/models.hpp"
#include "nadyn/rng.hpp"

namespace nadyn {

using cplx = std::complex<double>;

/// Populations below this cannot be left by a hop.
inline constexpr double population_floor = 1e-12;

struct FsshOptions {
    double dt = 0.1;
    int electronic_substeps = 10;
};

struct HopEvent {
    double t = 0.0;
    int from = 0;
    int to = 0;
    JumpStatus status = JumpStatus::applied;

    bool operator==(const HopEvent&) const = default;
};

struct FsshTrajectory {
    double t = 0.0;
    double R = 0.0;
    double P = 0.0;
    int active = 0;
    Mat2c rho = Mat2c::Zero();
    Rng rng{0, 0};
    std::vector<HopEvent> hop_log;

    // Frames and momentum at the end and start of the most recent nuclear step.
    AdiabaticFrame frame;
    AdiabaticFrame prev_frame;
    double prev_P = 0.0;

    double kinetic_energy(double mass) const { return 0.5 * P * P / mass; }
    double energy(double mass) const { return frame.E[active] + kinetic_energy(mass); }
};

inline FsshTrajectory make_fssh_trajectory(const DiabaticModel& model, double R, double P, int active,
                                           const Mat2c& rho, Rng rng) {
    FsshTrajectory traj;
    traj.R = R;
    traj.P = P;
    traj.active = active;
    traj.rho = rho;
    traj.rng = std::move(rng);
    traj.frame = frame_at(model, R);
    traj.prev_frame = traj.frame;
    traj.prev_P = P;
    return traj;
}

/// Pure-state density |state><state|.
inline Mat2c pure_density(int state) {
    Mat2c rho = Mat2c::Zero();
    rho(state, state) = 1.0;
    return rho;
}

/// Right-hand side of the coherent electronic equations,
///   d rho / dt = -i [diag(E), rho] - [T, rho],  T = (P/M) d.
/// Its diagonal is the population rate, its off-diagonal the coherence rate.
inline Mat2c density_rate(const Mat2c& rho, const std::array<double, n_states>& E, const Mat2& T) {
    Mat2c out;
    for (int a = 0; a < n_states; ++a)
        for (int b = 0; b < n_states; ++b) {
            cplx v = cplx(0.0, -(E[a] - E[b])) * rho(a, b);
            for (int c = 0; c < n_states; ++c) v -= T(a, c) * rho(c, b) - rho(a, c) * T(c, b);
            out(a, b) = v;
        }
    return out;
}

/// Population flux from `from` into `to`, 2 Re[(P/M) d_{from,to} conj(rho_{from,to})],
/// before any clipping. Summed over targets and negated it is d rho_{from,from}/dt.
inline double hop_flux(const Mat2c& rho, const AdiabaticFrame& frame, double P, double mass, int from, int to) {
    const double T = P / mass * frame.d(from, to);
    return 2.0 * std::real(T * std::conj(rho(from, to)));
}

inline void nuclear_step(const DiabaticModel& model, FsshTrajectory& traj, double dt) {
    const double M = model.mass;
    traj.prev_frame = traj.frame;
    traj.prev_P = traj.P;
    const double P_half = traj.P + 0.5 * dt * traj.frame.F[traj.active];
    traj.R += dt * P_half / M;
    traj.frame = frame_at(model, traj.R, traj.prev_frame);
    traj.P = P_half + 0.5 * dt * traj.frame.F[traj.active];
    traj.t += dt;
}

inline void electronic_step(FsshTrajectory& traj, double dt, double mass, int substeps = 10) {
    const auto& fa = traj.prev_frame;
    const auto& fb = traj.frame;
    const Mat2 Ta = (traj.prev_P / mass) * fa.d;
    const Mat2 Tb = (traj.P / mass) * fb.d;
    auto rate = [&](const Mat2c& rho, double s) {
        const std::array<double, n_states> E{(1.0 - s) * fa.E[0] + s * fb.E[0], (1.0 - s) * fa.E[1] + s * fb.E[1]};
        const Mat2 T = (1.0 - s) * Ta + s * Tb;
        return density_rate(rho, E, T);
    };
    const double h = dt / substeps;
    const double ds = 1.0 / substeps;
    Mat2c rho = traj.rho;
    for (int i = 0; i < substeps; ++i) {
        const double s = i * ds;
        const Mat2c k1 = rate(rho, s);
        const Mat2c k2 = rate(rho + 0.5 * h * k1, s + 0.5 * ds);
        const Mat2c k3 = rate(rho + 0.5 * h * k2, s + 0.5 * ds);
        const Mat2c k4 = rate(rho + h * k3, s + ds);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    traj.rho = rho;
}

/// Fewest-switches probability of leaving the active state for `target`
/// during dt. Throws DegeneratePopulation when the active state is empty.
inline double hop_probability(const FsshTrajectory& traj, int target, double dt, double mass) {
    const double pop = std::real(traj.rho(traj.active, traj.active));
    if (pop < population_floor) throw DegeneratePopulation("active state population below floor");
    const double flux = hop_flux(traj.rho, traj.frame, traj.P, mass, traj.active, target);
    return std::clamp(flux * dt / pop, 0.0, 1.0);
}

/// Draws one uniform variate and hops to the target selected by the
/// cumulative probabilities, rescaling momentum with the double-scale jump.
/// The electronic density is never modified here.
inline void attempt_hop(FsshTrajectory& traj, double dt, double mass) {
    const double xi = traj.rng.uniform();
    const int from = traj.active;
    if (std::real(traj.rho(from, from)) < population_floor) return;
    double cumulative = 0.0;
    for (int to = 0; to < n_states; ++to) {
        if (to == from) continue;
        cumulative += hop_probability(traj, to, dt, mass);
        if (xi >= cumulative) continue;
        const JumpSpec<1> spec{{jump_sign(traj.frame.d(from, to))}, traj.frame.gap(from, to), mass,
                               JumpScale::fssh_double};
        const auto outcome = apply_jump(Vec<1>{traj.P}, spec);
        if (outcome.applied()) {
            traj.P = (*outcome.new_p)[0];
            traj.active = to;
        }
        traj.hop_log.push_back({traj.t, from, to, outcome.status});
        return;
    }
}

struct FsshSnapshot {
    double t = 0.0;
    int active = 0;
    double R = 0.0;
    double P = 0.0;
    Mat2c rho = Mat2c::Zero();
    double energy = 0.0;
};

inline FsshSnapshot snapshot(const FsshTrajectory& traj, double mass) {
    return {traj.t, traj.active, traj.R, traj.P, traj.rho, traj.energy(mass)};
}

/// One full FSSH step in the fixed order nuclear -> electronic -> hop.
inline void fssh_step(const DiabaticModel& model, FsshTrajectory& traj, const FsshOptions& opt) {
    nuclear_step(model, traj, opt.dt);
    electronic_step(traj, opt.dt, model.mass, opt.electronic_substeps);
    attempt_hop(traj, opt.dt, model.mass);
}

/// Runs `n_steps` steps, recording a snapshot at t = 0 and after every
/// `save_every` steps. `traj` is left in its final state.
inline std::vector<FsshSnapshot> run_fssh(const DiabaticModel& model, FsshTrajectory& traj,
                                          const FsshOptions& opt, std::int64_t n_steps, std::int64_t save_every = 1) {
    std::vector<FsshSnapshot> out;
    out.reserve(static_cast<std::size_t>(n_steps / save_every + 1));
    out.push_back(snapshot(traj, model.mass));
    for (std::int64_t i = 1; i <= n_steps; ++i) {
        fssh_step(model, traj, opt);
        if (i % save_every == 0) out.push_back(snapshot(traj, model.mass));
    }
    return out;
}

} // namespace nadyn
