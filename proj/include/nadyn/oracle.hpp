#pragma once

/*
 * Exact two-state wavepacket dynamics on a uniform periodic grid.
 *
 * Propagation is in the diabatic basis with the symmetric split
 *   exp(-i V dt/2) exp(-i T dt) exp(-i V dt/2),
 * the kinetic factor applied in momentum space. Adiabatic observables are
 * obtained by rotating pointwise with gauge-continuous eigenvectors.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include <fftw3.h>

#include "nadyn/errors.hpp"
#include "nadyn/models.hpp"

namespace nadyn {

using cplx = std::complex<double>;

/// Amplitude allowed at the grid edges.
inline constexpr double boundary_tolerance = 1e-8;

struct GridSpec {
    std::size_t n = 4096;
    double R_min = -30.0;
    double R_max = 30.0;

    double spacing() const { return (R_max - R_min) / static_cast<double>(n); }
    double point(std::size_t i) const { return R_min + spacing() * static_cast<double>(i); }
    /// Angular wavenumber of FFT bin j (= momentum with hbar = 1).
    double wavenumber(std::size_t j) const {
        const double dk = 2.0 * std::numbers::pi / (R_max - R_min);
        const auto jj = static_cast<double>(j);
        return j < n / 2 ? dk * jj : dk * (jj - static_cast<double>(n));
    }
    bool valid() const { return n >= 8 && (n & (n - 1)) == 0 && R_max > R_min; }

    bool operator==(const GridSpec&) const = default;
};

struct GridWavepacket {
    GridSpec grid;
    double mass = 2000.0;
    double t = 0.0;
    std::array<std::vector<cplx>, n_states> psi; // diabatic components

    double norm() const {
        double s = 0.0;
        for (const auto& c : psi)
            for (const auto& v : c) s += std::norm(v);
        return s * grid.spacing();
    }

    /// Largest component modulus within `band` points of either grid edge.
    double boundary_amplitude(std::size_t band = 8) const {
        double m = 0.0;
        for (const auto& c : psi)
            for (std::size_t i = 0; i < band && i < c.size(); ++i)
                m = std::max({m, std::abs(c[i]), std::abs(c[c.size() - 1 - i])});
        return m;
    }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// In-place complex FFT of fixed length with an owned FFTW plan pair.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n), buffer_(n) {
        std::lock_guard lock(fftw_planner_mutex());
        auto* p = reinterpret_cast<fftw_complex*>(buffer_.data());
        const int len = static_cast<int>(n);
        forward_ = fftw_plan_dft_1d(len, p, p, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        backward_ = fftw_plan_dft_1d(len, p, p, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
    ~Fft() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    /// Unnormalized transforms; forward then backward multiplies by n.
    void forward(std::vector<cplx>& v) const { run(forward_, v); }
    void backward(std::vector<cplx>& v) const { run(backward_, v); }
    std::size_t size() const { return n_; }

private:
    static void run(fftw_plan plan, std::vector<cplx>& v) {
        auto* p = reinterpret_cast<fftw_complex*>(v.data());
        fftw_execute_dft(plan, p, p);
    }

    std::size_t n_;
    std::vector<cplx> buffer_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

// exp(-i V tau) for real symmetric 2x2 V.
inline Mat2c symmetric_propagator(const Mat2& V, double tau) {
    const double mean = 0.5 * (V(0, 0) + V(1, 1));
    const double h = 0.5 * (V(0, 0) - V(1, 1));
    const double c = V(0, 1);
    const double r = std::hypot(h, c);
    const cplx phase = std::polar(1.0, -mean * tau);
    const double cs = std::cos(r * tau);
    const double sinc = r > 0.0 ? std::sin(r * tau) / r : tau;
    Mat2c U;
    U(0, 0) = phase * cplx(cs, -sinc * h);
    U(1, 1) = phase * cplx(cs, sinc * h);
    U(0, 1) = U(1, 0) = phase * cplx(0.0, -sinc * c);
    return U;
}

} // namespace detail

/// Gauge-continuous adiabatic eigenvectors on every grid point, left to right.
inline std::vector<Mat2> grid_eigenvectors(const DiabaticModel& model, const GridSpec& grid) {
    std::vector<Mat2> U(grid.n);
    auto prev = detail::eigensystem(diabatic_hamiltonian(model, grid.point(0)));
    U[0] = prev.U;
    for (std::size_t i = 1; i < grid.n; ++i) {
        auto cur = detail::eigensystem(diabatic_hamiltonian(model, grid.point(i)));
        for (int a = 0; a < n_states; ++a) {
            const double overlap = cur.U.col(a).dot(U[i - 1].col(a));
            if (std::abs(overlap) < 0.5)
                throw GaugeAmbiguity("grid too coarse for eigenvector continuity at R=" +
                                     std::to_string(grid.point(i)));
            if (overlap < 0.0) cur.U.col(a) *= -1.0;
        }
        U[i] = cur.U;
    }
    return U;
}

/// Gaussian exp(-(R-R0)^2 / (4 sigma^2) + i P0 R) placed in one diabatic component.
inline GridWavepacket init_diabatic_packet(const GridSpec& grid, double mass, double R0, double P0, double sigma_R,
                                           int component) {
    GridWavepacket wp;
    wp.grid = grid;
    wp.mass = mass;
    for (auto& c : wp.psi) c.assign(grid.n, cplx{});
    for (std::size_t i = 0; i < grid.n; ++i) {
        const double R = grid.point(i);
        const double x = R - R0;
        wp.psi[component][i] = std::exp(cplx(-x * x / (4.0 * sigma_R * sigma_R), P0 * R));
    }
    const double scale = 1.0 / std::sqrt(wp.norm());
    for (auto& c : wp.psi)
        for (auto& v : c) v *= scale;
    if (wp.boundary_amplitude() > boundary_tolerance)
        throw BadSupport("initial packet amplitude at grid boundary exceeds " + std::to_string(boundary_tolerance));
    return wp;
}

/// Gaussian on adiabatic `surface`, rotated pointwise into the diabatic basis.
inline GridWavepacket init_packet(const DiabaticModel& model, const GridSpec& grid, double R0, double P0,
                                  double sigma_R, int surface) {
    auto wp = init_diabatic_packet(grid, model.mass, R0, P0, sigma_R, 0);
    const auto U = grid_eigenvectors(model, grid);
    for (std::size_t i = 0; i < grid.n; ++i) {
        const cplx g = wp.psi[0][i];
        wp.psi[0][i] = g * U[i](0, surface);
        wp.psi[1][i] = g * U[i](1, surface);
    }
    return wp;
}

/// Precomputed split-operator propagator for one model, grid and time step.
class WavepacketPropagator {
public:
    WavepacketPropagator(const DiabaticModel& model, const GridSpec& grid, double dt)
        : model_(model), grid_(grid), dt_(dt), fft_(grid.n), half_potential_(grid.n), kinetic_(grid.n) {
        for (std::size_t i = 0; i < grid.n; ++i)
            half_potential_[i] = detail::symmetric_propagator(diabatic_hamiltonian(model, grid.point(i)), 0.5 * dt);
        const double inv_n = 1.0 / static_cast<double>(grid.n);
        for (std::size_t j = 0; j < grid.n; ++j) {
            const double k = grid.wavenumber(j);
            kinetic_[j] = std::polar(inv_n, -k * k * dt / (2.0 * model.mass));
        }
    }

    double dt() const { return dt_; }
    const GridSpec& grid() const { return grid_; }
    const DiabaticModel& model() const { return model_; }

    void step(GridWavepacket& wp) const {
        apply_potential(wp);
        for (auto& c : wp.psi) {
            fft_.forward(c);
            for (std::size_t j = 0; j < c.size(); ++j) c[j] *= kinetic_[j];
            fft_.backward(c);
        }
        apply_potential(wp);
        wp.t += dt_;
    }

private:
    void apply_potential(GridWavepacket& wp) const {
        auto& a = wp.psi[0];
        auto& b = wp.psi[1];
        for (std::size_t i = 0; i < grid_.n; ++i) {
            const auto& U = half_potential_[i];
            const cplx x = a[i], y = b[i];
            a[i] = U(0, 0) * x + U(0, 1) * y;
            b[i] = U(1, 0) * x + U(1, 1) * y;
        }
    }

    DiabaticModel model_;
    GridSpec grid_;
    double dt_;
    detail::Fft fft_;
    std::vector<Mat2c> half_potential_;
    std::vector<cplx> kinetic_;
};

inline void split_operator_step(const WavepacketPropagator& prop, GridWavepacket& wp) { prop.step(wp); }

struct ChannelProbabilities {
    double transmitted_lower = 0.0;
    double transmitted_upper = 0.0;
    double reflected_lower = 0.0;
    double reflected_upper = 0.0;

    double total() const { return transmitted_lower + transmitted_upper + reflected_lower + reflected_upper; }
};

struct WavepacketAnalysis {
    double t = 0.0;
    std::array<double, n_states> population{};
    cplx coherence{}; // rho_01 = sum psi_0 conj(psi_1) dR, adiabatic basis
    double energy = 0.0;
    double norm = 0.0;
    double mean_R = 0.0;
    double mean_P = 0.0;
    double width_R = 0.0;
    double boundary_amplitude = 0.0;
    ChannelProbabilities channels;
};

/// Pointwise adiabatic rotation and expectation values. `eigenvectors` must
/// come from grid_eigenvectors for the same model and grid.
inline WavepacketAnalysis analyze(const GridWavepacket& wp, const DiabaticModel& model,
                                  const std::vector<Mat2>& eigenvectors, double R_cut) {
    WavepacketAnalysis out;
    out.t = wp.t;
    const auto& g = wp.grid;
    const double dR = g.spacing();
    double pot = 0.0, rsum = 0.0, r2sum = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        const double R = g.point(i);
        const cplx x = wp.psi[0][i], y = wp.psi[1][i];
        const Mat2& U = eigenvectors[i];
        const cplx ad0 = U(0, 0) * x + U(1, 0) * y;
        const cplx ad1 = U(0, 1) * x + U(1, 1) * y;
        const double p0 = std::norm(ad0), p1 = std::norm(ad1);
        out.population[0] += p0;
        out.population[1] += p1;
        out.coherence += ad0 * std::conj(ad1);
        if (R > R_cut) {
            out.channels.transmitted_lower += p0;
            out.channels.transmitted_upper += p1;
        } else if (R < -R_cut) {
            out.channels.reflected_lower += p0;
            out.channels.reflected_upper += p1;
        }
        const Mat2 V = diabatic_hamiltonian(model, R);
        pot += std::real(std::conj(x) * (V(0, 0) * x + V(0, 1) * y) + std::conj(y) * (V(1, 0) * x + V(1, 1) * y));
        const double w = p0 + p1;
        norm += w;
        rsum += w * R;
        r2sum += w * R * R;
    }
    for (auto& p : out.population) p *= dR;
    out.coherence *= dR;
    out.channels.transmitted_lower *= dR;
    out.channels.transmitted_upper *= dR;
    out.channels.reflected_lower *= dR;
    out.channels.reflected_upper *= dR;
    out.norm = norm * dR;
    out.mean_R = rsum / norm;
    out.width_R = std::sqrt(std::max(0.0, r2sum / norm - out.mean_R * out.mean_R));

    // Kinetic energy and mean momentum in momentum space.
    detail::Fft fft(g.n);
    double kin = 0.0, mom = 0.0, ksum = 0.0;
    for (const auto& c : wp.psi) {
        auto f = c;
        fft.forward(f);
        for (std::size_t j = 0; j < g.n; ++j) {
            const double k = g.wavenumber(j);
            const double w = std::norm(f[j]);
            ksum += w;
            mom += w * k;
            kin += w * k * k / (2.0 * wp.mass);
        }
    }
    out.mean_P = mom / ksum;
    out.energy = (kin / ksum) * out.norm + pot * dR;
    out.boundary_amplitude = wp.boundary_amplitude();
    return out;
}

inline WavepacketAnalysis analyze(const GridWavepacket& wp, const DiabaticModel& model, double R_cut = 10.0) {
    return analyze(wp, model, grid_eigenvectors(model, wp.grid), R_cut);
}

/// Runs the propagator for `n_steps`, analysing every `save_every` steps
/// (and at t = 0).
inline std::vector<WavepacketAnalysis> run_oracle(const WavepacketPropagator& prop, GridWavepacket& wp,
                                                  std::size_t n_steps, std::size_t save_every, double R_cut) {
    const auto U = grid_eigenvectors(prop.model(), prop.grid());
    std::vector<WavepacketAnalysis> out;
    out.push_back(analyze(wp, prop.model(), U, R_cut));
    for (std::size_t i = 1; i <= n_steps; ++i) {
        prop.step(wp);
        if (i % save_every == 0) out.push_back(analyze(wp, prop.model(), U, R_cut));
    }
    return out;
}

} // namespace nadyn
