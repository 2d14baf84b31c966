#pragma once

/*
 * Two-state diabatic model Hamiltonians on a 1-D nuclear coordinate and their
 * pointwise conversion to adiabatic quantities. Atomic units, hbar = 1.
 */

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nadyn/errors.hpp"

namespace nadyn {

using Mat2 = Eigen::Matrix2d;
using Mat2c = Eigen::Matrix2cd;

inline constexpr int n_states = 2;

/// Eigenvalue gap below which the adiabatic coupling is considered singular.
inline constexpr double degeneracy_floor = 1e-10;

enum class ModelKind { single_avoided_crossing, dual_avoided_crossing, extended_coupling, constant_gap };

inline std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::single_avoided_crossing: return "single-avoided-crossing";
    case ModelKind::dual_avoided_crossing: return "dual-avoided-crossing";
    case ModelKind::extended_coupling: return "extended-coupling";
    case ModelKind::constant_gap: return "constant-gap";
    }
    return "unknown";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view name) {
    for (auto k : {ModelKind::single_avoided_crossing, ModelKind::dual_avoided_crossing,
                   ModelKind::extended_coupling, ModelKind::constant_gap})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

/// Named constants of the model surfaces. Which fields are read depends on
/// the kind; the rest are ignored.
struct ModelParams {
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;
    double D = 0.0;
    double E0 = 0.0;
    double gap = 0.0;

    bool operator==(const ModelParams&) const = default;
};

struct DiabaticModel {
    ModelKind kind = ModelKind::single_avoided_crossing;
    ModelParams params;
    double mass = 2000.0;

    bool operator==(const DiabaticModel&) const = default;

    static ModelParams default_params(ModelKind kind) {
        switch (kind) {
        case ModelKind::single_avoided_crossing: return {.A = 0.01, .B = 1.6, .C = 0.005, .D = 1.0};
        case ModelKind::dual_avoided_crossing: return {.A = 0.10, .B = 0.28, .C = 0.015, .D = 0.06, .E0 = 0.05};
        case ModelKind::extended_coupling: return {.A = 6e-4, .B = 0.10, .C = 0.90};
        case ModelKind::constant_gap: return {.gap = 0.05};
        }
        return {};
    }

    static DiabaticModel make(ModelKind kind, double mass = 2000.0) { return {kind, default_params(kind), mass}; }

    /// Throws ConfigError if a parameter is not finite or the mass is not positive.
    void validate() const {
        for (double v : {params.A, params.B, params.C, params.D, params.E0, params.gap})
            if (!std::isfinite(v)) throw ConfigError("model", "parameters must be finite");
        if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("model.mass", "must be finite and > 0");
    }
};

inline Mat2 diabatic_hamiltonian(const DiabaticModel& model, double R) {
    const auto& p = model.params;
    Mat2 V = Mat2::Zero();
    switch (model.kind) {
    case ModelKind::single_avoided_crossing: {
        const double v00 = R > 0.0 ? p.A * (1.0 - std::exp(-p.B * R)) : -p.A * (1.0 - std::exp(p.B * R));
        V(0, 0) = v00;
        V(1, 1) = -v00;
        V(0, 1) = V(1, 0) = p.C * std::exp(-p.D * R * R);
        break;
    }
    case ModelKind::dual_avoided_crossing:
        V(0, 0) = 0.0;
        V(1, 1) = -p.A * std::exp(-p.B * R * R) + p.E0;
        V(0, 1) = V(1, 0) = p.C * std::exp(-p.D * R * R);
        break;
    case ModelKind::extended_coupling:
        V(0, 0) = p.A;
        V(1, 1) = -p.A;
        V(0, 1) = V(1, 0) = R < 0.0 ? p.B * std::exp(p.C * R) : p.B * (2.0 - std::exp(-p.C * R));
        break;
    case ModelKind::constant_gap:
        V(0, 0) = 0.5 * p.gap;
        V(1, 1) = -0.5 * p.gap;
        break;
    }
    return V;
}

inline Mat2 diabatic_gradient(const DiabaticModel& model, double R) {
    const auto& p = model.params;
    Mat2 dV = Mat2::Zero();
    switch (model.kind) {
    case ModelKind::single_avoided_crossing: {
        const double d00 = R > 0.0 ? p.A * p.B * std::exp(-p.B * R) : p.A * p.B * std::exp(p.B * R);
        dV(0, 0) = d00;
        dV(1, 1) = -d00;
        dV(0, 1) = dV(1, 0) = -2.0 * p.C * p.D * R * std::exp(-p.D * R * R);
        break;
    }
    case ModelKind::dual_avoided_crossing:
        dV(1, 1) = 2.0 * p.A * p.B * R * std::exp(-p.B * R * R);
        dV(0, 1) = dV(1, 0) = -2.0 * p.C * p.D * R * std::exp(-p.D * R * R);
        break;
    case ModelKind::extended_coupling:
        dV(0, 1) = dV(1, 0) = R < 0.0 ? p.B * p.C * std::exp(p.C * R) : p.B * p.C * std::exp(-p.C * R);
        break;
    case ModelKind::constant_gap:
        break;
    }
    return dV;
}

/// Adiabatic energies, Hellmann-Feynman forces and nonadiabatic coupling at
/// one nuclear position. Index 0 is the ground state.
struct AdiabaticFrame {
    double R = 0.0;
    std::array<double, n_states> E{};
    std::array<double, n_states> F{};
    /// d(a, b) = <a| d/dR |b>, antisymmetric.
    Mat2 d = Mat2::Zero();
    /// Column a holds eigenvector a in the diabatic basis; the sign of each
    /// column is the gauge.
    Mat2 U = Mat2::Identity();

    double gap(int a, int b) const { return E[a] - E[b]; }
    double omega(int a, int b) const { return E[a] - E[b]; }
};

namespace detail {

struct Eigen2 {
    std::array<double, 2> E;
    Mat2 U;
};

// Closed-form eigensystem of a real symmetric 2x2 matrix, ascending order.
inline Eigen2 eigensystem(const Mat2& V) {
    const double mean = 0.5 * (V(0, 0) + V(1, 1));
    const double half_diff = 0.5 * (V(0, 0) - V(1, 1));
    const double c = 0.5 * (V(0, 1) + V(1, 0));
    const double r = std::hypot(half_diff, c);
    const double theta = 0.5 * std::atan2(c, half_diff);
    const double cs = std::cos(theta), sn = std::sin(theta);
    Eigen2 out;
    out.E = {mean - r, mean + r};
    out.U << -sn, cs, cs, sn;
    return out;
}

} // namespace detail

/// Adiabatic energies only; cheaper than a full frame.
inline std::array<double, n_states> adiabatic_energies(const Mat2& V) {
    const double mean = 0.5 * (V(0, 0) + V(1, 1));
    const double r = std::hypot(0.5 * (V(0, 0) - V(1, 1)), 0.5 * (V(0, 1) + V(1, 0)));
    return {mean - r, mean + r};
}

/// Builds the frame from V and dV/dR in the canonical (raw) eigenvector gauge.
inline AdiabaticFrame adiabatize(const Mat2& V, const Mat2& dV, double R = 0.0) {
    const auto eig = detail::eigensystem(V);
    const double gap = eig.E[1] - eig.E[0];
    if (!(gap > degeneracy_floor))
        throw DegenerateSurfaces("adiabatic gap " + std::to_string(gap) + " below degeneracy floor at R=" +
                                 std::to_string(R));
    AdiabaticFrame f;
    f.R = R;
    f.E = eig.E;
    f.U = eig.U;
    const Mat2 dVad = f.U.transpose() * dV * f.U;
    f.F = {-dVad(0, 0), -dVad(1, 1)};
    const double d01 = dVad(0, 1) / gap;
    f.d << 0.0, d01, -d01, 0.0;
    return f;
}

/// Flips eigenvector signs of `frame` so that each has positive overlap with
/// the same-index eigenvector of `reference`.
inline void align_gauge(AdiabaticFrame& frame, const AdiabaticFrame& reference) {
    for (int a = 0; a < n_states; ++a) {
        const double overlap = frame.U.col(a).dot(reference.U.col(a));
        if (std::abs(overlap) < 0.5)
            throw GaugeAmbiguity("eigenvector overlap " + std::to_string(overlap) + " between R=" +
                                 std::to_string(reference.R) + " and R=" + std::to_string(frame.R));
        if (overlap < 0.0) {
            frame.U.col(a) *= -1.0;
            frame.d.row(a) *= -1.0;
            frame.d.col(a) *= -1.0;
        }
    }
}

inline AdiabaticFrame frame_at(const DiabaticModel& model, double R) {
    return adiabatize(diabatic_hamiltonian(model, R), diabatic_gradient(model, R), R);
}

/// Frame at R, gauge-continued from a nearby frame.
inline AdiabaticFrame frame_at(const DiabaticModel& model, double R, const AdiabaticFrame& previous) {
    auto f = frame_at(model, R);
    align_gauge(f, previous);
    return f;
}

/// Makes a sequence of frames gauge-continuous, keeping the first as is.
inline void align_path(std::span<AdiabaticFrame> frames) {
    for (std::size_t i = 1; i < frames.size(); ++i) align_gauge(frames[i], frames[i - 1]);
}

inline std::vector<AdiabaticFrame> frame_along_path(const DiabaticModel& model, std::span<const double> path) {
    std::vector<AdiabaticFrame> frames;
    frames.reserve(path.size());
    for (double R : path) frames.push_back(frame_at(model, R));
    align_path(frames);
    return frames;
}

} // namespace nadyn
