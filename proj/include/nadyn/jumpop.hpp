#pragma once

/*
 * Momentum-jump operators.
 *
 * A jump along the unit coupling direction d with energy gap dE = E_from - E_to
 * replaces the parallel momentum component p = P.d by
 *
 *     sgn(p) * sqrt(p^2 + k * dE * M)
 *
 * and leaves the orthogonal part untouched. k = 1 is the single shift that
 * accompanies a transition into or out of a coherence (mean-surface energy
 * changes by dE/2); k = 2 is the population-to-population rescaling of
 * fewest-switches hopping. Two single shifts with the same gap compose to one
 * double shift, which is how the fewest-switches rule arises from the
 * coherence-mediated jumps.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>

#include "nadyn/errors.hpp"

namespace nadyn {

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
double dot(const Vec<N>& a, const Vec<N>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

enum class JumpScale { qcle_single = 1, fssh_double = 2 };

inline double scale_factor(JumpScale s) { return s == JumpScale::qcle_single ? 1.0 : 2.0; }

template <std::size_t N>
struct JumpSpec {
    Vec<N> d_hat{};
    double delta_e = 0.0;
    double mass = 1.0;
    JumpScale scale = JumpScale::qcle_single;

    void validate() const {
        if (std::abs(std::sqrt(dot(d_hat, d_hat)) - 1.0) > 1e-12)
            throw std::invalid_argument("JumpSpec: d_hat must be a unit vector");
        if (!(mass > 0.0)) throw std::invalid_argument("JumpSpec: mass must be positive");
    }
};

enum class JumpStatus { applied, frustrated };

template <std::size_t N>
struct JumpOutcome {
    JumpStatus status = JumpStatus::frustrated;
    std::optional<Vec<N>> new_p;
    std::optional<double> kinetic_change;

    bool applied() const { return status == JumpStatus::applied; }
};

/// sgn with sgn(0) = +1.
inline double jump_sign(double x) { return x < 0.0 ? -1.0 : 1.0; }

template <std::size_t N>
JumpOutcome<N> apply_jump(const Vec<N>& P, const JumpSpec<N>& spec) {
    const double k = scale_factor(spec.scale);
    const double p_par = dot(P, spec.d_hat);
    const double arg = p_par * p_par + k * spec.delta_e * spec.mass;
    if (arg < 0.0) return {};
    const double p_new = jump_sign(p_par) * std::sqrt(arg);
    JumpOutcome<N> out;
    out.status = JumpStatus::applied;
    Vec<N> np;
    for (std::size_t i = 0; i < N; ++i) np[i] = (P[i] - p_par * spec.d_hat[i]) + p_new * spec.d_hat[i];
    out.new_p = np;
    out.kinetic_change = 0.5 * k * spec.delta_e;
    return out;
}

/// Applies the jumps left to right, each at the momentum produced by the
/// previous one. Any frustrated stage makes the whole composition frustrated.
template <std::size_t N>
JumpOutcome<N> compose_jumps(const Vec<N>& P, std::span<const JumpSpec<N>> specs) {
    for (const auto& s : specs)
        if (s.d_hat != specs.front().d_hat || s.mass != specs.front().mass)
            throw MixedDirection("compose_jumps: all jumps must share direction and mass");
    JumpOutcome<N> out;
    out.status = JumpStatus::applied;
    out.new_p = P;
    out.kinetic_change = 0.0;
    for (const auto& s : specs) {
        const auto step = apply_jump(*out.new_p, s);
        if (!step.applied()) return {};
        out.new_p = step.new_p;
        *out.kinetic_change += *step.kinetic_change;
    }
    return out;
}

/// The single double-scale jump equivalent to a concatenation of single
/// shifts. Recognised patterns (gaps listed in application order):
///   (dE, dE)               -> double jump with dE
///   (dE, -dE)              -> identity
///   (dE, a, b), a + b = dE -> double jump with dE
///   (a, b, c), a + b + c = 0 -> identity
template <std::size_t N>
JumpSpec<N> fssh_equivalent(std::span<const JumpSpec<N>> specs) {
    if (specs.size() < 2 || specs.size() > 3)
        throw PatternMismatch("fssh_equivalent: expected two or three single jumps");
    for (const auto& s : specs) {
        if (s.scale != JumpScale::qcle_single)
            throw PatternMismatch("fssh_equivalent: all jumps must be single-scale");
        if (s.d_hat != specs.front().d_hat || s.mass != specs.front().mass)
            throw MixedDirection("fssh_equivalent: all jumps must share direction and mass");
    }
    auto same = [](double a, double b) {
        return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
    };
    JumpSpec<N> out = specs.front();
    out.scale = JumpScale::fssh_double;
    const double first = specs[0].delta_e;
    if (specs.size() == 2) {
        const double second = specs[1].delta_e;
        if (same(first, second)) return out;
        if (same(first, -second)) {
            out.delta_e = 0.0;
            return out;
        }
    } else {
        const double rest = specs[1].delta_e + specs[2].delta_e;
        if (same(rest, first)) return out;
        if (same(first + rest, 0.0)) {
            out.delta_e = 0.0;
            return out;
        }
    }
    throw PatternMismatch("fssh_equivalent: gaps do not form a concatenation pattern");
}

} // namespace nadyn
