#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "nadyn/fssh.hpp"

using namespace nadyn;

namespace {

const auto tully1 = DiabaticModel::make(ModelKind::single_avoided_crossing);
const auto flat = DiabaticModel::make(ModelKind::constant_gap);

Mat2c coherent_half() {
    Mat2c rho;
    rho << 0.5, 0.5, 0.5, 0.5;
    return rho;
}

} // namespace

TEST(FsshNuclear, FreeParticleOnFlatSurface) {
    auto traj = make_fssh_trajectory(flat, -3.0, 12.0, 0, pure_density(0), Rng(1, 0));
    nuclear_step(flat, traj, 0.1);
    EXPECT_DOUBLE_EQ(traj.R, -3.0 + 12.0 * 0.1 / 2000.0);
    EXPECT_EQ(traj.P, 12.0);
}

TEST(FsshNuclear, OneStepEnergy) {
    auto traj = make_fssh_trajectory(tully1, -5.0, 20.0, 0, pure_density(0), Rng(1, 0));
    const double e0 = traj.energy(tully1.mass);
    nuclear_step(tully1, traj, 0.1);
    EXPECT_LT(std::abs(traj.energy(tully1.mass) - e0), 1e-10);
}

TEST(FsshNuclear, Reversible) {
    for (int surface : {0, 1}) {
        auto traj = make_fssh_trajectory(tully1, -0.4, 15.0, surface, pure_density(surface), Rng(1, 0));
        nuclear_step(tully1, traj, 0.1);
        traj.P = -traj.P;
        nuclear_step(tully1, traj, 0.1);
        EXPECT_NEAR(traj.R, -0.4, 1e-10);
        EXPECT_NEAR(-traj.P, 15.0, 1e-10);
    }
}

TEST(FsshElectronic, PurePhaseOnConstantGap) {
    auto traj = make_fssh_trajectory(flat, 0.0, 10.0, 0, coherent_half(), Rng(1, 0));
    const double gap = 0.05;
    for (int i = 0; i < 1000; ++i) {
        nuclear_step(flat, traj, 0.1);
        electronic_step(traj, 0.1, flat.mass);
    }
    // omega_01 = E0 - E1 = -gap, rho01 = 1/2 exp(-i omega_01 t)
    const cplx expected = 0.5 * std::exp(cplx(0.0, gap * traj.t));
    EXPECT_LT(std::abs(traj.rho(0, 1) - expected), 1e-10);
    EXPECT_NEAR(traj.rho(0, 0).real(), 0.5, 1e-12);
    EXPECT_NEAR(traj.rho(1, 1).real(), 0.5, 1e-12);
}

TEST(FsshElectronic, TraceAndHermiticityPerStep) {
    auto traj = make_fssh_trajectory(tully1, -1.0, 20.0, 0, pure_density(0), Rng(1, 0));
    for (int i = 0; i < 300; ++i) {
        nuclear_step(tully1, traj, 0.1);
        const auto before = traj.rho.trace();
        electronic_step(traj, 0.1, tully1.mass);
        EXPECT_LT(std::abs(traj.rho.trace() - before), 1e-10);
        EXPECT_LT((traj.rho - traj.rho.adjoint()).norm(), 1e-10);
    }
}

TEST(FsshElectronic, StepHalvingConverges) {
    auto run = [](double dt, int substeps) {
        auto traj = make_fssh_trajectory(tully1, -5.0, 20.0, 0, pure_density(0), Rng(1, 0));
        const int n = static_cast<int>(std::lround(1000.0 / dt));
        for (int i = 0; i < n; ++i) {
            nuclear_step(tully1, traj, dt);
            electronic_step(traj, dt, tully1.mass, substeps);
        }
        return traj.rho(1, 1).real();
    };
    const double coarse = run(0.1, 10), fine = run(0.05, 10);
    EXPECT_GT(fine, 0.1);
    EXPECT_LT(std::abs(coarse - fine), 1e-6);
}

TEST(FsshElectronic, RateMatchesDensityEquation) {
    // Independent evaluation of -i[E, rho] - [T, rho] with plain loops.
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        Mat2c rho;
        rho << 0.5 + 0.3 * u(gen), cplx(u(gen), u(gen)) * 0.3, 0.0, 0.0;
        rho(1, 0) = std::conj(rho(0, 1));
        rho(1, 1) = 1.0 - rho(0, 0);
        const std::array<double, 2> E{0.02 * u(gen), 0.02 * u(gen)};
        Mat2 T;
        const double t = 0.01 * u(gen);
        T << 0, t, -t, 0;
        const Mat2c H = Mat2c(Eigen::Vector2cd(E[0], E[1]).asDiagonal());
        const Mat2c Tc = T.cast<cplx>();
        const Mat2c ref = cplx(0, -1) * (H * rho - rho * H) - (Tc * rho - rho * Tc);
        EXPECT_LT((density_rate(rho, E, T) - ref).norm(), 1e-16);
    }
}

TEST(FsshHop, ProbabilityExamples) {
    auto traj = make_fssh_trajectory(flat, 0.0, 20.0, 0, pure_density(0), Rng(1, 0));
    EXPECT_EQ(hop_probability(traj, 1, 0.1, 2000.0), 0.0);

    // (P/M) d = 0.01 with P = 20, M = 2000 means d01 = 1.
    traj.frame.d << 0.0, 1.0, -1.0, 0.0;
    traj.rho << 0.6, 0.3, 0.3, 0.4;
    EXPECT_NEAR(hop_probability(traj, 1, 0.1, 2000.0), 2 * 0.01 * 0.3 * 0.1 / 0.6, 1e-15);
    EXPECT_NEAR(hop_probability(traj, 1, 0.1, 2000.0), 0.001, 1e-15);

    traj.rho(0, 1) = traj.rho(1, 0) = -0.3; // negative flux is clipped
    EXPECT_EQ(hop_probability(traj, 1, 0.1, 2000.0), 0.0);
}

TEST(FsshHop, EmptyActiveStateThrows) {
    auto traj = make_fssh_trajectory(flat, 0.0, 20.0, 0, pure_density(1), Rng(1, 0));
    EXPECT_THROW(hop_probability(traj, 1, 0.1, 2000.0), DegeneratePopulation);
}

TEST(FsshHop, NoProbabilityNoLog) {
    auto traj = make_fssh_trajectory(flat, 0.0, 20.0, 0, pure_density(0), Rng(1, 0));
    attempt_hop(traj, 0.1, 2000.0);
    EXPECT_EQ(traj.active, 0);
    EXPECT_TRUE(traj.hop_log.empty());
}

TEST(FsshHop, ForcedDownwardHopConservesEnergy) {
    auto traj = make_fssh_trajectory(tully1, 0.3, 15.0, 1, pure_density(1), Rng(1, 0));
    // Coherence chosen so that flux * dt / rho11 >= 1 for a sure hop.
    traj.rho << 0.5, 0.5, 0.5, 0.5;
    if (traj.frame.d(1, 0) * traj.P < 0) traj.rho(0, 1) = traj.rho(1, 0) = -0.5;
    ASSERT_GE(hop_probability(traj, 0, 1e4, tully1.mass), 1.0);
    const double e0 = traj.energy(tully1.mass);
    attempt_hop(traj, 1e4, tully1.mass);
    ASSERT_EQ(traj.hop_log.size(), 1u);
    EXPECT_EQ(traj.hop_log[0].status, JumpStatus::applied);
    EXPECT_EQ(traj.active, 0);
    EXPECT_NEAR(traj.energy(tully1.mass), e0, 1e-10);
}

TEST(FsshHop, ForcedUpwardHopFrustrated) {
    auto traj = make_fssh_trajectory(tully1, 0.3, 1.0, 0, coherent_half(), Rng(1, 0));
    if (traj.frame.d(0, 1) * traj.P < 0) traj.rho(0, 1) = traj.rho(1, 0) = -0.5;
    ASSERT_GE(hop_probability(traj, 1, 1e6, tully1.mass), 1.0);
    const Mat2c rho = traj.rho;
    attempt_hop(traj, 1e6, tully1.mass);
    ASSERT_EQ(traj.hop_log.size(), 1u);
    EXPECT_EQ(traj.hop_log[0].status, JumpStatus::frustrated);
    EXPECT_EQ(traj.active, 0);
    EXPECT_EQ(traj.P, 1.0);
    EXPECT_EQ(traj.rho, rho);
}

TEST(FsshRun, ZeroCouplingNeverHops) {
    auto traj = make_fssh_trajectory(flat, -5.0, 20.0, 0, pure_density(0), Rng(9, 0));
    const auto snaps = run_fssh(flat, traj, {}, 2000, 100);
    EXPECT_EQ(snaps.size(), 21u);
    for (const auto& s : snaps) {
        EXPECT_EQ(s.active, 0);
        EXPECT_EQ(s.rho(0, 0).real(), 1.0);
        EXPECT_EQ(s.rho(1, 1).real(), 0.0);
    }
    EXPECT_TRUE(traj.hop_log.empty());
}

TEST(FsshRun, ScatteringCompletes) {
    auto traj = make_fssh_trajectory(tully1, -9.0, 20.0, 0, pure_density(0), Rng(5, 0));
    run_fssh(tully1, traj, {}, 40000, 1000);
    EXPECT_GT(std::abs(traj.R), 10.0);
}

TEST(FsshRun, SameSeedSameHops) {
    for (std::uint64_t i = 0; i < 20; ++i) {
        auto a = make_fssh_trajectory(tully1, -4.0, 20.0, 0, pure_density(0), Rng(42, i));
        auto b = make_fssh_trajectory(tully1, -4.0, 20.0, 0, pure_density(0), Rng(42, i));
        run_fssh(tully1, a, {}, 9000, 9000);
        run_fssh(tully1, b, {}, 9000, 9000);
        EXPECT_EQ(a.hop_log, b.hop_log);
        EXPECT_EQ(a.R, b.R);
        EXPECT_EQ(a.P, b.P);
    }
}

// Whole-trajectory invariants over several seeds.
TEST(FsshProperty, TrajectoryInvariants) {
    int hops = 0;
    for (std::uint64_t i = 0; i < 16; ++i) {
        auto traj = make_fssh_trajectory(tully1, -6.0, 12.0 + i, 0, pure_density(0), Rng(17, i));
        const double e0 = traj.energy(tully1.mass);
        for (int k = 0; k < 12000; ++k) {
            fssh_step(tully1, traj, {});
            ASSERT_LT(std::abs(traj.rho.trace() - 1.0), 1e-8);
            ASSERT_LT((traj.rho - traj.rho.adjoint()).norm(), 1e-10);
            if (k % 50 == 0) {
                Eigen::SelfAdjointEigenSolver<Mat2c> es(traj.rho);
                EXPECT_GE(es.eigenvalues().minCoeff(), -1e-6);
                EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 + 1e-6);
            }
        }
        EXPECT_LT(std::abs(traj.energy(tully1.mass) - e0) / std::abs(e0), 1e-6);
        for (const auto& h : traj.hop_log) hops += h.status == JumpStatus::applied;
    }
    EXPECT_GT(hops, 0);
}

TEST(FsshProperty, RateIdentity) {
    // -sum_b flux(nu -> b) = d rho_nunu / dt from the density equation.
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double R = 3 * u(gen), P = 25 * u(gen);
        const auto f = frame_at(tully1, R);
        Mat2c rho;
        const double p0 = 0.5 + 0.5 * u(gen);
        const double c = std::sqrt(p0 * (1 - p0));
        rho << p0, std::polar(c * std::abs(u(gen)), 3.2 * u(gen)), 0.0, 1 - p0;
        rho(1, 0) = std::conj(rho(0, 1));
        const Mat2c rate = density_rate(rho, f.E, (P / tully1.mass) * f.d);
        for (int nu = 0; nu < 2; ++nu) {
            const double out = hop_flux(rho, f, P, tully1.mass, nu, 1 - nu);
            EXPECT_NEAR(-out, rate(nu, nu).real(), 1e-12);
        }
    }
}

TEST(FsshProperty, ActiveFractionTracksDensity) {
    const int n = 400;
    double frac = 0.0, mean_rho = 0.0;
    int frustrated = 0;
    for (int i = 0; i < n; ++i) {
        Rng rng(77, static_cast<std::uint64_t>(i));
        const double R = rng.normal(-6.0, 0.5), P = rng.normal(30.0, 1.0);
        auto traj = make_fssh_trajectory(tully1, R, P, 0, pure_density(0), std::move(rng));
        run_fssh(tully1, traj, {.dt = 0.2}, 6000, 6000);
        frac += traj.active;
        mean_rho += traj.rho(1, 1).real();
        for (const auto& h : traj.hop_log) frustrated += h.status == JumpStatus::frustrated;
    }
    frac /= n;
    mean_rho /= n;
    const double se = std::sqrt(frac * (1 - frac) / n);
    EXPECT_EQ(frustrated, 0);
    EXPECT_LT(std::abs(frac - mean_rho), 3 * se + 1e-3);
}
