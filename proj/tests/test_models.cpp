#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nadyn/models.hpp"

using namespace nadyn;

namespace {

const ModelKind all_kinds[] = {ModelKind::single_avoided_crossing, ModelKind::dual_avoided_crossing,
                               ModelKind::extended_coupling, ModelKind::constant_gap};

// Brute-force eigenpair check, independent of the closed form.
double residual(const Mat2& V, const AdiabaticFrame& f) {
    double worst = 0.0;
    for (int a = 0; a < 2; ++a)
        worst = std::max(worst, (V * f.U.col(a) - f.E[a] * f.U.col(a)).norm());
    return worst;
}

} // namespace

TEST(Models, ConstantGapHamiltonian) {
    const auto m = DiabaticModel::make(ModelKind::constant_gap);
    for (double R : {-7.0, 0.0, 3.3}) {
        const Mat2 V = diabatic_hamiltonian(m, R);
        EXPECT_DOUBLE_EQ(V(0, 0), 0.025);
        EXPECT_DOUBLE_EQ(V(1, 1), -0.025);
        EXPECT_EQ(V(0, 1), 0.0);
        EXPECT_EQ(diabatic_gradient(m, R).norm(), 0.0);
    }
}

TEST(Models, SingleCrossingValues) {
    const auto m = DiabaticModel::make(ModelKind::single_avoided_crossing);
    const Mat2 V0 = diabatic_hamiltonian(m, 0.0);
    EXPECT_EQ(V0(0, 0), 0.0);
    EXPECT_EQ(V0(1, 1), 0.0);
    EXPECT_DOUBLE_EQ(V0(0, 1), 0.005);
    const Mat2 V4 = diabatic_hamiltonian(m, 4.0);
    EXPECT_NEAR(V4(0, 0), 0.01 * (1.0 - std::exp(-6.4)), 1e-15);
    EXPECT_NEAR(V4(0, 0), 0.0099834, 1e-7);
    EXPECT_DOUBLE_EQ(V4(1, 1), -V4(0, 0));

    const Mat2 dV = diabatic_gradient(m, 0.0);
    EXPECT_NEAR(dV(0, 0), 0.016, 1e-15);
    EXPECT_EQ(dV(0, 1), 0.0);
}

TEST(Models, GradientMatchesCentralDifference) {
    const double h = 1e-5;
    for (auto kind : all_kinds) {
        const auto m = DiabaticModel::make(kind);
        for (double R : {1.3, -0.7, 2.9, -4.1}) {
            const Mat2 fd = (diabatic_hamiltonian(m, R + h) - diabatic_hamiltonian(m, R - h)) / (2 * h);
            EXPECT_LT((fd - diabatic_gradient(m, R)).cwiseAbs().maxCoeff(), 1e-8) << to_string(kind) << " R=" << R;
        }
    }
}

TEST(Models, SymmetricPointFrame) {
    Mat2 V;
    V << 0.0, 0.005, 0.005, 0.0;
    const auto f = adiabatize(V, Mat2::Zero());
    EXPECT_NEAR(f.E[0], -0.005, 1e-16);
    EXPECT_NEAR(f.E[1], 0.005, 1e-16);
    EXPECT_EQ(f.F[0], 0.0);
    EXPECT_EQ(f.F[1], 0.0);
}

TEST(Models, GapAtOrigin) {
    const auto f = frame_at(DiabaticModel::make(ModelKind::single_avoided_crossing), 0.0);
    EXPECT_NEAR(f.gap(1, 0), 0.01, 1e-15);
    EXPECT_NEAR(f.omega(1, 0), 0.01, 1e-15);
}

TEST(Models, ConstantGapHasNoCoupling) {
    const auto m = DiabaticModel::make(ModelKind::constant_gap);
    for (double R = -10; R <= 10; R += 0.5) EXPECT_EQ(frame_at(m, R).d(0, 1), 0.0);
}

TEST(Models, DegenerateSurfacesThrow) {
    EXPECT_THROW(adiabatize(Mat2::Zero(), Mat2::Zero()), DegenerateSurfaces);
    auto m = DiabaticModel::make(ModelKind::constant_gap);
    m.params.gap = 0.0;
    EXPECT_THROW(frame_at(m, 1.0), DegenerateSurfaces);
}

TEST(Models, InvalidParamsRejected) {
    auto m = DiabaticModel::make(ModelKind::single_avoided_crossing);
    m.mass = -1.0;
    EXPECT_ANY_THROW(m.validate());
    m = DiabaticModel::make(ModelKind::single_avoided_crossing);
    m.params.B = std::nan("");
    EXPECT_ANY_THROW(m.validate());
}

TEST(Models, KindNamesRoundTrip) {
    for (auto kind : all_kinds) EXPECT_EQ(parse_model_kind(to_string(kind)), kind);
    EXPECT_FALSE(parse_model_kind("tully-4"));
}

// Properties over all models and a dense set of positions.
TEST(ModelsProperty, FrameInvariants) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> pos(-8.0, 8.0);
    const double h = 1e-5;
    for (auto kind : all_kinds) {
        const auto m = DiabaticModel::make(kind);
        for (int i = 0; i < 400; ++i) {
            const double R = pos(gen);
            const Mat2 V = diabatic_hamiltonian(m, R);
            EXPECT_EQ(V(0, 1), V(1, 0));
            const auto f = frame_at(m, R);
            EXPECT_LT(residual(V, f), 1e-12);
            EXPECT_LE(f.E[0], f.E[1]);
            EXPECT_EQ(f.d(0, 0), 0.0);
            EXPECT_EQ(f.d(1, 1), 0.0);
            EXPECT_EQ(f.d(0, 1), -f.d(1, 0));

            // Hellmann-Feynman forces against the numerical slope of E.
            const auto Ep = adiabatic_energies(diabatic_hamiltonian(m, R + h));
            const auto Em = adiabatic_energies(diabatic_hamiltonian(m, R - h));
            for (int a = 0; a < 2; ++a) {
                const double fd = -(Ep[a] - Em[a]) / (2 * h);
                EXPECT_NEAR(f.F[a], fd, 1e-6 * std::max(1e-3, std::abs(fd)) + 1e-10) << to_string(kind) << " R=" << R;
            }

            // Off-diagonal Hellmann-Feynman: d01 (E1 - E0) = <0|dV|1>.
            const Mat2 dV = diabatic_gradient(m, R);
            const double lhs = f.d(0, 1) * (f.E[1] - f.E[0]);
            const double rhs = f.U.col(0).dot(dV * f.U.col(1));
            EXPECT_NEAR(lhs, rhs, 1e-15);
        }
    }
}

TEST(ModelsProperty, CouplingMatchesEigenvectorDerivative) {
    // d01 = <0| d/dR |1> by finite differences of gauge-aligned eigenvectors.
    // R = 0 is avoided: V00 has a kink in its second derivative there.
    const auto m = DiabaticModel::make(ModelKind::single_avoided_crossing);
    const double h = 1e-6;
    for (double R : {-1.0, -0.2, -0.05, 0.4, 1.5}) {
        const auto f = frame_at(m, R);
        const auto fp = frame_at(m, R + h, f);
        const auto fm = frame_at(m, R - h, f);
        const double fd = f.U.col(0).dot((fp.U.col(1) - fm.U.col(1)) / (2 * h));
        EXPECT_NEAR(f.d(0, 1), fd, 1e-7);
    }
}

TEST(Path, ConstantPathGivesIdenticalFrames) {
    const auto m = DiabaticModel::make(ModelKind::dual_avoided_crossing);
    const std::vector<double> path(20, 0.7);
    const auto frames = frame_along_path(m, path);
    for (const auto& f : frames) {
        EXPECT_EQ(f.U, frames.front().U);
        EXPECT_EQ(f.d, frames.front().d);
    }
}

TEST(Path, SweepIsContinuousAndSingleSigned) {
    const auto m = DiabaticModel::make(ModelKind::single_avoided_crossing);
    std::vector<double> path;
    for (int i = 0; i <= 2000; ++i) path.push_back(-10.0 + 0.01 * i);
    const auto frames = frame_along_path(m, path);
    const double sign = frames[1000].d(0, 1) > 0 ? 1.0 : -1.0;
    double peak = 0.0, peak_R = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const double d = sign * frames[i].d(0, 1);
        EXPECT_GE(d, 0.0) << "R=" << path[i];
        if (i > 0) { EXPECT_LT(std::abs(frames[i].d(0, 1) - frames[i - 1].d(0, 1)), 0.05); }
        if (d > peak) peak = d, peak_R = path[i];
    }
    EXPECT_LT(std::abs(peak_R), 0.5);
}

TEST(Path, InjectedSignFlipIsRemoved) {
    const auto m = DiabaticModel::make(ModelKind::single_avoided_crossing);
    std::vector<AdiabaticFrame> frames;
    for (int i = 0; i <= 200; ++i) frames.push_back(frame_at(m, -1.0 + 0.01 * i));
    auto reference = frames;
    align_path(reference);
    frames[100].U.col(1) *= -1.0;
    frames[100].d.row(1) *= -1.0;
    frames[100].d.col(1) *= -1.0;
    align_path(frames);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        EXPECT_EQ(frames[i].U, reference[i].U);
        EXPECT_EQ(frames[i].d, reference[i].d);
    }
}

TEST(Path, LargeJumpIsGaugeAmbiguous) {
    const auto m = DiabaticModel::make(ModelKind::single_avoided_crossing);
    const auto left = frame_at(m, -5.0);
    auto right = frame_at(m, 5.0);
    EXPECT_THROW(align_gauge(right, left), GaugeAmbiguity);
}
