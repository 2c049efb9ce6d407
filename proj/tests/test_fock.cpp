#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ionwork/fock.hpp"
#include "ionwork/units.hpp"

using namespace ionwork;

namespace {

Matrix random_hermitian(Eigen::Index n, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            m(i, j) = Complex(g(rng), g(rng));
    return 0.5 * (m + m.adjoint());
}

// exp(G) by a plain Taylor series, used as an independent oracle.
Matrix taylor_exp(const Matrix& g)
{
    Matrix sum = Matrix::Identity(g.rows(), g.cols());
    Matrix term = sum;
    for (int k = 1; k < 200; ++k) {
        term = (term * g / static_cast<double>(k)).eval();
        sum += term;
        if (term.norm() < 1e-18)
            break;
    }
    return sum;
}

}  // namespace

TEST(Ladder, TwoLevelAnnihilation)
{
    const auto l = ladder_operators(FockSpace(2));
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 1) = 1.0;
    EXPECT_EQ(l.annihilation, expected);
}

TEST(Ladder, NumberDiagonal)
{
    const auto l = ladder_operators(FockSpace(4));
    for (int n = 0; n < 4; ++n)
        EXPECT_EQ(l.number(n, n), Complex(n, 0.0));
    EXPECT_EQ((l.number - Matrix(l.number.diagonal().asDiagonal())).norm(), 0.0);
    EXPECT_LT((l.creation * l.annihilation - l.number).norm(), 1e-15);
}

TEST(Ladder, CommutatorHoldsExceptLastLevel)
{
    const int n = 16;
    const auto l = ladder_operators(FockSpace(n));
    const Matrix c = l.creation * l.annihilation - l.annihilation * l.creation;
    for (int k = 0; k < n - 1; ++k)
        EXPECT_NEAR(c(k, k).real(), -1.0, 1e-14);
    // Truncation artifact: a a^+ has no |N> to reach from |N-1>.
    EXPECT_NEAR(c(n - 1, n - 1).real(), n - 1.0, 1e-14);
}

TEST(Spin, PauliAlgebra)
{
    const auto s = spin_operators();
    EXPECT_LT((s.sx * s.sy - s.sy * s.sx - 2.0 * kI * s.sz).norm(), 1e-15);
    EXPECT_LT((s.sy * s.sz - s.sz * s.sy - 2.0 * kI * s.sx).norm(), 1e-15);
    EXPECT_LT((s.sz * s.sx - s.sx * s.sz - 2.0 * kI * s.sy).norm(), 1e-15);
    EXPECT_LT((s.s_plus - 0.5 * (s.sx + kI * s.sy)).norm(), 1e-15);
    EXPECT_LT((s.s_minus - s.s_plus.adjoint()).norm(), 1e-15);
    EXPECT_EQ(s.s_plus(1, 0), Complex(1.0, 0.0));
}

TEST(Spin, KroneckerOrderIsSpinMajor)
{
    const auto s = spin_operators();
    const Matrix k = kron(s.sz, Matrix::Identity(3, 3));
    EXPECT_EQ(k(0, 0), Complex(-1.0, 0.0));
    EXPECT_EQ(k(3, 3), Complex(1.0, 0.0));
}

TEST(Displacement, ZeroIsIdentity)
{
    const Matrix d = displacement_matrix(0.0, FockSpace(12));
    EXPECT_LT((d - Matrix::Identity(12, 12)).norm(), 1e-15);
}

TEST(Displacement, VacuumOverlapMatchesSeriesOracle)
{
    const FockSpace big(64);
    const auto l = ladder_operators(big);
    const Matrix oracle = taylor_exp(l.creation - l.annihilation);
    const double p00 = std::norm(oracle(0, 0));
    EXPECT_NEAR(p00, std::exp(-1.0), 1e-12);
    for (int n : {16, 32}) {
        const Matrix d = displacement_matrix(1.0, FockSpace(n));
        EXPECT_NEAR(std::norm(d(0, 0)), p00, 1e-12);
        EXPECT_NEAR(std::norm(d(0, 0)), 0.367879, 1e-6);
        for (int r = 0; r < n / 2; ++r)
            for (int c = 0; c < n / 2; ++c)
                EXPECT_NEAR(std::abs(d(r, c) - oracle(r, c)), 0.0, 1e-12);
    }
}

TEST(Displacement, TruncatedUnitaryColumnsAreNormalized)
{
    const Matrix d = displacement_matrix({0.5, 0.5}, FockSpace(32), DisplacementMethod::TruncatedUnitary);
    EXPECT_LT(column_norm_defects(d).maxCoeff(), 1e-8);
}

TEST(Displacement, ClosedFormAndExponentialAgree)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 8 + 4 * trial;
        const double reach = std::sqrt(n / 4.0);
        Complex alpha(u(rng), u(rng));
        alpha *= reach / std::max(1.0, std::abs(alpha)) * 0.999;
        const FockSpace space(n);
        const Matrix closed = displacement_matrix(alpha, space, DisplacementMethod::ClosedForm);
        const Matrix padded = displacement_matrix(alpha, space, DisplacementMethod::PaddedExponential);
        EXPECT_LT((closed - padded).cwiseAbs().maxCoeff(), 1e-8) << "n=" << n;
    }
}

TEST(Displacement, InverseIsNegativeArgument)
{
    const FockSpace space(32);
    for (Complex alpha : {Complex(0.3, 0.0), Complex(1.2, -1.0), Complex(-2.0, 1.5)}) {
        const Matrix dp = displacement_matrix(alpha, space, DisplacementMethod::TruncatedUnitary);
        const Matrix dm = displacement_matrix(-alpha, space, DisplacementMethod::TruncatedUnitary);
        EXPECT_LT((dp * dm - Matrix::Identity(32, 32)).cwiseAbs().maxCoeff(), 2e-8);
        // Exact elements: the defect of D(a)D(-a) at (m, n) is the dropped tail sum over k >= N,
        // bounded by Cauchy-Schwarz through the column tails of D(-a).
        const Matrix cp = displacement_matrix(alpha, space);
        const Matrix cm = displacement_matrix(-alpha, space);
        const RealVector tail = (1.0 - cm.colwise().squaredNorm().array()).matrix().transpose();
        const Matrix defect = cp * cm - Matrix::Identity(32, 32);
        for (int m = 0; m < 8; ++m)
            for (int n = 0; n < 8; ++n)
                EXPECT_LE(std::abs(defect(m, n)), std::sqrt(tail(m) * tail(n)) + 1e-12) << m << "," << n;
    }
}

TEST(Displacement, TruncationErrorDecreasesWithCutoff)
{
    const Complex alpha(1.0, 0.5);
    double previous = 1.0;
    for (int n : {8, 12, 16, 24, 32}) {
        const double e = displacement_truncation_error(alpha, FockSpace(n));
        EXPECT_LT(e, previous) << n;
        previous = e;
    }
    EXPECT_LT(previous, 1e-5);
}

TEST(Displacement, RejectsAlphaBeyondCutoff)
{
    EXPECT_THROW(displacement_matrix(3.0, FockSpace(8)), TruncationError);
    EXPECT_NO_THROW(displacement_matrix(2.0, FockSpace(8)));
}

TEST(States, NormalizationIsEnforced)
{
    Vector v = Vector::Zero(3);
    v(0) = 1.0;
    v(1) = 1e-4;
    EXPECT_THROW(StateVector{v}, InvalidArgumentError);
    EXPECT_NEAR(StateVector::normalized(v).norm(), 1.0, 1e-15);
    EXPECT_THROW(StateVector(Vector::Ones(3) / std::sqrt(3.0), 2), InvalidArgumentError);
}

TEST(States, DensityMatrixInvariants)
{
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0) = 0.5;
    rho(1, 1) = 0.5;
    EXPECT_NO_THROW(DensityMatrix{rho});
    Matrix bad_trace = rho * 1.1;
    EXPECT_THROW(DensityMatrix{bad_trace}, InvalidArgumentError);
    Matrix non_herm = rho;
    non_herm(0, 1) = 0.1;
    EXPECT_THROW(DensityMatrix{non_herm}, NonHermitianError);
    Matrix negative = Matrix::Zero(2, 2);
    negative(0, 0) = 1.5;
    negative(1, 1) = -0.5;
    EXPECT_THROW(DensityMatrix{negative}, InvalidArgumentError);
}

TEST(PropagateStep, ZeroHamiltonianLeavesStateUnchanged)
{
    const auto psi = StateVector::normalized(Vector::Ones(4));
    const auto out = propagate_step(Matrix::Zero(4, 4), 1.0, psi);
    EXPECT_LT((out.amplitudes() - psi.amplitudes()).norm(), 1e-15);
}

TEST(PropagateStep, PiPulseFlipsSpin)
{
    const double omega = kTwoPi * 50e3;
    const auto s = spin_operators();
    const auto down = StateVector::basis(0, 2, 2);
    const auto out = propagate_step(0.5 * omega * s.sx, std::numbers::pi / omega, down);
    EXPECT_NEAR(out.populations()(1), 1.0, 1e-10);
}

TEST(PropagateStep, FockStateAcquiresPhaseOnly)
{
    const FockSpace space(6);
    const double nu = kTwoPi * 20e3;
    const Matrix h = nu * ladder_operators(space).number;
    const double dt = 3.7e-5;
    const auto out = propagate_step(h, dt, StateVector::fock(3, space));
    EXPECT_NEAR(std::abs(out.amplitudes()(3) - std::polar(1.0, -nu * 3 * dt)), 0.0, 1e-12);
    EXPECT_NEAR(out.populations()(3), 1.0, 1e-15);
}

TEST(PropagateStep, Errors)
{
    Matrix h = Matrix::Zero(2, 2);
    h(0, 1) = 1.0;
    EXPECT_THROW(propagate_step(h, 0.1, StateVector::basis(0, 2)), NonHermitianError);
    const auto s = spin_operators();
    EXPECT_THROW(propagate_step(s.sx, 1.0, StateVector::basis(0, 2), 0.5), StepTooLargeError);
    EXPECT_NO_THROW(propagate_step(s.sx, 0.4, StateVector::basis(0, 2), 0.5));
}

TEST(PropagateStep, PreservesNormForRandomHamiltonians)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 2 + trial % 12;
        const Matrix h = random_hermitian(n, rng);
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i)
            v(i) = Complex(g(rng), g(rng));
        const auto psi = StateVector::normalized(v);
        const auto out = propagate_step(h, 0.3, psi);
        EXPECT_NEAR(out.amplitudes().norm(), 1.0, 1e-12);
        // Unitarity: overlaps are preserved.
        const auto back = propagate_step(h, -0.3, out);
        EXPECT_LT(phase_insensitive_distance(back.amplitudes(), psi.amplitudes()), 1e-12);
    }
}
