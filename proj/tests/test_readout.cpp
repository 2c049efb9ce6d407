#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ionwork/readout.hpp"
#include "ionwork/stats.hpp"

using namespace ionwork;

namespace {

const double kOmegaEff = kTwoPi * 10e3;

RealVector thermal(double nbar, int levels = 32)
{
    return thermal_distribution(ThermalSpec::oscillator(nbar, {kTwoPi * 20e3}), levels);
}

// Ten periods of the slowest component, well above Nyquist for n <= 9.
std::vector<double> dense_times() { return uniform_times(10.0 * kTwoPi / kOmegaEff, 801); }

RealVector unit(int n, int size)
{
    RealVector v = RealVector::Zero(size);
    v(n) = 1.0;
    return v;
}

}  // namespace

TEST(BsbSignal, VacuumIsSingleCosine)
{
    const auto times = dense_times();
    const auto s = bsb_signal(unit(0, 4), kOmegaEff, times);
    for (std::size_t i = 0; i < times.size(); i += 37)
        EXPECT_NEAR(s.p_up[i], 0.5 * (1.0 - std::cos(kOmegaEff * times[i])), 1e-15);
}

TEST(BsbSignal, FirstExcitedOscillatesFaster)
{
    const auto times = dense_times();
    const auto s = bsb_signal(unit(1, 4), kOmegaEff, times);
    for (std::size_t i = 0; i < times.size(); i += 41)
        EXPECT_NEAR(s.p_up[i], 0.5 * (1.0 - std::cos(std::sqrt(2.0) * kOmegaEff * times[i])), 1e-15);
    for (double p : s.p_up) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
    }
}

TEST(BsbInversion, VacuumRoundTrip)
{
    const auto inv = invert_bsb_signal(bsb_signal(unit(0, 8), kOmegaEff, dense_times()), 7);
    EXPECT_NEAR(inv.populations(0), 1.0, 1e-9);
    EXPECT_LT(inv.populations.tail(7).sum(), 1e-9);
}

TEST(BsbInversion, ThermalRoundTrip)
{
    const RealVector p = thermal(0.157, 10);
    const auto inv = invert_bsb_signal(bsb_signal(p, kOmegaEff, dense_times()), 9);
    EXPECT_LT((inv.populations - p).lpNorm<1>(), 1e-3);
    EXPECT_LT(inv.residual, 1e-9);
}

TEST(BsbInversion, BasisStatesAndMixtures)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n <= 5; ++n) {
        const auto inv = invert_bsb_signal(bsb_signal(unit(n, 6), kOmegaEff, dense_times()), 5);
        EXPECT_LT((inv.populations - unit(n, 6)).lpNorm<1>(), 1e-3) << n;
    }
    for (int trial = 0; trial < 20; ++trial) {
        RealVector p(6);
        for (int n = 0; n < 6; ++n)
            p(n) = u(rng);
        p /= p.sum();
        const auto inv = invert_bsb_signal(bsb_signal(p, kOmegaEff, dense_times()), 5);
        EXPECT_LT((inv.populations - p).lpNorm<1>(), 1e-3);
    }
}

TEST(BsbInversion, RobustToMeasurementNoise)
{
    const RealVector p = thermal(0.157, 10);
    const auto clean = bsb_signal(p, kOmegaEff, dense_times());
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, 0.01);
        auto noisy = clean;
        for (auto& v : noisy.p_up)
            v += noise(rng);
        const auto inv = invert_bsb_signal(noisy, 9);
        EXPECT_LT((inv.populations - p).lpNorm<1>(), 0.05) << "seed " << seed;
        EXPECT_GE(inv.populations.minCoeff(), 0.0);
        EXPECT_NEAR(inv.populations.sum(), 1.0, 1e-12);
    }
}

TEST(BsbInversion, IllConditionedGrids)
{
    const RealVector p = thermal(0.157, 8);
    const double period = kTwoPi / kOmegaEff;
    // Too short to cover three periods.
    EXPECT_THROW(invert_bsb_signal(bsb_signal(p, kOmegaEff, uniform_times(2.0 * period, 200)), 7), IllConditionedError);
    // Too coarse for the fastest component.
    EXPECT_THROW(invert_bsb_signal(bsb_signal(p, kOmegaEff, uniform_times(10.0 * period, 15)), 7), IllConditionedError);
    // Long enough for 3 periods but unable to separate sqrt(20) from sqrt(21).
    EXPECT_THROW(invert_bsb_signal(bsb_signal(thermal(0.157, 21), kOmegaEff, uniform_times(3.5 * period, 2000)), 20),
                 IllConditionedError);
}

TEST(Nnls, MatchesUnconstrainedWhenInterior)
{
    RealMatrix a(4, 2);
    a << 1, 0, 0, 1, 1, 1, 2, 1;
    const RealVector x_true = (RealVector(2) << 0.3, 0.7).finished();
    const RealVector x = nnls(a, a * x_true);
    EXPECT_LT((x - x_true).norm(), 1e-12);
    const RealVector b = (RealVector(4) << -1, 1, 0, -1).finished();
    const RealVector y = nnls(a, b);
    EXPECT_GE(y.minCoeff(), 0.0);
    // KKT: gradient non-positive on the active (zero) set.
    const RealVector w = a.transpose() * (b - a * y);
    for (int j = 0; j < 2; ++j)
        if (y(j) == 0.0)
            EXPECT_LE(w(j), 1e-12);
        else
            EXPECT_NEAR(w(j), 0.0, 1e-12);
}

TEST(Fluorescence, VacuumFluorescesImmediately)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_stream(seed, 0, stream::kReadout);
        const auto trace = fluorescence_projective_measurement(unit(0, 8), rng);
        ASSERT_EQ(trace.steps.size(), 1u);
        EXPECT_TRUE(trace.steps[0].fluorescence);
        EXPECT_EQ(trace.projected_n, 0);
        EXPECT_EQ(trace.probability, 1.0);
    }
}

TEST(Fluorescence, FockStateFluorescesAtDetectionKPlusOne)
{
    Rng rng = make_stream(1, 0, stream::kReadout);
    for (int k = 0; k < 8; ++k) {
        const auto trace = fluorescence_projective_measurement(unit(k, 8), rng);
        ASSERT_EQ(trace.steps.size(), static_cast<std::size_t>(k + 1));
        EXPECT_TRUE(trace.steps.back().fluorescence);
        EXPECT_EQ(trace.projected_n, k);
        EXPECT_EQ(trace.probability, 1.0);
    }
}

TEST(Fluorescence, TraceProbabilityIsProductOfDetections)
{
    const RealVector p = thermal(0.5, 16);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng = make_stream(seed, 0, stream::kReadout);
        const auto trace = fluorescence_projective_measurement(p, rng);
        ASSERT_GE(trace.projected_n, 0);
        EXPECT_NEAR(trace.probability, p(trace.projected_n), 1e-14);
    }
}

TEST(Fluorescence, ThermalSamplingMatchesDistribution)
{
    const RealVector p = thermal(0.157);
    std::vector<double> counts(32, 0.0);
    for (std::size_t i = 0; i < 100000; ++i) {
        Rng rng = make_stream(77, i, stream::kReadout);
        counts[static_cast<std::size_t>(fluorescence_projective_measurement(p, rng).projected_n)] += 1.0;
    }
    std::vector<double> probs(p.data(), p.data() + 32);
    EXPECT_GT(chi_square_test(counts, probs).p_value, 0.001);
}

TEST(Fluorescence, CompletenessWithAndWithoutErrors)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        RealVector p(12);
        for (int n = 0; n < 12; ++n)
            p(n) = u(rng);
        p /= p.sum();
        EXPECT_NEAR(fluorescence_outcome_probabilities(p).sum(), 1.0, 1e-9);
        const DetectionErrors e{0.01 * u(rng), 0.05 * u(rng), 0.1 * u(rng)};
        EXPECT_NEAR(fluorescence_outcome_probabilities(p, e).sum(), 1.0, 1e-9);
    }
}

TEST(Fluorescence, DetectionErrorsBiasOutcome)
{
    const RealVector p = unit(0, 4);
    const auto outcome = fluorescence_outcome_probabilities(p, {0.0, 0.1, 0.0});
    EXPECT_NEAR(outcome(0), 0.9, 1e-15);
    EXPECT_NEAR(outcome(1), 0.09, 1e-15);
}

TEST(NoFluorescence, IdealAcceptance)
{
    Rng rng = make_stream(1, 0, stream::kReadout);
    const auto a = nofluorescence_projective_measurement(unit(0, 6), 0, rng);
    EXPECT_TRUE(a.accept);
    EXPECT_EQ(a.probability, 1.0);
    const auto b = nofluorescence_projective_measurement(unit(1, 6), 0, rng);
    EXPECT_FALSE(b.accept);
    EXPECT_EQ(b.probability, 0.0);
    const auto c = nofluorescence_projective_measurement(unit(3, 6), 3, rng);
    EXPECT_TRUE(c.accept);
    EXPECT_EQ(c.trace.steps.size(), 4u);
    EXPECT_LT((c.posterior - unit(3, 6)).norm(), 1e-15);
}

TEST(NoFluorescence, ThermalAcceptanceRate)
{
    const RealVector p = thermal(0.157);
    std::size_t accepted = 0;
    const std::size_t runs = 100000;
    for (std::size_t i = 0; i < runs; ++i) {
        Rng rng = make_stream(5, i, stream::kReadout);
        accepted += nofluorescence_projective_measurement(p, 1, rng).accept ? 1 : 0;
    }
    const double p1 = p(1);
    const double sigma = std::sqrt(p1 * (1 - p1) / runs);
    EXPECT_NEAR(static_cast<double>(accepted) / runs, p1, 3.0 * sigma);
    EXPECT_NEAR(p1, 0.1173, 5e-5);
}

TEST(NoFluorescence, AcceptanceProbabilitiesSumToOne)
{
    const RealVector p = thermal(1.0);
    Rng rng = make_stream(2, 0, stream::kReadout);
    double total = 0.0;
    for (int target = 0; target < p.size(); ++target)
        total += nofluorescence_projective_measurement(p, target, rng).probability;
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Heating, ZeroWaitIsUnchanged)
{
    const RealVector p = thermal(0.03);
    const auto out = heating_wait(p, 127.0, 0.0);
    EXPECT_EQ(out.populations, p);
}

TEST(Heating, NominalWaitReachesTargetOccupation)
{
    const RealVector p = thermal(0.03);
    const double rate = (0.157 - 0.03) / 1e-3;
    EXPECT_NEAR(rate, 127.0, 1e-9);
    const auto out = heating_wait(p, rate, 1e-3);
    EXPECT_EQ(out.nbar, 0.03 + rate * 1e-3);
    EXPECT_LT((out.populations - thermal(0.157)).cwiseAbs().maxCoeff(), 1e-12);
    double mean = 0.0;
    for (int n = 0; n < 32; ++n)
        mean += n * out.populations(n);
    EXPECT_NEAR(mean, out.nbar, 1e-12);
    EXPECT_THROW(heating_wait(p, 1e4, 1.0), CutoffError);
    EXPECT_THROW(heating_wait(p, -1.0, 1.0), InvalidArgumentError);
}
