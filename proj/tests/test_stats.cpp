#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "ionwork/stats.hpp"

using namespace ionwork;

namespace {

const AngularFrequency kNu{kTwoPi * 20e3};
const double kOmega0 = kTwoPi * 50e3;

RealVector ladder_energies(int n)
{
    RealVector e(n);
    for (int k = 0; k < n; ++k)
        e(k) = k + 0.5;
    return e;
}

TpmSampler fast_sampler(double abs_alpha)
{
    const double amp = calibrate_drag_amplitude(abs_alpha, kNu.value, 5e-6, 50e-6);
    return TpmSampler(dragged_oscillator_protocol(build_dragged(kNu.value, amp, 5e-6, 50e-6, FockSpace(32))));
}

// Random doubly stochastic matrix as a convex combination of permutations.
RealMatrix random_bistochastic(int n, std::mt19937_64& rng)
{
    RealMatrix m = RealMatrix::Zero(n, n);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double total = 0.0;
    for (int k = 0; k < 6; ++k) {
        std::shuffle(perm.begin(), perm.end(), rng);
        const double w = u(rng);
        total += w;
        for (int i = 0; i < n; ++i)
            m(i, perm[i]) += w;
    }
    return m / total;
}

}  // namespace

TEST(WorkDistribution, IdentityIsDeltaAtZero)
{
    const auto p = thermal_distribution(ThermalSpec::oscillator(0.157, kNu), 16);
    const auto d = work_distribution(p, TransitionMatrix::identity(16), ladder_energies(16), ladder_energies(16));
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d.support[0], 0.0);
    EXPECT_NEAR(d.probabilities[0], 1.0, 1e-15);
}

TEST(WorkDistribution, SmallDisplacementComb)
{
    const auto p = thermal_distribution(ThermalSpec::oscillator(0.157, kNu), 32);
    const auto d = work_distribution(p, displacement_transition_matrix(0.3, FockSpace(32)), ladder_energies(32),
                                     ladder_energies(32));
    for (double w : d.support)
        EXPECT_NEAR(w, std::round(w), 1e-12);
    EXPECT_GT(d.probability_at(0), d.probability_at(1));
    EXPECT_GT(d.probability_at(1), d.probability_at(-1));
    EXPECT_GT(d.probability_at(-1), d.probability_at(2));
    EXPECT_GT(d.probability_at(1), d.probability_at(2));
    EXPECT_GT(d.probability_at(-1), d.probability_at(-2));
}

TEST(WorkDistribution, TlsFourPointSupport)
{
    const auto protocol = driven_tls_protocol(DrivenTls(kOmega0, 5e-6), 0.0);
    const auto p = thermal_distribution(ThermalSpec::two_level_at({5.63e-6}, {kOmega0}), 2);
    const auto d = work_distribution(p, transition_matrix(protocol, Evolution::Closed), protocol);
    const std::vector<double> expected{-0.75, -0.25, 0.25, 0.75};
    EXPECT_EQ(d.support, expected);
    EXPECT_NEAR(d.total_probability(), 1.0, 1e-9);
}

TEST(WorkDistribution, MergesWithinTolerance)
{
    RealVector e_i(2), e_f(2);
    e_i << 0.0, 1.0;
    e_f << 0.5, 1.5 + 5e-10;
    RealMatrix t(2, 2);
    t << 0.5, 0.5, 0.5, 0.5;
    const auto d = work_distribution((RealVector(2) << 0.5, 0.5).finished(), TransitionMatrix(t), e_i, e_f);
    // W values: 0.5, 1.5+, -0.5, 0.5+ -> three support points.
    ASSERT_EQ(d.size(), 3u);
    EXPECT_NEAR(d.probability_at(0.5), 0.5, 1e-15);
}

TEST(Jarzynski, DeltaAtFreeEnergy)
{
    WorkDistribution d;
    d.support = {0.3};
    d.probabilities = {1.0};
    EXPECT_DOUBLE_EQ(jarzynski_average(d, 2.0), std::exp(-0.6));
    EXPECT_THROW(jarzynski_average(d, 0.0), InvalidArgumentError);
}

TEST(Jarzynski, RandomBistochasticIdentity)
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + trial % 7;
        RealVector e_i(n), e_f(n);
        for (int k = 0; k < n; ++k) {
            e_i(k) = u(rng);
            e_f(k) = u(rng);
        }
        const double beta = 0.2 + u(rng);
        const RealVector p = boltzmann_distribution(e_i, beta);
        const auto d = work_distribution(p, TransitionMatrix(random_bistochastic(n, rng)), e_i, e_f);
        const double df = free_energy_difference(e_i, e_f, beta);
        EXPECT_NEAR(jarzynski_average(d, beta) * std::exp(beta * df), 1.0, 1e-12);
        EXPECT_GE(d.mean(), df - 1e-12);
    }
}

TEST(FreeEnergy, Values)
{
    const RealVector e = ladder_energies(5);
    EXPECT_EQ(free_energy_difference(e, e, 1.3), 0.0);
    RealVector ti(2), tf(2);
    ti << -0.5, 0.5;
    tf << -0.25, 0.25;
    const double beta = beta_in_quanta({5.63e-6}, {kOmega0});
    const double ratio = std::exp(-beta * free_energy_difference(ti, tf, beta));
    EXPECT_NEAR(ratio, std::cosh(beta / 4) / std::cosh(beta / 2), 1e-14);
    EXPECT_NEAR(ratio, 0.98327, 5e-6);
}

TEST(Crooks, DeltaVersusDelta)
{
    WorkDistribution d;
    d.support = {0.0};
    d.probabilities = {1.0};
    const auto c = crooks_check(d, d, 1.0);
    ASSERT_EQ(c.points.size(), 1u);
    EXPECT_EQ(c.points[0].work, 0.0);
    EXPECT_EQ(c.points[0].lhs, 0.0);
    EXPECT_EQ(c.points[0].rhs, 0.0);
}

TEST(Crooks, ExactDraggedOscillator)
{
    const auto spec = ThermalSpec::oscillator(0.157, kNu);
    const double beta = beta_in_quanta(temperature_of(spec), kNu);
    const auto p = thermal_distribution(spec, 32);
    for (double a : {0.2, 0.8, 1.5}) {
        const auto d = work_distribution(p, displacement_transition_matrix(a, FockSpace(32)), ladder_energies(32),
                                         ladder_energies(32));
        const auto c = crooks_check(d, d, beta);
        EXPECT_GE(c.points.size(), 3u);
        EXPECT_LT(c.max_residual(), 1e-6) << a;
        EXPECT_FALSE(c.excluded.empty());
    }
}

TEST(Crooks, EmptyOverlap)
{
    WorkDistribution f, b;
    f.support = {1.0};
    f.probabilities = {1.0};
    b.support = {1.0};
    b.probabilities = {1.0};
    EXPECT_THROW(crooks_check(f, b, 1.0), EmptyOverlapError);
}

TEST(LinearFit, RecoversLine)
{
    const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    const auto f = linear_fit(x, y);
    EXPECT_NEAR(f.slope, 2.0, 1e-14);
    EXPECT_NEAR(f.intercept, 1.0, 1e-14);
}

TEST(ChiSquare, KnownQuantile)
{
    // Two cells, statistic 3.841 at one degree of freedom -> p = 0.05.
    const double n = 10000, d = std::sqrt(3.841458820694124 * n / 4.0);
    const auto r = chi_square_test({n / 2 + d, n / 2 - d}, {0.5, 0.5});
    EXPECT_EQ(r.dof, 1);
    EXPECT_NEAR(r.p_value, 0.05, 1e-9);
}

TEST(Bootstrap, IdenticalRecordsHaveZeroError)
{
    const std::vector<WorkRecord> records(500, WorkRecord{0, 1, 1.0, 1.0});
    const auto r = bootstrap_error(records, [](const WorkDistribution& d) { return d.mean(); }, 200, 1);
    EXPECT_EQ(r.estimate, 1.0);
    EXPECT_EQ(r.stderr_, 0.0);
    EXPECT_THROW(bootstrap_error(records, [](const WorkDistribution& d) { return d.mean(); }, 50, 1),
                 InvalidArgumentError);
}

TEST(Bootstrap, DeterministicAndMatchesAnalyticMeanError)
{
    std::vector<WorkRecord> records;
    std::mt19937_64 rng(4);
    std::bernoulli_distribution coin(0.3);
    for (int i = 0; i < 20000; ++i)
        records.push_back({0, 0, coin(rng) ? 1.0 : 0.0, 1.0});
    auto mean = [](const WorkDistribution& d) { return d.mean(); };
    const auto a = bootstrap_error(records, mean, 400, 11, 1);
    const auto b = bootstrap_error(records, mean, 400, 11, 3);
    EXPECT_EQ(a.stderr_, b.stderr_);
    const double p = a.estimate;
    EXPECT_NEAR(a.stderr_, std::sqrt(p * (1 - p) / 20000.0), 0.15 * std::sqrt(p * (1 - p) / 20000.0));
}

// The variance of exp(-beta W) is carried by rare W < 0 events. At |alpha| = 0.2
// those events are frequent enough to be sampled at 1e5 shots; at 0.8 and above
// they are not and the bootstrap underestimates the error.
TEST(Bootstrap, JarzynskiCoverage)
{
    const auto sampler = fast_sampler(0.2);
    const auto spec = ThermalSpec::oscillator(0.157, kNu);
    const auto thermal = thermal_distribution(spec, 32);
    const double beta = beta_in_quanta(temperature_of(spec), kNu);
    auto stat = [beta](const WorkDistribution& d) { return jarzynski_average(d, beta); };
    int covered = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        const auto records = sampler.sample(thermal, {100000, 1000 + rep, 1, 0.0, {}});
        const auto r = bootstrap_error(records, stat, 200, rep);
        covered += std::abs(r.estimate - 1.0) <= 3.0 * r.stderr_ ? 1 : 0;
    }
    EXPECT_GE(covered, 99);
}

TEST(Bootstrap, StandardErrorScalesAsInverseRootShots)
{
    const auto sampler = fast_sampler(0.2);
    const auto spec = ThermalSpec::oscillator(0.157, kNu);
    const auto thermal = thermal_distribution(spec, 32);
    const double beta = beta_in_quanta(temperature_of(spec), kNu);
    auto stat = [beta](const WorkDistribution& d) { return jarzynski_average(d, beta); };
    std::vector<double> se;
    for (std::size_t shots : {1000u, 10000u, 100000u}) {
        // Average a few repetitions so the check tests scaling, not one noisy draw.
        double s = 0.0;
        for (std::uint64_t rep = 0; rep < 8; ++rep)
            s += bootstrap_error(sampler.sample(thermal, {shots, 50 + rep, 1, 0.0, {}}), stat, 400, rep).stderr_;
        se.push_back(s / 8.0);
    }
    EXPECT_NEAR(se[0] / se[1], std::sqrt(10.0), 0.2 * std::sqrt(10.0));
    EXPECT_NEAR(se[1] / se[2], std::sqrt(10.0), 0.2 * std::sqrt(10.0));
}

TEST(Ordering, ZenoAndSpeed)
{
    const AngularFrequency w{kOmega0};
    const auto spec = ThermalSpec::two_level_at({5.63e-6}, w);
    const auto p = thermal_distribution(spec, 2);
    auto variance = [&](double tau, double gamma) {
        const auto protocol = driven_tls_protocol(DrivenTls(kOmega0, tau), gamma);
        return work_distribution(p, transition_matrix(protocol, Evolution::Dephasing), protocol).variance();
    };
    EXPECT_GT(variance(5e-6, 0.0), variance(5e-6, 448e3));
    EXPECT_GT(variance(5e-6, 448e3), variance(5e-6, 1340e3));
    EXPECT_LT(variance(50e-6, 0.0), variance(10e-6, 0.0));
    EXPECT_LT(variance(10e-6, 0.0), variance(5e-6, 0.0));
}

TEST(SampledDistribution, CountsAndStderr)
{
    std::vector<WorkRecord> r{{0, 0, 0.0, 1}, {0, 1, 1.0, 1}, {1, 0, -1.0, 1}, {0, 0, 0.0, 1}};
    const auto d = sampled_distribution(r);
    EXPECT_EQ(d.support, (std::vector<double>{-1.0, 0.0, 1.0}));
    EXPECT_EQ(d.counts, (std::vector<std::size_t>{1, 2, 1}));
    EXPECT_EQ(d.total_probability(), 1.0);
    EXPECT_NEAR(d.stderr_at(1), std::sqrt(0.25 / 4.0), 1e-15);
}
