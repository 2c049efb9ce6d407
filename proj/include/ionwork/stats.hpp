#pragma once

// Work distributions and fluctuation-relation estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "ionwork/errors.hpp"
#include "ionwork/fock.hpp"
#include "ionwork/parallel.hpp"
#include "ionwork/rng.hpp"
#include "ionwork/tpm.hpp"
#include "ionwork/units.hpp"

namespace ionwork {

inline constexpr double kWorkMergeTolerance = 1e-9;

enum class Provenance { Exact, Sampled };

/// Discrete distribution over sorted distinct work values (quanta).
struct WorkDistribution {
    std::vector<double> support;
    std::vector<double> probabilities;
    Provenance provenance = Provenance::Exact;
    std::size_t shots = 0;              ///< sampled only
    std::vector<std::size_t> counts;    ///< sampled only, parallel to support
    AngularFrequency quantum{1.0};

    std::size_t size() const { return support.size(); }
    bool empty() const { return support.empty(); }

    double mean() const
    {
        double m = 0.0;
        for (std::size_t k = 0; k < size(); ++k)
            m += probabilities[k] * support[k];
        return m;
    }

    double variance() const
    {
        const double mu = mean();
        double v = 0.0;
        for (std::size_t k = 0; k < size(); ++k)
            v += probabilities[k] * (support[k] - mu) * (support[k] - mu);
        return v;
    }

    /// Index of the support point within tol of w, or -1.
    std::ptrdiff_t find(double w, double tol = kWorkMergeTolerance) const
    {
        auto it = std::lower_bound(support.begin(), support.end(), w - tol);
        if (it != support.end() && std::abs(*it - w) <= tol)
            return it - support.begin();
        return -1;
    }

    double probability_at(double w, double tol = kWorkMergeTolerance) const
    {
        const auto k = find(w, tol);
        return k < 0 ? 0.0 : probabilities[static_cast<std::size_t>(k)];
    }

    /// Binomial standard error of each probability; zero for exact distributions.
    double stderr_at(std::size_t k) const
    {
        if (provenance == Provenance::Exact || shots == 0)
            return 0.0;
        const double p = probabilities[k];
        return std::sqrt(p * (1.0 - p) / static_cast<double>(shots));
    }

    double total_probability() const { return std::accumulate(probabilities.begin(), probabilities.end(), 0.0); }
};

namespace detail {

/// Sorts (value, weight) pairs and merges values within tol of each cluster's first member.
inline void merge_support(std::vector<std::pair<double, double>>& items, std::vector<double>& support,
                          std::vector<double>& weights)
{
    std::sort(items.begin(), items.end());
    support.clear();
    weights.clear();
    for (const auto& [w, p] : items) {
        if (!support.empty() && w - support.back() <= kWorkMergeTolerance)
            weights.back() += p;
        else {
            support.push_back(w);
            weights.push_back(p);
        }
    }
}

}  // namespace detail

/// P(W) = sum_{n,m} P_n P_{n->m} delta(W - (e_f^m - e_i^n)); energies in quanta.
inline WorkDistribution work_distribution(const RealVector& thermal, const TransitionMatrix& transitions,
                                          const RealVector& initial_energies, const RealVector& final_energies,
                                          AngularFrequency quantum = {1.0})
{
    const auto d = transitions.dim();
    if (thermal.size() != d || initial_energies.size() != d || final_energies.size() != d)
        throw InvalidArgumentError("work_distribution: inconsistent dimensions");
    std::vector<std::pair<double, double>> items;
    items.reserve(static_cast<std::size_t>(d * d));
    for (Eigen::Index n = 0; n < d; ++n) {
        if (thermal(n) == 0.0)
            continue;
        for (Eigen::Index m = 0; m < d; ++m) {
            const double p = thermal(n) * transitions(n, m);
            if (p != 0.0)
                items.emplace_back(final_energies(m) - initial_energies(n), p);
        }
    }
    WorkDistribution out;
    out.quantum = quantum;
    detail::merge_support(items, out.support, out.probabilities);
    return out;
}

inline WorkDistribution work_distribution(const RealVector& thermal, const TransitionMatrix& transitions,
                                          const WorkProtocol& protocol)
{
    return work_distribution(thermal, transitions, protocol.initial_energies_quanta(),
                             protocol.final_energies_quanta(), protocol.quantum);
}

/// Empirical distribution of sampled records (unit weights).
inline WorkDistribution sampled_distribution(const std::vector<WorkRecord>& records,
                                             AngularFrequency quantum = {1.0})
{
    std::vector<std::pair<double, double>> items;
    items.reserve(records.size());
    for (const auto& r : records)
        items.emplace_back(r.work, 1.0);
    WorkDistribution out;
    out.quantum = quantum;
    out.provenance = Provenance::Sampled;
    out.shots = records.size();
    std::vector<double> counts;
    detail::merge_support(items, out.support, counts);
    out.counts.reserve(counts.size());
    out.probabilities.reserve(counts.size());
    for (double c : counts) {
        out.counts.push_back(static_cast<std::size_t>(c));
        out.probabilities.push_back(c / static_cast<double>(records.size()));
    }
    return out;
}

/// <exp(-beta W)> with beta in inverse quanta.
inline double jarzynski_average(const WorkDistribution& dist, double beta)
{
    if (!(beta > 0.0))
        throw InvalidArgumentError("beta must be positive");
    double s = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k)
        s += dist.probabilities[k] * std::exp(-beta * dist.support[k]);
    return s;
}

inline double jarzynski_average(const WorkDistribution& dist, Temperature t)
{
    if (!(t.kelvin > 0.0))
        throw InvalidArgumentError("temperature must be positive");
    return jarzynski_average(dist, beta_in_quanta(t, dist.quantum));
}

/// ln Z = ln sum exp(-beta e), evaluated stably.
inline double log_partition_function(const RealVector& energies, double beta)
{
    const double e0 = energies.minCoeff();
    return -beta * e0 + std::log((-beta * (energies.array() - e0)).exp().sum());
}

/// Delta F = -ln(Z_f / Z_i) / beta, in the units of the spectra.
inline double free_energy_difference(const RealVector& initial_energies, const RealVector& final_energies,
                                     double beta)
{
    if (!(beta > 0.0))
        throw InvalidArgumentError("beta must be positive");
    return -(log_partition_function(final_energies, beta) - log_partition_function(initial_energies, beta)) / beta;
}

struct CrooksPoint {
    double work{};
    double lhs{};         ///< ln(P_F(W) / P_B(-W))
    double rhs{};         ///< beta (W - Delta F)
    double lhs_stderr{};  ///< sampled only
};

struct CrooksOptions {
    double floor = 1e-6;         ///< exact distributions
    std::size_t min_counts = 5;  ///< sampled distributions
};

struct CrooksResult {
    std::vector<CrooksPoint> points;
    std::vector<double> excluded;  ///< forward support points below the floor

    double max_residual() const
    {
        double r = 0.0;
        for (const auto& p : points)
            r = std::max(r, std::abs(p.lhs - p.rhs));
        return r;
    }
};

inline CrooksResult crooks_check(const WorkDistribution& forward, const WorkDistribution& backward, double beta,
                                 double delta_f = 0.0, CrooksOptions opts = {})
{
    auto keep = [&](const WorkDistribution& d, std::size_t k) {
        if (d.provenance == Provenance::Sampled)
            return d.counts[k] >= opts.min_counts;
        return d.probabilities[k] > opts.floor;
    };
    CrooksResult out;
    for (std::size_t k = 0; k < forward.size(); ++k) {
        const double w = forward.support[k];
        const auto j = backward.find(-w);
        if (!keep(forward, k) || j < 0 || !keep(backward, static_cast<std::size_t>(j))) {
            out.excluded.push_back(w);
            continue;
        }
        const auto jb = static_cast<std::size_t>(j);
        CrooksPoint p{w, std::log(forward.probabilities[k] / backward.probabilities[jb]), beta * (w - delta_f), 0.0};
        if (forward.provenance == Provenance::Sampled && backward.provenance == Provenance::Sampled)
            p.lhs_stderr = std::sqrt(1.0 / static_cast<double>(forward.counts[k]) +
                                     1.0 / static_cast<double>(backward.counts[jb]));
        out.points.push_back(p);
    }
    if (out.points.empty())
        throw EmptyOverlapError("forward and backward distributions share no support above the floor");
    return out;
}

struct LinearFit {
    double slope{};
    double intercept{};
    double slope_stderr{};
};

/// Weighted least squares y = slope x + intercept; weights are 1/sigma^2 (all 1 if empty).
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                            const std::vector<double>& weights = {})
{
    if (x.size() != y.size() || x.size() < 2 || (!weights.empty() && weights.size() != x.size()))
        throw InvalidArgumentError("linear_fit needs matching arrays with at least two points");
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        sw += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    const double det = sw * sxx - sx * sx;
    if (!(std::abs(det) > 0.0))
        throw InvalidArgumentError("linear_fit: degenerate abscissae");
    LinearFit f;
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    f.slope_stderr = std::sqrt(sw / det);
    return f;
}

/// Fits lhs against rhs; weighted by 1/lhs_stderr^2 when available.
inline LinearFit crooks_slope(const CrooksResult& result)
{
    std::vector<double> x, y, w;
    for (const auto& p : result.points) {
        x.push_back(p.rhs);
        y.push_back(p.lhs);
        if (p.lhs_stderr > 0.0)
            w.push_back(1.0 / (p.lhs_stderr * p.lhs_stderr));
    }
    if (w.size() != x.size())
        w.clear();
    return linear_fit(x, y, w);
}

struct BootstrapResult {
    double estimate{};
    double stderr_{};
};

using WorkStatistic = std::function<double(const WorkDistribution&)>;

/// Nonparametric bootstrap over records. A resample of records is equivalent to a
/// multinomial draw of counts over the distinct work values, which is what is
/// simulated; each resample has its own stream derived from (seed, index).
inline BootstrapResult bootstrap_error(const std::vector<WorkRecord>& records, const WorkStatistic& statistic,
                                       std::size_t resamples, std::uint64_t seed, unsigned jobs = 1,
                                       AngularFrequency quantum = {1.0})
{
    if (resamples < 100)
        throw InvalidArgumentError("bootstrap needs at least 100 resamples");
    if (records.empty())
        throw InvalidArgumentError("bootstrap needs at least one record");
    const WorkDistribution base = sampled_distribution(records, quantum);
    BootstrapResult out;
    out.estimate = statistic(base);
    std::vector<double> values(resamples);
    parallel_for(resamples, jobs, [&](std::size_t r) {
        Rng rng = make_stream(seed, r, stream::kBootstrap);
        WorkDistribution d = base;
        std::size_t left = base.shots;
        double mass_left = 1.0;
        for (std::size_t k = 0; k < d.size(); ++k) {
            std::size_t c = left;
            if (k + 1 < d.size() && left > 0) {
                const double p = std::clamp(base.probabilities[k] / mass_left, 0.0, 1.0);
                c = std::binomial_distribution<std::size_t>(left, p)(rng);
            }
            d.counts[k] = c;
            d.probabilities[k] = static_cast<double>(c) / static_cast<double>(base.shots);
            left -= c;
            mass_left -= base.probabilities[k];
        }
        values[r] = statistic(d);
    });
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(resamples);
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    out.stderr_ = std::sqrt(ss / static_cast<double>(resamples - 1));
    return out;
}

struct ChiSquareResult {
    double statistic{};
    int dof{};
    double p_value{};
};

/// Pearson chi-square goodness of fit. Cells with expected count below
/// `min_expected` are pooled into one cell.
inline ChiSquareResult chi_square_test(const std::vector<double>& observed, const std::vector<double>& probabilities,
                                       double min_expected = 5.0)
{
    if (observed.size() != probabilities.size() || observed.empty())
        throw InvalidArgumentError("chi_square_test: mismatched inputs");
    const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
    const double mass = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
    double stat = 0.0;
    int cells = 0;
    double pool_obs = 0.0, pool_exp = 0.0;
    for (std::size_t k = 0; k < observed.size(); ++k) {
        const double e = total * probabilities[k] / mass;
        if (e < min_expected) {
            pool_obs += observed[k];
            pool_exp += e;
            continue;
        }
        stat += (observed[k] - e) * (observed[k] - e) / e;
        ++cells;
    }
    if (pool_exp > 0.0) {
        stat += (pool_obs - pool_exp) * (pool_obs - pool_exp) / pool_exp;
        ++cells;
    } else if (pool_obs > 0.0) {
        stat = std::numeric_limits<double>::infinity();
    }
    ChiSquareResult r;
    r.statistic = stat;
    r.dof = std::max(1, cells - 1);
    r.p_value = std::isfinite(stat) ? boost::math::gamma_q(0.5 * r.dof, 0.5 * stat) : 0.0;
    return r;
}

}  // namespace ionwork
