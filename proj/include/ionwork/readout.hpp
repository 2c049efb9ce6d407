#pragma once

// Simulated phonon readout: blue-sideband Rabi signal and its inversion,
// iterative projective protocols, and phenomenological heating.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "ionwork/errors.hpp"
#include "ionwork/fock.hpp"
#include "ionwork/rng.hpp"
#include "ionwork/tpm.hpp"

namespace ionwork {

struct BsbSignal {
    std::vector<double> times;  ///< s
    std::vector<double> p_up;
    double omega_eff{};  ///< rad/s
};

/// P_up(t) = (1 - sum_n |c_n|^2 cos(sqrt(n+1) Omega_eff t)) / 2.
inline BsbSignal bsb_signal(const RealVector& populations, double omega_eff, const std::vector<double>& times)
{
    if (populations.size() == 0 || populations.minCoeff() < 0.0 || std::abs(populations.sum() - 1.0) > 1e-9)
        throw InvalidArgumentError("populations must be non-negative and normalized");
    BsbSignal s{times, std::vector<double>(times.size()), omega_eff};
    for (std::size_t i = 0; i < times.size(); ++i) {
        double c = 0.0;
        for (Eigen::Index n = 0; n < populations.size(); ++n)
            c += populations(n) * std::cos(std::sqrt(static_cast<double>(n + 1)) * omega_eff * times[i]);
        s.p_up[i] = 0.5 * (1.0 - c);
    }
    return s;
}

/// Evenly spaced times [0, span] with `count` points.
inline std::vector<double> uniform_times(double span, std::size_t count)
{
    std::vector<double> t(count);
    for (std::size_t i = 0; i < count; ++i)
        t[i] = span * static_cast<double>(i) / static_cast<double>(count - 1);
    return t;
}

/// Non-negative least squares min ||A x - b||, x >= 0 (Lawson-Hanson active set).
inline RealVector nnls(const RealMatrix& a, const RealVector& b, int max_iterations = 0)
{
    const Eigen::Index n = a.cols();
    if (a.rows() != b.size())
        throw InvalidArgumentError("nnls: dimension mismatch");
    if (max_iterations <= 0)
        max_iterations = static_cast<int>(3 * n + 10);
    const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff() * b.cwiseAbs().maxCoeff()) *
                       static_cast<double>(a.rows());
    RealVector x = RealVector::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);

    auto solve_passive = [&]() {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)])
                idx.push_back(j);
        RealMatrix ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k)
            ap.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
        const RealVector zp = ap.colPivHouseholderQr().solve(b);
        RealVector z = RealVector::Zero(n);
        for (std::size_t k = 0; k < idx.size(); ++k)
            z(idx[k]) = zp(static_cast<Eigen::Index>(k));
        return z;
    };

    for (int outer = 0; outer < max_iterations; ++outer) {
        const RealVector w = a.transpose() * (b - a * x);
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        if (best < 0)
            break;
        passive[static_cast<std::size_t>(best)] = true;
        RealVector z = solve_passive();
        for (int inner = 0; inner < max_iterations; ++inner) {
            bool feasible = true;
            double alpha = 1.0;
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
                    feasible = false;
                    alpha = std::min(alpha, x(j) / (x(j) - z(j)));
                }
            if (feasible)
                break;
            x += alpha * (z - x);
            for (Eigen::Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && x(j) <= 1e-15) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x(j) = 0.0;
                }
            z = solve_passive();
        }
        x = z;
    }
    return x;
}

struct BsbInversion {
    RealVector populations;
    double residual{};  ///< RMS misfit of P_up
    double condition_number{};
};

/// Recovers phonon populations from a blue-sideband signal by non-negative least
/// squares on the frequencies sqrt(n+1) Omega_eff, n = 0..n_max. The result is
/// renormalized to unit sum.
inline BsbInversion invert_bsb_signal(const BsbSignal& signal, int n_max, double max_condition = 1e8)
{
    if (n_max < 0)
        throw InvalidArgumentError("n_max must be >= 0");
    if (!(signal.omega_eff > 0.0))
        throw InvalidArgumentError("Omega_eff must be positive");
    const auto& t = signal.times;
    if (t.size() < static_cast<std::size_t>(n_max) + 2 || t.size() != signal.p_up.size())
        throw IllConditionedError("too few samples for " + std::to_string(n_max + 1) + " frequencies");
    if (!std::is_sorted(t.begin(), t.end()))
        throw InvalidArgumentError("signal times must be sorted");
    const double span = t.back() - t.front();
    const double omega = signal.omega_eff;
    const double top = std::sqrt(static_cast<double>(n_max + 1)) * omega;
    const double gap = n_max > 0 ? top - std::sqrt(static_cast<double>(n_max)) * omega : omega;
    if (span < 3.0 * kTwoPi / omega)
        throw IllConditionedError("time span covers fewer than 3 periods of the slowest component");
    if (span * gap < M_PI)
        throw IllConditionedError("time span cannot resolve adjacent sideband frequencies");
    double max_dt = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i)
        max_dt = std::max(max_dt, t[i] - t[i - 1]);
    if (max_dt * top >= M_PI)
        throw IllConditionedError("sampling interval is above the Nyquist limit of the fastest component");

    const auto rows = static_cast<Eigen::Index>(t.size());
    RealMatrix a(rows, n_max + 1);
    RealVector b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        b(i) = 1.0 - 2.0 * signal.p_up[static_cast<std::size_t>(i)];
        for (Eigen::Index n = 0; n <= n_max; ++n)
            a(i, n) = std::cos(std::sqrt(static_cast<double>(n + 1)) * omega * t[static_cast<std::size_t>(i)]);
    }
    const Eigen::JacobiSVD<RealMatrix> svd(a);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(sv.size() - 1);
    if (!(cond <= max_condition))
        throw IllConditionedError("design matrix condition number " + std::to_string(cond) + " too large");

    RealVector x = nnls(a, b);
    const double total = x.sum();
    if (!(total > 0.0))
        throw IllConditionedError("inversion produced no population");
    BsbInversion out;
    out.populations = x / total;
    out.residual = 0.5 * (a * out.populations - b).norm() / std::sqrt(static_cast<double>(rows));
    out.condition_number = cond;
    return out;
}

/// Binary detection channel and sideband transfer imperfections; zero is ideal.
struct DetectionErrors {
    double dark_count = 0.0;         ///< P(bright reading | dark ion)
    double bright_infidelity = 0.0;  ///< P(dark reading | bright ion)
    double transfer_error = 0.0;     ///< per-pulse probability that a transfer fails

    void validate() const
    {
        for (double v : {dark_count, bright_infidelity, transfer_error})
            if (!(v >= 0.0 && v < 1.0))
                throw InvalidArgumentError("detection error probabilities must lie in [0, 1)");
    }
};

enum class Pulse { None, Carrier, BlueShift, RedSideband, RedSidebandCarrier };

struct DetectionStep {
    Pulse pulse = Pulse::None;
    bool fluorescence = false;
};

struct DetectionTrace {
    std::vector<DetectionStep> steps;
    int projected_n = -1;  ///< -1 when no fluorescence was seen
    double probability{};  ///< probability of this exact trace
};

namespace detail {

inline RealVector checked_populations(const RealVector& p)
{
    if (p.size() == 0 || p.minCoeff() < -1e-15 || std::abs(p.sum() - 1.0) > 1e-6)
        throw InvalidArgumentError("phonon populations must be non-negative with unit mass on retained levels");
    return p.cwiseMax(0.0);
}

/// One dark-branch update of the fluorescence loop on joint (unnormalized) weights.
inline void fluorescence_dark_update(RealVector& q, const DetectionErrors& e)
{
    RealVector next = RealVector::Zero(q.size());
    next(0) = q(0) * e.bright_infidelity;
    for (Eigen::Index n = 1; n < q.size(); ++n) {
        const double dark = q(n) * (1.0 - e.dark_count);
        next(n - 1) += (1.0 - e.transfer_error) * dark;
        next(n) += e.transfer_error * dark;
    }
    q = next;
}

inline double fluorescence_bright_weight(const RealVector& q, const DetectionErrors& e)
{
    return q(0) * (1.0 - e.bright_infidelity) + (q.sum() - q(0)) * e.dark_count;
}

inline Eigen::Index max_fluorescence_steps(Eigen::Index levels) { return 4 * levels + 16; }

}  // namespace detail

/// Probability that the first fluorescence occurs at detection k+1, k = 0..N-1,
/// followed by the probability of never fluorescing within the step limit.
inline RealVector fluorescence_outcome_probabilities(const RealVector& populations, DetectionErrors errors = {})
{
    errors.validate();
    RealVector q = detail::checked_populations(populations);
    const Eigen::Index levels = q.size();
    const Eigen::Index steps = detail::max_fluorescence_steps(levels);
    RealVector out = RealVector::Zero(steps + 1);
    for (Eigen::Index k = 0; k < steps; ++k) {
        out(k) = detail::fluorescence_bright_weight(q, errors);
        detail::fluorescence_dark_update(q, errors);
    }
    out(steps) = q.sum();
    return out;
}

/// Iterative fluorescence protocol: each round applies a carrier plus adiabatic
/// blue-sideband shift (net map |down, n> -> |down, n-1>, with n = 0 entering the
/// bright branch) and detects; it stops at the first fluorescence. With ideal
/// pulses, |k> fluoresces first at detection k+1.
inline DetectionTrace fluorescence_projective_measurement(const RealVector& populations, Rng& rng,
                                                          DetectionErrors errors = {})
{
    errors.validate();
    RealVector q = detail::checked_populations(populations);
    q /= q.sum();
    const Eigen::Index steps = detail::max_fluorescence_steps(q.size());
    DetectionTrace trace;
    trace.probability = 1.0;
    for (Eigen::Index k = 0; k < steps; ++k) {
        const double mass = q.sum();
        const double p_bright = mass > 0.0 ? detail::fluorescence_bright_weight(q, errors) / mass : 0.0;
        const bool bright = detail::uniform01(rng) < p_bright;
        trace.steps.push_back({Pulse::BlueShift, bright});
        if (bright) {
            trace.probability *= p_bright;
            trace.projected_n = static_cast<int>(k);
            return trace;
        }
        trace.probability *= 1.0 - p_bright;
        detail::fluorescence_dark_update(q, errors);
    }
    return trace;
}

inline DetectionTrace fluorescence_projective_measurement(const StateVector& state, Rng& rng,
                                                          DetectionErrors errors = {})
{
    const RealVector pops = state.populations();
    const Eigen::Index levels = state.dim() / state.spin_dim();
    RealVector fock = RealVector::Zero(levels);
    for (int s = 0; s < state.spin_dim(); ++s)
        fock += pops.segment(s * levels, levels);
    return fluorescence_projective_measurement(fock, rng, errors);
}

struct NoFluorescenceResult {
    bool accept = false;
    double probability{};          ///< acceptance probability
    DetectionTrace trace;          ///< outcomes of the detections actually performed
    RealVector posterior;          ///< populations conditioned on acceptance (empty if impossible)
};

/// Non-destructive projection onto |target>. Rounds j = 0..target-1 apply a red
/// sideband and carrier that make level j bright; a final red-sideband round
/// makes every level other than the target bright. Acceptance requires all
/// target+1 detections dark, so with ideal pulses it has probability P_target.
inline NoFluorescenceResult nofluorescence_projective_measurement(const RealVector& populations, int target,
                                                                  Rng& rng, DetectionErrors errors = {})
{
    errors.validate();
    const RealVector p = detail::checked_populations(populations);
    if (target < 0 || target >= p.size())
        throw InvalidArgumentError("target phonon number outside the retained levels");
    const double e = errors.transfer_error;
    const double dark_if_bright = (1.0 - e) * errors.bright_infidelity + e * (1.0 - errors.dark_count);
    const double dark_if_dark = 1.0 - errors.dark_count;

    // Per-level probability of a dark reading in round j, and the joint acceptance weights.
    auto dark_prob = [&](Eigen::Index n, int j) {
        const bool made_bright = j < target ? n == j : n != target;
        return made_bright ? dark_if_bright : dark_if_dark;
    };
    RealVector joint = p;
    NoFluorescenceResult out;
    out.trace.probability = 1.0;
    for (int j = 0; j <= target; ++j) {
        RealVector next(p.size());
        for (Eigen::Index n = 0; n < p.size(); ++n)
            next(n) = joint(n) * dark_prob(n, j);
        const double before = joint.sum();
        const double p_dark = before > 0.0 ? next.sum() / before : 0.0;
        const bool dark = detail::uniform01(rng) < p_dark;
        out.trace.steps.push_back({j < target ? Pulse::RedSidebandCarrier : Pulse::RedSideband, !dark});
        out.trace.probability *= dark ? p_dark : 1.0 - p_dark;
        joint = next;
        if (!dark)
            break;
        if (j == target)
            out.accept = true;
    }
    RealVector accepted = p;
    for (int j = 0; j <= target; ++j)
        for (Eigen::Index n = 0; n < p.size(); ++n)
            accepted(n) *= dark_prob(n, j);
    out.probability = accepted.sum();
    if (out.probability > 0.0)
        out.posterior = accepted / out.probability;
    out.trace.projected_n = out.accept ? target : -1;
    return out;
}

struct HeatingResult {
    RealVector populations;
    double nbar{};
};

/// Phenomenological heating: re-thermalizes to nbar' = <n> + rate t on the same levels.
inline HeatingResult heating_wait(const RealVector& populations, double rate, double t)
{
    if (!(rate >= 0.0) || !(t >= 0.0))
        throw InvalidArgumentError("heating rate and wait time must be non-negative");
    const RealVector p = detail::checked_populations(populations);
    double mean = 0.0;
    for (Eigen::Index n = 0; n < p.size(); ++n)
        mean += static_cast<double>(n) * p(n);
    const double nbar = mean / p.sum() + rate * t;
    if (rate * t == 0.0)
        return {p, nbar};
    return {thermal_distribution(ThermalSpec::oscillator(nbar, {1.0}), p.size()), nbar};
}

}  // namespace ionwork
