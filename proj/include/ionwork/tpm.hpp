#pragma once

// Two-point measurement: thermal preparation in the initial eigenbasis,
// projection, drive, projection in the final eigenbasis. Exact transition
// matrices and a Monte-Carlo sampler of single realizations.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ionwork/errors.hpp"
#include "ionwork/evolve.hpp"
#include "ionwork/fock.hpp"
#include "ionwork/models.hpp"
#include "ionwork/parallel.hpp"
#include "ionwork/rng.hpp"
#include "ionwork/units.hpp"

namespace ionwork {

/// Initial thermal populations, either a phonon occupation or two-level populations.
class ThermalSpec {
public:
    struct Oscillator {
        double nbar;
    };
    struct TwoLevel {
        double p_down;
        double p_up;
    };

    static ThermalSpec oscillator(double nbar, AngularFrequency nu)
    {
        if (!(nbar >= 0.0))
            throw InvalidArgumentError("mean phonon number must be >= 0");
        return ThermalSpec(Oscillator{nbar}, nu);
    }

    static ThermalSpec two_level(double p_down, double p_up, AngularFrequency splitting)
    {
        if (p_down < 0.0 || p_up < 0.0 || std::abs(p_down + p_up - 1.0) > 1e-12)
            throw InvalidArgumentError("two-level populations must be >= 0 and sum to 1");
        return ThermalSpec(TwoLevel{p_down, p_up}, splitting);
    }

    /// Two-level populations of a Boltzmann state at temperature T for splitting hbar*omega.
    static ThermalSpec two_level_at(Temperature t, AngularFrequency splitting)
    {
        const double b = beta_in_quanta(t, splitting);
        const double p_up = 1.0 / (1.0 + std::exp(b));
        return two_level(1.0 - p_up, p_up, splitting);
    }

    const std::variant<Oscillator, TwoLevel>& kind() const { return kind_; }
    AngularFrequency spacing() const { return spacing_; }
    bool is_oscillator() const { return std::holds_alternative<Oscillator>(kind_); }

private:
    ThermalSpec(std::variant<Oscillator, TwoLevel> k, AngularFrequency spacing)
        : kind_(k), spacing_(spacing)
    {
        if (!(spacing.value > 0.0))
            throw InvalidArgumentError("level spacing must be positive");
    }

    std::variant<Oscillator, TwoLevel> kind_;
    AngularFrequency spacing_;
};

/// T_eff = hbar Omega0 / (k_B ln(p_down / p_up)).
inline Temperature effective_temperature(double p_down, double p_up, AngularFrequency omega0)
{
    if (!(p_down > 0.0) || !(p_up > 0.0))
        throw InvalidArgumentError("populations must be positive");
    if (p_down == p_up)
        throw InfiniteTemperatureError("equal populations correspond to infinite temperature");
    if (p_up > p_down)
        throw NegativeTemperatureError("population inversion corresponds to negative temperature");
    return {kHbar * omega0.value / (kBoltzmann * std::log(p_down / p_up))};
}

inline Temperature temperature_of(const ThermalSpec& spec)
{
    if (const auto* o = std::get_if<ThermalSpec::Oscillator>(&spec.kind()))
        return temperature_from_nbar(o->nbar, spec.spacing());
    const auto& t = std::get<ThermalSpec::TwoLevel>(spec.kind());
    return effective_temperature(t.p_down, t.p_up, spec.spacing());
}

/// exp(-beta e_n) / Z for energies in quanta and beta in inverse quanta.
inline RealVector boltzmann_distribution(const RealVector& energies, double beta)
{
    const double e0 = energies.minCoeff();
    RealVector w = (-beta * (energies.array() - e0)).exp().matrix();
    return w / w.sum();
}

/// Thermal populations over the initial eigenstates, lowest energy first.
///
/// Oscillator: P_n = nbar^n / (nbar + 1)^(n+1) on the retained levels, which must
/// capture at least 1 - 1e-6 of the weight; the result is renormalized.
inline RealVector thermal_distribution(const ThermalSpec& spec, Eigen::Index levels)
{
    if (const auto* o = std::get_if<ThermalSpec::Oscillator>(&spec.kind())) {
        RealVector p(levels);
        const double ratio = o->nbar / (o->nbar + 1.0);
        double term = 1.0 / (o->nbar + 1.0);
        for (Eigen::Index n = 0; n < levels; ++n) {
            p(n) = term;
            term *= ratio;
        }
        const double captured = p.sum();
        if (captured < 1.0 - 1e-6)
            throw CutoffError("thermal weight captured by " + std::to_string(levels) +
                              " levels is only " + std::to_string(captured));
        return p / captured;
    }
    const auto& t = std::get<ThermalSpec::TwoLevel>(spec.kind());
    if (levels != 2)
        throw InvalidArgumentError("two-level thermal state needs exactly two levels");
    RealVector p(2);
    p << t.p_down, t.p_up;
    return p;
}

inline RealVector thermal_distribution(const ThermalSpec& spec, FockSpace space)
{
    return thermal_distribution(spec, space.dim());
}

/// P_{n->m}: rows are initial eigenstates, columns final eigenstates.
class TransitionMatrix {
public:
    explicit TransitionMatrix(RealMatrix entries) : p_(std::move(entries))
    {
        if (p_.rows() != p_.cols() || p_.rows() == 0)
            throw InvalidArgumentError("transition matrix must be square");
        if (p_.minCoeff() < -1e-12)
            throw InvalidArgumentError("transition probabilities must be non-negative");
    }

    static TransitionMatrix identity(Eigen::Index dim) { return TransitionMatrix(RealMatrix::Identity(dim, dim)); }

    const RealMatrix& entries() const { return p_; }
    double operator()(Eigen::Index n, Eigen::Index m) const { return p_(n, m); }
    Eigen::Index dim() const { return p_.rows(); }

    RealVector row_defects() const { return (p_.rowwise().sum().array() - 1.0).abs().matrix(); }
    RealVector col_defects() const { return (p_.colwise().sum().array() - 1.0).abs().matrix().transpose(); }

    /// Row sums equal 1 within tol on the first `rows` rows (all by default).
    bool is_row_stochastic(double tol = 1e-8, Eigen::Index rows = -1) const
    {
        const auto r = rows < 0 ? dim() : rows;
        return row_defects().head(r).maxCoeff() <= tol;
    }

    bool is_doubly_stochastic(double tol = 1e-8) const
    {
        return is_row_stochastic(tol) && col_defects().maxCoeff() <= tol;
    }

    /// Largest |P - I| element.
    double max_deviation_from_identity() const
    {
        return (p_ - RealMatrix::Identity(dim(), dim())).cwiseAbs().maxCoeff();
    }

    /// Sum of all off-diagonal entries.
    double off_diagonal_mass() const { return p_.sum() - p_.trace(); }

    /// Probability of leaving the initial level under initial populations p.
    double transition_probability(const RealVector& initial) const
    {
        double total = 0.0;
        for (Eigen::Index n = 0; n < dim(); ++n)
            total += initial(n) * (1.0 - p_(n, n));
        return total;
    }

private:
    RealMatrix p_;
};

/// One two-point-measurement realization.
struct WorkRecord {
    int n_initial{};
    int m_final{};
    double work{};  ///< quanta
    double weight = 1.0;
};

/// Everything the TPM needs about one driven process.
struct WorkProtocol {
    std::string name;
    AngularFrequency quantum;  ///< energy unit of reported work
    TimeDependentHamiltonian hamiltonian;
    double t0{};
    double t1{};
    Eigenbasis initial;  ///< energies in rad/s
    Eigenbasis final;
    /// Two-level description, required for noise trajectories.
    std::optional<PauliHamiltonian> pauli;
    std::function<Eigen::Vector3d(double)> noise_axis;
    double noise_scale{};  ///< Omega0 in gamma = sigma^2 Omega0^2 / 2
    double gamma{};        ///< dephasing rate, 1/s

    Eigen::Index dim() const { return initial.energies.size(); }

    /// W_{n->m} = (e_f^m - e_i^n) / (hbar * quantum).
    double work(Eigen::Index n, Eigen::Index m) const
    {
        return final.energies(m) / quantum.value - initial.energies(n) / quantum.value;
    }

    RealVector initial_energies_quanta() const { return initial.energies / quantum.value; }
    RealVector final_energies_quanta() const { return final.energies / quantum.value; }
};

/// Dragged oscillator measured in the bare Fock basis before and after the
/// ramp; both bases coincide with the instantaneous eigenbasis since the drive
/// starts and ends at zero.
inline WorkProtocol dragged_oscillator_protocol(const DraggedOscillator& osc)
{
    WorkProtocol p;
    p.name = "dragged-oscillator";
    p.quantum = {osc.nu()};
    p.hamiltonian = osc.hamiltonian();
    p.t0 = 0.0;
    p.t1 = osc.duration();
    p.initial = osc.displaced_eigenbasis(p.t0);
    p.final = osc.displaced_eigenbasis(p.t1);
    return p;
}

/// Driven two-level system with optional dephasing; work in units of hbar*Omega0.
inline WorkProtocol driven_tls_protocol(const DrivenTls& tls, double gamma = 0.0)
{
    if (gamma < 0.0)
        throw InvalidArgumentError("dephasing rate must be non-negative");
    WorkProtocol p;
    p.name = "driven-tls";
    p.quantum = {tls.omega0()};
    p.hamiltonian = tls.hamiltonian();
    p.t0 = 0.0;
    p.t1 = tls.tau();
    p.initial = tls.eigenbasis(0.0);
    p.final = tls.eigenbasis(tls.tau());
    p.pauli = tls.pauli();
    p.noise_axis = tls.noise_axis();
    p.noise_scale = tls.omega0();
    p.gamma = gamma;
    return p;
}

enum class Evolution { Closed, Dephasing };

/// Exact P_{n->m} = <m_f| E(|n_i><n_i|) |m_f> for the closed or dephasing channel.
inline TransitionMatrix transition_matrix(const WorkProtocol& protocol, Evolution evolution,
                                          IntegratorOptions opts = {})
{
    const auto d = protocol.dim();
    RealMatrix p(d, d);
    if (evolution == Evolution::Closed || protocol.gamma == 0.0) {
        const Matrix u = propagate_unitary_operator(protocol.hamiltonian, protocol.t0, protocol.t1, opts).propagator;
        p = (protocol.final.vectors.adjoint() * u * protocol.initial.vectors).cwiseAbs2().transpose();
        return TransitionMatrix(std::move(p));
    }
    for (Eigen::Index n = 0; n < d; ++n) {
        const Vector v = protocol.initial.vectors.col(n);
        const DensityMatrix rho0(v * v.adjoint());
        const DensityMatrix rho =
            propagate_dephasing(protocol.hamiltonian, {protocol.gamma}, protocol.t0, protocol.t1, rho0, opts);
        p.row(n) = rho.populations_in(protocol.final.vectors).transpose();
    }
    return TransitionMatrix(std::move(p));
}

/// Analytic dragged-oscillator transitions |<m|D(alpha)|n>|^2 (exact elements;
/// rows whose displaced state reaches the cutoff are sub-stochastic).
inline TransitionMatrix displacement_transition_matrix(Complex alpha, FockSpace space)
{
    return TransitionMatrix(displacement_matrix(alpha, space, DisplacementMethod::ClosedForm)
                                .cwiseAbs2()
                                .transpose());
}

namespace detail {

/// Uniform [0, 1) from 53 random bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Inverse-CDF draw from non-negative weights (need not be normalized).
inline Eigen::Index sample_index(const RealVector& weights, Rng& rng)
{
    const double total = weights.sum();
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < weights.size(); ++k) {
        acc += weights(k);
        if (u < acc)
            return k;
    }
    for (Eigen::Index k = weights.size(); k-- > 0;)
        if (weights(k) > 0.0)
            return k;
    return weights.size() - 1;
}

inline constexpr std::size_t kShotBlock = 256;

}  // namespace detail

/// Projection used for the two measurements of a Monte-Carlo shot. Receives the
/// populations over the measurement basis and returns the observed level.
using ProjectiveMeasurement = std::function<Eigen::Index(const RealVector& populations, Rng& rng)>;

struct MonteCarloOptions {
    std::size_t shots = 100000;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    double noise_dt = 0.0;  ///< 0 selects the largest admissible step
    /// Empty = ideal projective collapse.
    ProjectiveMeasurement measurement;
};

/// Largest admissible noise step: min(duration/1000, 0.1/(sigma^2 Omega0^2)).
inline double default_noise_dt(const WorkProtocol& protocol)
{
    const double len = protocol.t1 - protocol.t0;
    const double limit = protocol.gamma > 0.0 ? 0.1 / (2.0 * protocol.gamma) : len;
    return std::min(len / 1000.0, limit);
}

/// Samples single TPM realizations. Shots are processed in fixed blocks, each
/// with its own random stream derived from (seed, block), so the records do not
/// depend on the number of jobs. With dephasing, every shot evolves along one
/// noise trajectory; otherwise the deterministic propagator is computed once at
/// construction and reused across calls.
class TpmSampler {
public:
    explicit TpmSampler(WorkProtocol protocol, IntegratorOptions integrator = {})
        : protocol_(std::move(protocol))
    {
        if (stochastic()) {
            if (!protocol_.pauli)
                throw InvalidArgumentError("noise trajectories need a two-level protocol");
            return;
        }
        const Matrix u =
            propagate_unitary_operator(protocol_.hamiltonian, protocol_.t0, protocol_.t1, integrator).propagator;
        final_probs_ = (protocol_.final.vectors.adjoint() * u * protocol_.initial.vectors).cwiseAbs2();
    }

    const WorkProtocol& protocol() const { return protocol_; }
    bool stochastic() const { return protocol_.gamma > 0.0; }

    /// Exact P_{n->m} of the deterministic channel (empty when stochastic).
    TransitionMatrix transitions() const
    {
        if (stochastic())
            throw InvalidArgumentError("stochastic protocol has no cached propagator");
        return TransitionMatrix(final_probs_.transpose());
    }

    std::vector<WorkRecord> sample(const RealVector& thermal, const MonteCarloOptions& opts) const
    {
        if (opts.shots < 1)
            throw InvalidArgumentError("shots must be >= 1");
        if (thermal.size() != protocol_.dim())
            throw InvalidArgumentError("thermal distribution does not match the protocol dimension");
        NoiseSpec noise;
        if (stochastic()) {
            noise.sigma = noise_sigma_for(protocol_.gamma, protocol_.noise_scale);
            noise.dt = opts.noise_dt > 0.0 ? opts.noise_dt : default_noise_dt(protocol_);
            noise.seed = opts.seed;
        }
        auto measure = [&](const RealVector& pops, Rng& rng) -> Eigen::Index {
            return opts.measurement ? opts.measurement(pops, rng) : detail::sample_index(pops, rng);
        };

        std::vector<WorkRecord> records(opts.shots);
        const std::size_t blocks = (opts.shots + detail::kShotBlock - 1) / detail::kShotBlock;
        parallel_for(blocks, opts.jobs, [&](std::size_t b) {
            Rng rng = make_stream(opts.seed, b, stream::kShots);
            const std::size_t begin = b * detail::kShotBlock;
            const std::size_t end = std::min(opts.shots, begin + detail::kShotBlock);
            for (std::size_t s = begin; s < end; ++s) {
                const Eigen::Index n = measure(thermal, rng);
                RealVector pops;
                if (stochastic()) {
                    Rng noise_rng = make_stream(opts.seed, s, stream::kNoise);
                    const StateVector start(Vector(protocol_.initial.vectors.col(n)), 2);
                    const StateVector out = propagate_trajectory(*protocol_.pauli, noise, protocol_.noise_axis,
                                                                 protocol_.t0, protocol_.t1, start, noise_rng);
                    pops = out.populations_in(protocol_.final.vectors);
                } else {
                    pops = final_probs_.col(n);
                }
                const Eigen::Index m = measure(pops, rng);
                records[s] = {static_cast<int>(n), static_cast<int>(m), protocol_.work(n, m), 1.0};
            }
        });
        return records;
    }

private:
    WorkProtocol protocol_;
    RealMatrix final_probs_;  ///< column n: final-basis populations from initial level n
};

inline std::vector<WorkRecord> run_tpm_montecarlo(const WorkProtocol& protocol, const RealVector& thermal,
                                                  const MonteCarloOptions& opts,
                                                  IntegratorOptions integrator = {})
{
    return TpmSampler(protocol, integrator).sample(thermal, opts);
}

/// Empirical P_{n->m} counts from records.
inline RealMatrix transition_counts(const std::vector<WorkRecord>& records, Eigen::Index dim)
{
    RealMatrix c = RealMatrix::Zero(dim, dim);
    for (const auto& r : records)
        c(r.n_initial, r.m_final) += r.weight;
    return c;
}

}  // namespace ionwork
