#pragma once

// Propagators: analytic dragged-oscillator displacement, adaptive fourth-order
// Magnus integration for closed systems, white-noise trajectories for the
// driven two-level system, and the instantaneous-basis dephasing master equation.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "ionwork/errors.hpp"
#include "ionwork/fock.hpp"
#include "ionwork/models.hpp"
#include "ionwork/parallel.hpp"
#include "ionwork/rng.hpp"

namespace ionwork {

namespace detail {

// (e^{ix}(1 - ix) - 1) / x^2, series below |x| = 0.1 to avoid cancellation.
inline Complex ramp_up_kernel(double x)
{
    if (std::abs(x) >= 0.1)
        return (std::exp(kI * x) * (1.0 - kI * x) - 1.0) / (x * x);
    Complex sum = 0.0;
    Complex ipow = -1.0;  // i^2
    double xpow = 1.0;
    double fact = 2.0;
    for (int k = 2; k < 16; ++k) {
        sum += ipow * xpow * (1.0 - k) / fact;
        ipow *= kI;
        xpow *= x;
        fact *= (k + 1);
    }
    return sum;
}

// (1 - e^{iy} + iy) / y^2, same treatment.
inline Complex ramp_down_kernel(double y)
{
    if (std::abs(y) >= 0.1)
        return (1.0 - std::exp(kI * y) + kI * y) / (y * y);
    Complex sum = 0.0;
    Complex ipow = -1.0;
    double ypow = 1.0;
    double fact = 2.0;
    for (int k = 2; k < 16; ++k) {
        sum -= ipow * ypow / fact;
        ipow *= kI;
        ypow *= y;
        fact *= (k + 1);
    }
    return sum;
}

}  // namespace detail

/// Net phase-space displacement of the dragged oscillator after a linear
/// ramp-up of the drive amplitude A over tau followed by a linear ramp-down over t_a.
///
/// The evolution operator over the whole protocol equals D(alpha) up to a global
/// phase and the free rotation exp(-i nu a^+a t), which leaves Fock populations alone.
inline Complex drag_displacement_alpha(double amplitude, double nu, double tau, double t_a)
{
    if (!(tau > 0.0) || !(t_a > 0.0))
        throw InvalidArgumentError("ramp durations must be positive");
    const double x = tau * nu;
    const double y = t_a * nu;
    const Complex bracket =
        detail::ramp_up_kernel(x) * tau + std::exp(kI * x) * detail::ramp_down_kernel(y) * t_a;
    return -kI * (0.5 * amplitude) * bracket;
}

/// Drive amplitude that produces |alpha| = target for fixed (nu, tau, t_a).
inline double calibrate_drag_amplitude(double target_abs_alpha, double nu, double tau, double t_a)
{
    const double unit = std::abs(drag_displacement_alpha(1.0, nu, tau, t_a));
    if (!(unit > 0.0))
        throw InvalidArgumentError("protocol produces no displacement; amplitude cannot be calibrated");
    return target_abs_alpha / unit;
}

struct NoiseSpec {
    double sigma{};      ///< white-noise strength, sqrt(s)
    double dt{};         ///< piecewise-constant step, s
    std::uint64_t seed{};
};

struct DephasingSpec {
    double gamma{};  ///< uniform dephasing rate, 1/s
};

/// Dephasing rate induced by amplitude noise sigma on a drive of scale omega0:
/// gamma = sigma^2 omega0^2 / 2.
inline double dephasing_rate(double sigma, double omega0) { return 0.5 * sigma * sigma * omega0 * omega0; }

inline double noise_sigma_for(double gamma, double omega0)
{
    if (gamma < 0.0)
        throw InvalidArgumentError("dephasing rate must be non-negative");
    return std::sqrt(2.0 * gamma) / omega0;
}

namespace detail {

inline constexpr double kGaussLo = 0.5 - 0.28867513459481288225;  // 1/2 - sqrt(3)/6
inline constexpr double kGaussHi = 0.5 + 0.28867513459481288225;
inline constexpr double kMagnusComm = 0.14433756729740644113;  // sqrt(3)/12

/// Hermitian K with exp(-iK) the fourth-order Magnus step over [t, t + h].
inline Matrix magnus4_generator(const TimeDependentHamiltonian& ham, double t, double h)
{
    const Matrix h1 = ham(t + kGaussLo * h);
    const Matrix h2 = ham(t + kGaussHi * h);
    Matrix k = (0.5 * h) * (h1 + h2);
    k.noalias() -= (kI * kMagnusComm * h * h) * (h2 * h1 - h1 * h2);
    return k;
}

inline std::vector<double> segment_edges(const std::vector<double>& breakpoints, double t0, double t1)
{
    std::vector<double> edges{t0};
    for (double b : breakpoints)
        if (b > t0 && b < t1)
            edges.push_back(b);
    edges.push_back(t1);
    std::sort(edges.begin(), edges.end());
    return edges;
}

/// Repeated step halving with a Richardson error estimate for a fourth-order
/// scheme. `run(n)` integrates one segment with n equal steps.
template <class Result, class Run, class Distance>
Result halve_until_converged(Run&& run, Distance&& distance, long initial_steps, double tol,
                             long max_steps, double* error_out)
{
    long n = std::max(1L, initial_steps);
    Result coarse = run(n);
    double last_error = std::numeric_limits<double>::infinity();
    int stalls = 0;
    while (true) {
        if (2 * n > max_steps)
            throw ConvergenceError("step halving exceeded " + std::to_string(max_steps) + " steps");
        Result fine = run(2 * n);
        const double error = distance(coarse, fine) / 15.0;
        if (error <= tol) {
            if (error_out)
                *error_out = error;
            return fine;
        }
        if (error >= last_error) {
            if (++stalls >= 3)
                throw ConvergenceError("step halving does not reduce the error estimate");
        } else {
            stalls = 0;
        }
        last_error = error;
        coarse = std::move(fine);
        n *= 2;
    }
}

inline long initial_step_count(double length, double rate)
{
    return std::max(4L, static_cast<long>(std::ceil(length * rate / 0.5)));
}

}  // namespace detail

struct IntegratorOptions {
    double tol = 1e-10;
    long max_steps = 1L << 22;
};

struct UnitaryPropagation {
    Matrix propagator;
    double error_estimate{};
};

/// Time-ordered propagator U(t1, t0) of a closed system by fourth-order Magnus
/// steps, refined by halving until the phase-insensitive Richardson estimate is below tol.
inline UnitaryPropagation propagate_unitary_operator(const TimeDependentHamiltonian& ham, double t0,
                                                     double t1, IntegratorOptions opts = {})
{
    if (!(t1 > t0))
        throw InvalidArgumentError("propagation requires t1 > t0");
    require_hermitian(ham(t0));
    require_hermitian(ham(t1));
    const auto edges = detail::segment_edges(ham.breakpoints, t0, t1);
    Matrix total = Matrix::Identity(ham.dim, ham.dim);
    double error_sum = 0.0;
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        const double a = edges[s];
        const double b = edges[s + 1];
        const double len = b - a;
        const double share = opts.tol * len / (t1 - t0);
        const double rate = ham(0.5 * (a + b)).cwiseAbs().rowwise().sum().maxCoeff();
        auto run = [&](long steps) {
            const double h = len / static_cast<double>(steps);
            Matrix u = Matrix::Identity(ham.dim, ham.dim);
            for (long k = 0; k < steps; ++k)
                u = unitary_from_hermitian(detail::magnus4_generator(ham, a + k * h, h), 1.0) * u;
            return u;
        };
        auto dist = [](const Matrix& x, const Matrix& y) { return phase_insensitive_distance(x, y); };
        double err = 0.0;
        Matrix u = detail::halve_until_converged<Matrix>(run, dist, detail::initial_step_count(len, rate),
                                                         share, opts.max_steps, &err);
        total = u * total;
        error_sum += err;
    }
    return {std::move(total), error_sum};
}

/// Evolves a pure state with the adaptive Magnus integrator; error <= tol up to a global phase.
inline StateVector propagate_unitary(const TimeDependentHamiltonian& ham, double t0, double t1,
                                     const StateVector& state, double tol = 1e-10,
                                     long max_steps = 1L << 22)
{
    if (!(t1 > t0))
        throw InvalidArgumentError("propagation requires t1 > t0");
    if (state.dim() != ham.dim)
        throw InvalidArgumentError("state and Hamiltonian dimensions differ");
    require_hermitian(ham(t0));
    require_hermitian(ham(t1));
    const auto edges = detail::segment_edges(ham.breakpoints, t0, t1);
    Vector psi = state.amplitudes();
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        const double a = edges[s];
        const double b = edges[s + 1];
        const double len = b - a;
        const double share = tol * len / (t1 - t0);
        const double rate = ham(0.5 * (a + b)).cwiseAbs().rowwise().sum().maxCoeff();
        auto run = [&](long steps) {
            const double h = len / static_cast<double>(steps);
            Vector v = psi;
            for (long k = 0; k < steps; ++k) {
                Eigen::SelfAdjointEigenSolver<Matrix> es(detail::magnus4_generator(ham, a + k * h, h));
                const Vector phases = (-kI * es.eigenvalues().cast<Complex>()).array().exp();
                v = es.eigenvectors() * (phases.asDiagonal() * (es.eigenvectors().adjoint() * v));
            }
            return v;
        };
        auto dist = [](const Vector& x, const Vector& y) { return phase_insensitive_distance(x, y); };
        psi = detail::halve_until_converged<Vector>(run, dist, detail::initial_step_count(len, rate), share,
                                                    max_steps, nullptr);
    }
    return StateVector::normalized(std::move(psi), state.spin_dim());
}

namespace detail {

/// exp(-(i/2) v . sigma) applied to a 2-vector in the (down, up) basis.
inline Eigen::Vector2cd su2_apply(const Eigen::Vector3d& v, const Eigen::Vector2cd& psi)
{
    const double norm = v.norm();
    if (norm == 0.0)
        return psi;
    const double c = std::cos(0.5 * norm);
    const double s = std::sin(0.5 * norm) / norm;
    // n . sigma with sx=[[0,1],[1,0]], sy=[[0,i],[-i,0]], sz=diag(-1,1)
    const Complex m00 = Complex{c, s * v.z()};
    const Complex m11 = Complex{c, -s * v.z()};
    const Complex m01 = -kI * s * Complex{v.x(), v.y()};
    const Complex m10 = -kI * s * Complex{v.x(), -v.y()};
    return {m00 * psi(0) + m01 * psi(1), m10 * psi(0) + m11 * psi(1)};
}

/// Magnus-4 vector for a Pauli field: step = exp(-(i/2) v . sigma).
inline Eigen::Vector3d su2_magnus4(const Eigen::Vector3d& f1, const Eigen::Vector3d& f2, double h)
{
    return (0.5 * h) * (f1 + f2) + (kMagnusComm * h * h) * f2.cross(f1);
}

}  // namespace detail

/// One realization of H(t) + (xi(t)/2) noise_axis(t) . sigma for a two-level
/// system, with xi piecewise constant over steps of at most noise.dt and
/// xi_k ~ Normal(0, sigma^2 / dt). Each step is a fourth-order Magnus SU(2) rotation.
inline StateVector propagate_trajectory(const PauliHamiltonian& ham, const NoiseSpec& noise,
                                        const std::function<Eigen::Vector3d(double)>& noise_axis,
                                        double t0, double t1, const StateVector& state, Rng& rng)
{
    if (state.dim() != 2)
        throw InvalidArgumentError("trajectories are defined for two-level states");
    if (!(t1 > t0))
        throw InvalidArgumentError("propagation requires t1 > t0");
    if (!(noise.dt > 0.0))
        throw StepTooLargeError("noise step must be positive");
    const double len = t1 - t0;
    const double axis_scale = noise_axis(t0).norm();
    const double drift_limit = noise.sigma > 0.0
                                   ? 0.1 / (noise.sigma * noise.sigma * axis_scale * axis_scale)
                                   : std::numeric_limits<double>::infinity();
    const double limit = std::min(len / 1000.0, drift_limit);
    if (noise.dt > limit * (1.0 + 1e-12))
        throw StepTooLargeError("noise step " + std::to_string(noise.dt) + " s exceeds " +
                                std::to_string(limit) + " s");
    const long steps = static_cast<long>(std::ceil(len / noise.dt * (1.0 - 1e-12)));
    const double h = len / static_cast<double>(steps);
    std::normal_distribution<double> normal(0.0, noise.sigma / std::sqrt(h));
    Eigen::Vector2cd psi = state.amplitudes();
    for (long k = 0; k < steps; ++k) {
        const double t = t0 + k * h;
        const double ta = t + detail::kGaussLo * h;
        const double tb = t + detail::kGaussHi * h;
        Eigen::Vector3d fa = ham.field(ta);
        Eigen::Vector3d fb = ham.field(tb);
        if (noise.sigma > 0.0) {
            const double xi = normal(rng);
            fa += xi * noise_axis(ta);
            fb += xi * noise_axis(tb);
        }
        psi = detail::su2_apply(detail::su2_magnus4(fa, fb, h), psi);
    }
    return StateVector::normalized(Vector(psi), state.spin_dim());
}

/// Ensemble mean of |psi><psi| over trajectories with per-element standard errors
/// (real and imaginary parts separately).
struct TrajectoryEnsemble {
    Matrix mean;
    RealMatrix stderr_real;
    RealMatrix stderr_imag;
    std::size_t count{};
};

inline TrajectoryEnsemble average_trajectories(const PauliHamiltonian& ham, const NoiseSpec& noise,
                                               const std::function<Eigen::Vector3d(double)>& noise_axis,
                                               double t0, double t1, const StateVector& state,
                                               std::size_t count, unsigned jobs = 1)
{
    if (count < 2)
        throw InvalidArgumentError("an ensemble needs at least two trajectories");
    std::vector<Matrix> samples(count);
    parallel_for(count, jobs, [&](std::size_t i) {
        Rng rng = make_stream(noise.seed, i, stream::kTrajectories);
        const StateVector out = propagate_trajectory(ham, noise, noise_axis, t0, t1, state, rng);
        samples[i] = out.amplitudes() * out.amplitudes().adjoint();
    });
    TrajectoryEnsemble e{Matrix::Zero(2, 2), RealMatrix::Zero(2, 2), RealMatrix::Zero(2, 2), count};
    for (const auto& s : samples)
        e.mean += s;
    e.mean /= static_cast<double>(count);
    for (const auto& s : samples) {
        const Matrix d = s - e.mean;
        e.stderr_real += d.real().cwiseAbs2();
        e.stderr_imag += d.imag().cwiseAbs2();
    }
    const double scale = 1.0 / (static_cast<double>(count) * static_cast<double>(count - 1));
    e.stderr_real = (e.stderr_real * scale).cwiseSqrt();
    e.stderr_imag = (e.stderr_imag * scale).cwiseSqrt();
    return e;
}

namespace detail {

/// Column-major vectorized generator of
/// d rho/dt = -i[H, rho] - gamma (rho - sum_i P_i rho P_i), P_i eigenprojectors of H.
inline Matrix dephasing_liouvillian(const Matrix& h, double gamma)
{
    const auto d = h.rows();
    const Matrix id = Matrix::Identity(d, d);
    Matrix l = -kI * (kron(id, h) - kron(h.transpose(), id));
    if (gamma > 0.0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(h);
        Matrix keep = Matrix::Zero(d * d, d * d);
        for (Eigen::Index i = 0; i < d; ++i) {
            const Vector v = es.eigenvectors().col(i);
            const Matrix p = v * v.adjoint();
            keep += kron(p.transpose(), p);
        }
        l -= gamma * (Matrix::Identity(d * d, d * d) - keep);
    }
    return l;
}

}  // namespace detail

/// Integrates the pure-dephasing master equation in the instantaneous eigenbasis
/// of H(t) with fourth-order Magnus steps on the vectorized Liouvillian.
/// The dephasing term depends only on the set of eigenprojectors, so eigenvector
/// labels and phases never enter.
inline DensityMatrix propagate_dephasing(const TimeDependentHamiltonian& ham, DephasingSpec spec,
                                         double t0, double t1, const DensityMatrix& rho,
                                         IntegratorOptions opts = {1e-10, 1L << 20})
{
    if (spec.gamma < 0.0)
        throw InvalidArgumentError("dephasing rate must be non-negative");
    if (!(t1 > t0))
        throw InvalidArgumentError("propagation requires t1 > t0");
    if (rho.dim() != ham.dim)
        throw InvalidArgumentError("density matrix and Hamiltonian dimensions differ");
    require_hermitian(ham(t0));
    require_hermitian(ham(t1));
    const auto d = ham.dim;
    const auto edges = detail::segment_edges(ham.breakpoints, t0, t1);
    Vector vec = Eigen::Map<const Vector>(rho.elements().data(), d * d);
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        const double a = edges[s];
        const double b = edges[s + 1];
        const double len = b - a;
        const double share = opts.tol * len / (t1 - t0);
        const double rate = ham(0.5 * (a + b)).cwiseAbs().rowwise().sum().maxCoeff() + spec.gamma;
        auto run = [&](long steps) {
            const double h = len / static_cast<double>(steps);
            Vector v = vec;
            for (long k = 0; k < steps; ++k) {
                const double t = a + k * h;
                const Matrix l1 = detail::dephasing_liouvillian(ham(t + detail::kGaussLo * h), spec.gamma);
                const Matrix l2 = detail::dephasing_liouvillian(ham(t + detail::kGaussHi * h), spec.gamma);
                const Matrix omega = (0.5 * h) * (l1 + l2) + (detail::kMagnusComm * h * h) * (l2 * l1 - l1 * l2);
                v = omega.exp() * v;
            }
            return v;
        };
        auto dist = [](const Vector& x, const Vector& y) { return (x - y).norm(); };
        vec = detail::halve_until_converged<Vector>(run, dist, detail::initial_step_count(len, rate), share,
                                                    opts.max_steps, nullptr);
    }
    Matrix out = Eigen::Map<const Matrix>(vec.data(), d, d);
    return DensityMatrix(std::move(out));
}

/// Unitary evolution of a density matrix (gamma = 0 reference path).
inline DensityMatrix propagate_density_unitary(const TimeDependentHamiltonian& ham, double t0, double t1,
                                               const DensityMatrix& rho, IntegratorOptions opts = {})
{
    const Matrix u = propagate_unitary_operator(ham, t0, t1, opts).propagator;
    return DensityMatrix(u * rho.elements() * u.adjoint());
}

}  // namespace ionwork
