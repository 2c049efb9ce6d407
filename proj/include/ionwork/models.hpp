#pragma once

// Interaction-picture Hamiltonians of a trapped ion (spin-1/2 + one motional
// mode) as time-dependent dense matrices in rad/s.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ionwork/errors.hpp"
#include "ionwork/fock.hpp"

namespace ionwork {

/// H(t) / hbar on a fixed Hilbert space.
struct TimeDependentHamiltonian {
    Eigen::Index dim{};
    std::function<Matrix(double)> at;
    /// Interior times where dH/dt jumps; integrators never step across them.
    std::vector<double> breakpoints;

    Matrix operator()(double t) const { return at(t); }
};

/// Two-level Hamiltonian H(t) / hbar = field(t) . sigma / 2.
struct PauliHamiltonian {
    std::function<Eigen::Vector3d(double)> field;
    std::vector<double> breakpoints;

    Matrix matrix(double t) const
    {
        const Eigen::Vector3d f = field(t);
        Matrix h(2, 2);
        // sx = [[0,1],[1,0]], sy = [[0,i],[-i,0]], sz = diag(-1,1)
        h(0, 0) = -0.5 * f.z();
        h(1, 1) = 0.5 * f.z();
        h(0, 1) = 0.5 * Complex{f.x(), f.y()};
        h(1, 0) = 0.5 * Complex{f.x(), -f.y()};
        return h;
    }

    TimeDependentHamiltonian as_matrix_function() const
    {
        return {2, [*this](double t) { return matrix(t); }, breakpoints};
    }
};

class DriveRamp {
public:
    enum class Shape { LinearUp, LinearDown, Constant };

    DriveRamp(Shape shape, double peak, double duration)
        : shape_(shape), peak_(peak), duration_(duration)
    {
        if (!(duration > 0.0))
            throw InvalidArgumentError("ramp duration must be positive");
    }

    /// Value at local time t in [0, duration].
    double operator()(double t) const
    {
        switch (shape_) {
        case Shape::LinearUp: return peak_ * t / duration_;
        case Shape::LinearDown: return peak_ * (1.0 - t / duration_);
        case Shape::Constant: return peak_;
        }
        return 0.0;
    }

    Shape shape() const { return shape_; }
    double peak() const { return peak_; }
    double duration() const { return duration_; }

private:
    Shape shape_;
    double peak_;
    double duration_;
};

/// Consecutive ramps forming a piecewise-linear drive Lambda(t), t in [0, duration].
class DriveSchedule {
public:
    explicit DriveSchedule(std::vector<DriveRamp> segments) : segments_(std::move(segments))
    {
        if (segments_.empty())
            throw InvalidArgumentError("drive schedule needs at least one segment");
    }

    /// Linear ramp 0 -> peak over tau, then peak -> 0 over t_a.
    static DriveSchedule drag(double peak, double tau, double t_a)
    {
        return DriveSchedule({DriveRamp(DriveRamp::Shape::LinearUp, peak, tau),
                              DriveRamp(DriveRamp::Shape::LinearDown, peak, t_a)});
    }

    static DriveSchedule constant(double value, double duration)
    {
        return DriveSchedule({DriveRamp(DriveRamp::Shape::Constant, value, duration)});
    }

    double operator()(double t) const
    {
        double start = 0.0;
        for (std::size_t k = 0; k < segments_.size(); ++k) {
            const auto& s = segments_[k];
            if (t <= start + s.duration() || k + 1 == segments_.size())
                return s(std::clamp(t - start, 0.0, s.duration()));
            start += s.duration();
        }
        return 0.0;
    }

    double duration() const
    {
        double d = 0.0;
        for (const auto& s : segments_)
            d += s.duration();
        return d;
    }

    std::vector<double> breakpoints() const
    {
        std::vector<double> out;
        double start = 0.0;
        for (std::size_t k = 0; k + 1 < segments_.size(); ++k) {
            start += segments_[k].duration();
            out.push_back(start);
        }
        return out;
    }

    const std::vector<DriveRamp>& segments() const { return segments_; }

private:
    std::vector<DriveRamp> segments_;
};

struct Eigenbasis {
    RealVector energies;  ///< ascending
    Matrix vectors;       ///< columns, phase-fixed
};

namespace detail {

inline void fix_phase(Eigen::Ref<Vector> v)
{
    // Largest-magnitude component made real positive; near-ties go to the lowest index.
    const double peak = v.cwiseAbs().maxCoeff();
    Eigen::Index pick = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) >= peak * (1.0 - 1e-9)) {
            pick = i;
            break;
        }
    }
    v *= std::conj(v(pick)) / std::abs(v(pick));
}

}  // namespace detail

/// Orthonormal eigenvectors of a Hermitian H, eigenvalues ascending (ties keep
/// solver order), each vector's largest-magnitude component real positive.
inline Eigenbasis instantaneous_eigenbasis(const Matrix& h)
{
    require_hermitian(h);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const auto n = h.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return es.eigenvalues()(a) < es.eigenvalues()(b);
    });
    Eigenbasis out{RealVector(n), Matrix(n, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        out.energies(k) = es.eigenvalues()(order[static_cast<std::size_t>(k)]);
        out.vectors.col(k) = es.eigenvectors().col(order[static_cast<std::size_t>(k)]);
        detail::fix_phase(out.vectors.col(k));
    }
    return out;
}

/// Re-diagonalize H and relabel/rephase its eigenvectors to follow `previous`
/// by maximal overlap. Used to track a basis continuously along t.
inline Eigenbasis track_eigenbasis(const Eigenbasis& previous, const Matrix& h)
{
    Eigenbasis fresh = instantaneous_eigenbasis(h);
    const auto n = h.rows();
    const RealMatrix overlap = (previous.vectors.adjoint() * fresh.vectors).cwiseAbs();
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    Eigenbasis out{RealVector(n), Matrix(n, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index best = -1;
        double best_overlap = -1.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!taken[static_cast<std::size_t>(j)] && overlap(k, j) > best_overlap) {
                best_overlap = overlap(k, j);
                best = j;
            }
        }
        taken[static_cast<std::size_t>(best)] = true;
        out.energies(k) = fresh.energies(best);
        Vector v = fresh.vectors.col(best);
        const Complex ov = previous.vectors.col(k).dot(v);
        if (std::abs(ov) > 0.0)
            v *= std::conj(ov) / std::abs(ov);
        out.vectors.col(k) = v;
    }
    return out;
}

enum class SidebandKind { Carrier, Red, Blue };

/// Resonant carrier / red / blue sideband coupling on spin (x) Fock.
/// Carrier: (Omega/2)(s+ e^{i phi} + h.c.); red: (eta Omega/2)(s+ a e^{i phi} + h.c.);
/// blue: (eta Omega/2)(s+ a^+ e^{i phi} + h.c.).
inline Matrix build_sideband(SidebandKind kind, double omega_eff, double eta, double phi,
                             FockSpace space)
{
    const auto s = spin_operators();
    const auto l = ladder_operators(space);
    const Matrix id = Matrix::Identity(space.dim(), space.dim());
    const Complex phase = std::polar(1.0, phi);
    Matrix raising;
    double strength = 0.5 * omega_eff;
    switch (kind) {
    case SidebandKind::Carrier: raising = kron(s.s_plus, id); break;
    case SidebandKind::Red:
        raising = kron(s.s_plus, l.annihilation);
        strength *= eta;
        break;
    case SidebandKind::Blue:
        raising = kron(s.s_plus, l.creation);
        strength *= eta;
        break;
    }
    const Matrix term = strength * phase * raising;
    return term + term.adjoint();
}

/// H0 = (omega_0/2) sz + omega_t (a^+ a + 1/2) on spin (x) Fock.
inline Matrix build_free_ion(double omega_0, double omega_t, FockSpace space)
{
    const auto s = spin_operators();
    const auto l = ladder_operators(space);
    const Matrix id = Matrix::Identity(space.dim(), space.dim());
    return kron(0.5 * omega_0 * s.sz, id) +
           kron(s.identity, omega_t * (l.number + 0.5 * id));
}

/// nu (a^+ a + 1/2) + (Omega(t)/2)(a + a^+) sx on spin (x) Fock.
inline TimeDependentHamiltonian build_bichromatic(double nu, DriveSchedule drive, FockSpace space)
{
    if (!(nu > 0.0))
        throw InvalidArgumentError("detuning nu must be positive");
    const auto s = spin_operators();
    const auto l = ladder_operators(space);
    const Matrix id = Matrix::Identity(space.dim(), space.dim());
    Matrix free = kron(s.identity, nu * (l.number + 0.5 * id));
    Matrix coupling = kron(s.sx, 0.5 * (l.annihilation + l.creation));
    auto bp = drive.breakpoints();
    return {2 * space.dim(),
            [free = std::move(free), coupling = std::move(coupling), drive = std::move(drive)](double t) {
                return Matrix(free + drive(t) * coupling);
            },
            std::move(bp)};
}

/// Dragged oscillator nu (a^+ a + 1/2) + Lambda(t) (a + a^+) / 2 on a Fock space.
///
/// Its instantaneous eigenstates are D(-Lambda/2nu)|n> with energies
/// nu (n + 1/2) - Lambda^2 / (4 nu); the zero-point term cancels in all work values.
class DraggedOscillator {
public:
    DraggedOscillator(double nu, DriveSchedule drive, FockSpace space)
        : nu_(nu), drive_(std::move(drive)), space_(space)
    {
        if (!(nu > 0.0))
            throw InvalidArgumentError("oscillator frequency nu must be positive");
        const auto l = ladder_operators(space);
        const Matrix id = Matrix::Identity(space.dim(), space.dim());
        free_ = nu * (l.number + 0.5 * id);
        position_ = 0.5 * (l.annihilation + l.creation);
    }

    double nu() const { return nu_; }
    const DriveSchedule& drive() const { return drive_; }
    FockSpace space() const { return space_; }
    double duration() const { return drive_.duration(); }

    Matrix at(double t) const { return free_ + drive_(t) * position_; }

    TimeDependentHamiltonian hamiltonian() const
    {
        return {space_.dim(), [self = *this](double t) { return self.at(t); }, drive_.breakpoints()};
    }

    /// Analytic instantaneous eigenbasis: displaced Fock states.
    Eigenbasis displaced_eigenbasis(double t) const
    {
        const double lambda = drive_(t);
        Eigenbasis out;
        out.vectors = displacement_matrix(Complex{-lambda / (2.0 * nu_), 0.0}, space_);
        out.energies = RealVector(space_.dim());
        for (Eigen::Index n = 0; n < space_.dim(); ++n)
            out.energies(n) = nu_ * (static_cast<double>(n) + 0.5) - lambda * lambda / (4.0 * nu_);
        return out;
    }

private:
    double nu_;
    DriveSchedule drive_;
    FockSpace space_;
    Matrix free_;
    Matrix position_;
};

inline DraggedOscillator build_dragged(double nu, double amplitude, double tau, double t_a,
                                       FockSpace space)
{
    if (!(tau > 0.0) || !(t_a > 0.0))
        throw InvalidArgumentError("ramp durations tau and T_a must be positive");
    return DraggedOscillator(nu, DriveSchedule::drag(amplitude, tau, t_a), space);
}

/// Driven two-level system
/// H(t) = (Omega0/2)(1 - t/2tau)[sx cos(pi t/2tau) + sy sin(pi t/2tau)], t in [0, tau].
class DrivenTls {
public:
    DrivenTls(double omega0, double tau) : omega0_(omega0), tau_(tau)
    {
        if (!(omega0 > 0.0))
            throw InvalidArgumentError("Omega0 must be positive");
        if (!(tau > 0.0))
            throw InvalidArgumentError("tau must be positive");
    }

    double omega0() const { return omega0_; }
    double tau() const { return tau_; }
    double duration() const { return tau_; }

    /// Unit drive axis (cos(pi t/2tau), sin(pi t/2tau), 0).
    Eigen::Vector3d axis(double t) const
    {
        check_domain(t);
        const double phi = std::numbers::pi * t / (2.0 * tau_);
        return {std::cos(phi), std::sin(phi), 0.0};
    }

    double amplitude(double t) const
    {
        check_domain(t);
        return omega0_ * (1.0 - t / (2.0 * tau_));
    }

    Matrix at(double t) const { return pauli().matrix(t); }

    /// Analytic eigenbasis: energies -+amplitude/2 with vectors (1, -+e^{-i phi}) / sqrt 2.
    Eigenbasis eigenbasis(double t) const
    {
        const double a = amplitude(t);
        const double phi = std::numbers::pi * t / (2.0 * tau_);
        const Complex e = std::polar(1.0, -phi);
        Eigenbasis b;
        b.energies = RealVector(2);
        b.energies << -0.5 * a, 0.5 * a;
        b.vectors = Matrix(2, 2);
        b.vectors << 1.0, 1.0, -e, e;
        b.vectors *= std::sqrt(0.5);
        return b;
    }

    PauliHamiltonian pauli() const
    {
        return {[self = *this](double t) -> Eigen::Vector3d { return self.amplitude(t) * self.axis(t); },
                {}};
    }

    TimeDependentHamiltonian hamiltonian() const { return pauli().as_matrix_function(); }

    /// Direction and scale of the intensity-noise term: Omega0 * axis(t).
    std::function<Eigen::Vector3d(double)> noise_axis() const
    {
        return [self = *this](double t) -> Eigen::Vector3d { return self.omega0_ * self.axis(t); };
    }

private:
    void check_domain(double t) const
    {
        const double slack = 1e-12 * tau_;
        if (t < -slack || t > tau_ + slack)
            throw DomainError("driven two-level Hamiltonian is defined on [0, tau]");
    }

    double omega0_;
    double tau_;
};

inline DrivenTls build_driven_tls(double omega0, double tau) { return DrivenTls(omega0, tau); }

// ---------------------------------------------------------------------------
// Declarative model description.

enum class ModelVariant {
    FreeIon,
    Carrier,
    RedSideband,
    BlueSideband,
    Bichromatic,
    DraggedOscillator,
    DrivenTLS,
};

/// Named parameters (rad/s, s, rad):
///   omega_0, omega_t, omega_z, nu, eta, omega_eff, phi, drive (amplitude A / Omega_max),
///   rabi_0 (Omega0), tau, t_a.
/// omega_z is accepted for the general rotating frame but no protocol uses it.
struct ModelSpec {
    ModelVariant variant{};
    std::map<std::string, double> parameters;
    std::optional<FockSpace> space;

    double get(const std::string& key) const
    {
        auto it = parameters.find(key);
        if (it == parameters.end())
            throw InvalidArgumentError("model parameter '" + key + "' is missing");
        return it->second;
    }

    double get_or(const std::string& key, double fallback) const
    {
        auto it = parameters.find(key);
        return it == parameters.end() ? fallback : it->second;
    }

    void validate() const
    {
        for (const char* key : {"omega_t", "nu", "rabi_0", "tau", "t_a"}) {
            auto it = parameters.find(key);
            if (it != parameters.end() && !(it->second > 0.0))
                throw InvalidArgumentError(std::string("model parameter '") + key + "' must be positive");
        }
        const bool needs_space = variant != ModelVariant::DrivenTLS;
        if (needs_space && !space)
            throw InvalidArgumentError("model requires a Fock space");
        if (variant == ModelVariant::DraggedOscillator && parameters.count("omega_t") &&
            get("nu") > get("omega_t"))
            throw InvalidArgumentError("dragged oscillator requires nu <= omega_t (M_e >= M)");
    }

    /// Effective mass ratio M_e / M = omega_t / nu.
    double effective_mass_ratio() const { return get("omega_t") / get("nu"); }
};

inline TimeDependentHamiltonian build_model(const ModelSpec& spec)
{
    spec.validate();
    auto constant = [](Matrix h) {
        const auto dim = h.rows();
        return TimeDependentHamiltonian{dim, [h = std::move(h)](double) { return h; }, {}};
    };
    switch (spec.variant) {
    case ModelVariant::FreeIon:
        return constant(build_free_ion(spec.get("omega_0"), spec.get("omega_t"), *spec.space));
    case ModelVariant::Carrier:
        return constant(build_sideband(SidebandKind::Carrier, spec.get("omega_eff"), 0.0,
                                       spec.get_or("phi", 0.0), *spec.space));
    case ModelVariant::RedSideband:
        return constant(build_sideband(SidebandKind::Red, spec.get("omega_eff"), spec.get("eta"),
                                       spec.get_or("phi", 0.0), *spec.space));
    case ModelVariant::BlueSideband:
        return constant(build_sideband(SidebandKind::Blue, spec.get("omega_eff"), spec.get("eta"),
                                       spec.get_or("phi", 0.0), *spec.space));
    case ModelVariant::Bichromatic:
        return build_bichromatic(spec.get("nu"),
                                 DriveSchedule::drag(spec.get("drive"), spec.get("tau"), spec.get("t_a")),
                                 *spec.space);
    case ModelVariant::DraggedOscillator:
        return build_dragged(spec.get("nu"), spec.get("drive"), spec.get("tau"), spec.get("t_a"),
                             *spec.space)
            .hamiltonian();
    case ModelVariant::DrivenTLS:
        return build_driven_tls(spec.get("rabi_0"), spec.get("tau")).hamiltonian();
    }
    throw InvalidArgumentError("unknown model variant");
}

}  // namespace ionwork
