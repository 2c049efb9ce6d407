#pragma once

// Truncated single-mode Fock space, spin-1/2 operators, states and the
// dense linear algebra shared by every propagator.
//
// Conventions:
//  * Hamiltonians are stored as H / hbar (rad/s).
//  * Spin basis ordering is (|down>, |up>), so sz = diag(-1, +1).
//  * Composite spin (x) Fock states use index spin * N + n (Kronecker order).

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "ionwork/errors.hpp"

namespace ionwork {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};

class FockSpace {
public:
    explicit FockSpace(int cutoff) : cutoff_(cutoff)
    {
        if (cutoff < 1)
            throw InvalidArgumentError("Fock cutoff must be >= 1");
    }

    /// Number of retained levels N (|0> ... |N-1>).
    int cutoff() const { return cutoff_; }
    Eigen::Index dim() const { return cutoff_; }

    friend bool operator==(const FockSpace&, const FockSpace&) = default;

private:
    int cutoff_;
};

struct LadderOperators {
    Matrix annihilation;
    Matrix creation;
    Matrix number;
};

inline LadderOperators ladder_operators(FockSpace space)
{
    const auto n = space.dim();
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index k = 1; k < n; ++k)
        a(k - 1, k) = std::sqrt(static_cast<double>(k));
    Matrix ad = a.adjoint();
    Matrix num = Matrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        num(k, k) = static_cast<double>(k);
    return {std::move(a), std::move(ad), std::move(num)};
}

struct SpinOperatorSet {
    Matrix sx, sy, sz, s_plus, s_minus, identity;
};

inline SpinOperatorSet spin_operators()
{
    SpinOperatorSet s;
    s.sx = Matrix::Zero(2, 2);
    s.sx(0, 1) = s.sx(1, 0) = 1.0;
    s.sy = Matrix::Zero(2, 2);
    s.sy(0, 1) = kI;
    s.sy(1, 0) = -kI;
    s.sz = Matrix::Zero(2, 2);
    s.sz(0, 0) = -1.0;
    s.sz(1, 1) = 1.0;
    s.s_plus = Matrix::Zero(2, 2);
    s.s_plus(1, 0) = 1.0;  // |up><down|
    s.s_minus = s.s_plus.adjoint();
    s.identity = Matrix::Identity(2, 2);
    return s;
}

/// Kronecker product a (x) b.
inline Matrix kron(const Matrix& a, const Matrix& b)
{
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline double hermiticity_defect(const Matrix& h)
{
    if (h.rows() != h.cols())
        return std::numeric_limits<double>::infinity();
    return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

/// Hermitian within `tol` relative to the largest element (absolute below 1).
inline bool is_hermitian(const Matrix& h, double tol = 1e-10)
{
    if (h.rows() != h.cols())
        return false;
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    return hermiticity_defect(h) <= tol * scale;
}

inline void require_hermitian(const Matrix& h, double tol = 1e-10)
{
    if (!is_hermitian(h, tol))
        throw NonHermitianError("operator is not Hermitian (defect " +
                                std::to_string(hermiticity_defect(h)) + ")");
}

/// exp(-i H dt) for Hermitian H, by spectral decomposition.
inline Matrix unitary_from_hermitian(const Matrix& h, double dt)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const Vector phases = (-kI * dt * es.eigenvalues().cast<Complex>()).array().exp();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// exp(G) for anti-Hermitian G.
inline Matrix exp_antihermitian(const Matrix& g)
{
    // G = -i K with K = iG Hermitian.
    Matrix k = kI * g;
    k = 0.5 * (k + k.adjoint()).eval();
    return unitary_from_hermitian(k, 1.0);
}

class StateVector {
public:
    /// Amplitudes over Fock (x) spin; `spin_dim` is 1 (no spin) or 2.
    /// The vector must be normalized within 1e-10.
    explicit StateVector(Vector amplitudes, int spin_dim = 1)
        : amp_(std::move(amplitudes)), spin_dim_(spin_dim)
    {
        if (spin_dim != 1 && spin_dim != 2)
            throw InvalidArgumentError("spin dimension must be 1 or 2");
        if (amp_.size() == 0 || amp_.size() % spin_dim != 0)
            throw InvalidArgumentError("amplitude count incompatible with spin dimension");
        if (std::abs(amp_.squaredNorm() - 1.0) > 1e-10)
            throw InvalidArgumentError("state vector is not normalized");
    }

    static StateVector normalized(Vector amplitudes, int spin_dim = 1)
    {
        const double n = amplitudes.norm();
        if (!(n > 0.0))
            throw InvalidArgumentError("cannot normalize a zero vector");
        return StateVector(amplitudes / n, spin_dim);
    }

    static StateVector basis(Eigen::Index index, Eigen::Index dim, int spin_dim = 1)
    {
        if (index < 0 || index >= dim)
            throw InvalidArgumentError("basis index out of range");
        Vector v = Vector::Zero(dim);
        v(index) = 1.0;
        return StateVector(std::move(v), spin_dim);
    }

    static StateVector fock(int n, FockSpace space) { return basis(n, space.dim()); }

    /// Product state |spin> (x) |fock>.
    static StateVector product(const Vector& spin, const Vector& fock)
    {
        Vector v(spin.size() * fock.size());
        for (Eigen::Index s = 0; s < spin.size(); ++s)
            v.segment(s * fock.size(), fock.size()) = spin(s) * fock;
        return normalized(std::move(v), static_cast<int>(spin.size()));
    }

    const Vector& amplitudes() const { return amp_; }
    int spin_dim() const { return spin_dim_; }
    Eigen::Index dim() const { return amp_.size(); }
    double norm() const { return amp_.norm(); }

    /// |amplitude|^2 per basis index.
    RealVector populations() const { return amp_.cwiseAbs2(); }

    /// Populations expressed in the basis given by the columns of `basis`.
    RealVector populations_in(const Matrix& basis) const
    {
        return (basis.adjoint() * amp_).cwiseAbs2();
    }

private:
    Vector amp_;
    int spin_dim_;
};

/// Distance between two states after removing the best global phase.
inline double phase_insensitive_distance(const Vector& a, const Vector& b)
{
    const Complex overlap = a.dot(b);  // <a|b>
    const Complex phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex{1.0};
    return (b - phase * a).norm();
}

/// Frobenius distance between two operators after removing the best global phase.
inline double phase_insensitive_distance(const Matrix& a, const Matrix& b)
{
    const Complex overlap = (a.adjoint() * b).trace();
    const Complex phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex{1.0};
    return (b - phase * a).norm();
}

class DensityMatrix {
public:
    /// Validates Hermiticity and trace (1e-10) and positivity (eigenvalues >= -1e-9).
    explicit DensityMatrix(Matrix elements) : rho_(std::move(elements))
    {
        if (rho_.rows() != rho_.cols() || rho_.rows() == 0)
            throw InvalidArgumentError("density matrix must be square and non-empty");
        if (hermiticity_defect(rho_) > 1e-10)
            throw NonHermitianError("density matrix is not Hermitian");
        if (std::abs(rho_.trace() - Complex{1.0}) > 1e-10)
            throw InvalidArgumentError("density matrix trace differs from 1");
        Eigen::SelfAdjointEigenSolver<Matrix> es(rho_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-9)
            throw InvalidArgumentError("density matrix has a negative eigenvalue");
    }

    static DensityMatrix pure(const StateVector& psi)
    {
        return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
    }

    /// sum_k p_k |b_k><b_k| with b_k the columns of `basis`.
    static DensityMatrix mixture(const RealVector& weights, const Matrix& basis)
    {
        return DensityMatrix(basis * weights.cast<Complex>().asDiagonal() * basis.adjoint());
    }

    const Matrix& elements() const { return rho_; }
    Eigen::Index dim() const { return rho_.rows(); }
    Complex trace() const { return rho_.trace(); }

    RealVector populations_in(const Matrix& basis) const
    {
        return (basis.adjoint() * rho_ * basis).diagonal().real();
    }

private:
    Matrix rho_;
};

/// Single exact short-time step exp(-i H dt) |psi>.
///
/// The step is computed spectrally, so any dt is numerically exact; callers
/// that drive a higher-order scheme pass `max_phase` (rad) to bound dt * ||H||.
inline StateVector propagate_step(const Matrix& h, double dt, const StateVector& state,
                                  double max_phase = std::numeric_limits<double>::infinity())
{
    require_hermitian(h);
    if (h.rows() != state.dim())
        throw InvalidArgumentError("Hamiltonian and state dimensions differ");
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const double spectral_norm = es.eigenvalues().cwiseAbs().maxCoeff();
    if (std::abs(dt) * spectral_norm > max_phase)
        throw StepTooLargeError("dt * ||H|| = " + std::to_string(std::abs(dt) * spectral_norm) +
                                " rad exceeds the step bound");
    const Vector phases = (-kI * dt * es.eigenvalues().cast<Complex>()).array().exp();
    Vector out = es.eigenvectors() * (phases.asDiagonal() * (es.eigenvectors().adjoint() * state.amplitudes()));
    return StateVector::normalized(std::move(out), state.spin_dim());
}

enum class DisplacementMethod {
    ClosedForm,         ///< associated-Laguerre elements of the untruncated operator
    PaddedExponential,  ///< exp of the generator on a padded space, leading N x N block
    TruncatedUnitary,   ///< exp of the generator truncated to N levels (exactly unitary)
};

namespace detail {

/// Generalized Laguerre polynomial L_n^{(k)}(x) by upward recurrence.
inline double laguerre(int n, int k, double x)
{
    if (n == 0)
        return 1.0;
    double prev = 1.0;
    double cur = 1.0 + k - x;
    for (int j = 1; j < n; ++j) {
        const double next = ((2.0 * j + 1.0 + k - x) * cur - (j + k) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    return cur;
}

/// <m|D(alpha)|n> of the untruncated displacement operator.
inline Complex displacement_element(int m, int n, Complex alpha)
{
    const double x = std::norm(alpha);
    const int lo = std::min(m, n);
    const int k = std::abs(m - n);
    const Complex base = m >= n ? alpha : -std::conj(alpha);
    double log_mag = 0.5 * (std::lgamma(lo + 1.0) - std::lgamma(lo + k + 1.0)) - 0.5 * x;
    if (k > 0) {
        if (std::abs(base) == 0.0)
            return 0.0;
        log_mag += k * std::log(std::abs(base));
    }
    const double phase = k > 0 ? k * std::arg(base) : 0.0;
    return std::polar(std::exp(log_mag), phase) * laguerre(lo, k, x);
}

/// Working cutoff large enough that the truncated generator reproduces the
/// leading N x N block of D(alpha) to ~1e-12.
inline int padded_cutoff(int n, double abs_alpha)
{
    const double reach = std::sqrt(static_cast<double>(n)) + abs_alpha + 8.0;
    return std::max(2 * n, static_cast<int>(std::ceil(reach * reach)) + 16);
}

}  // namespace detail

/// |1 - ||column||| for every column of a (truncated) operator.
inline RealVector column_norm_defects(const Matrix& d)
{
    return (d.colwise().norm().array() - 1.0).abs().matrix().transpose();
}

/// N x N truncation of D(alpha) = exp(alpha a^+ - alpha^* a).
///
/// ClosedForm and PaddedExponential return the exact matrix elements of the
/// infinite-dimensional operator; TruncatedUnitary is the unitary generated
/// inside the N-level space and differs from them near the cutoff.
///
/// Throws TruncationError when |alpha|^2 > N; warns on std::clog above N/4.
inline Matrix displacement_matrix(Complex alpha, FockSpace space,
                                  DisplacementMethod method = DisplacementMethod::ClosedForm)
{
    const int n = space.cutoff();
    const double x = std::norm(alpha);
    if (x > n)
        throw TruncationError("|alpha|^2 = " + std::to_string(x) + " exceeds the Fock cutoff " +
                              std::to_string(n));
    if (x > 0.25 * n)
        std::clog << "ionwork: warning: |alpha|^2 = " << x << " > N/4 = " << 0.25 * n
                  << "; truncated displacement is inaccurate near the cutoff\n";

    if (method == DisplacementMethod::ClosedForm) {
        Matrix d(n, n);
        for (int col = 0; col < n; ++col)
            for (int row = 0; row < n; ++row)
                d(row, col) = detail::displacement_element(row, col, alpha);
        return d;
    }

    const FockSpace work(method == DisplacementMethod::PaddedExponential
                             ? detail::padded_cutoff(n, std::abs(alpha))
                             : n);
    const auto ops = ladder_operators(work);
    const Matrix generator = alpha * ops.creation - std::conj(alpha) * ops.annihilation;
    return exp_antihermitian(generator).topLeftCorner(n, n);
}

}  // namespace ionwork

namespace ionwork {

/// Truncation quality of the exact D(alpha) on N levels: the largest column-norm
/// defect over the lower half of the retained columns. Decreases as N grows.
inline double displacement_truncation_error(Complex alpha, FockSpace space)
{
    const int n = space.cutoff();
    const Matrix d = displacement_matrix(alpha, space, DisplacementMethod::ClosedForm);
    const int half = std::max(1, n / 2);
    return column_norm_defects(d).head(half).maxCoeff();
}

}  // namespace ionwork
