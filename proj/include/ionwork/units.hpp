#pragma once

#include <cmath>
#include <numbers>

#include "ionwork/errors.hpp"

namespace ionwork {

// CODATA 2018 exact values.
inline constexpr double kHbar = 1.054571817e-34;       // J s
inline constexpr double kBoltzmann = 1.380649e-23;     // J / K
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Angular frequency in rad/s. Energies are carried as E / hbar.
struct AngularFrequency {
    double value{};
    static constexpr AngularFrequency from_hz(double hz) { return {kTwoPi * hz}; }
    constexpr double hz() const { return value / kTwoPi; }
    double joules() const { return kHbar * value; }
};

struct Temperature {
    double kelvin{};
};

/// Inverse temperature measured in units of one energy quantum hbar*omega,
/// i.e. hbar*omega / (k_B T).
inline double beta_in_quanta(Temperature t, AngularFrequency quantum)
{
    if (!(t.kelvin > 0.0))
        throw DomainError("temperature must be positive");
    return kHbar * quantum.value / (kBoltzmann * t.kelvin);
}

inline Temperature temperature_from_beta(double beta_quanta, AngularFrequency quantum)
{
    if (!(beta_quanta > 0.0))
        throw DomainError("inverse temperature must be positive");
    return {kHbar * quantum.value / (kBoltzmann * beta_quanta)};
}

/// Oscillator temperature for a Bose-Einstein mean occupation.
inline Temperature temperature_from_nbar(double nbar, AngularFrequency nu)
{
    if (!(nbar > 0.0))
        throw DomainError("mean occupation must be positive for a finite temperature");
    return temperature_from_beta(std::log1p(1.0 / nbar), nu);
}

inline double nbar_from_temperature(Temperature t, AngularFrequency nu)
{
    return 1.0 / std::expm1(beta_in_quanta(t, nu));
}

}  // namespace ionwork
