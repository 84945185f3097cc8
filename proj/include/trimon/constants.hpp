#pragma once

#include <numbers>

namespace trimon {

// All energies and frequencies in this library are stored as ordinary
// frequencies in Hz (E/h). Division by 2*pi happens only at I/O when a
// quantity is quoted as omega/2pi.
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kPlanck = 6.62607015e-34;             // J s
inline constexpr double kHbar = kPlanck / (2.0 * kPi);
inline constexpr double kReducedFluxQuantum = kHbar / (2.0 * kElementaryCharge);

// Single place where the unit bookkeeping of the normal-mode problem is
// fixed: with C in farads and the inductive-energy Laplacian E_L in Hz,
// the eigenvalues of C^{-1} E_L multiplied by this constant are squared
// mode frequencies in Hz^2. The constant is 4 e^2 / h = h / (2 pi phi0)^2.
inline constexpr double kModeFrequencyFactor =
    4.0 * kElementaryCharge * kElementaryCharge / kPlanck;

// Charging energy in Hz of a capacitance in farads: E_C = e^2 / (2 C h).
inline constexpr double charging_energy_hz(double capacitance_f) {
  return kElementaryCharge * kElementaryCharge /
         (2.0 * capacitance_f * kPlanck);
}

}  // namespace trimon
