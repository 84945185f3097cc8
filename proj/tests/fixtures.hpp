#pragma once

// Shared device fixtures for the test suites: the bundled four-pad planar
// design (electromagnetic-simulation capacitances) and the measured device
// parameter table used for spectrum and noise tests.

#include "trimon/circuit.hpp"

namespace trimon::testing {

inline circuit::CircuitSpec demo_circuit() {
  circuit::CircuitSpec s;
  const double fF = 1e-15;
  s.ground_f << 46.0 * fF, 30.0 * fF, 53.0 * fF, 36.0 * fF;
  s.set_pairwise(0, 1, 21.0 * fF);
  s.set_pairwise(0, 2, 4.0 * fF);
  s.set_pairwise(0, 3, 21.0 * fF);
  s.set_pairwise(1, 2, 21.0 * fF);
  s.set_pairwise(1, 3, 3.0 * fF);
  s.set_pairwise(2, 3, 21.0 * fF);
  s.set_all_junctions(8.16e9);
  return s;
}

// Measured parameter table: mode frequencies (0->1 transitions, spectators
// in ground), anharmonicities 2J, cross-Kerr splittings 2J_munu, and
// coherence times.
inline circuit::ModeParams measured_params() {
  circuit::ModeParams p;
  const double ghz = 1e9, mhz = 1e6;
  p.mode_freq_hz = {4.709 * ghz, 5.174 * ghz, 5.940 * ghz};
  p.self_kerr_hz = {0.5 * 118 * mhz, 0.5 * 129 * mhz, 0.5 * 164 * mhz};
  p.cross_kerr_hz = {0.5 * 211 * mhz, 0.5 * 270 * mhz, 0.5 * 243 * mhz};
  for (int mu = 0; mu < 3; ++mu) {
    p.omega_hz[mu] = p.mode_freq_hz[mu] + p.self_kerr_hz[mu];
  }
  p.josephson_hz = 8.16e9;
  return p;
}

inline constexpr double kT1Us[3] = {54.0, 38.0, 33.0};
inline constexpr double kT2Us[3] = {45.0, 34.0, 30.0};

}  // namespace trimon::testing
