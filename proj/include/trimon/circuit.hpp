#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <string>
#include <vector>

#include "trimon/errors.hpp"

namespace trimon::circuit {

/// Lumped description of the four-node ring circuit. Capacitances in
/// farads, junction energies in Hz. Junctions live on the ring pairs
/// (1,2), (2,3), (3,4), (4,1); the diagonals (1,3) and (2,4) carry only
/// capacitance.
struct CircuitSpec {
  Eigen::Matrix4d pairwise_f = Eigen::Matrix4d::Zero();  // symmetric, zero diag
  Eigen::Vector4d ground_f = Eigen::Vector4d::Zero();
  Eigen::Matrix4d junction_hz = Eigen::Matrix4d::Zero();  // ring pairs only

  void set_pairwise(int i, int j, double farads);
  void set_junction(int i, int j, double hz);
  void set_all_junctions(double hz);

  /// Throws ValidationError on negative capacitances, non-positive ground
  /// capacitances, or junction energy on a non-ring pair.
  void validate() const;
};

/// Ring pairs in node indices (0-based).
inline constexpr std::array<std::pair<int, int>, 4> kRingPairs = {
    {{0, 1}, {1, 2}, {2, 3}, {3, 0}}};

struct MaxwellMatrices {
  Eigen::Matrix4d C;   // farads
  Eigen::Matrix4d EL;  // Hz, graph Laplacian of the linearized junctions
};

struct NormalModes {
  Eigen::Vector4d frequencies_hz;  // ascending; exactly one (near-)zero entry
  Eigen::Matrix4d mode_vectors;    // columns M_mu with M^T C M = I
  std::vector<std::string> warnings;
};

/// Eq.-(1)-style coefficient set. Index order is A, B, C (dynamical modes
/// in ascending frequency); cross-Kerr order is (AB, BC, CA).
struct ModeParams {
  std::array<double, 3> omega_hz{};       // Hamiltonian coefficient omega_mu
  std::array<double, 3> self_kerr_hz{};   // J_mu
  std::array<double, 3> cross_kerr_hz{};  // J_AB, J_BC, J_CA
  std::array<double, 3> charging_hz{};    // E_C_mu
  double josephson_hz = 0.0;
  // 0->1 transition of each mode with the others unexcited; equals
  // omega_mu - J_mu in the Eq.-(1) convention.
  std::array<double, 3> mode_freq_hz{};
  std::vector<std::string> warnings;

  double cross_kerr(int mu, int nu) const;  // J_{mu nu}, symmetric
};

/// Maxwell capacitance matrix and inductive-energy Laplacian.
/// Throws NonPositiveDefinite if C fails a Cholesky factorization.
MaxwellMatrices build_maxwell(const CircuitSpec& spec);

/// Simultaneous diagonalization via the symmetric form
/// Psi = C^{-1/2} EL C^{-1/2}. Frequencies ascending; the zero (gauge)
/// mode is always present because EL has zero row sums.
NormalModes normal_modes(const MaxwellMatrices& m);

/// Closed-form charging energies E_CA, E_CB, E_CC (Hz) of the nearly
/// symmetric ring. C_A = pairwise(1,3), C_B = pairwise(2,4), C_C = mean of
/// the four neighbor capacitances. Appends an asymmetry warning when
/// C11/C33 or C22/C44 differ by more than 10%.
std::array<double, 3> effective_charging_energies(
    const CircuitSpec& spec, std::vector<std::string>* warnings = nullptr);

/// Coefficient set from the closed forms: omega_mu = sqrt(8 EJ EC_mu) -
/// beta_mu (sqrt(32...) for mode C), J_mu and J_munu from the printed
/// expressions. Valid in the symmetric regime; kept alongside the numeric
/// route for property checks and quick estimates.
ModeParams mode_params_analytic(const CircuitSpec& spec);

/// Full derivation: normal modes, zero-point fluctuations, numeric
/// diagonalization of the ring-junction cosine potential in a truncated
/// Fock basis, then an Eq.-(1) coefficient fit to the low spectrum.
/// fock_levels is the per-mode truncation of the internal solver.
ModeParams mode_params(const CircuitSpec& spec, int fock_levels = 8);

/// The 12 conditional transition frequencies (labels A00..11C), computed
/// as eigenenergy differences of the Eq.-(1) diagonal Hamiltonian.
std::map<std::string, double> conditional_frequencies(const ModeParams& p);

}  // namespace trimon::circuit
