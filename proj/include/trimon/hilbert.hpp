#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <string>

#include "trimon/circuit.hpp"
#include "trimon/errors.hpp"

namespace trimon::hilbert {

using Operator = Eigen::MatrixXcd;

/// Truncated tensor Fock space over the three dynamical modes. Mode A is
/// the slowest index: basis index = n_A * L_B * L_C + n_B * L_C + n_C.
struct SpaceSpec {
  std::array<int, 3> levels{2, 2, 2};

  static SpaceSpec uniform(int levels_per_mode);
  int dim() const { return levels[0] * levels[1] * levels[2]; }
  void validate() const;  // 2 <= levels <= 4, dim <= 64

  int index_of(const std::array<int, 3>& occ) const;
  std::array<int, 3> occupations(int index) const;

  /// Parse "010"-style labels (digits n_A n_B n_C); throws ValidationError
  /// on malformed labels or occupations outside the truncation.
  int index_of_label(const std::string& label) const;
  std::string label_of(int index) const;
};

/// Pure state vector or density matrix on a SpaceSpec.
struct QuantumState {
  Eigen::VectorXcd psi;   // pure
  Eigen::MatrixXcd rho;   // mixed
  bool pure = true;

  static QuantumState pure_state(Eigen::VectorXcd v);
  static QuantumState basis_state(const SpaceSpec& space, const std::string& label);
  static QuantumState mixed_state(Eigen::MatrixXcd m);

  int dim() const { return pure ? int(psi.size()) : int(rho.rows()); }
  Eigen::MatrixXcd density() const;
  void validate() const;  // norm/trace/Hermiticity/positivity tolerances
};

Operator number_op(const SpaceSpec& space, int mode);
Operator lowering_op(const SpaceSpec& space, int mode);

bool is_hermitian(const Operator& op, double tol = 1e-10);

/// Diagonal Eq.-(1) Hamiltonian: sum_mu (omega_mu n_mu - J_mu n_mu^2)
/// - 2 sum_{mu>nu} J_munu n_mu n_nu. Energies in Hz, E(|000>) = 0.
Operator static_hamiltonian(const circuit::ModeParams& p, const SpaceSpec& space);

/// Energy of a single basis state under Eq. (1), in Hz.
double basis_energy(const circuit::ModeParams& p, const std::array<int, 3>& occ);

double transition_frequency(const Operator& h, const SpaceSpec& space,
                            const std::string& from, const std::string& to);

}  // namespace trimon::hilbert
