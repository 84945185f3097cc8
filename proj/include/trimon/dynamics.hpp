#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>

#include "trimon/hilbert.hpp"
#include "trimon/pulses.hpp"

namespace trimon::dynamics {

enum class Frame { kDiagonalInteraction, kLab };

struct EvolutionConfig {
  double step_s = 1e-11;  // non-RWA default; 1e-10 is adequate under RWA
  bool rwa = false;
  double tolerance = 1e-6;
  Frame frame = Frame::kDiagonalInteraction;
  bool check_step = false;    // verify against a half step, refine if coarse
  int max_refinements = 3;
  std::array<double, 3> couplings{1.0, 1.0, 1.0};
  std::array<double, 3> mode_offsets_hz{0.0, 0.0, 0.0};  // quasi-static shifts
  double window_start_s = 0.0;
  double window_end_s = -1.0;  // < 0: run to the schedule end

  void validate() const;
};

struct NoiseChannels {
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  std::array<double, 3> t1_s{kInf, kInf, kInf};
  std::array<double, 3> t2_s{kInf, kInf, kInf};
  std::array<double, 3> quasi_static_sigma_hz{0.0, 0.0, 0.0};

  bool has_decoherence() const;
  /// Throws NegativeDephasing when T2 > 2 T1 for some mode.
  void validate() const;
};

struct PropagationResult {
  hilbert::Operator u_interaction;  // rotating-frame propagator
  hilbert::Operator u_lab;          // with the H0 frame unwound at T
  double duration_s = 0.0;
};

/// Driven propagator. h0 must be diagonal (Eq.-(1) Hamiltonian from the
/// hilbert module); quasi-static offsets from config are added per mode.
/// Unitary within 1e-8 by construction (per-step exponentials are exact).
/// Throws StepTooCoarse when check_step finds the step unconverged after
/// max_refinements halvings.
PropagationResult propagate_unitary(const hilbert::Operator& h0,
                                    const pulses::Schedule& schedule,
                                    const EvolutionConfig& config,
                                    const hilbert::SpaceSpec& space);

/// Lindblad evolution with collapse operators sqrt(1/T1_mu) a_mu and pure
/// dephasing sqrt(2 gamma_phi_mu) n_mu, gamma_phi = 1/T2 - 1/(2 T1).
/// Returns the final (mixed) state in the same interaction frame.
hilbert::QuantumState propagate_lindblad(const hilbert::Operator& h0,
                                         const pulses::Schedule& schedule,
                                         const NoiseChannels& noise,
                                         const EvolutionConfig& config,
                                         const hilbert::QuantumState& rho0,
                                         const hilbert::SpaceSpec& space);

/// Full quantum channel of a schedule as a superoperator on vec(rho)
/// (column stacking), in the interaction frame.
Eigen::MatrixXcd propagate_superop(const hilbert::Operator& h0,
                                   const pulses::Schedule& schedule,
                                   const NoiseChannels& noise,
                                   const EvolutionConfig& config,
                                   const hilbert::SpaceSpec& space);

struct GateExtract {
  hilbert::Operator gate;  // block on the requested computational labels
  double leakage = 0.0;    // 1 - min singular value^2 of the block
};

/// Projects the interaction-frame propagator onto the listed computational
/// basis labels and applies the frame-ledger diagonal correction.
GateExtract gate_unitary(const PropagationResult& result,
                         const pulses::FrameLedger& ledger,
                         const hilbert::SpaceSpec& space,
                         const std::vector<std::string>& labels);

/// Per-mode quasi-static frequency offsets, Gaussian with the configured
/// sigma; deterministic Box-Muller draw from the seed.
std::array<double, 3> sample_quasi_static(const NoiseChannels& noise,
                                          std::uint64_t seed);

/// Average gate fidelity of a (near-)unitary block V against the ideal U:
/// (Tr(M M^dag) + |Tr M|^2) / (d (d + 1)) with M = U^dag V.
double average_gate_fidelity(const hilbert::Operator& u_ideal,
                             const hilbert::Operator& v);

/// Average gate fidelity of a channel (superoperator, column stacking)
/// against an ideal unitary on the same space.
double average_gate_fidelity_channel(const Eigen::MatrixXcd& superop,
                                     const hilbert::Operator& u_ideal);

/// vec(U rho U^dag) = (conj(U) kron U) vec(rho).
Eigen::MatrixXcd unitary_superop(const hilbert::Operator& u);

/// Dissipator superoperator for the given noise (no Hamiltonian part).
Eigen::MatrixXcd dissipator_superop(const NoiseChannels& noise,
                                    const hilbert::SpaceSpec& space);

}  // namespace trimon::dynamics
