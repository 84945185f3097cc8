#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trimon/circuit.hpp"
#include "trimon/constants.hpp"
#include "trimon/dynamics.hpp"
#include "trimon/hilbert.hpp"
#include "trimon/pulses.hpp"

namespace trimon::gates {

enum class GateKind {
  kCCR,             // single conditional rotation, both spectators fixed
  kCR,              // two simultaneous tones, one spectator fixed
  kR,               // four simultaneous tones, unconditional
  kRamanISwap,      // exchange rotation in {|10>,|01>} via |00>
  kRamanBSwap,      // pair rotation in {|00>,|11>} via |01>
  kVirtualDiagonal, // frame updates only
  kQuditX,          // compiled via qudit_x / dd_schedule
  kDDSequence,
};

struct GateSpec {
  GateKind kind = GateKind::kCCR;
  int target_mode = 1;
  std::map<int, int> condition;  // spectator mode -> occupation
  double theta = trimon::kPi;
  double phi = 0.0;
  double duration_s = 60e-9;
  double raman_detuning_hz = 32e6;
  // VirtualDiagonal: computational-state label -> phase
  std::map<std::string, double> diagonal_phases;

  void validate() const;
};

struct CompileOptions {
  std::array<double, 3> couplings{1.0, 1.0, 1.0};
  double collision_threshold_hz = 1e6;
  pulses::Shape shape = pulses::Shape::kCosine;
  double drag = 0.0;
  std::vector<std::string>* warnings = nullptr;
};

/// Per-gate calibration state: tone amplitudes and detunings plus the
/// post-gate virtual frame updates that absorb AC Stark phases.
struct CalibrationRecord {
  std::vector<double> amplitude_hz;
  std::vector<double> detuning_hz;
  std::vector<pulses::FrameUpdate> stark_updates;  // times relative to gate end
  double phase_offset = 0.0;  // Raman: added to the first tone's phase
  double residual_db_oscillation = 0.0;
};

/// Simulation bundle used by calibration, benchmarking and synthesis.
struct SimContext {
  circuit::ModeParams params;
  hilbert::SpaceSpec space;
  dynamics::EvolutionConfig config;
  hilbert::Operator h0;
  std::map<std::string, double> cond_freqs;

  static SimContext make(const circuit::ModeParams& params,
                         const hilbert::SpaceSpec& space =
                             hilbert::SpaceSpec::uniform(2),
                         dynamics::EvolutionConfig config = default_config());
  static dynamics::EvolutionConfig default_config();

  dynamics::PropagationResult run(const pulses::Schedule& schedule) const;
};

/// Tone assembly for one gate. Throws FrequencyCollision when two emitted
/// tones, or a tone and an untargeted conditional transition, are closer
/// than the configured threshold.
pulses::Schedule compile(const GateSpec& gate, const circuit::ModeParams& params,
                         const CalibrationRecord* cal = nullptr,
                         const CompileOptions& options = {});

/// Ideal unitary of a gate on the full space (identity outside the
/// addressed blocks).
hilbert::Operator ideal_gate(const GateSpec& gate,
                             const hilbert::SpaceSpec& space);

double raman_effective_rate(double omega1_hz, double omega2_hz, double delta_hz);
double raman_stark_shift(double omega_hz, double delta_hz);

/// Simulates the compiled pulse and stores compensating frame updates for
/// the diagonal phases it leaves on every computational state.
CalibrationRecord extract_stark_corrections(const GateSpec& gate,
                                            const SimContext& sim,
                                            CalibrationRecord cal = {},
                                            const CompileOptions& options = {});

/// Deterministic-benchmarking calibration: adjusts per-tone amplitude and
/// detuning until the same-pair and inverse-pair traces are flat, then
/// records Stark corrections. Throws NoConvergence when the residual
/// oscillation stays above threshold after max_iters sweeps.
CalibrationRecord calibrate_db(const GateSpec& gate, const SimContext& sim,
                               int max_iters = 8,
                               const CompileOptions& options = {},
                               const CalibrationRecord* initial = nullptr);

struct DbTraces {
  std::vector<double> same_pair;     // fidelity vs block count, YY-style
  std::vector<double> inverse_pair;  // X Xbar-style
};
DbTraces db_traces(const GateSpec& gate, const CalibrationRecord& cal,
                   const SimContext& sim, int max_blocks = 20,
                   const CompileOptions& options = {});

/// Raman-gate calibration: secant refinement of the two-photon detuning
/// and amplitude scale, then Stark frame extraction.
CalibrationRecord calibrate_raman(const GateSpec& gate, const SimContext& sim,
                                  int max_iters = 6,
                                  const CompileOptions& options = {});

struct RbResult {
  double p = 0.0;
  double avg_fidelity = 0.0;
  double fit_rms = 0.0;
  std::vector<int> lengths;
  std::vector<double> survival;  // mean survival per length
};

struct RbOptions {
  double gate_duration_s = 40e-9;
  double depolarizing_per_gate = 0.0;  // inserted analytically per Clifford
  int calibration_iters = 5;
};

/// Randomized benchmarking on the two-level subspace of one conditional
/// transition. Gate set: the 24 single-qubit Cliffords compiled from
/// calibrated half/full rotations. Deterministic for a fixed seed.
RbResult run_rb(const std::string& transition, const std::vector<int>& lengths,
                int n_random, std::uint64_t seed, const SimContext& sim,
                const dynamics::NoiseChannels& noise, const RbOptions& options = {});

struct SynthesisResult {
  pulses::Schedule schedule;
  // Pauli coefficients (Hz) of the generated Hamiltonian, label -> value,
  // from the log of the simulated short-time propagator.
  std::map<std::string, double> generated_hz;
  double target_fraction = 0.0;  // |c_target| / l2-norm of traceless part
};

/// Schedule whose short-time effective Hamiltonian on the (A, B) pair with
/// C in |0> is strength * (term). term is one of the 16 Pauli products
/// ("II", "IX", ..., "ZZ").
SynthesisResult synthesize_pauli_term(const std::string& term,
                                      double strength_hz, const SimContext& sim,
                                      double duration_s = 400e-9);

/// Pauli coefficients of i log(U)/(2 pi tau) on the C=0 computational
/// block, keyed "II".."ZZ".
std::map<std::string, double> propagator_log_pauli(
    const hilbert::Operator& u_block4, double duration_s);

/// Table-driven orderings of the d-state manifolds used by the qudit
/// experiments.
std::vector<std::string> default_qudit_ordering(int d);

/// X_d as d-1 conditional-pi swaps along the ordering. Throws
/// InvalidOrdering when consecutive states are not single-transition
/// neighbors (the three-state manifold uses the pivot construction, which
/// reuses the head state).
std::vector<GateSpec> qudit_x(int d, const std::vector<std::string>& ordering);

/// n repetitions of d applications of X_d, pulses spread uniformly over
/// total_s. When sim is given, per-transition Stark corrections are
/// extracted once and appended after each pulse.
pulses::Schedule dd_schedule(int d, int n, const std::vector<std::string>& ordering,
                             double total_s, const circuit::ModeParams& params,
                             double gate_s = 60e-9, const SimContext* sim = nullptr,
                             const CompileOptions& options = {});

}  // namespace trimon::gates
