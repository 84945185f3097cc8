#pragma once

#include <array>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trimon/hilbert.hpp"

namespace trimon::pulses {

enum class Shape { kCosine, kFlatTop };

/// Shaped drive envelope. amplitude is the peak Rabi-coupling scale in Hz;
/// the imaginary part of a sample is the derivative (DRAG) quadrature.
struct Envelope {
  Shape shape = Shape::kCosine;
  double amplitude_hz = 0.0;
  double duration_s = 0.0;
  double drag = 0.0;

  void validate() const;
};

/// Complex envelope sample at time t (seconds from envelope start).
/// Zero outside [0, duration].
std::complex<double> sample(const Envelope& env, double t);

/// Integral of the in-phase part over the full envelope.
double envelope_area(const Envelope& env);

/// Fixed ramp length of the flat-top shape.
inline constexpr double kFlatTopRampS = 10e-9;

struct Tone {
  double carrier_hz = 0.0;
  double phase_rad = 0.0;
  Envelope envelope;
  double start_s = 0.0;
  double detuning_hz = 0.0;   // calibration shift added to the carrier
  std::string target;         // conditional-transition label, may be empty

  double frequency_hz() const { return carrier_hz + detuning_hz; }
  double end_s() const { return start_s + envelope.duration_s; }
};

struct FrameUpdate {
  double time_s = 0.0;
  std::string transition;
  double phase_rad = 0.0;
};

struct Schedule {
  std::vector<Tone> tones;
  std::vector<FrameUpdate> frame_updates;  // kept sorted by time
  double total_duration_s = 0.0;

  double end_time_s() const;
  void add_tone(Tone t);
  void add_frame_update(FrameUpdate u);
  void validate() const;
};

/// The 12 conditional transitions: a mode letter at its own position,
/// spectator occupations at the others (e.g. "A00", "0B1", "11C").
const std::array<std::string, 12>& transition_labels();
bool is_transition_label(const std::string& label);

struct TransitionInfo {
  int mode;                      // driven mode, 0..2
  std::array<int, 3> lower_occ;  // occupations of the lower state
  std::string lower_label;
  std::string upper_label;
};
TransitionInfo parse_transition(const std::string& label);

/// Per-transition virtual phase frames. Phases are stored mod 2pi.
struct FrameLedger {
  std::map<std::string, double> phase_rad;

  double phase(const std::string& label) const;
};

/// Returns a ledger with the update composed in; throws UnknownTransition.
FrameLedger apply_virtual_z(const FrameLedger& ledger, const std::string& label,
                            double angle_rad);

/// Ledger accumulated from a schedule's updates with time <= t.
FrameLedger ledger_at(const Schedule& schedule, double t);

/// Diagonal unitary on the computational states whose phase differences
/// across each transition equal the ledger phases. Throws
/// InconsistentLedger when the 12 edge phases admit no single-valued
/// state-phase assignment. Non-computational states (levels > 1) get
/// phase 0. Gauge: |000> has phase 0.
hilbert::Operator diagonal_unitary_of(const FrameLedger& ledger,
                                      const hilbert::SpaceSpec& space);

/// State-phase assignment behind diagonal_unitary_of (8 entries, cube order).
std::array<double, 8> state_phases_of(const FrameLedger& ledger);

/// Ledger whose diagonal unitary applies the given computational-state
/// phases (gauge-shifted so |000> is 0).
FrameLedger ledger_from_state_phases(const std::array<double, 8>& phases);

/// The scalar drive d(t): sum over active tones of
/// Re[s_k(t - start) exp(i(2 pi f_k t + phi_k - frame))], where frame is
/// the ledger phase of the tone's target accumulated from updates at or
/// before the tone start.
double drive_amplitude(const Schedule& schedule, double t);

/// Effective phase of one tone including its frame correction.
double tone_effective_phase(const Schedule& schedule, const Tone& tone);

/// H_d(t) = d(t) * sum_mu lambda_mu (a_mu + a_mu^dagger).
hilbert::Operator drive_hamiltonian(const Schedule& schedule, double t,
                                    const std::array<double, 3>& couplings,
                                    const hilbert::SpaceSpec& space);

nlohmann::json to_json(const Schedule& schedule);
Schedule schedule_from_json(const nlohmann::json& j);

}  // namespace trimon::pulses
