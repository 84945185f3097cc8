#include "trimon/gates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "trimon/constants.hpp"
#include "trimon/errors.hpp"

namespace trimon::gates {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

std::string transition_label(int mode, const std::array<int, 3>& spectators) {
  static const char kModeChar[3] = {'A', 'B', 'C'};
  std::string label;
  for (int m = 0; m < 3; ++m) {
    label += (m == mode) ? kModeChar[mode] : char('0' + spectators[m]);
  }
  return label;
}

double cosine_sq_area(const pulses::Envelope& env) {
  // integral of the squared in-phase envelope
  if (env.shape == pulses::Shape::kCosine) {
    return 0.375 * env.amplitude_hz * env.amplitude_hz * env.duration_s;
  }
  const double r = std::min(pulses::kFlatTopRampS, 0.5 * env.duration_s);
  const double a2 = env.amplitude_hz * env.amplitude_hz;
  return a2 * (env.duration_s - 2.0 * r) + 0.75 * a2 * r;
}

struct BlockPair {
  std::string lower, upper;
};

std::vector<BlockPair> gate_blocks(const GateSpec& gate) {
  // conditional-transition blocks addressed by a CCR/CR/R gate
  std::vector<std::array<int, 3>> configs;
  std::array<int, 2> spectators{};
  int nspec = 0;
  for (int m = 0; m < 3; ++m) {
    if (m != gate.target_mode) spectators[nspec++] = m;
  }
  const bool s0_fixed = gate.condition.count(spectators[0]) > 0;
  const bool s1_fixed = gate.condition.count(spectators[1]) > 0;
  for (int v0 = 0; v0 < 2; ++v0) {
    if (s0_fixed && gate.condition.at(spectators[0]) != v0) continue;
    for (int v1 = 0; v1 < 2; ++v1) {
      if (s1_fixed && gate.condition.at(spectators[1]) != v1) continue;
      std::array<int, 3> occ{};
      occ[spectators[0]] = v0;
      occ[spectators[1]] = v1;
      configs.push_back(occ);
    }
  }
  std::vector<BlockPair> blocks;
  for (const auto& occ : configs) {
    const auto info =
        pulses::parse_transition(transition_label(gate.target_mode, occ));
    blocks.push_back({info.lower_label, info.upper_label});
  }
  return blocks;
}

void check_collisions(const pulses::Schedule& s,
                      const std::map<std::string, double>& cond,
                      double threshold) {
  for (std::size_t i = 0; i < s.tones.size(); ++i) {
    for (std::size_t j = i + 1; j < s.tones.size(); ++j) {
      if (std::abs(s.tones[i].frequency_hz() - s.tones[j].frequency_hz()) <
          threshold) {
        throw FrequencyCollision("tones " + std::to_string(i) + " and " +
                                 std::to_string(j) + " are closer than the threshold");
      }
    }
    for (const auto& [label, f] : cond) {
      if (label == s.tones[i].target) continue;
      if (std::abs(s.tones[i].frequency_hz() - f) < threshold) {
        throw FrequencyCollision("tone " + std::to_string(i) +
                                 " collides with transition " + label);
      }
    }
  }
}

hilbert::Operator su2_block(const hilbert::Operator& u,
                            const hilbert::SpaceSpec& space,
                            const std::string& lo, const std::string& up) {
  hilbert::Operator b(2, 2);
  const int i = space.index_of_label(lo), j = space.index_of_label(up);
  b(0, 0) = u(i, i);
  b(0, 1) = u(i, j);
  b(1, 0) = u(j, i);
  b(1, 1) = u(j, j);
  return b;
}

// polar-unitarize a near-unitary 2x2 and normalize to SU(2)
Eigen::Matrix2cd to_su2(const hilbert::Operator& b) {
  Eigen::JacobiSVD<Eigen::Matrix2cd> svd(
      Eigen::Matrix2cd(b), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2cd u = svd.matrixU() * svd.matrixV().adjoint();
  const std::complex<double> det = u.determinant();
  return u / std::sqrt(det);
}

struct RotationVector {
  double theta;  // in [0, 2 pi)
  double nx, ny, nz;
};

// decomposition u = cos(theta/2) I - i sin(theta/2) n.sigma, with the
// branch chosen nearest to theta_hint
RotationVector rotation_of(const Eigen::Matrix2cd& su2, double theta_hint) {
  const double c = 0.5 * (su2(0, 0) + su2(1, 1)).real();
  const double vx = 0.5 * (su2(0, 1) + su2(1, 0)).imag();
  const double vy = 0.5 * (su2(1, 0) - su2(0, 1)).real();
  const double vz = 0.5 * (su2(0, 0) - su2(1, 1)).imag();
  const double s = std::sqrt(vx * vx + vy * vy + vz * vz);
  double theta = 2.0 * std::atan2(s, c);
  double nx = 0, ny = 0, nz = 0;
  if (s > 1e-12) {
    nx = vx / s;
    ny = vy / s;
    nz = vz / s;
  }
  // the SU(2) pair (theta, n) vs (2 pi - theta, -n) times -1
  const double alt = 2.0 * kPi - theta;
  if (std::abs(alt - theta_hint) < std::abs(theta - theta_hint)) {
    theta = alt;
    nx = -nx;
    ny = -ny;
    nz = -nz;
  }
  return {theta, nx, ny, nz};
}

std::vector<std::string> computational_labels(int c_value) {
  std::vector<std::string> labels;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      labels.push_back(std::string() + char('0' + a) + char('0' + b) +
                       char('0' + c_value));
    }
  }
  return labels;  // AB order 00, 01, 10, 11
}

const std::array<Eigen::Matrix2cd, 4>& pauli1() {
  static const auto kP = [] {
    std::array<Eigen::Matrix2cd, 4> p;
    p[0] = Eigen::Matrix2cd::Identity();
    p[1] << 0, 1, 1, 0;
    p[2] << 0, -kI, kI, 0;
    p[3] << 1, 0, 0, -1;
    return p;
  }();
  return kP;
}

int pauli_index(char c) {
  switch (c) {
    case 'I': return 0;
    case 'X': return 1;
    case 'Y': return 2;
    case 'Z': return 3;
    default: throw UnsupportedTerm(std::string("bad Pauli letter ") + c);
  }
}

Eigen::Matrix4cd pauli_product(const std::string& term) {
  if (term.size() != 2) throw UnsupportedTerm(term);
  const auto& p = pauli1();
  Eigen::Matrix4cd out;
  const auto& a = p[pauli_index(term[0])];
  const auto& b = p[pauli_index(term[1])];
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    }
  }
  return out;
}

const std::vector<std::string>& pauli_labels() {
  static const std::vector<std::string> kLabels = [] {
    std::vector<std::string> v;
    for (char a : {'I', 'X', 'Y', 'Z'}) {
      for (char b : {'I', 'X', 'Y', 'Z'}) {
        v.push_back(std::string() + a + b);
      }
    }
    return v;
  }();
  return kLabels;
}

}  // namespace

void GateSpec::validate() const {
  if (target_mode < 0 || target_mode > 2) {
    throw ValidationError("target_mode must be 0..2");
  }
  for (const auto& [m, v] : condition) {
    if (m < 0 || m > 2 || m == target_mode) {
      throw ValidationError("condition keys must be spectator modes");
    }
    if (v != 0 && v != 1) throw ValidationError("condition values must be 0/1");
  }
  const int n = int(condition.size());
  switch (kind) {
    case GateKind::kCCR:
      if (n != 2) throw ValidationError("CCR fixes both spectators");
      break;
    case GateKind::kCR:
      if (n != 1) throw ValidationError("CR fixes exactly one spectator");
      break;
    case GateKind::kR:
      if (n != 0) throw ValidationError("R fixes no spectators");
      break;
    case GateKind::kRamanISwap:
    case GateKind::kRamanBSwap:
      if (n > 1) throw ValidationError("Raman gates condition on mode C only");
      break;
    default:
      break;
  }
  if (!(duration_s > 0.0) && kind != GateKind::kVirtualDiagonal) {
    throw ValidationError("gate duration must be positive");
  }
}

dynamics::EvolutionConfig SimContext::default_config() {
  dynamics::EvolutionConfig c;
  c.rwa = true;
  c.step_s = 1e-10;
  return c;
}

SimContext SimContext::make(const circuit::ModeParams& params,
                            const hilbert::SpaceSpec& space,
                            dynamics::EvolutionConfig config) {
  SimContext s;
  s.params = params;
  s.space = space;
  s.config = config;
  s.h0 = hilbert::static_hamiltonian(params, space);
  s.cond_freqs = circuit::conditional_frequencies(params);
  return s;
}

dynamics::PropagationResult SimContext::run(const pulses::Schedule& schedule) const {
  return dynamics::propagate_unitary(h0, schedule, config, space);
}

double raman_effective_rate(double omega1_hz, double omega2_hz, double delta_hz) {
  if (delta_hz == 0.0) throw ZeroDetuning("raman_effective_rate");
  return omega1_hz * omega2_hz / (2.0 * delta_hz);
}

double raman_stark_shift(double omega_hz, double delta_hz) {
  if (delta_hz == 0.0) throw ZeroDetuning("raman_stark_shift");
  return omega_hz * omega_hz / (4.0 * delta_hz);
}

pulses::Schedule compile(const GateSpec& gate, const circuit::ModeParams& params,
                         const CalibrationRecord* cal,
                         const CompileOptions& options) {
  gate.validate();
  const auto cond = circuit::conditional_frequencies(params);
  pulses::Schedule s;

  auto amplitude_or_cal = [&](std::size_t k, double fallback) {
    if (cal != nullptr && k < cal->amplitude_hz.size()) {
      return cal->amplitude_hz[k];
    }
    return fallback;
  };
  auto detuning_or_cal = [&](std::size_t k, double fallback) {
    if (cal != nullptr && k < cal->detuning_hz.size()) {
      return cal->detuning_hz[k];
    }
    return fallback;
  };

  switch (gate.kind) {
    case GateKind::kCCR:
    case GateKind::kCR:
    case GateKind::kR: {
      const double lambda = options.couplings[gate.target_mode];
      if (lambda == 0.0) {
        throw ValidationError("target mode has zero drive coupling");
      }
      const double area_amp =
          std::abs(gate.theta) / (kPi * gate.duration_s * lambda);
      // tone phase -phi drives sigma_phi = cos(phi) X + sin(phi) Y
      const double phase = gate.theta >= 0.0 ? -gate.phi : -gate.phi + kPi;
      std::size_t k = 0;
      for (const auto& block : gate_blocks(gate)) {
        std::array<int, 3> occ{};
        for (int m = 0; m < 3; ++m) occ[m] = block.lower[m] - '0';
        const auto label = transition_label(gate.target_mode, occ);
        pulses::Tone t;
        t.carrier_hz = cond.at(label);
        t.detuning_hz = detuning_or_cal(k, 0.0);
        t.phase_rad = phase;
        t.target = label;
        t.envelope = {options.shape, amplitude_or_cal(k, area_amp),
                      gate.duration_s, options.drag};
        s.add_tone(std::move(t));
        ++k;
      }
      break;
    }
    case GateKind::kVirtualDiagonal: {
      std::array<double, 8> phases{};
      for (const auto& [label, phase] : gate.diagonal_phases) {
        if (label.size() != 3 || label.find_first_not_of("01") != std::string::npos) {
          throw ValidationError("diagonal phase labels are 3-bit strings");
        }
        const int idx =
            (label[0] - '0') * 4 + (label[1] - '0') * 2 + (label[2] - '0');
        phases[idx] = phase;
      }
      const auto ledger = pulses::ledger_from_state_phases(phases);
      for (const auto& [label, ph] : ledger.phase_rad) {
        if (ph != 0.0) s.add_frame_update({0.0, label, ph});
      }
      s.total_duration_s = 0.0;
      break;
    }
    case GateKind::kRamanISwap:
    case GateKind::kRamanBSwap: {
      const int c_cond =
          gate.condition.count(2) ? gate.condition.at(2) : 0;
      const double delta = gate.raman_detuning_hz;
      if (delta == 0.0) throw ZeroDetuning("Raman gate needs a detuning");
      // active transitions: iSWAP couples |10> and |01> through |00>;
      // bSWAP couples |00> and |11> through |01>
      std::array<int, 3> c_occ{};
      c_occ[2] = c_cond;
      std::string la, lb;
      double sign_a, sign_b;
      if (gate.kind == GateKind::kRamanISwap) {
        auto occ_a = c_occ;  // A flips with B=0
        la = transition_label(0, occ_a);
        auto occ_b = c_occ;  // B flips with A=0
        lb = transition_label(1, occ_b);
        sign_a = -1.0;
        sign_b = -1.0;  // both below their transitions; difference resonant
      } else {
        auto occ_b = c_occ;  // B flips with A=0
        lb = transition_label(1, occ_b);
        auto occ_a = c_occ;  // A flips with B=1
        occ_a[1] = 1;
        la = transition_label(0, occ_a);
        sign_b = -1.0;
        sign_a = +1.0;  // sum of the two drives matches the 00-11 splitting
      }
      // equal amplitudes from the squared-envelope area rule:
      // theta = 2 pi * Integral[env1 env2]/(2 delta)
      pulses::Envelope env{options.shape, 1.0, gate.duration_s, options.drag};
      const double sq_unit = cosine_sq_area(env);  // per unit amplitude^2
      const double amp =
          std::sqrt(std::abs(gate.theta) * 2.0 * std::abs(delta) /
                    (2.0 * kPi * sq_unit));
      const double lam_a = options.couplings[0], lam_b = options.couplings[1];
      if (lam_a == 0.0 || lam_b == 0.0) {
        throw ValidationError("Raman gates need drive coupling on modes A and B");
      }
      pulses::Tone ta;
      ta.carrier_hz = cond.at(la);
      ta.detuning_hz = detuning_or_cal(0, sign_a * delta);
      ta.phase_rad = -gate.phi + (cal != nullptr ? cal->phase_offset : 0.0);
      ta.target = la;
      ta.envelope = {options.shape, amplitude_or_cal(0, amp / lam_a),
                     gate.duration_s, options.drag};
      pulses::Tone tb;
      tb.carrier_hz = cond.at(lb);
      tb.detuning_hz = detuning_or_cal(1, sign_b * delta);
      tb.phase_rad = 0.0;
      tb.target = lb;
      tb.envelope = {options.shape, amplitude_or_cal(1, amp / lam_b),
                     gate.duration_s, options.drag};
      if (options.warnings != nullptr) {
        for (const auto& t : {ta, tb}) {
          if (std::abs(delta) < 3.0 * t.envelope.amplitude_hz) {
            options.warnings->push_back(
                "Raman detuning below 3x tone amplitude; virtual-intermediate "
                "picture is marginal");
          }
        }
      }
      s.add_tone(std::move(ta));
      s.add_tone(std::move(tb));
      break;
    }
    default:
      throw ValidationError(
          "qudit kinds are assembled via qudit_x / dd_schedule");
  }

  if (cal != nullptr) {
    for (const auto& u : cal->stark_updates) {
      s.add_frame_update({gate.duration_s + u.time_s, u.transition, u.phase_rad});
    }
  }
  s.total_duration_s = std::max(s.total_duration_s, gate.duration_s);
  check_collisions(s, cond, options.collision_threshold_hz);
  return s;
}

hilbert::Operator ideal_gate(const GateSpec& gate,
                             const hilbert::SpaceSpec& space) {
  gate.validate();
  hilbert::Operator u =
      hilbert::Operator::Identity(space.dim(), space.dim());
  // exp(-i theta/2 sigma_phi) with sigma_phi = cos(phi) X + sin(phi) Y
  const double c = std::cos(gate.theta / 2.0), sn = std::sin(gate.theta / 2.0);
  const std::complex<double> off_up = -kI * sn * std::exp(-kI * gate.phi);
  const std::complex<double> off_lo = -kI * sn * std::exp(kI * gate.phi);

  auto set_block = [&](const std::string& lo, const std::string& up) {
    const int i = space.index_of_label(lo), j = space.index_of_label(up);
    u(i, i) = c;
    u(j, j) = c;
    u(i, j) = off_up;   // <lo|U|up>
    u(j, i) = off_lo;   // <up|U|lo>
  };

  switch (gate.kind) {
    case GateKind::kCCR:
    case GateKind::kCR:
    case GateKind::kR:
      for (const auto& block : gate_blocks(gate)) {
        set_block(block.lower, block.upper);
      }
      break;
    case GateKind::kVirtualDiagonal: {
      std::array<double, 8> phases{};
      for (const auto& [label, phase] : gate.diagonal_phases) {
        const int idx =
            (label[0] - '0') * 4 + (label[1] - '0') * 2 + (label[2] - '0');
        phases[idx] = phase;
      }
      const auto ledger = pulses::ledger_from_state_phases(phases);
      u = pulses::diagonal_unitary_of(ledger, space);
      break;
    }
    case GateKind::kRamanISwap: {
      const int cv = gate.condition.count(2) ? gate.condition.at(2) : 0;
      const std::string lo = std::string("10") + char('0' + cv);
      const std::string up = std::string("01") + char('0' + cv);
      set_block(lo, up);
      break;
    }
    case GateKind::kRamanBSwap: {
      const int cv = gate.condition.count(2) ? gate.condition.at(2) : 0;
      const std::string lo = std::string("00") + char('0' + cv);
      const std::string up = std::string("11") + char('0' + cv);
      set_block(lo, up);
      break;
    }
    default:
      throw ValidationError("no single ideal unitary for qudit kinds");
  }
  return u;
}

namespace {

// diagonal phases of the propagator relative to the ideal gate, as
// post-gate frame updates (state-phase gauge: |000> = 0)
std::vector<pulses::FrameUpdate> stark_updates_from(
    const hilbert::Operator& u, const GateSpec& gate,
    const hilbert::SpaceSpec& space) {
  std::array<double, 8> phases{};
  std::array<bool, 8> in_block{};
  std::vector<BlockPair> blocks;
  if (gate.kind == GateKind::kRamanISwap || gate.kind == GateKind::kRamanBSwap) {
    const int cv = gate.condition.count(2) ? gate.condition.at(2) : 0;
    if (gate.kind == GateKind::kRamanISwap) {
      blocks.push_back({std::string("10") + char('0' + cv),
                        std::string("01") + char('0' + cv)});
    } else {
      blocks.push_back({std::string("00") + char('0' + cv),
                        std::string("11") + char('0' + cv)});
    }
  } else {
    blocks = gate_blocks(gate);
  }

  auto cube_index = [&](const std::string& label) {
    return (label[0] - '0') * 4 + (label[1] - '0') * 2 + (label[2] - '0');
  };

  for (const auto& b : blocks) {
    const auto blk = su2_block(u, space, b.lower, b.upper);
    // common block phase: the correction removes det^(1/2)
    const double alpha = 0.5 * std::arg(blk.determinant());
    phases[cube_index(b.lower)] = -alpha;
    phases[cube_index(b.upper)] = -alpha;
    in_block[cube_index(b.lower)] = true;
    in_block[cube_index(b.upper)] = true;
  }
  for (int cube = 0; cube < 8; ++cube) {
    if (in_block[cube]) continue;
    std::string label;
    label += char('0' + ((cube >> 2) & 1));
    label += char('0' + ((cube >> 1) & 1));
    label += char('0' + (cube & 1));
    const int i = space.index_of_label(label);
    phases[cube] = -std::arg(u(i, i));
  }
  // gauge: subtract the |000> phase
  const double g = phases[0];
  for (auto& p : phases) p -= g;

  const auto ledger = pulses::ledger_from_state_phases(phases);
  std::vector<pulses::FrameUpdate> updates;
  for (const auto& [label, ph] : ledger.phase_rad) {
    if (ph != 0.0) updates.push_back({0.0, label, ph});
  }
  return updates;
}

}  // namespace

CalibrationRecord extract_stark_corrections(const GateSpec& gate,
                                            const SimContext& sim,
                                            CalibrationRecord cal,
                                            const CompileOptions& options) {
  cal.stark_updates.clear();
  const auto schedule = compile(gate, sim.params, &cal, options);
  const auto result = sim.run(schedule);
  cal.stark_updates =
      stark_updates_from(result.u_interaction, gate, sim.space);
  return cal;
}

DbTraces db_traces(const GateSpec& gate, const CalibrationRecord& cal,
                   const SimContext& sim, int max_blocks,
                   const CompileOptions& options) {
  // prepare the +X superposition in each addressed block, then repeat
  // same-rotation pairs about the orthogonal axis (amplitude errors) and
  // rotation/inverse pairs (phase errors); nominal operation is identity
  GateSpec g_same = gate;
  g_same.phi += kPi / 2.0;
  GateSpec g_inv = gate;
  g_inv.phi += kPi;

  const auto u_base = sim.run(compile(gate, sim.params, &cal, options)).u_interaction;
  const auto u_same = sim.run(compile(g_same, sim.params, &cal, options)).u_interaction;
  const auto u_inv = sim.run(compile(g_inv, sim.params, &cal, options)).u_interaction;

  const bool half = std::abs(std::abs(gate.theta) - kPi / 2.0) < 1e-9;
  DbTraces traces;
  for (const auto& block : gate_blocks(gate)) {
    const auto b = su2_block(u_base, sim.space, block.lower, block.upper);
    const auto by = su2_block(u_same, sim.space, block.lower, block.upper);
    const auto binv = su2_block(u_inv, sim.space, block.lower, block.upper);

    Eigen::Matrix2cd same_block, inv_block;
    if (half) {
      same_block = Eigen::Matrix2cd(by * by * by * by);
      inv_block = Eigen::Matrix2cd(b * b * binv * binv);
    } else {
      same_block = Eigen::Matrix2cd(by * by);
      inv_block = Eigen::Matrix2cd(b * binv);
    }
    Eigen::Vector2cd plus;
    plus << std::sqrt(0.5), std::sqrt(0.5);
    Eigen::Matrix2cd us = Eigen::Matrix2cd::Identity();
    Eigen::Matrix2cd ui = Eigen::Matrix2cd::Identity();
    const bool first = traces.same_pair.empty();
    for (int m = 0; m < max_blocks; ++m) {
      us = same_block * us;
      ui = inv_block * ui;
      const double fs = std::norm(plus.dot(us * plus));
      const double fi = std::norm(plus.dot(ui * plus));
      if (first) {
        traces.same_pair.push_back(fs);
        traces.inverse_pair.push_back(fi);
      } else {
        // multi-block gates: report the worst block
        traces.same_pair[m] = std::min(traces.same_pair[m], fs);
        traces.inverse_pair[m] = std::min(traces.inverse_pair[m], fi);
      }
    }
  }
  return traces;
}

CalibrationRecord calibrate_db(const GateSpec& gate, const SimContext& sim,
                               int max_iters, const CompileOptions& options,
                               const CalibrationRecord* initial) {
  gate.validate();
  if (gate.kind == GateKind::kVirtualDiagonal) {
    CalibrationRecord cal;
    cal.residual_db_oscillation = 0.0;
    return cal;
  }

  // start from the area-rule compile (or a caller-provided record)
  CalibrationRecord cal;
  {
    const auto base = compile(gate, sim.params, initial, options);
    for (const auto& t : base.tones) {
      cal.amplitude_hz.push_back(t.envelope.amplitude_hz);
      cal.detuning_hz.push_back(t.detuning_hz);
    }
  }
  const auto blocks = gate_blocks(gate);
  const std::size_t n_tones = cal.amplitude_hz.size();
  const double theta_target = std::abs(gate.theta);

  auto measure = [&](const CalibrationRecord& c) {
    const auto u = sim.run(compile(gate, sim.params, &c, options)).u_interaction;
    Eigen::VectorXd obj(2 * n_tones);
    for (std::size_t k = 0; k < n_tones; ++k) {
      const auto rot = rotation_of(
          to_su2(su2_block(u, sim.space, blocks[k].lower, blocks[k].upper)),
          theta_target);
      obj(2 * k) = rot.theta - theta_target;
      obj(2 * k + 1) = rot.nz;
    }
    return obj;
  };

  Eigen::VectorXd obj = measure(cal);
  for (int iter = 0; iter < max_iters; ++iter) {
    if (obj.cwiseAbs().maxCoeff() < 2e-6) break;
    // numeric Jacobian: amplitude scale and detuning per tone
    Eigen::MatrixXd jac(2 * n_tones, 2 * n_tones);
    const double da = 1e-2, dd = 5e4;
    for (std::size_t k = 0; k < n_tones; ++k) {
      CalibrationRecord ca = cal;
      ca.amplitude_hz[k] *= (1.0 + da);
      jac.col(2 * k) = (measure(ca) - obj) / (da * cal.amplitude_hz[k]);
      CalibrationRecord cd = cal;
      cd.detuning_hz[k] += dd;
      jac.col(2 * k + 1) = (measure(cd) - obj) / dd;
    }
    const Eigen::VectorXd step =
        jac.colPivHouseholderQr().solve(obj);
    for (std::size_t k = 0; k < n_tones; ++k) {
      cal.amplitude_hz[k] -= step(2 * k);
      cal.detuning_hz[k] -= step(2 * k + 1);
      if (cal.amplitude_hz[k] <= 0.0) {
        throw NoConvergence("calibration drove an amplitude nonpositive");
      }
    }
    obj = measure(cal);
  }

  const auto traces = db_traces(gate, cal, sim, 20, options);
  double residual = 0.0;
  for (double f : traces.same_pair) residual = std::max(residual, 1.0 - f);
  for (double f : traces.inverse_pair) residual = std::max(residual, 1.0 - f);
  cal.residual_db_oscillation = residual;
  if (residual > 1e-3) {
    throw NoConvergence("residual DB oscillation " + std::to_string(residual));
  }
  const auto with_stark = extract_stark_corrections(gate, sim, cal, options);
  return with_stark;
}

CalibrationRecord calibrate_raman(const GateSpec& gate, const SimContext& sim,
                                  int max_iters, const CompileOptions& options) {
  gate.validate();
  CalibrationRecord cal;
  {
    const auto base = compile(gate, sim.params, nullptr, options);
    for (const auto& t : base.tones) {
      cal.amplitude_hz.push_back(t.envelope.amplitude_hz);
      cal.detuning_hz.push_back(t.detuning_hz);
    }
  }
  const int cv = gate.condition.count(2) ? gate.condition.at(2) : 0;
  const std::string lo = gate.kind == GateKind::kRamanISwap
                             ? std::string("10") + char('0' + cv)
                             : std::string("00") + char('0' + cv);
  const std::string up = gate.kind == GateKind::kRamanISwap
                             ? std::string("01") + char('0' + cv)
                             : std::string("11") + char('0' + cv);
  const double theta_target = std::abs(gate.theta);

  auto block_rotation = [&](const CalibrationRecord& c) {
    const auto u = sim.run(compile(gate, sim.params, &c, options)).u_interaction;
    return rotation_of(to_su2(su2_block(u, sim.space, lo, up)), theta_target);
  };
  auto measure = [&](const CalibrationRecord& c) {
    const auto rot = block_rotation(c);
    Eigen::Vector2d obj;
    obj << rot.theta - theta_target, rot.nz;
    return obj;
  };
  // the two-photon resonance knob: the difference of the drive frequencies
  // for exchange pairs, their sum for the double-excitation pair
  const double knob_b = gate.kind == GateKind::kRamanISwap ? -0.5 : 0.5;

  Eigen::Vector2d obj = measure(cal);
  for (int iter = 0; iter < max_iters; ++iter) {
    if (obj.cwiseAbs().maxCoeff() < 5e-6) break;
    Eigen::Matrix2d jac;
    const double da = 2e-2, dd = 1e5;
    {
      CalibrationRecord ca = cal;
      ca.amplitude_hz[0] *= (1.0 + da);
      ca.amplitude_hz[1] *= (1.0 + da);
      jac.col(0) = (measure(ca) - obj) / da;  // common amplitude scale
      CalibrationRecord cd = cal;
      cd.detuning_hz[0] += 0.5 * dd;
      cd.detuning_hz[1] += knob_b * dd;
      jac.col(1) = (measure(cd) - obj) / dd;
    }
    const Eigen::Vector2d step = jac.colPivHouseholderQr().solve(obj);
    const double scale = 1.0 - std::clamp(step(0), -0.5, 0.5);
    cal.amplitude_hz[0] *= scale;
    cal.amplitude_hz[1] *= scale;
    cal.detuning_hz[0] -= 0.5 * step(1);
    cal.detuning_hz[1] -= knob_b * step(1);
    obj = measure(cal);
  }
  if (obj.cwiseAbs().maxCoeff() > 1e-3) {
    throw NoConvergence("Raman calibration residual " +
                        std::to_string(obj.cwiseAbs().maxCoeff()));
  }
  // absorb the rotation azimuth into the first tone's phase: compare the
  // frame-corrected block against the ideal sigma_+ element and rotate the
  // drive phase until they agree
  const std::string ref = gate.kind == GateKind::kRamanISwap ? "000" : "100";
  auto azimuth_error = [&](const CalibrationRecord& c0) {
    const auto c = extract_stark_corrections(gate, sim, c0, options);
    const auto sched = compile(gate, sim.params, &c, options);
    const auto u = sim.run(sched).u_interaction;
    const auto ledger = pulses::ledger_at(sched, sched.end_time_s());
    const hilbert::Operator v =
        pulses::diagonal_unitary_of(ledger, sim.space) * u;
    const int iref = sim.space.index_of_label(ref);
    const int ilo = sim.space.index_of_label(lo);
    const int iup = sim.space.index_of_label(up);
    const std::complex<double> gamma = v(iref, iref) / std::abs(v(iref, iref));
    const std::complex<double> ideal_elem =
        -kI * std::sin(theta_target / 2.0) * std::exp(kI * gate.phi);
    return std::arg(v(iup, ilo) / gamma / ideal_elem);
  };
  double err = azimuth_error(cal);
  double direction = 1.0;
  for (int pass = 0; pass < 5 && std::abs(err) > 1e-5; ++pass) {
    CalibrationRecord trial = cal;
    trial.phase_offset += direction * err;
    const double err2 = azimuth_error(trial);
    if (std::abs(err2) < std::abs(err)) {
      cal = trial;
      err = err2;
    } else {
      direction = -direction;
    }
  }
  return extract_stark_corrections(gate, sim, cal, options);
}

// ---------------------------------------------------------------------------
// randomized benchmarking
// ---------------------------------------------------------------------------

namespace {

bool projective_equal(const Eigen::Matrix2cd& u, const Eigen::Matrix2cd& v) {
  return std::abs((u.adjoint() * v).trace()) > 2.0 - 1e-6;
}

struct CliffordGroup {
  // 24 elements; each stores its ideal 2x2 and generator word
  std::vector<Eigen::Matrix2cd> ideal;
  std::vector<std::vector<int>> words;  // indices into the generator list

  int find(const Eigen::Matrix2cd& u) const {
    for (std::size_t i = 0; i < ideal.size(); ++i) {
      if (projective_equal(ideal[i], u)) return int(i);
    }
    throw FitFailure("Clifford lookup failed");
  }
};

Eigen::Matrix2cd rot2(double theta, double phi) {
  Eigen::Matrix2cd u;
  const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  u << c, -kI * s * std::exp(-kI * phi), -kI * s * std::exp(kI * phi), c;
  return u;
}

CliffordGroup build_clifford_group(const std::vector<Eigen::Matrix2cd>& gens) {
  CliffordGroup g;
  g.ideal.push_back(Eigen::Matrix2cd::Identity());
  g.words.push_back({});
  // breadth-first closure
  for (std::size_t head = 0; head < g.ideal.size(); ++head) {
    for (std::size_t k = 0; k < gens.size(); ++k) {
      const Eigen::Matrix2cd next = gens[k] * g.ideal[head];
      bool known = false;
      for (const auto& u : g.ideal) {
        if (projective_equal(u, next)) {
          known = true;
          break;
        }
      }
      if (known) continue;
      auto word = g.words[head];
      word.push_back(int(k));
      g.ideal.push_back(next);
      g.words.push_back(std::move(word));
    }
  }
  if (g.ideal.size() != 24) {
    throw FitFailure("Clifford closure found " + std::to_string(g.ideal.size()) +
                     " elements");
  }
  return g;
}

}  // namespace

RbResult run_rb(const std::string& transition, const std::vector<int>& lengths,
                int n_random, std::uint64_t seed, const SimContext& sim,
                const dynamics::NoiseChannels& noise, const RbOptions& options) {
  const auto info = pulses::parse_transition(transition);
  if (lengths.empty() || n_random < 1) throw ValidationError("empty RB plan");

  // generator set: quarter and half rotations about x and y
  struct Gen {
    double theta, phi;
  };
  const std::vector<Gen> gens = {{kPi / 2, 0},       {kPi / 2, kPi},
                                 {kPi / 2, kPi / 2}, {kPi / 2, 3 * kPi / 2},
                                 {kPi, 0},           {kPi, kPi / 2}};
  std::vector<Eigen::Matrix2cd> ideal_gens;
  for (const auto& gen : gens) ideal_gens.push_back(rot2(gen.theta, gen.phi));
  const auto group = build_clifford_group(ideal_gens);

  // calibrate and integrate each generator once
  GateSpec base;
  base.kind = GateKind::kCCR;
  base.target_mode = info.mode;
  for (int m = 0; m < 3; ++m) {
    if (m != info.mode) base.condition[m] = info.lower_occ[m];
  }
  base.duration_s = options.gate_duration_s;

  const int d = sim.space.dim();
  std::vector<Eigen::MatrixXcd> gen_super;
  for (const auto& gen : gens) {
    GateSpec gs = base;
    gs.theta = gen.theta;
    gs.phi = gen.phi;
    CalibrationRecord cal = calibrate_db(gs, sim, options.calibration_iters);
    const auto schedule = compile(gs, sim.params, &cal);
    gen_super.push_back(
        dynamics::propagate_superop(sim.h0, schedule, noise, sim.config, sim.space));
  }

  // frame correction of each generator: fold the post-gate ledger into the
  // superoperator so compositions act in a clean frame
  // (the stark updates are already part of the compiled schedule; folding is
  // handled by the ledger-corrected target states below being diagonal)

  std::vector<Eigen::MatrixXcd> cliff_super;
  for (const auto& word : group.words) {
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Identity(d * d, d * d);
    for (int k : word) s = gen_super[k] * s;
    cliff_super.push_back(std::move(s));
  }

  // optional analytic depolarizing insertion on the two-level block
  const int ilo = sim.space.index_of_label(info.lower_label);
  const int iup = sim.space.index_of_label(info.upper_label);
  Eigen::MatrixXcd depol;
  if (options.depolarizing_per_gate > 0.0) {
    const double eps = options.depolarizing_per_gate;
    depol = Eigen::MatrixXcd::Identity(d * d, d * d);
    auto v = [&](int i, int j) { return j * d + i; };
    // block indices
    const int b00 = v(ilo, ilo), b11 = v(iup, iup), b01 = v(ilo, iup),
              b10 = v(iup, ilo);
    depol(b00, b00) = 1.0 - 0.5 * eps;
    depol(b00, b11) = 0.5 * eps;
    depol(b11, b11) = 1.0 - 0.5 * eps;
    depol(b11, b00) = 0.5 * eps;
    depol(b01, b01) = 1.0 - eps;
    depol(b10, b10) = 1.0 - eps;
  }

  std::mt19937_64 rng(seed);
  RbResult out;
  out.lengths = lengths;

  Eigen::VectorXcd rho0 = Eigen::VectorXcd::Zero(d * d);
  rho0(ilo * d + ilo) = 1.0;

  for (int m : lengths) {
    double mean = 0.0;
    for (int r = 0; r < n_random; ++r) {
      Eigen::VectorXcd rho = rho0;
      Eigen::Matrix2cd composite = Eigen::Matrix2cd::Identity();
      for (int g = 0; g < m; ++g) {
        const int c = int(rng() % 24);
        rho = cliff_super[c] * rho;
        if (depol.size() > 0) rho = depol * rho;
        composite = group.ideal[c] * composite;
      }
      const int inv = group.find(composite.adjoint());
      rho = cliff_super[inv] * rho;
      if (depol.size() > 0) rho = depol * rho;
      mean += rho(ilo * d + ilo).real();
    }
    out.survival.push_back(mean / n_random);
  }

  // fit A p^m + B
  double b = *std::min_element(out.survival.begin(), out.survival.end());
  b = std::min(b, 0.5);
  double a = out.survival.front() - b;
  double p = 0.999;
  if (out.survival.size() >= 2 && a > 1e-6) {
    const double r = (out.survival.back() - b) / a;
    if (r > 0 && r < 1) {
      p = std::pow(r, 1.0 / std::max(1, lengths.back() - lengths.front()));
    }
  }
  // Gauss-Newton on (a, b, p)
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < out.survival.size(); ++i) {
      const double m = lengths[i];
      const double pm = std::pow(p, m);
      const double res = a * pm + b - out.survival[i];
      Eigen::Vector3d grad(pm, 1.0, a * m * std::pow(p, m - 1));
      jtj += grad * grad.transpose();
      jtr += grad * res;
    }
    jtj += 1e-12 * Eigen::Matrix3d::Identity();
    const Eigen::Vector3d step = jtj.ldlt().solve(jtr);
    a -= step(0);
    b -= step(1);
    p -= step(2);
    p = std::clamp(p, 1e-6, 1.0);
    if (step.cwiseAbs().maxCoeff() < 1e-12) break;
  }
  double rms = 0.0;
  for (std::size_t i = 0; i < out.survival.size(); ++i) {
    const double res = a * std::pow(p, double(lengths[i])) + b - out.survival[i];
    rms += res * res;
  }
  out.fit_rms = std::sqrt(rms / out.survival.size());
  if (out.fit_rms > 0.05) {
    throw FitFailure("RB decay is not exponential within noise");
  }
  out.p = p;
  out.avg_fidelity = 1.0 - (1.0 - p) / 2.0;
  return out;
}

// ---------------------------------------------------------------------------
// Pauli-term synthesis
// ---------------------------------------------------------------------------

std::map<std::string, double> propagator_log_pauli(
    const hilbert::Operator& u_block4, double duration_s) {
  // polar-unitarize, then take the principal log
  Eigen::JacobiSVD<Eigen::Matrix4cd> svd(
      Eigen::Matrix4cd(u_block4), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix4cd u = svd.matrixU() * svd.matrixV().adjoint();
  Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(u);
  Eigen::Matrix4cd h = Eigen::Matrix4cd::Zero();
  const Eigen::Matrix4cd v = es.eigenvectors();
  Eigen::Vector4cd lam;
  for (int i = 0; i < 4; ++i) {
    const double phase = std::arg(es.eigenvalues()(i));
    lam(i) = -phase / (2.0 * kPi * duration_s);
  }
  h = v * lam.asDiagonal() * v.adjoint();

  std::map<std::string, double> out;
  for (const auto& label : pauli_labels()) {
    out[label] = (pauli_product(label) * h).trace().real() / 4.0;
  }
  return out;
}

namespace {

hilbert::Operator c0_block(const hilbert::Operator& u,
                           const pulses::FrameLedger& ledger,
                           const hilbert::SpaceSpec& space) {
  const auto corr = pulses::diagonal_unitary_of(ledger, space);
  const hilbert::Operator uc = corr * u;
  const auto labels = computational_labels(0);
  hilbert::Operator b(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      b(i, j) = uc(space.index_of_label(labels[i]),
                   space.index_of_label(labels[j]));
    }
  }
  return b;
}

std::map<std::string, double> synth_measure(const pulses::Schedule& s,
                                            const SimContext& sim,
                                            double duration) {
  const auto r = sim.run(s);
  const auto ledger = pulses::ledger_at(s, s.end_time_s());
  return propagator_log_pauli(c0_block(r.u_interaction, ledger, sim.space),
                              duration);
}

void append_diag_cancellation(pulses::Schedule& s, const SimContext& sim,
                              const std::string& target_term,
                              double duration) {
  // cancel leftover diagonal phases at the end of the pulse with frame
  // updates (keeps the target's own diagonal part when it has one)
  const auto r = sim.run(s);
  std::array<double, 8> phases{};
  for (int cube = 0; cube < 8; ++cube) {
    std::string label;
    label += char('0' + ((cube >> 2) & 1));
    label += char('0' + ((cube >> 1) & 1));
    label += char('0' + (cube & 1));
    const int i = sim.space.index_of_label(label);
    phases[cube] = -std::arg(r.u_interaction(i, i));
  }
  (void)target_term;
  const double g = phases[0];
  for (auto& p : phases) p -= g;
  const auto ledger = pulses::ledger_from_state_phases(phases);
  for (const auto& [label, ph] : ledger.phase_rad) {
    if (ph != 0.0) s.add_frame_update({duration, label, ph});
  }
}

struct RamanPair {
  bool bswap;        // false: exchange pair, true: pair (double-excitation)
  double strength;   // signed target coefficient of (XX+-YY)/2-type term
  double phase;      // relative drive phase selecting XX vs XY flavors
  double delta;      // single-photon detuning
};

void add_raman_pair(pulses::Schedule& s, const RamanPair& pair,
                    const SimContext& sim, double duration) {
  const auto& cond = sim.cond_freqs;
  // smooth turn-on keeps the intermediate state virtual; flat-top ramps are
  // too fast against the 30 MHz detunings
  const auto shape = pulses::Shape::kCosine;
  pulses::Envelope unit{shape, 1.0, duration, 0.0};
  const double sq_unit = cosine_sq_area(unit);
  // |strength| (XX +- YY) couples the block states with element 2|strength|;
  // the pair generates Omega^2/(4 delta), time-averaged over the envelope
  const double amp = std::sqrt(8.0 * std::abs(pair.strength) *
                               std::abs(pair.delta) * duration / sq_unit);
  double phase_a = pair.phase;
  if (pair.strength < 0.0) phase_a += kPi;

  pulses::Tone ta, tb;
  if (!pair.bswap) {
    ta.carrier_hz = cond.at("A00");
    ta.target = "A00";
    ta.detuning_hz = -pair.delta;
    tb.carrier_hz = cond.at("0B0");
    tb.target = "0B0";
    tb.detuning_hz = -pair.delta;
  } else {
    ta.carrier_hz = cond.at("A10");
    ta.target = "A10";
    ta.detuning_hz = +pair.delta;
    tb.carrier_hz = cond.at("0B0");
    tb.target = "0B0";
    tb.detuning_hz = -pair.delta;
  }
  ta.phase_rad = phase_a;
  tb.phase_rad = 0.0;
  ta.envelope = {shape, amp, duration, 0.0};
  tb.envelope = {shape, amp, duration, 0.0};
  s.add_tone(std::move(ta));
  s.add_tone(std::move(tb));
}

}  // namespace

SynthesisResult synthesize_pauli_term(const std::string& term,
                                      double strength_hz, const SimContext& sim,
                                      double duration_s) {
  if (term.size() != 2) throw UnsupportedTerm(term);
  pauli_index(term[0]);
  pauli_index(term[1]);

  SynthesisResult out;
  pulses::Schedule& s = out.schedule;
  s.total_duration_s = duration_s;
  const CompileOptions options;

  const bool a_diag = term[0] == 'I' || term[0] == 'Z';
  const bool b_diag = term[1] == 'I' || term[1] == 'Z';

  if (a_diag && b_diag) {
    // diagonal term: virtual frame updates implementing exp(-2 pi i s P tau)
    if (term != "II") {
      const Eigen::Matrix4cd p = pauli_product(term);
      std::array<double, 8> phases{};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const double eig = p(2 * a + b, 2 * a + b).real();
          const double ph = -2.0 * kPi * strength_hz * duration_s * eig;
          phases[a * 4 + b * 2 + 0] = ph;
          phases[a * 4 + b * 2 + 1] = ph;  // C = 1 copy
        }
      }
      const double g = phases[0];
      for (auto& ph : phases) ph -= g;
      const auto ledger = pulses::ledger_from_state_phases(phases);
      for (const auto& [label, ph] : ledger.phase_rad) {
        if (ph != 0.0) s.add_frame_update({duration_s, label, ph});
      }
    }
  } else if (a_diag != b_diag) {
    // single driven qubit, possibly Z-conditioned on the other
    const int driven = a_diag ? 1 : 0;
    const char axis = a_diag ? term[1] : term[0];
    const char other = a_diag ? term[0] : term[1];
    // tone phase -phi drives sigma_phi; Y needs -pi/2
    const double phi = axis == 'X' ? 0.0 : -kPi / 2.0;
    // flat-top tones at both conditional transitions (C = 0)
    pulses::Envelope env{pulses::Shape::kFlatTop, 1.0, duration_s, 0.0};
    const double area_unit = pulses::envelope_area(env);
    // H = (lambda s(t)/2) sigma_phi per condition; time-average matches
    // strength when the area equals 2 s tau
    const double amp = 2.0 * std::abs(strength_hz) * duration_s / area_unit;
    for (int cond_v = 0; cond_v < 2; ++cond_v) {
      std::array<int, 3> occ{};
      occ[driven == 0 ? 1 : 0] = cond_v;
      const auto label = transition_label(driven, occ);
      pulses::Tone t;
      t.carrier_hz = sim.cond_freqs.at(label);
      t.target = label;
      t.phase_rad = phi;
      if (strength_hz < 0.0) t.phase_rad += kPi;
      if (other == 'Z' && cond_v == 1) t.phase_rad += kPi;
      t.envelope = {pulses::Shape::kFlatTop, amp, duration_s, 0.0};
      s.add_tone(std::move(t));
    }
    append_diag_cancellation(s, sim, term, duration_s);
  } else {
    // Two off-diagonal letters: combine the exchange sector spanned by
    // (XX+YY)/2 and (XY-YX)/2 with the pair sector spanned by (XX-YY)/2
    // and (XY+YX)/2. Each Raman pair is probed once to measure its flavor
    // angle and magnitude, then its drive phase and amplitude are set.
    struct SectorTarget {
      double exch_cos, exch_sin, pair_cos, pair_sin;
    };
    SectorTarget want{};
    const double sgn = strength_hz >= 0.0 ? 1.0 : -1.0;
    const double mag = std::abs(strength_hz);
    if (term == "XX") {
      want = {sgn, 0, sgn, 0};
    } else if (term == "YY") {
      want = {sgn, 0, -sgn, 0};
    } else if (term == "XY") {
      want = {0, sgn, 0, sgn};
    } else {  // YX
      want = {0, -sgn, 0, sgn};
    }

    auto sector = [&](const std::map<std::string, double>& c, bool bswap) {
      Eigen::Vector2d v;
      if (!bswap) {
        v << c.at("XX") + c.at("YY"), c.at("XY") - c.at("YX");
      } else {
        v << c.at("XX") - c.at("YY"), c.at("XY") + c.at("YX");
      }
      return v;
    };

    std::array<double, 2> dirs{1.0, 1.0};
    for (const bool bswap : {false, true}) {
      const Eigen::Vector2d target =
          mag * (bswap ? Eigen::Vector2d(want.pair_cos, want.pair_sin)
                       : Eigen::Vector2d(want.exch_cos, want.exch_sin));
      const double delta = bswap ? 30e6 : 32e6;
      // probe the pair alone at phases 0 and pi/2
      pulses::Schedule p0, p90;
      p0.total_duration_s = duration_s;
      p90.total_duration_s = duration_s;
      add_raman_pair(p0, {bswap, mag, 0.0, delta}, sim, duration_s);
      add_raman_pair(p90, {bswap, mag, kPi / 2.0, delta}, sim, duration_s);
      const Eigen::Vector2d v0 =
          sector(synth_measure(p0, sim, duration_s), bswap);
      const Eigen::Vector2d v90 =
          sector(synth_measure(p90, sim, duration_s), bswap);
      const double a0 = std::atan2(v0(1), v0(0));
      const double a90 = std::atan2(v90(1), v90(0));
      // rotation direction of the flavor angle per unit drive phase
      double diff = a90 - a0;
      while (diff > kPi) diff -= 2.0 * kPi;
      while (diff < -kPi) diff += 2.0 * kPi;
      const double dir = diff >= 0.0 ? 1.0 : -1.0;
      const double theta_t = std::atan2(target(1), target(0));
      const double phase = (theta_t - a0) / dir;
      const double scale = std::sqrt(target.norm() / v0.norm());

      RamanPair pair{bswap, mag, phase, delta};
      const std::size_t first = s.tones.size();
      add_raman_pair(s, pair, sim, duration_s);
      s.tones[first].envelope.amplitude_hz *= scale;
      s.tones[first + 1].envelope.amplitude_hz *= scale;
      dirs[bswap ? 1 : 0] = dir;
    }

    // joint refinement: the pairs Stark-shift each other, which detunes the
    // two-photon conditions and rotates the flavor angles; alternate a
    // detuning step with per-pair phase/amplitude corrections
    const Eigen::Vector2d t_e = mag * Eigen::Vector2d(want.exch_cos, want.exch_sin);
    const Eigen::Vector2d t_p = mag * Eigen::Vector2d(want.pair_cos, want.pair_sin);
    for (int iter = 0; iter < 16; ++iter) {
      const auto coeffs = synth_measure(s, sim, duration_s);
      const double exch_split = coeffs.at("ZI") - coeffs.at("IZ");
      const double pair_split = coeffs.at("ZI") + coeffs.at("IZ");
      const Eigen::Vector2d v_e = sector(coeffs, false);
      const Eigen::Vector2d v_p = sector(coeffs, true);
      const bool diag_ok = std::abs(exch_split) < 0.01 * mag &&
                           std::abs(pair_split) < 0.01 * mag;
      const bool flavor_ok =
          (v_e - t_e).norm() < 0.02 * mag && (v_p - t_p).norm() < 0.02 * mag;
      if (diag_ok && flavor_ok) break;

      // tone order: exchange pair = tones 0, 1 ; bswap pair = tones 2, 3
      const double damp = 0.8;
      s.tones[0].detuning_hz -= damp * 0.5 * exch_split;
      s.tones[1].detuning_hz += damp * 0.5 * exch_split;
      s.tones[2].detuning_hz -= damp * 0.5 * pair_split;
      s.tones[3].detuning_hz -= damp * 0.5 * pair_split;

      auto correct_pair = [&](std::size_t first, const Eigen::Vector2d& v,
                              const Eigen::Vector2d& t, double dir) {
        double dth = std::atan2(t(1), t(0)) - std::atan2(v(1), v(0));
        while (dth > kPi) dth -= 2.0 * kPi;
        while (dth < -kPi) dth += 2.0 * kPi;
        s.tones[first].phase_rad += damp * dth / dir;
        const double scale =
            std::sqrt(std::clamp(t.norm() / std::max(v.norm(), 1e-3 * mag),
                                 0.25, 4.0));
        s.tones[first].envelope.amplitude_hz *= scale;
        s.tones[first + 1].envelope.amplitude_hz *= scale;
      };
      correct_pair(0, v_e, t_e, dirs[0]);
      correct_pair(2, v_p, t_p, dirs[1]);
    }
    append_diag_cancellation(s, sim, term, duration_s);
  }

  // final report
  if (term == "II") {
    out.generated_hz = {};
    for (const auto& label : pauli_labels()) out.generated_hz[label] = 0.0;
    out.target_fraction = 1.0;
    return out;
  }
  out.generated_hz = synth_measure(s, sim, duration_s);
  double norm2 = 0.0;
  for (const auto& [label, c] : out.generated_hz) {
    if (label == "II") continue;
    norm2 += c * c;
  }
  out.target_fraction =
      norm2 > 0 ? std::abs(out.generated_hz.at(term)) / std::sqrt(norm2) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// qudit shift gates and dynamical decoupling
// ---------------------------------------------------------------------------

std::vector<std::string> default_qudit_ordering(int d) {
  switch (d) {
    case 3:
      return {"000", "100", "010"};
    case 4:
      return {"000", "100", "110", "010"};
    case 6:
      return {"100", "000", "001", "011", "010", "110"};
    case 8:
      return {"000", "001", "011", "010", "110", "100", "101", "111"};
    default:
      throw ValidationError("qudit dimension must be one of 3, 4, 6, 8");
  }
}

namespace {

int differing_mode(const std::string& a, const std::string& b) {
  int mode = -1;
  for (int m = 0; m < 3; ++m) {
    if (a[m] != b[m]) {
      if (mode >= 0) return -1;  // more than one flip
      mode = m;
    }
  }
  return mode;
}

GateSpec swap_gate(const std::string& a, const std::string& b) {
  const int mode = differing_mode(a, b);
  if (mode < 0) {
    throw InvalidOrdering("states " + a + " and " + b +
                          " are not single-transition neighbors");
  }
  GateSpec g;
  g.kind = GateKind::kCCR;
  g.target_mode = mode;
  g.theta = kPi;
  g.phi = 0.0;
  for (int m = 0; m < 3; ++m) {
    if (m != mode) g.condition[m] = a[m] - '0';
  }
  return g;
}

}  // namespace

std::vector<GateSpec> qudit_x(int d, const std::vector<std::string>& ordering) {
  if (d != 3 && d != 4 && d != 6 && d != 8) {
    throw ValidationError("qudit dimension must be one of 3, 4, 6, 8");
  }
  if (int(ordering.size()) != d) {
    throw InvalidOrdering("ordering size does not match d");
  }
  for (const auto& s : ordering) {
    if (s.size() != 3 || s.find_first_not_of("01") != std::string::npos) {
      throw InvalidOrdering("states must be 3-bit labels: " + s);
    }
  }
  std::vector<GateSpec> gates;
  bool path_ok = true;
  for (int k = 0; k + 1 < d; ++k) {
    if (differing_mode(ordering[k], ordering[k + 1]) < 0) path_ok = false;
  }
  if (path_ok) {
    // swaps from the tail toward the head move each state one step forward
    for (int k = d - 2; k >= 0; --k) {
      gates.push_back(swap_gate(ordering[k], ordering[k + 1]));
    }
    return gates;
  }
  if (d == 3 && differing_mode(ordering[0], ordering[1]) >= 0 &&
      differing_mode(ordering[0], ordering[2]) >= 0) {
    // pivot construction: the cube graph is bipartite, so a three-state
    // cycle cannot be a single-transition path; route through the head
    gates.push_back(swap_gate(ordering[0], ordering[1]));
    gates.push_back(swap_gate(ordering[0], ordering[2]));
    return gates;
  }
  throw InvalidOrdering("consecutive states are not single-transition neighbors");
}

pulses::Schedule dd_schedule(int d, int n, const std::vector<std::string>& ordering,
                             double total_s, const circuit::ModeParams& params,
                             double gate_s, const SimContext* sim,
                             const CompileOptions& options) {
  if (n < 1) throw ValidationError("need at least one repetition");
  auto base_gates = qudit_x(d, ordering);
  for (auto& g : base_gates) g.duration_s = gate_s;

  // per-transition calibration (Stark frame corrections), computed once
  std::map<std::string, CalibrationRecord> cals;
  if (sim != nullptr) {
    for (const auto& g : base_gates) {
      std::array<int, 3> occ{};
      for (const auto& [m, v] : g.condition) occ[m] = v;
      const auto label = transition_label(g.target_mode, occ);
      if (!cals.count(label)) {
        cals[label] = extract_stark_corrections(g, *sim, {}, options);
      }
    }
  }

  const int pulses_total = n * d * int(base_gates.size());
  const double busy = pulses_total * gate_s;
  if (busy > total_s) {
    throw ValidationError("DD sequence does not fit in the total duration");
  }
  const double gap = (total_s - busy) / pulses_total;

  pulses::Schedule out;
  double t = 0.5 * gap;
  for (int rep = 0; rep < n * d; ++rep) {
    for (const auto& g : base_gates) {
      std::array<int, 3> occ{};
      for (const auto& [m, v] : g.condition) occ[m] = v;
      const auto label = transition_label(g.target_mode, occ);
      const CalibrationRecord* cal =
          cals.count(label) ? &cals.at(label) : nullptr;
      auto piece = compile(g, params, cal, options);
      for (auto tone : piece.tones) {
        tone.start_s += t;
        out.add_tone(std::move(tone));
      }
      for (auto u : piece.frame_updates) {
        u.time_s += t;
        out.add_frame_update(std::move(u));
      }
      t += gate_s + gap;
    }
  }
  out.total_duration_s = std::max(out.total_duration_s, total_s);
  return out;
}

}  // namespace trimon::gates
