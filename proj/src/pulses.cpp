#include "trimon/pulses.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "trimon/constants.hpp"
#include "trimon/errors.hpp"

namespace trimon::pulses {

void Envelope::validate() const {
  if (!(duration_s > 0.0)) throw ValidationError("envelope duration must be > 0");
  if (amplitude_hz < 0.0) throw ValidationError("envelope amplitude must be >= 0");
}

std::complex<double> sample(const Envelope& env, double t) {
  if (t < 0.0 || t > env.duration_s) return {0.0, 0.0};
  const double a = env.amplitude_hz;
  const double tau = env.duration_s;
  if (env.shape == Shape::kCosine) {
    const double ph = 2.0 * kPi * t / tau;
    const double re = 0.5 * a * (1.0 - std::cos(ph));
    // derivative quadrature, normalized so the peak is drag * A/2
    const double im = env.drag * 0.5 * a * std::sin(ph);
    return {re, im};
  }
  // flat top: half-cosine ramps of fixed length on both sides
  const double r = std::min(kFlatTopRampS, 0.5 * tau);
  double re = a, dre = 0.0;
  if (t < r) {
    re = 0.5 * a * (1.0 - std::cos(kPi * t / r));
    dre = 0.5 * a * std::sin(kPi * t / r);
  } else if (t > tau - r) {
    re = 0.5 * a * (1.0 - std::cos(kPi * (tau - t) / r));
    dre = -0.5 * a * std::sin(kPi * (tau - t) / r);
  }
  return {re, env.drag * dre};
}

double envelope_area(const Envelope& env) {
  if (env.shape == Shape::kCosine) return 0.5 * env.amplitude_hz * env.duration_s;
  const double r = std::min(kFlatTopRampS, 0.5 * env.duration_s);
  return env.amplitude_hz * (env.duration_s - r);
}

double Schedule::end_time_s() const {
  double t = total_duration_s;
  for (const auto& tone : tones) t = std::max(t, tone.end_s());
  for (const auto& u : frame_updates) t = std::max(t, u.time_s);
  return t;
}

void Schedule::add_tone(Tone t) {
  t.envelope.validate();
  if (!(t.frequency_hz() > 0.0)) {
    throw ValidationError("tone carrier + detuning must be positive");
  }
  if (!t.target.empty() && !is_transition_label(t.target)) {
    throw UnknownTransition(t.target);
  }
  tones.push_back(std::move(t));
  total_duration_s = std::max(total_duration_s, tones.back().end_s());
}

void Schedule::add_frame_update(FrameUpdate u) {
  if (!is_transition_label(u.transition)) throw UnknownTransition(u.transition);
  frame_updates.push_back(std::move(u));
  std::stable_sort(frame_updates.begin(), frame_updates.end(),
                   [](const FrameUpdate& a, const FrameUpdate& b) {
                     return a.time_s < b.time_s;
                   });
  total_duration_s = std::max(total_duration_s, frame_updates.back().time_s);
}

void Schedule::validate() const {
  for (const auto& t : tones) {
    t.envelope.validate();
    if (!(t.frequency_hz() > 0.0)) {
      throw ValidationError("tone carrier + detuning must be positive");
    }
  }
  for (std::size_t i = 1; i < frame_updates.size(); ++i) {
    if (frame_updates[i].time_s < frame_updates[i - 1].time_s) {
      throw ValidationError("frame updates must be sorted by time");
    }
  }
}

const std::array<std::string, 12>& transition_labels() {
  static const std::array<std::string, 12> kLabels = {
      "A00", "A01", "A10", "A11", "0B0", "0B1", "1B0", "1B1",
      "00C", "01C", "10C", "11C"};
  return kLabels;
}

bool is_transition_label(const std::string& label) {
  const auto& all = transition_labels();
  return std::find(all.begin(), all.end(), label) != all.end();
}

TransitionInfo parse_transition(const std::string& label) {
  if (!is_transition_label(label)) throw UnknownTransition(label);
  TransitionInfo info;
  static const char kModeChar[3] = {'A', 'B', 'C'};
  info.mode = -1;
  for (int m = 0; m < 3; ++m) {
    if (label[m] == kModeChar[m]) info.mode = m;
  }
  for (int m = 0; m < 3; ++m) {
    info.lower_occ[m] = (m == info.mode) ? 0 : label[m] - '0';
  }
  auto make_label = [&](int occupied) {
    std::string s;
    for (int m = 0; m < 3; ++m) {
      s += (m == info.mode) ? char('0' + occupied) : label[m];
    }
    return s;
  };
  info.lower_label = make_label(0);
  info.upper_label = make_label(1);
  return info;
}

namespace {

double wrap_2pi(double x) {
  x = std::fmod(x, 2.0 * kPi);
  if (x < 0.0) x += 2.0 * kPi;
  return x;
}

}  // namespace

double FrameLedger::phase(const std::string& label) const {
  const auto it = phase_rad.find(label);
  return it == phase_rad.end() ? 0.0 : it->second;
}

FrameLedger apply_virtual_z(const FrameLedger& ledger, const std::string& label,
                            double angle_rad) {
  if (!is_transition_label(label)) throw UnknownTransition(label);
  FrameLedger out = ledger;
  out.phase_rad[label] = wrap_2pi(out.phase(label) + angle_rad);
  return out;
}

FrameLedger ledger_at(const Schedule& schedule, double t) {
  FrameLedger ledger;
  for (const auto& u : schedule.frame_updates) {
    if (u.time_s <= t) ledger = apply_virtual_z(ledger, u.transition, u.phase_rad);
  }
  return ledger;
}

std::array<double, 8> state_phases_of(const FrameLedger& ledger) {
  // Vertex potential on the cube of 8 computational states: the phase on
  // edge (lower -> upper) of each transition must equal the ledger phase.
  // Assign along a spanning tree from |000>, then verify every edge.
  std::array<double, 8> theta{};
  std::array<bool, 8> known{};
  auto idx = [](const std::array<int, 3>& occ) {
    return occ[0] * 4 + occ[1] * 2 + occ[2];
  };
  known[0] = true;
  // fixed-order BFS over the 12 edges until all vertices are reached
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& label : transition_labels()) {
      const auto info = parse_transition(label);
      auto up = info.lower_occ;
      up[info.mode] = 1;
      const int lo = idx(info.lower_occ), hi = idx(up);
      const double ph = ledger.phase(label);
      if (known[lo] && !known[hi]) {
        theta[hi] = wrap_2pi(theta[lo] + ph);
        known[hi] = true;
        progress = true;
      } else if (known[hi] && !known[lo]) {
        theta[lo] = wrap_2pi(theta[hi] - ph);
        known[lo] = true;
        progress = true;
      }
    }
  }
  // cube is connected, so everything is known; verify cycle consistency
  for (const auto& label : transition_labels()) {
    const auto info = parse_transition(label);
    auto up = info.lower_occ;
    up[info.mode] = 1;
    const int lo = idx(info.lower_occ), hi = idx(up);
    const double diff = wrap_2pi(theta[hi] - theta[lo] - ledger.phase(label));
    if (std::min(diff, 2.0 * kPi - diff) > 1e-9) {
      throw InconsistentLedger("cycle sum on transition " + label +
                               " is nonzero");
    }
  }
  return theta;
}

FrameLedger ledger_from_state_phases(const std::array<double, 8>& phases) {
  FrameLedger ledger;
  auto idx = [](const std::array<int, 3>& occ) {
    return occ[0] * 4 + occ[1] * 2 + occ[2];
  };
  for (const auto& label : transition_labels()) {
    const auto info = parse_transition(label);
    auto up = info.lower_occ;
    up[info.mode] = 1;
    const double ph =
        wrap_2pi(phases[idx(up)] - phases[idx(info.lower_occ)]);
    if (ph != 0.0) ledger.phase_rad[label] = ph;
  }
  return ledger;
}

hilbert::Operator diagonal_unitary_of(const FrameLedger& ledger,
                                      const hilbert::SpaceSpec& space) {
  const auto theta = state_phases_of(ledger);
  const int d = space.dim();
  hilbert::Operator u = hilbert::Operator::Identity(d, d);
  for (int i = 0; i < d; ++i) {
    const auto occ = space.occupations(i);
    if (occ[0] > 1 || occ[1] > 1 || occ[2] > 1) continue;
    const int cube = occ[0] * 4 + occ[1] * 2 + occ[2];
    u(i, i) = std::exp(std::complex<double>(0.0, theta[cube]));
  }
  return u;
}

double tone_effective_phase(const Schedule& schedule, const Tone& tone) {
  double frame = 0.0;
  if (!tone.target.empty()) {
    frame = ledger_at(schedule, tone.start_s).phase(tone.target);
  }
  return tone.phase_rad - frame;
}

double drive_amplitude(const Schedule& schedule, double t) {
  double d = 0.0;
  for (const auto& tone : schedule.tones) {
    if (t < tone.start_s || t > tone.end_s()) continue;
    const auto s = sample(tone.envelope, t - tone.start_s);
    const double alpha = 2.0 * kPi * tone.frequency_hz() * t +
                         tone_effective_phase(schedule, tone);
    d += s.real() * std::cos(alpha) - s.imag() * std::sin(alpha);
  }
  return d;
}

hilbert::Operator drive_hamiltonian(const Schedule& schedule, double t,
                                    const std::array<double, 3>& couplings,
                                    const hilbert::SpaceSpec& space) {
  const double d = drive_amplitude(schedule, t);
  const int n = space.dim();
  hilbert::Operator h = hilbert::Operator::Zero(n, n);
  if (d == 0.0) return h;
  for (int mu = 0; mu < 3; ++mu) {
    if (couplings[mu] == 0.0) continue;
    const auto a = hilbert::lowering_op(space, mu);
    h += (d * couplings[mu]) * (a + a.adjoint());
  }
  return h;
}

nlohmann::json to_json(const Schedule& schedule) {
  nlohmann::json j;
  j["tones"] = nlohmann::json::array();
  for (const auto& t : schedule.tones) {
    nlohmann::json jt = {
        {"carrier_ghz", t.carrier_hz / 1e9},
        {"phase_rad", t.phase_rad},
        {"start_ns", t.start_s * 1e9},
        {"duration_ns", t.envelope.duration_s * 1e9},
        {"amplitude_mhz", t.envelope.amplitude_hz / 1e6},
        {"shape", t.envelope.shape == Shape::kCosine ? "cosine" : "flat_top"},
        {"drag", t.envelope.drag},
    };
    if (t.detuning_hz != 0.0) jt["detuning_mhz"] = t.detuning_hz / 1e6;
    if (!t.target.empty()) jt["target"] = t.target;
    j["tones"].push_back(std::move(jt));
  }
  j["frame_updates"] = nlohmann::json::array();
  for (const auto& u : schedule.frame_updates) {
    j["frame_updates"].push_back({{"t_ns", u.time_s * 1e9},
                                  {"transition", u.transition},
                                  {"phase_rad", u.phase_rad}});
  }
  j["total_duration_ns"] = schedule.total_duration_s * 1e9;
  return j;
}

Schedule schedule_from_json(const nlohmann::json& j) {
  Schedule s;
  for (const auto& jt : j.value("tones", nlohmann::json::array())) {
    Tone t;
    t.carrier_hz = jt.at("carrier_ghz").get<double>() * 1e9;
    t.phase_rad = jt.value("phase_rad", 0.0);
    t.start_s = jt.value("start_ns", 0.0) * 1e-9;
    t.detuning_hz = jt.value("detuning_mhz", 0.0) * 1e6;
    t.target = jt.value("target", std::string());
    t.envelope.duration_s = jt.at("duration_ns").get<double>() * 1e-9;
    t.envelope.amplitude_hz = jt.at("amplitude_mhz").get<double>() * 1e6;
    t.envelope.drag = jt.value("drag", 0.0);
    const std::string shape = jt.value("shape", "cosine");
    if (shape == "cosine") {
      t.envelope.shape = Shape::kCosine;
    } else if (shape == "flat_top") {
      t.envelope.shape = Shape::kFlatTop;
    } else {
      throw ValidationError("unknown envelope shape: " + shape);
    }
    s.add_tone(std::move(t));
  }
  for (const auto& ju : j.value("frame_updates", nlohmann::json::array())) {
    s.add_frame_update({ju.at("t_ns").get<double>() * 1e-9,
                        ju.at("transition").get<std::string>(),
                        ju.at("phase_rad").get<double>()});
  }
  s.total_duration_s =
      std::max(s.total_duration_s, j.value("total_duration_ns", 0.0) * 1e-9);
  return s;
}

}  // namespace trimon::pulses
