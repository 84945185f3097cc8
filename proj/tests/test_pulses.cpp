#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>
#include <random>

#include "trimon/constants.hpp"
#include "trimon/pulses.hpp"

using namespace trimon;
using namespace trimon::pulses;

TEST_CASE("cosine envelope endpoints and peak") {
  Envelope env{Shape::kCosine, 8e6, 60e-9, 0.5};
  CHECK(std::abs(sample(env, 0.0)) == 0.0);
  CHECK(std::abs(sample(env, env.duration_s)) < 1e-9);
  const auto peak = sample(env, env.duration_s / 2.0);
  CHECK(peak.real() == doctest::Approx(8e6));
  CHECK(peak.imag() == doctest::Approx(0.0).epsilon(1e-12).scale(8e6));
  CHECK(std::abs(sample(env, -1e-9)) == 0.0);
  CHECK(std::abs(sample(env, env.duration_s + 1e-9)) == 0.0);
}

TEST_CASE("envelope area matches quadrature") {
  for (const auto shape : {Shape::kCosine, Shape::kFlatTop}) {
    Envelope env{shape, 5e6, 80e-9, 0.0};
    // Simpson quadrature oracle
    const int n = 4000;
    const double h = env.duration_s / n;
    double integral = sample(env, 0.0).real() + sample(env, env.duration_s).real();
    for (int k = 1; k < n; ++k) {
      integral += (k % 2 ? 4.0 : 2.0) * sample(env, k * h).real();
    }
    integral *= h / 3.0;
    CHECK(envelope_area(env) == doctest::Approx(integral).epsilon(1e-8));
  }
  Envelope cosine{Shape::kCosine, 5e6, 80e-9, 0.0};
  CHECK(envelope_area(cosine) == doctest::Approx(0.5 * 5e6 * 80e-9));
}

TEST_CASE("flat top holds its plateau") {
  Envelope env{Shape::kFlatTop, 4e6, 60e-9, 0.0};
  CHECK(sample(env, 30e-9).real() == doctest::Approx(4e6));
  CHECK(sample(env, 15e-9).real() == doctest::Approx(4e6));
  CHECK(std::abs(sample(env, 0.0)) == 0.0);
  CHECK(std::abs(sample(env, 60e-9)) < 1e-9);
}

TEST_CASE("transition labels and parsing") {
  CHECK(transition_labels().size() == 12);
  CHECK(is_transition_label("0B1"));
  CHECK(!is_transition_label("B01"));
  CHECK(!is_transition_label("000"));
  const auto info = parse_transition("1B0");
  CHECK(info.mode == 1);
  CHECK(info.lower_label == "100");
  CHECK(info.upper_label == "110");
  CHECK_THROWS_AS(parse_transition("xyz"), UnknownTransition);
}

TEST_CASE("virtual z composition") {
  FrameLedger ledger;
  const auto same = apply_virtual_z(ledger, "0B0", 0.0);
  CHECK(same.phase("0B0") == 0.0);

  auto l2 = apply_virtual_z(ledger, "A00", kPi / 3.0);
  l2 = apply_virtual_z(l2, "A00", -kPi / 3.0);
  CHECK(l2.phase("A00") == doctest::Approx(0.0));

  CHECK_THROWS_AS(apply_virtual_z(ledger, "A0", 0.1), UnknownTransition);
}

TEST_CASE("diagonal unitary: identity and CZ") {
  const auto space = hilbert::SpaceSpec::uniform(2);
  FrameLedger ledger;
  const auto ident = diagonal_unitary_of(ledger, space);
  CHECK((ident - hilbert::Operator::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);

  // CZ on (A, B): pi on every transition entering an |11*> state
  for (const auto& label : {"A10", "A11", "1B0", "1B1"}) {
    ledger = apply_virtual_z(ledger, label, kPi);
  }
  const auto u = diagonal_unitary_of(ledger, space);
  // AB subspace with C = 0: diag(1, 1, 1, -1)
  CHECK(u(space.index_of_label("000"), 0).real() == doctest::Approx(1.0));
  CHECK(u(space.index_of_label("010"), space.index_of_label("010")).real() ==
        doctest::Approx(1.0));
  CHECK(u(space.index_of_label("100"), space.index_of_label("100")).real() ==
        doctest::Approx(1.0));
  CHECK(u(space.index_of_label("110"), space.index_of_label("110")).real() ==
        doctest::Approx(-1.0));
  // and the C = 1 copy
  CHECK(u(space.index_of_label("111"), space.index_of_label("111")).real() ==
        doctest::Approx(-1.0));
}

TEST_CASE("diagonal unitary: CCZ from one frame and its companions") {
  const auto space = hilbert::SpaceSpec::uniform(2);
  FrameLedger ledger;
  for (const auto& label : {"1B1", "A11", "11C"}) {
    ledger = apply_virtual_z(ledger, label, kPi);
  }
  const auto u = diagonal_unitary_of(ledger, space);
  for (int i = 0; i < 8; ++i) {
    const double expect = (space.label_of(i) == "111") ? -1.0 : 1.0;
    CHECK(u(i, i).real() == doctest::Approx(expect));
  }
}

TEST_CASE("inconsistent ledger rejected") {
  FrameLedger ledger = apply_virtual_z({}, "1B1", kPi);
  CHECK_THROWS_AS(state_phases_of(ledger), InconsistentLedger);
}

TEST_CASE("state phases round trip") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  for (int trial = 0; trial < 20; ++trial) {
    std::array<double, 8> phases{};
    for (int i = 1; i < 8; ++i) phases[i] = u(rng);
    const auto ledger = ledger_from_state_phases(phases);
    const auto back = state_phases_of(ledger);
    for (int i = 0; i < 8; ++i) {
      double d = std::fmod(back[i] - phases[i], 2.0 * kPi);
      if (d < 0) d += 2.0 * kPi;
      CHECK(std::min(d, 2.0 * kPi - d) < 1e-9);
    }
  }
}

TEST_CASE("frame updates commute and equal-time reordering is harmless") {
  // a virtual Z(0.3) on qubit A (all four A frames) plus a CZ on (A, B)
  std::vector<FrameUpdate> updates;
  for (const auto& label : {"A00", "A01", "A10", "A11"}) {
    updates.push_back({10e-9, label, 0.3});
  }
  for (const auto& label : {"A10", "A11", "1B0", "1B1"}) {
    updates.push_back({10e-9, label, kPi});
  }
  Schedule s1, s2;
  for (const auto& u : updates) s1.add_frame_update(u);
  for (auto it = updates.rbegin(); it != updates.rend(); ++it) {
    s2.add_frame_update(*it);
  }
  const auto space = hilbert::SpaceSpec::uniform(2);
  const auto u1 = diagonal_unitary_of(ledger_at(s1, 20e-9), space);
  const auto u2 = diagonal_unitary_of(ledger_at(s2, 20e-9), space);
  CHECK((u1 - u2).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("drive hamiltonian basics") {
  const auto space = hilbert::SpaceSpec::uniform(2);
  Schedule empty;
  const auto zero = drive_hamiltonian(empty, 5e-9, {1, 1, 1}, space);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

  Schedule s;
  Tone t;
  t.carrier_hz = 5.174e9;
  t.envelope = {Shape::kCosine, 8e6, 60e-9, 0.0};
  s.add_tone(t);

  // single tone with coupling only to mode B is proportional to a_B + a_B^dag
  const auto h = drive_hamiltonian(s, 17e-9, {0, 1, 0}, space);
  const auto ab = hilbert::lowering_op(space, 1);
  const double d = drive_amplitude(s, 17e-9);
  CHECK((h - d * (ab + ab.adjoint())).cwiseAbs().maxCoeff() < 1e-6);

  // Hermitian at arbitrary times with all couplings on
  for (double tt : {3e-9, 21e-9, 42.5e-9, 59e-9}) {
    CHECK(hilbert::is_hermitian(drive_hamiltonian(s, tt, {1, 0.7, 0.4}, space)));
  }
}

TEST_CASE("schedule json round trip") {
  Schedule s;
  Tone t;
  t.carrier_hz = 4.709e9;
  t.phase_rad = 0.25;
  t.detuning_hz = 1.5e6;
  t.target = "A00";
  t.envelope = {Shape::kFlatTop, 12e6, 80e-9, 0.1};
  t.start_s = 20e-9;
  s.add_tone(t);
  s.add_frame_update({100e-9, "0B0", 0.7});

  const auto j = to_json(s);
  const auto back = schedule_from_json(j);
  REQUIRE(back.tones.size() == 1);
  CHECK(back.tones[0].carrier_hz == doctest::Approx(t.carrier_hz));
  CHECK(back.tones[0].detuning_hz == doctest::Approx(t.detuning_hz));
  CHECK(back.tones[0].target == "A00");
  CHECK(back.tones[0].envelope.shape == Shape::kFlatTop);
  CHECK(back.tones[0].envelope.amplitude_hz == doctest::Approx(12e6));
  CHECK(back.tones[0].start_s == doctest::Approx(20e-9));
  REQUIRE(back.frame_updates.size() == 1);
  CHECK(back.frame_updates[0].phase_rad == doctest::Approx(0.7));
  CHECK(back.total_duration_s == doctest::Approx(s.total_duration_s));

  // drive samples agree through the round trip
  for (double tt : {25e-9, 50e-9, 75e-9}) {
    CHECK(drive_amplitude(back, tt) == doctest::Approx(drive_amplitude(s, tt)));
  }
}
