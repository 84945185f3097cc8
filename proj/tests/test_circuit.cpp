#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "trimon/circuit.hpp"
#include "trimon/constants.hpp"
#include "trimon/hilbert.hpp"

using namespace trimon;
using namespace trimon::circuit;

namespace {

CircuitSpec random_spec(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> cap(0.0, 60e-15);
  std::uniform_real_distribution<double> gnd(5e-15, 80e-15);
  std::uniform_real_distribution<double> ej(4e9, 12e9);
  CircuitSpec s;
  for (int i = 0; i < 4; ++i) s.ground_f(i) = gnd(rng);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) s.set_pairwise(i, j, cap(rng));
  }
  for (auto [i, j] : kRingPairs) s.set_junction(i, j, ej(rng));
  return s;
}

}  // namespace

TEST_CASE("maxwell matrix from the bundled design") {
  const auto m = build_maxwell(testing::demo_circuit());
  // node 1 diagonal: 46 + 21 + 4 + 21 fF
  CHECK(m.C(0, 0) == doctest::Approx(92e-15).epsilon(1e-12));
  CHECK(m.C(0, 1) == doctest::Approx(-21e-15).epsilon(1e-12));
  CHECK(m.C(0, 2) == doctest::Approx(-4e-15).epsilon(1e-12));
  // EL row sums are exactly zero by construction
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(m.EL.row(i).sum()) == 0.0);
  }
}

TEST_CASE("maxwell diagonal case: no pairwise caps") {
  CircuitSpec s;
  s.ground_f.setConstant(30e-15);
  s.set_all_junctions(8e9);
  const auto m = build_maxwell(s);
  CHECK((m.C - 30e-15 * Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("maxwell diagonal equals summation oracle on random specs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_spec(rng);
    const auto m = build_maxwell(s);
    for (int k = 0; k < 4; ++k) {
      double touching = s.ground_f(k);
      for (int j = 0; j < 4; ++j) touching += s.pairwise_f(k, j);
      CHECK(m.C(k, k) == doctest::Approx(touching).epsilon(1e-14));
    }
  }
}

TEST_CASE("spec validation rejects bad inputs") {
  CircuitSpec s = testing::demo_circuit();
  s.ground_f(2) = 0.0;
  CHECK_THROWS_AS(build_maxwell(s), ValidationError);

  CircuitSpec s2 = testing::demo_circuit();
  s2.pairwise_f(0, 1) = -1e-15;
  s2.pairwise_f(1, 0) = -1e-15;
  CHECK_THROWS_AS(build_maxwell(s2), ValidationError);

  CircuitSpec s3 = testing::demo_circuit();
  CHECK_THROWS_AS(s3.set_junction(0, 2, 1e9), ValidationError);
}

TEST_CASE("normal modes on a non positive definite C") {
  MaxwellMatrices m;
  m.C = -Eigen::Matrix4d::Identity();
  m.EL.setZero();
  CHECK_THROWS_AS(normal_modes(m), NonPositiveDefinite);
}

TEST_CASE("fully symmetric square has degenerate dipolar modes") {
  CircuitSpec s;
  s.ground_f.setConstant(40e-15);
  for (auto [i, j] : kRingPairs) s.set_pairwise(i, j, 20e-15);
  s.set_pairwise(0, 2, 4e-15);
  s.set_pairwise(1, 3, 4e-15);
  s.set_all_junctions(8e9);
  const auto nm = normal_modes(build_maxwell(s));
  CHECK(nm.frequencies_hz(1) == doctest::Approx(nm.frequencies_hz(2)).epsilon(1e-9));
  bool degenerate_flagged = false;
  for (const auto& w : nm.warnings) {
    if (w.find("DegenerateSpectrum") != std::string::npos) degenerate_flagged = true;
  }
  CHECK(degenerate_flagged);
}

TEST_CASE("normal modes: simultaneous diagonalization invariants") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_spec(rng);
    const auto m = build_maxwell(s);
    const auto nm = normal_modes(m);

    const Eigen::Matrix4d mtcm =
        nm.mode_vectors.transpose() * m.C * nm.mode_vectors;
    CHECK((mtcm - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-10);

    Eigen::Matrix4d mtelm =
        nm.mode_vectors.transpose() * m.EL * nm.mode_vectors;
    const double scale = mtelm.cwiseAbs().maxCoeff();
    Eigen::Matrix4d off = mtelm;
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() < 1e-10 * scale);

    // one zero mode, ascending order
    CHECK(nm.frequencies_hz(0) < 1e-6 * nm.frequencies_hz(3));
    CHECK(nm.frequencies_hz(1) > 1e-3 * nm.frequencies_hz(3));
    for (int i = 0; i < 3; ++i) {
      CHECK(nm.frequencies_hz(i) <= nm.frequencies_hz(i + 1));
    }
  }
}

TEST_CASE("normal modes match a generalized eigenproblem oracle") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = random_spec(rng);
    const auto m = build_maxwell(s);
    const auto nm = normal_modes(m);

    // independent route: EL x = lambda C x via Eigen's generalized solver
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix4d> ges(m.EL, m.C);
    const double fmax = nm.frequencies_hz(3);
    for (int i = 0; i < 4; ++i) {
      const double lam = std::max(ges.eigenvalues()(i), 0.0);
      const double f = std::sqrt(lam * kModeFrequencyFactor);
      if (i == 0) {
        // gauge mode: both routes give zero up to eigensolver noise
        CHECK(nm.frequencies_hz(0) < 1e-6 * fmax);
        CHECK(f < 1e-6 * fmax);
      } else {
        CHECK(nm.frequencies_hz(i) == doctest::Approx(f).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("charging energies: symmetric degeneracy") {
  CircuitSpec s;
  s.ground_f << 40e-15, 40e-15, 40e-15, 40e-15;
  for (auto [i, j] : kRingPairs) s.set_pairwise(i, j, 18e-15);
  s.set_pairwise(0, 2, 5e-15);
  s.set_pairwise(1, 3, 5e-15);
  s.set_all_junctions(8e9);
  const auto ec = effective_charging_energies(s);
  CHECK(ec[0] == doctest::Approx(ec[1]).epsilon(1e-14));
}

TEST_CASE("charging energies: frozen fixture for the bundled design") {
  // Frozen from an independent long-double evaluation of the closed forms
  // (see the oracle below, which recomputes them from scratch).
  std::vector<std::string> warnings;
  const auto ec = effective_charging_energies(testing::demo_circuit(), &warnings);
  CHECK(ec[0] == doctest::Approx(403.54644426e6).epsilon(1e-9));
  CHECK(ec[1] == doctest::Approx(496.67254679e6).epsilon(1e-9));
  CHECK(ec[2] == doctest::Approx(157.79569808e6).epsilon(1e-9));

  // independent long-double oracle
  const long double e = 1.602176634e-19L, h = 6.62607015e-34L;
  const long double cc = 21e-15L, ca = 4e-15L, cb = 3e-15L;
  const long double c11 = 46e-15L, c22 = 30e-15L;
  const long double eca = e * e / (2.0L * (cc + ca) + c11) / h;
  const long double ecb = e * e / (2.0L * (cc + cb) + c22) / h;
  const long double ecc =
      e * e /
      (4.0L * cc + c11 + c22 +
       sqrtl(16.0L * cc * cc + (c11 - c22) * (c11 - c22))) /
      h;
  CHECK(ec[0] == doctest::Approx(double(eca)).epsilon(1e-12));
  CHECK(ec[1] == doctest::Approx(double(ecb)).epsilon(1e-12));
  CHECK(ec[2] == doctest::Approx(double(ecc)).epsilon(1e-12));

  // the bundled design is asymmetric enough to warn (46 vs 53 fF)
  CHECK(!warnings.empty());
}

TEST_CASE("charging energies: C_C -> 0 limit") {
  CircuitSpec s;
  s.ground_f << 50e-15, 50e-15, 50e-15, 50e-15;
  s.set_all_junctions(8e9);  // neighbor caps zero
  const auto ec = effective_charging_energies(s);
  CHECK(ec[2] == doctest::Approx(charging_energy_hz(50e-15)).epsilon(1e-12));
}

TEST_CASE("analytic params: formula symmetry") {
  CircuitSpec s;
  s.ground_f << 40e-15, 40e-15, 40e-15, 40e-15;
  for (auto [i, j] : kRingPairs) s.set_pairwise(i, j, 18e-15);
  s.set_pairwise(0, 2, 5e-15);
  s.set_pairwise(1, 3, 5e-15);
  s.set_all_junctions(8e9);
  const auto p = mode_params_analytic(s);
  CHECK(p.self_kerr_hz[0] == doctest::Approx(p.self_kerr_hz[1]).epsilon(1e-13));
  // E_CA = E_CB makes J_CA = J_BC
  CHECK(p.cross_kerr_hz[1] == doctest::Approx(p.cross_kerr_hz[2]).epsilon(1e-13));
}

TEST_CASE("analytic params: capacitance scaling oracle") {
  const auto base = testing::demo_circuit();
  const auto p1 = mode_params_analytic(base);

  CircuitSpec doubled = base;
  doubled.ground_f *= 2.0;
  doubled.pairwise_f *= 2.0;
  const auto p2 = mode_params_analytic(doubled);

  for (int mu = 0; mu < 3; ++mu) {
    CHECK(p2.charging_hz[mu] == doctest::Approx(p1.charging_hz[mu] / 2.0).epsilon(1e-12));
    CHECK(p2.self_kerr_hz[mu] == doctest::Approx(p1.self_kerr_hz[mu] / 2.0).epsilon(1e-12));
    CHECK(p2.cross_kerr_hz[mu] == doctest::Approx(p1.cross_kerr_hz[mu] / 2.0).epsilon(1e-12));
  }
  // bare frequencies scale as sqrt(E_C)
  const double r1 = p1.omega_hz[0] + p1.self_kerr_hz[0] + p1.cross_kerr_hz[0] + p1.cross_kerr_hz[2];
  const double r2 = p2.omega_hz[0] + p2.self_kerr_hz[0] + p2.cross_kerr_hz[0] + p2.cross_kerr_hz[2];
  CHECK(r2 == doctest::Approx(r1 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("common Kerr scaling of the Eq-coefficient set") {
  // multiplying all E_J and E_C by k scales every J coefficient by k
  const auto p1 = mode_params_analytic(testing::demo_circuit());
  CircuitSpec scaled = testing::demo_circuit();
  const double k = 1.7;
  scaled.ground_f /= k;
  scaled.pairwise_f /= k;
  scaled.junction_hz *= k;
  const auto p2 = mode_params_analytic(scaled);
  for (int i = 0; i < 3; ++i) {
    CHECK(p2.self_kerr_hz[i] == doctest::Approx(k * p1.self_kerr_hz[i]).epsilon(1e-12));
    CHECK(p2.cross_kerr_hz[i] == doctest::Approx(k * p1.cross_kerr_hz[i]).epsilon(1e-12));
  }
  // mode ordering preserved
  CHECK(p2.mode_freq_hz[0] < p2.mode_freq_hz[1]);
  CHECK(p2.mode_freq_hz[1] < p2.mode_freq_hz[2]);
}

TEST_CASE("numeric derivation reproduces the published mode frequencies") {
  const auto p = mode_params(testing::demo_circuit());
  CHECK(p.mode_freq_hz[0] == doctest::Approx(4.691e9).epsilon(1e-3));
  CHECK(p.mode_freq_hz[1] == doctest::Approx(5.195e9).epsilon(1e-3));
  CHECK(p.mode_freq_hz[2] == doctest::Approx(5.957e9).epsilon(1e-3));
  // Eq-(1) convention: 0->1 transition is omega - J
  for (int mu = 0; mu < 3; ++mu) {
    CHECK(p.mode_freq_hz[mu] ==
          doctest::Approx(p.omega_hz[mu] - p.self_kerr_hz[mu]).epsilon(1e-12));
    CHECK(p.self_kerr_hz[mu] > 0.0);
    CHECK(p.cross_kerr_hz[mu] > 0.0);
  }
}

TEST_CASE("numeric derivation: frozen regression of the Kerr set") {
  const auto p = mode_params(testing::demo_circuit());
  // regression fixture, frozen from the solver output at the default truncation
  CHECK(p.self_kerr_hz[0] == doctest::Approx(71.0953e6).epsilon(1e-4));
  CHECK(p.self_kerr_hz[1] == doctest::Approx(72.9347e6).epsilon(1e-4));
  CHECK(p.self_kerr_hz[2] == doctest::Approx(85.3823e6).epsilon(1e-4));
  CHECK(p.cross_kerr_hz[0] == doctest::Approx(124.4853e6).epsilon(1e-4));
  CHECK(p.cross_kerr_hz[1] == doctest::Approx(155.4172e6).epsilon(1e-4));
  CHECK(p.cross_kerr_hz[2] == doctest::Approx(143.0581e6).epsilon(1e-4));
}

TEST_CASE("numeric derivation truncation stability") {
  const auto p7 = mode_params(testing::demo_circuit(), 7);
  const auto p9 = mode_params(testing::demo_circuit(), 9);
  for (int mu = 0; mu < 3; ++mu) {
    CHECK(p7.mode_freq_hz[mu] ==
          doctest::Approx(p9.mode_freq_hz[mu]).epsilon(2e-4));
  }
}

TEST_CASE("conditional frequencies: splittings are exactly 2 J") {
  const auto p = testing::measured_params();
  const auto f = conditional_frequencies(p);
  REQUIRE(f.size() == 12);

  // measured table: AB splitting 211 MHz on the B transitions
  CHECK(f.at("0B0") - f.at("1B0") == doctest::Approx(211e6).epsilon(1e-12));
  // machine-precision splittings for every mode/spectator pair
  CHECK(f.at("0B0") - f.at("1B0") == doctest::Approx(2.0 * p.cross_kerr(0, 1)));
  CHECK(f.at("0B1") - f.at("1B1") == doctest::Approx(2.0 * p.cross_kerr(0, 1)));
  CHECK(f.at("0B0") - f.at("0B1") == doctest::Approx(2.0 * p.cross_kerr(1, 2)));
  CHECK(f.at("A00") - f.at("A10") == doctest::Approx(2.0 * p.cross_kerr(0, 1)));
  CHECK(f.at("A00") - f.at("A01") == doctest::Approx(2.0 * p.cross_kerr(2, 0)));
  CHECK(f.at("00C") - f.at("01C") == doctest::Approx(2.0 * p.cross_kerr(1, 2)));
  CHECK(f.at("00C") - f.at("10C") == doctest::Approx(2.0 * p.cross_kerr(2, 0)));
}

TEST_CASE("conditional frequencies: decoupled limit") {
  auto p = testing::measured_params();
  p.cross_kerr_hz = {0.0, 0.0, 0.0};
  const auto f = conditional_frequencies(p);
  CHECK(f.at("A00") == doctest::Approx(f.at("A01")));
  CHECK(f.at("A00") == doctest::Approx(f.at("A10")));
  CHECK(f.at("A00") == doctest::Approx(f.at("A11")));
}

TEST_CASE("conditional frequencies equal diagonal-energy oracle") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  circuit::ModeParams p;
  p.omega_hz = {4e9 + u(rng) * 1e9, 5e9 + u(rng) * 1e9, 6e9 + u(rng) * 1e9};
  p.self_kerr_hz = {40e6 + u(rng) * 50e6, 40e6 + u(rng) * 50e6, 40e6 + u(rng) * 50e6};
  p.cross_kerr_hz = {80e6 + u(rng) * 80e6, 80e6 + u(rng) * 80e6, 80e6 + u(rng) * 80e6};

  // independent evaluation of Eq.-(1) state energies in the test
  auto energy = [&](int na, int nb, int nc) {
    double e = p.omega_hz[0] * na - p.self_kerr_hz[0] * na * na;
    e += p.omega_hz[1] * nb - p.self_kerr_hz[1] * nb * nb;
    e += p.omega_hz[2] * nc - p.self_kerr_hz[2] * nc * nc;
    e -= 2.0 * (p.cross_kerr_hz[0] * na * nb + p.cross_kerr_hz[1] * nb * nc +
                p.cross_kerr_hz[2] * nc * na);
    return e;
  };

  const auto f = conditional_frequencies(p);
  CHECK(f.at("A00") == doctest::Approx(energy(1, 0, 0) - energy(0, 0, 0)));
  CHECK(f.at("A10") == doctest::Approx(energy(1, 1, 0) - energy(0, 1, 0)));
  CHECK(f.at("A11") == doctest::Approx(energy(1, 1, 1) - energy(0, 1, 1)));
  CHECK(f.at("1B0") == doctest::Approx(energy(1, 1, 0) - energy(1, 0, 0)));
  CHECK(f.at("0B1") == doctest::Approx(energy(0, 1, 1) - energy(0, 0, 1)));
  CHECK(f.at("11C") == doctest::Approx(energy(1, 1, 1) - energy(1, 1, 0)));
  CHECK(f.at("10C") == doctest::Approx(energy(1, 0, 1) - energy(1, 0, 0)));
}
