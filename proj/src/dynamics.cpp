#include "trimon/dynamics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "trimon/constants.hpp"
#include "trimon/errors.hpp"

namespace trimon::dynamics {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

Eigen::VectorXd diagonal_energies(const hilbert::Operator& h0) {
  hilbert::Operator off = h0;
  off.diagonal().setZero();
  if (off.cwiseAbs().maxCoeff() > 1e-6) {
    throw ValidationError("propagation expects a diagonal static Hamiltonian");
  }
  return h0.diagonal().real();
}

struct DriveElement {
  int m, n;          // m > n in energy ordering of the basis
  double weight;     // matrix element of sum_mu lambda_mu (a + a^dag)
  double omega_mn;   // E_m - E_n in Hz
};

struct Workspace {
  int dim;
  Eigen::VectorXd energies;       // H0 diagonal, Hz
  Eigen::VectorXd offsets;        // quasi-static diagonal, Hz
  std::vector<DriveElement> elements;
  Eigen::MatrixXd drive_op;       // sum_mu lambda_mu (a + a^dag)
  // per-tone cached effective phase
  std::vector<double> tone_phase;
};

Workspace make_workspace(const hilbert::Operator& h0,
                         const pulses::Schedule& schedule,
                         const EvolutionConfig& config,
                         const hilbert::SpaceSpec& space) {
  Workspace w;
  w.dim = space.dim();
  w.energies = diagonal_energies(h0);
  w.offsets = Eigen::VectorXd::Zero(w.dim);
  for (int i = 0; i < w.dim; ++i) {
    const auto occ = space.occupations(i);
    for (int mu = 0; mu < 3; ++mu) {
      w.offsets(i) += config.mode_offsets_hz[mu] * occ[mu];
    }
  }
  w.drive_op = Eigen::MatrixXd::Zero(w.dim, w.dim);
  for (int mu = 0; mu < 3; ++mu) {
    if (config.couplings[mu] == 0.0) continue;
    const auto a = hilbert::lowering_op(space, mu);
    w.drive_op += config.couplings[mu] * (a + a.adjoint()).real();
  }
  for (int m = 0; m < w.dim; ++m) {
    for (int n = 0; n < w.dim; ++n) {
      if (w.drive_op(m, n) == 0.0) continue;
      if (w.energies(m) > w.energies(n)) {
        w.elements.push_back(
            {m, n, w.drive_op(m, n), w.energies(m) - w.energies(n)});
      }
    }
  }
  w.tone_phase.reserve(schedule.tones.size());
  for (const auto& tone : schedule.tones) {
    w.tone_phase.push_back(pulses::tone_effective_phase(schedule, tone));
  }
  return w;
}

/// Interaction-frame drive Hamiltonian at time t (absolute schedule time).
/// Under RWA, each tone contributes only its co-rotating component.
Eigen::MatrixXcd frame_hamiltonian(const Workspace& w,
                                   const pulses::Schedule& schedule,
                                   const EvolutionConfig& config, double t) {
  Eigen::MatrixXcd h = w.offsets.cast<std::complex<double>>().asDiagonal();
  if (config.rwa) {
    for (std::size_t k = 0; k < schedule.tones.size(); ++k) {
      const auto& tone = schedule.tones[k];
      if (t < tone.start_s || t > tone.end_s()) continue;
      const auto s = pulses::sample(tone.envelope, t - tone.start_s);
      if (s == std::complex<double>(0.0, 0.0)) continue;
      const double f = tone.frequency_hz();
      const double phi = w.tone_phase[k];
      for (const auto& el : w.elements) {
        const double arg = 2.0 * kPi * (el.omega_mn - f) * t - phi;
        const std::complex<double> v =
            0.5 * std::conj(s) * std::exp(kI * arg) * el.weight;
        h(el.m, el.n) += v;
        h(el.n, el.m) += std::conj(v);
      }
    }
    return h;
  }
  const double d = pulses::drive_amplitude(schedule, t);
  if (d != 0.0) {
    for (const auto& el : w.elements) {
      const std::complex<double> v =
          d * el.weight * std::exp(kI * (2.0 * kPi * el.omega_mn * t));
      h(el.m, el.n) += v;
      h(el.n, el.m) += std::conj(v);
    }
  }
  return h;
}

Eigen::MatrixXcd expm_herm(const Eigen::MatrixXcd& h, double scale) {
  // exp(-2 pi i scale h) for Hermitian h
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  Eigen::VectorXcd ph(h.rows());
  for (int i = 0; i < h.rows(); ++i) {
    ph(i) = std::exp(-2.0 * kPi * kI * scale * es.eigenvalues()(i));
  }
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

struct Segment {
  double t0, t1;
  bool driven;
};

std::vector<Segment> build_segments(const pulses::Schedule& schedule,
                                    double t0, double t1) {
  std::vector<double> cuts{t0, t1};
  for (const auto& tone : schedule.tones) {
    if (tone.end_s() <= t0 || tone.start_s >= t1) continue;
    cuts.push_back(std::clamp(tone.start_s, t0, t1));
    cuts.push_back(std::clamp(tone.end_s(), t0, t1));
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-15; }),
             cuts.end());
  std::vector<Segment> segs;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    bool driven = false;
    for (const auto& tone : schedule.tones) {
      if (mid >= tone.start_s && mid <= tone.end_s() &&
          tone.envelope.amplitude_hz != 0.0) {
        driven = true;
        break;
      }
    }
    segs.push_back({cuts[i], cuts[i + 1], driven});
  }
  return segs;
}

Eigen::MatrixXcd lab_strang_step(const Workspace& w,
                                 const Eigen::MatrixXd& drive_evec,
                                 const Eigen::VectorXd& drive_eval,
                                 const pulses::Schedule& schedule, double t0,
                                 double h) {
  const double tm = t0 + 0.5 * h;
  const double d = pulses::drive_amplitude(schedule, tm);
  Eigen::VectorXcd half(w.dim);
  for (int i = 0; i < w.dim; ++i) {
    half(i) = std::exp(-2.0 * kPi * kI * (w.energies(i) + w.offsets(i)) *
                       (0.5 * h));
  }
  Eigen::VectorXcd mid(w.dim);
  for (int i = 0; i < w.dim; ++i) {
    mid(i) = std::exp(-2.0 * kPi * kI * d * drive_eval(i) * h);
  }
  Eigen::MatrixXcd u = drive_evec.cast<std::complex<double>>() *
                       mid.asDiagonal() *
                       drive_evec.transpose().cast<std::complex<double>>();
  u = half.asDiagonal() * u * half.asDiagonal();
  return u;
}

hilbert::Operator propagate_core(const hilbert::Operator& h0,
                                 const pulses::Schedule& schedule,
                                 const EvolutionConfig& config,
                                 const hilbert::SpaceSpec& space,
                                 double step_s) {
  Workspace w = make_workspace(h0, schedule, config, space);
  const double t0 = config.window_start_s;
  const double t1 =
      config.window_end_s >= 0.0 ? config.window_end_s : schedule.end_time_s();

  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(w.dim, w.dim);

  std::optional<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>> drive_es;
  if (config.frame == Frame::kLab) {
    drive_es.emplace(w.drive_op);
  }

  for (const auto& seg : build_segments(schedule, t0, t1)) {
    const double len = seg.t1 - seg.t0;
    if (len <= 0.0) continue;
    if (!seg.driven) {
      // static diagonal generator: exact one-step exponential
      Eigen::VectorXcd ph(w.dim);
      for (int i = 0; i < w.dim; ++i) {
        const double e = config.frame == Frame::kLab
                             ? w.energies(i) + w.offsets(i)
                             : w.offsets(i);
        ph(i) = std::exp(-2.0 * kPi * kI * e * len);
      }
      u = ph.asDiagonal() * u;
      continue;
    }
    const int steps = std::max(1, int(std::ceil(len / step_s)));
    const double h = len / steps;
    for (int k = 0; k < steps; ++k) {
      const double tk = seg.t0 + k * h;
      if (config.frame == Frame::kLab) {
        u = lab_strang_step(w, drive_es->eigenvectors(), drive_es->eigenvalues(),
                            schedule, tk, h) *
            u;
      } else {
        const Eigen::MatrixXcd hmid =
            frame_hamiltonian(w, schedule, config, tk + 0.5 * h);
        u = expm_herm(hmid, h) * u;
      }
    }
  }
  return u;
}

}  // namespace

void EvolutionConfig::validate() const {
  if (!(step_s > 0.0)) throw ValidationError("step_s must be positive");
  if (!(tolerance > 0.0) || tolerance > 1e-4) {
    throw ValidationError("tolerance must be in (0, 1e-4]");
  }
}

bool NoiseChannels::has_decoherence() const {
  for (int mu = 0; mu < 3; ++mu) {
    if (std::isfinite(t1_s[mu]) || std::isfinite(t2_s[mu])) return true;
  }
  return false;
}

void NoiseChannels::validate() const {
  for (int mu = 0; mu < 3; ++mu) {
    if (std::isfinite(t1_s[mu]) && !(t1_s[mu] > 0.0)) {
      throw ValidationError("T1 must be positive");
    }
    if (std::isfinite(t2_s[mu]) && !(t2_s[mu] > 0.0)) {
      throw ValidationError("T2 must be positive");
    }
    if (quasi_static_sigma_hz[mu] < 0.0) {
      throw ValidationError("quasi-static sigma must be nonnegative");
    }
    if (std::isfinite(t1_s[mu]) && std::isfinite(t2_s[mu]) &&
        t2_s[mu] > 2.0 * t1_s[mu] + 1e-12 * t1_s[mu]) {
      throw NegativeDephasing("T2 > 2 T1 for mode " + std::to_string(mu));
    }
  }
}

PropagationResult propagate_unitary(const hilbert::Operator& h0,
                                    const pulses::Schedule& schedule,
                                    const EvolutionConfig& config,
                                    const hilbert::SpaceSpec& space) {
  config.validate();
  schedule.validate();

  double step = config.step_s;
  Eigen::MatrixXcd u = propagate_core(h0, schedule, config, space, step);
  if (config.check_step) {
    for (int r = 0;; ++r) {
      const Eigen::MatrixXcd u_half =
          propagate_core(h0, schedule, config, space, 0.5 * step);
      const double diff = (u - u_half).cwiseAbs().maxCoeff();
      if (diff <= config.tolerance) break;
      if (r >= config.max_refinements) {
        throw StepTooCoarse("step " + std::to_string(step) +
                            " s leaves max element change " +
                            std::to_string(diff));
      }
      step *= 0.5;
      u = u_half;
    }
  }

  PropagationResult out;
  const double t0 = config.window_start_s;
  const double t1 =
      config.window_end_s >= 0.0 ? config.window_end_s : schedule.end_time_s();
  out.duration_s = t1 - t0;

  const Eigen::VectorXd energies = diagonal_energies(h0);
  Eigen::VectorXcd wind0(space.dim()), wind1(space.dim());
  for (int i = 0; i < space.dim(); ++i) {
    wind0(i) = std::exp(+2.0 * kPi * kI * energies(i) * t0);
    wind1(i) = std::exp(-2.0 * kPi * kI * energies(i) * t1);
  }
  if (config.frame == Frame::kLab) {
    out.u_lab = u;
    out.u_interaction = wind1.cwiseInverse().asDiagonal() * u *
                        wind0.cwiseInverse().asDiagonal();
  } else {
    out.u_interaction = u;
    out.u_lab = wind1.asDiagonal() * u * wind0.asDiagonal();
  }
  return out;
}

Eigen::MatrixXcd unitary_superop(const hilbert::Operator& u) {
  const int d = int(u.rows());
  Eigen::MatrixXcd s(d * d, d * d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      s.block(j * d, i * d, d, d) = std::conj(u(j, i)) * u;
    }
  }
  return s;
}

Eigen::MatrixXcd dissipator_superop(const NoiseChannels& noise,
                                    const hilbert::SpaceSpec& space) {
  noise.validate();
  const int d = space.dim();
  Eigen::MatrixXcd l = Eigen::MatrixXcd::Zero(d * d, d * d);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);

  auto add_collapse = [&](const Eigen::MatrixXcd& c) {
    const Eigen::MatrixXcd cdc = c.adjoint() * c;
    // vec(c rho c^dag) = (conj(c) kron c) vec(rho)  [column stacking]
    Eigen::MatrixXcd jump(d * d, d * d);
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < d; ++i) {
        jump.block(j * d, i * d, d, d) = std::conj(c(j, i)) * c;
      }
    }
    Eigen::MatrixXcd anti = Eigen::MatrixXcd::Zero(d * d, d * d);
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < d; ++i) {
        anti.block(j * d, i * d, d, d) +=
            0.5 * std::conj(id(j, i)) * cdc;  // (I kron c^dag c)/2
      }
    }
    // (transpose(c^dag c) kron I)/2
    const Eigen::MatrixXcd cdct = cdc.transpose();
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < d; ++i) {
        anti.block(j * d, i * d, d, d) += 0.5 * cdct(j, i) * id;
      }
    }
    l += jump - anti;
  };

  for (int mu = 0; mu < 3; ++mu) {
    if (std::isfinite(noise.t1_s[mu])) {
      add_collapse(std::sqrt(1.0 / noise.t1_s[mu]) *
                   hilbert::lowering_op(space, mu));
    }
    double gamma_phi = 0.0;
    if (std::isfinite(noise.t2_s[mu])) {
      const double t1_term =
          std::isfinite(noise.t1_s[mu]) ? 0.5 / noise.t1_s[mu] : 0.0;
      gamma_phi = 1.0 / noise.t2_s[mu] - t1_term;
      if (gamma_phi < -1e-12 / noise.t2_s[mu]) {
        throw NegativeDephasing("T2 > 2 T1 for mode " + std::to_string(mu));
      }
      gamma_phi = std::max(gamma_phi, 0.0);
    }
    if (gamma_phi > 0.0) {
      add_collapse(std::sqrt(2.0 * gamma_phi) * hilbert::number_op(space, mu));
    }
  }
  return l;
}

hilbert::QuantumState propagate_lindblad(const hilbert::Operator& h0,
                                         const pulses::Schedule& schedule,
                                         const NoiseChannels& noise,
                                         const EvolutionConfig& config,
                                         const hilbert::QuantumState& rho0,
                                         const hilbert::SpaceSpec& space) {
  config.validate();
  noise.validate();
  if (config.frame == Frame::kLab) {
    throw ValidationError("Lindblad propagation runs in the interaction frame");
  }
  const int d = space.dim();

  Workspace w = make_workspace(h0, schedule, config, space);
  const Eigen::MatrixXcd diss = dissipator_superop(noise, space);

  const double t0 = config.window_start_s;
  const double t1 =
      config.window_end_s >= 0.0 ? config.window_end_s : schedule.end_time_s();

  Eigen::MatrixXcd rho = rho0.density();
  if (rho.rows() != d) throw ValidationError("state dimension mismatch");

  // static Liouvillian for idle gaps: -2 pi i [offsets, .] + dissipator
  Eigen::MatrixXcd l_static = diss;
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      l_static(j * d + i, j * d + i) +=
          -2.0 * kPi * kI * (w.offsets(i) - w.offsets(j));
    }
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> static_es(l_static);
  auto static_prop = [&](double dt) {
    Eigen::VectorXcd ph(d * d);
    for (int i = 0; i < d * d; ++i) {
      ph(i) = std::exp(static_es.eigenvalues()(i) * dt);
    }
    return (static_es.eigenvectors() * ph.asDiagonal() *
            static_es.eigenvectors().inverse())
        .eval();
  };

  auto apply_super = [&](const Eigen::MatrixXcd& s, Eigen::MatrixXcd& r) {
    Eigen::Map<Eigen::VectorXcd> v(r.data(), d * d);
    const Eigen::VectorXcd out = s * v;
    r = Eigen::Map<const Eigen::MatrixXcd>(out.data(), d, d);
  };

  Eigen::MatrixXcd e_half;
  double cached_h = -1.0;

  for (const auto& seg : build_segments(schedule, t0, t1)) {
    const double len = seg.t1 - seg.t0;
    if (len <= 0.0) continue;
    if (!seg.driven) {
      const Eigen::MatrixXcd p = static_prop(len);
      apply_super(p, rho);
      continue;
    }
    const int steps = std::max(1, int(std::ceil(len / config.step_s)));
    const double h = len / steps;
    if (std::abs(h - cached_h) > 1e-18) {
      e_half = (diss * (0.5 * h)).exp();
      cached_h = h;
    }
    for (int k = 0; k < steps; ++k) {
      const double tk = seg.t0 + k * h;
      apply_super(e_half, rho);
      const Eigen::MatrixXcd hmid =
          frame_hamiltonian(w, schedule, config, tk + 0.5 * h);
      const Eigen::MatrixXcd u = expm_herm(hmid, h);
      rho = u * rho * u.adjoint();
      apply_super(e_half, rho);
    }
  }
  return hilbert::QuantumState::mixed_state(rho);
}

Eigen::MatrixXcd propagate_superop(const hilbert::Operator& h0,
                                   const pulses::Schedule& schedule,
                                   const NoiseChannels& noise,
                                   const EvolutionConfig& config,
                                   const hilbert::SpaceSpec& space) {
  config.validate();
  noise.validate();
  const int d = space.dim();
  Workspace w = make_workspace(h0, schedule, config, space);
  const bool noisy = noise.has_decoherence();

  const double t0 = config.window_start_s;
  const double t1 =
      config.window_end_s >= 0.0 ? config.window_end_s : schedule.end_time_s();

  Eigen::MatrixXcd s = Eigen::MatrixXcd::Identity(d * d, d * d);
  Eigen::MatrixXcd diss;
  std::optional<Eigen::ComplexEigenSolver<Eigen::MatrixXcd>> static_es;
  if (noisy) {
    diss = dissipator_superop(noise, space);
    Eigen::MatrixXcd l_static = diss;
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < d; ++i) {
        l_static(j * d + i, j * d + i) +=
            -2.0 * kPi * kI * (w.offsets(i) - w.offsets(j));
      }
    }
    static_es.emplace(l_static);
  }

  Eigen::MatrixXcd e_half;
  double cached_h = -1.0;

  for (const auto& seg : build_segments(schedule, t0, t1)) {
    const double len = seg.t1 - seg.t0;
    if (len <= 0.0) continue;
    if (!seg.driven) {
      if (noisy) {
        Eigen::VectorXcd ph(d * d);
        for (int i = 0; i < d * d; ++i) {
          ph(i) = std::exp(static_es->eigenvalues()(i) * len);
        }
        s = static_es->eigenvectors() * ph.asDiagonal() *
            static_es->eigenvectors().inverse() * s;
      } else {
        Eigen::VectorXcd ph(d);
        for (int i = 0; i < d; ++i) {
          ph(i) = std::exp(-2.0 * kPi * kI * w.offsets(i) * len);
        }
        Eigen::MatrixXcd u = ph.asDiagonal();
        s = unitary_superop(u) * s;
      }
      continue;
    }
    const int steps = std::max(1, int(std::ceil(len / config.step_s)));
    const double h = len / steps;
    if (noisy && std::abs(h - cached_h) > 1e-18) {
      e_half = (diss * (0.5 * h)).exp();
      cached_h = h;
    }
    for (int k = 0; k < steps; ++k) {
      const double tk = seg.t0 + k * h;
      const Eigen::MatrixXcd u =
          expm_herm(frame_hamiltonian(w, schedule, config, tk + 0.5 * h), h);
      if (noisy) {
        s = e_half * (unitary_superop(u) * (e_half * s));
      } else {
        s = unitary_superop(u) * s;
      }
    }
  }
  return s;
}

GateExtract gate_unitary(const PropagationResult& result,
                         const pulses::FrameLedger& ledger,
                         const hilbert::SpaceSpec& space,
                         const std::vector<std::string>& labels) {
  const int k = int(labels.size());
  GateExtract out;
  out.gate.resize(k, k);
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = space.index_of_label(labels[i]);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      out.gate(i, j) = result.u_interaction(idx[i], idx[j]);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(out.gate);
  const double smin = svd.singularValues().minCoeff();
  out.leakage = std::max(0.0, 1.0 - smin * smin);

  const auto theta = pulses::state_phases_of(ledger);
  for (int i = 0; i < k; ++i) {
    const auto occ = space.occupations(idx[i]);
    if (occ[0] > 1 || occ[1] > 1 || occ[2] > 1) continue;
    const int cube = occ[0] * 4 + occ[1] * 2 + occ[2];
    out.gate.row(i) *= std::exp(kI * theta[cube]);
  }
  return out;
}

std::array<double, 3> sample_quasi_static(const NoiseChannels& noise,
                                          std::uint64_t seed) {
  std::array<double, 3> out{0.0, 0.0, 0.0};
  std::mt19937_64 rng(seed);
  // explicit Box-Muller for cross-platform determinism
  auto uniform = [&rng]() {
    return (double(rng() >> 11) + 0.5) * 0x1.0p-53;
  };
  for (int mu = 0; mu < 3; ++mu) {
    const double u1 = uniform(), u2 = uniform();
    const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    out[mu] = noise.quasi_static_sigma_hz[mu] * g;
  }
  return out;
}

double average_gate_fidelity(const hilbert::Operator& u_ideal,
                             const hilbert::Operator& v) {
  const int d = int(u_ideal.rows());
  const hilbert::Operator m = u_ideal.adjoint() * v;
  const double t1 = (m * m.adjoint()).trace().real();
  const double t2 = std::norm(m.trace());
  return (t1 + t2) / (d * (d + 1.0));
}

double average_gate_fidelity_channel(const Eigen::MatrixXcd& superop,
                                     const hilbert::Operator& u_ideal) {
  const int d = int(u_ideal.rows());
  const Eigen::MatrixXcd s_ideal = unitary_superop(u_ideal);
  const double f_pro =
      (s_ideal.adjoint() * superop).trace().real() / double(d * d);
  return (d * f_pro + 1.0) / (d + 1.0);
}

}  // namespace trimon::dynamics
