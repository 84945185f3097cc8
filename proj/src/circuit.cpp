#include "trimon/circuit.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>

#include "trimon/constants.hpp"
#include "trimon/hilbert.hpp"

namespace trimon::circuit {

namespace {

bool is_ring_pair(int i, int j) {
  for (auto [a, b] : kRingPairs) {
    if ((i == a && j == b) || (i == b && j == a)) return true;
  }
  return false;
}

}  // namespace

void CircuitSpec::set_pairwise(int i, int j, double farads) {
  if (i == j || i < 0 || j < 0 || i > 3 || j > 3) {
    throw ValidationError("pairwise capacitance needs two distinct nodes in 1..4");
  }
  pairwise_f(i, j) = farads;
  pairwise_f(j, i) = farads;
}

void CircuitSpec::set_junction(int i, int j, double hz) {
  if (!is_ring_pair(i, j)) {
    throw ValidationError("junctions exist only on the four ring pairs");
  }
  junction_hz(i, j) = hz;
  junction_hz(j, i) = hz;
}

void CircuitSpec::set_all_junctions(double hz) {
  for (auto [i, j] : kRingPairs) set_junction(i, j, hz);
}

void CircuitSpec::validate() const {
  for (int i = 0; i < 4; ++i) {
    if (!(ground_f(i) > 0.0)) {
      throw ValidationError("ground capacitances must be positive");
    }
    for (int j = 0; j < 4; ++j) {
      if (pairwise_f(i, j) < 0.0) {
        throw ValidationError("capacitances must be nonnegative");
      }
      if (pairwise_f(i, j) != pairwise_f(j, i)) {
        throw ValidationError("pairwise capacitance matrix must be symmetric");
      }
      if (junction_hz(i, j) != 0.0 && !is_ring_pair(i, j)) {
        throw ValidationError("junction energy on a non-ring pair");
      }
      if (junction_hz(i, j) < 0.0) {
        throw ValidationError("junction energies must be nonnegative");
      }
    }
    if (pairwise_f(i, i) != 0.0) {
      throw ValidationError("pairwise capacitance diagonal must be zero");
    }
  }
}

double ModeParams::cross_kerr(int mu, int nu) const {
  if (mu == nu) throw ValidationError("cross_kerr needs two distinct modes");
  const int lo = std::min(mu, nu), hi = std::max(mu, nu);
  if (lo == 0 && hi == 1) return cross_kerr_hz[0];  // AB
  if (lo == 1 && hi == 2) return cross_kerr_hz[1];  // BC
  return cross_kerr_hz[2];                          // CA
}

MaxwellMatrices build_maxwell(const CircuitSpec& spec) {
  spec.validate();
  MaxwellMatrices m;
  m.C.setZero();
  m.EL.setZero();
  for (int i = 0; i < 4; ++i) {
    double diag = spec.ground_f(i);
    for (int j = 0; j < 4; ++j) {
      if (j == i) continue;
      diag += spec.pairwise_f(i, j);
      m.C(i, j) = -spec.pairwise_f(i, j);
      m.EL(i, j) = -spec.junction_hz(i, j);
      m.EL(i, i) += spec.junction_hz(i, j);
    }
    m.C(i, i) = diag;
  }
  Eigen::LLT<Eigen::Matrix4d> llt(m.C);
  if (llt.info() != Eigen::Success) {
    throw NonPositiveDefinite("capacitance matrix failed Cholesky");
  }
  return m;
}

NormalModes normal_modes(const MaxwellMatrices& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> cs(m.C);
  if (cs.info() != Eigen::Success || cs.eigenvalues().minCoeff() <= 0.0) {
    throw NonPositiveDefinite("capacitance matrix is not positive definite");
  }
  const Eigen::Matrix4d c_inv_sqrt =
      cs.eigenvectors() *
      cs.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      cs.eigenvectors().transpose();

  const Eigen::Matrix4d psi = c_inv_sqrt * m.EL * c_inv_sqrt;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(psi);

  NormalModes out;
  for (int i = 0; i < 4; ++i) {
    const double lam = std::max(es.eigenvalues()(i), 0.0);
    out.frequencies_hz(i) = std::sqrt(lam * kModeFrequencyFactor);
  }
  out.mode_vectors = c_inv_sqrt * es.eigenvectors();

  const double fmax = out.frequencies_hz.maxCoeff();
  int zero_count = 0;
  for (int i = 0; i < 4; ++i) {
    if (out.frequencies_hz(i) <= 1e-6 * fmax) ++zero_count;
  }
  if (zero_count != 1) {
    out.warnings.push_back("expected exactly one zero mode, found " +
                           std::to_string(zero_count));
  }
  for (int i = 1; i < 3; ++i) {
    const double a = out.frequencies_hz(i), b = out.frequencies_hz(i + 1);
    if (a > 1e-6 * fmax && std::abs(b - a) <= 1e-6 * std::max(a, b)) {
      out.warnings.push_back("DegenerateSpectrum: modes " + std::to_string(i) +
                             " and " + std::to_string(i + 1) +
                             " agree within 1e-6 relative");
    }
  }
  return out;
}

std::array<double, 3> effective_charging_energies(
    const CircuitSpec& spec, std::vector<std::string>* warnings) {
  spec.validate();
  const double c11 = spec.ground_f(0);
  const double c22 = spec.ground_f(1);
  const double c33 = spec.ground_f(2);
  const double c44 = spec.ground_f(3);
  auto flag = [&](double a, double b, const char* name) {
    if (std::abs(a - b) > 0.10 * std::max(a, b) && warnings != nullptr) {
      warnings->push_back(std::string("AsymmetryWarning: ") + name +
                          " differ by more than 10%");
    }
  };
  flag(c11, c33, "C11 and C33");
  flag(c22, c44, "C22 and C44");

  const double c_a = spec.pairwise_f(0, 2);
  const double c_b = spec.pairwise_f(1, 3);
  double c_c = 0.0;
  for (auto [i, j] : kRingPairs) c_c += spec.pairwise_f(i, j);
  c_c /= 4.0;

  const double e2 = kElementaryCharge * kElementaryCharge;
  const double eca = e2 / (2.0 * (c_c + c_a) + c11) / kPlanck;
  const double ecb = e2 / (2.0 * (c_c + c_b) + c22) / kPlanck;
  const double ecc =
      e2 /
      (4.0 * c_c + c11 + c22 +
       std::sqrt(16.0 * c_c * c_c + (c11 - c22) * (c11 - c22))) /
      kPlanck;
  return {eca, ecb, ecc};
}

ModeParams mode_params_analytic(const CircuitSpec& spec) {
  ModeParams p;
  const auto ec = effective_charging_energies(spec, &p.warnings);

  double ej = 0.0;
  for (auto [i, j] : kRingPairs) ej += spec.junction_hz(i, j);
  ej /= 4.0;

  p.charging_hz = ec;
  p.josephson_hz = ej;
  p.self_kerr_hz = {ec[0] / 8.0, ec[1] / 8.0, ec[2] / 2.0};
  p.cross_kerr_hz = {std::sqrt(ec[0] * ec[1]) / 4.0,
                     std::sqrt(ec[2] * ec[1]) / 2.0,
                     std::sqrt(ec[0] * ec[2]) / 2.0};
  const std::array<double, 3> bare = {std::sqrt(8.0 * ej * ec[0]),
                                      std::sqrt(8.0 * ej * ec[1]),
                                      std::sqrt(32.0 * ej * ec[2])};
  const std::array<double, 3> beta = {
      p.self_kerr_hz[0] + p.cross_kerr_hz[0] + p.cross_kerr_hz[2],
      p.self_kerr_hz[1] + p.cross_kerr_hz[0] + p.cross_kerr_hz[1],
      p.self_kerr_hz[2] + p.cross_kerr_hz[1] + p.cross_kerr_hz[2]};
  for (int mu = 0; mu < 3; ++mu) {
    p.omega_hz[mu] = bare[mu] - beta[mu];
    p.mode_freq_hz[mu] = p.omega_hz[mu] - p.self_kerr_hz[mu];
  }
  return p;
}

namespace {

// Dense kron over the three dynamical modes, one single-mode factor each.
Eigen::MatrixXd kron3(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const Eigen::MatrixXd& c) {
  const auto ab = Eigen::kroneckerProduct(a, b).eval();
  return Eigen::kroneckerProduct(ab, c).eval();
}

Eigen::MatrixXcd kron3c(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b,
                        const Eigen::MatrixXcd& c) {
  const auto ab = Eigen::kroneckerProduct(a, b).eval();
  return Eigen::kroneckerProduct(ab, c).eval();
}

}  // namespace

ModeParams mode_params(const CircuitSpec& spec, int fock_levels) {
  if (fock_levels < 4 || fock_levels > 16) {
    throw ValidationError("fock_levels must be in [4, 16]");
  }
  const auto maxwell = build_maxwell(spec);
  const auto modes = normal_modes(maxwell);

  ModeParams p;
  p.warnings = modes.warnings;

  double ej = 0.0;
  for (auto [i, j] : kRingPairs) ej += spec.junction_hz(i, j);
  ej /= 4.0;
  p.josephson_hz = ej;
  p.charging_hz = effective_charging_energies(spec, &p.warnings);

  // Dynamical modes: the three highest frequencies (the gauge mode is the
  // one closest to zero); index order A, B, C ascending.
  const int n = fock_levels;
  const int dim = n * n * n;

  Eigen::MatrixXd a1 = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) a1(k - 1, k) = std::sqrt(double(k));
  const Eigen::MatrixXd x1 = a1 + a1.transpose();
  const Eigen::MatrixXd id1 = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd n1 = a1.transpose() * a1;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> xs(x1);
  const Eigen::VectorXd xev = xs.eigenvalues();
  const Eigen::MatrixXd xvec = xs.eigenvectors();

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  std::array<double, 3> zpf{};  // zero-point fluctuation in units of phi0
  for (int mu = 0; mu < 3; ++mu) {
    const double w = modes.frequencies_hz(mu + 1);
    zpf[mu] = std::sqrt(kHbar / (2.0 * w * 2.0 * kPi)) / kReducedFluxQuantum;
    h += w * kron3(mu == 0 ? n1 : id1, mu == 1 ? n1 : id1, mu == 2 ? n1 : id1);
  }

  // Ring-junction potential beyond the harmonic part already held in the
  // linear frequencies: -EJ (cos(phase) - 1 + phase^2/2). The phase operator
  // is a sum of commuting single-mode quadratures, so exp(i phase)
  // factorizes into per-mode exponentials and cos(phase) is its real part.
  for (auto [i, j] : kRingPairs) {
    const double ej_pair = spec.junction_hz(i, j);
    if (ej_pair == 0.0) continue;
    std::array<double, 3> coeff{};
    for (int mu = 0; mu < 3; ++mu) {
      coeff[mu] = (modes.mode_vectors(i, mu + 1) - modes.mode_vectors(j, mu + 1)) *
                  zpf[mu];
    }
    std::array<Eigen::MatrixXcd, 3> expi;
    for (int mu = 0; mu < 3; ++mu) {
      Eigen::VectorXcd ph(n);
      for (int k = 0; k < n; ++k) {
        ph(k) = std::exp(std::complex<double>(0.0, coeff[mu] * xev(k)));
      }
      expi[mu] = xvec * ph.asDiagonal() * xvec.transpose();
    }
    const Eigen::MatrixXd cos3 = kron3c(expi[0], expi[1], expi[2]).real();

    Eigen::MatrixXd phase = Eigen::MatrixXd::Zero(dim, dim);
    for (int mu = 0; mu < 3; ++mu) {
      phase += coeff[mu] * kron3(mu == 0 ? x1 : id1, mu == 1 ? x1 : id1,
                                 mu == 2 ? x1 : id1);
    }
    h -= ej_pair * (cos3 - Eigen::MatrixXd::Identity(dim, dim) +
                    0.5 * phase * phase);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hs(h);
  const Eigen::VectorXd evals = hs.eigenvalues();
  const Eigen::MatrixXd& evecs = hs.eigenvectors();

  // Assign dressed eigenstates to Fock labels by maximum overlap.
  auto eigenindex_of = [&](int na, int nb, int nc) {
    const int idx = na * n * n + nb * n + nc;
    int best = 0;
    double best_ov = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double ov = evecs(idx, k) * evecs(idx, k);
      if (ov > best_ov) {
        best_ov = ov;
        best = k;
      }
    }
    return best;
  };
  const double e0 = evals(eigenindex_of(0, 0, 0));
  auto level = [&](int na, int nb, int nc) {
    return evals(eigenindex_of(na, nb, nc)) - e0;
  };

  const double ea = level(1, 0, 0), eb = level(0, 1, 0), ec3 = level(0, 0, 1);
  const double eaa = level(2, 0, 0), ebb = level(0, 2, 0), ecc = level(0, 0, 2);
  const double eab = level(1, 1, 0), ebc = level(0, 1, 1), eca = level(1, 0, 1);

  // Eq.-(1) fit: E(1)=w-J, E(2)=2w-4J, E(11)=wa+wb-Ja-Jb-2Jab.
  p.self_kerr_hz = {ea - eaa / 2.0, eb - ebb / 2.0, ec3 - ecc / 2.0};
  p.cross_kerr_hz = {(ea + eb - eab) / 2.0, (eb + ec3 - ebc) / 2.0,
                     (ec3 + ea - eca) / 2.0};
  p.mode_freq_hz = {ea, eb, ec3};
  for (int mu = 0; mu < 3; ++mu) {
    p.omega_hz[mu] = p.mode_freq_hz[mu] + p.self_kerr_hz[mu];
    if (p.self_kerr_hz[mu] <= 0.0) {
      p.warnings.push_back("non-positive self-Kerr for mode " +
                           std::to_string(mu));
    }
  }
  for (int k = 0; k < 3; ++k) {
    if (p.cross_kerr_hz[k] <= 0.0) {
      p.warnings.push_back("non-positive cross-Kerr coefficient " +
                           std::to_string(k));
    }
  }
  return p;
}

std::map<std::string, double> conditional_frequencies(const ModeParams& p) {
  static const char* kModeNames = "ABC";
  std::map<std::string, double> out;
  for (int mu = 0; mu < 3; ++mu) {
    const int s1 = (mu + 1) % 3, s2 = (mu + 2) % 3;
    const int lo = std::min(s1, s2), hi = std::max(s1, s2);
    for (int b_lo = 0; b_lo < 2; ++b_lo) {
      for (int b_hi = 0; b_hi < 2; ++b_hi) {
        std::array<int, 3> from{};
        from[lo] = b_lo;
        from[hi] = b_hi;
        std::array<int, 3> to = from;
        to[mu] = 1;
        const double f =
            hilbert::basis_energy(p, to) - hilbert::basis_energy(p, from);
        std::string label;
        for (int m = 0; m < 3; ++m) {
          label += (m == mu) ? kModeNames[mu] : char('0' + from[m]);
        }
        out[label] = f;
      }
    }
  }
  return out;
}

}  // namespace trimon::circuit
