#include "trimon/hilbert.hpp"

#include <cmath>

namespace trimon::hilbert {

SpaceSpec SpaceSpec::uniform(int levels_per_mode) {
  SpaceSpec s;
  s.levels = {levels_per_mode, levels_per_mode, levels_per_mode};
  s.validate();
  return s;
}

void SpaceSpec::validate() const {
  for (int l : levels) {
    if (l < 2 || l > 4) {
      throw ValidationError("levels_per_mode must be in [2, 4]");
    }
  }
  if (dim() > 64) throw ValidationError("space dimension exceeds 64");
}

int SpaceSpec::index_of(const std::array<int, 3>& occ) const {
  for (int m = 0; m < 3; ++m) {
    if (occ[m] < 0 || occ[m] >= levels[m]) {
      throw ValidationError("occupation outside truncation");
    }
  }
  return occ[0] * levels[1] * levels[2] + occ[1] * levels[2] + occ[2];
}

std::array<int, 3> SpaceSpec::occupations(int index) const {
  if (index < 0 || index >= dim()) throw ValidationError("basis index out of range");
  std::array<int, 3> occ{};
  occ[2] = index % levels[2];
  occ[1] = (index / levels[2]) % levels[1];
  occ[0] = index / (levels[1] * levels[2]);
  return occ;
}

int SpaceSpec::index_of_label(const std::string& label) const {
  if (label.size() != 3) {
    throw ValidationError("state label must be three digits n_A n_B n_C: " + label);
  }
  std::array<int, 3> occ{};
  for (int m = 0; m < 3; ++m) {
    if (label[m] < '0' || label[m] > '9') {
      throw ValidationError("malformed state label: " + label);
    }
    occ[m] = label[m] - '0';
  }
  return index_of(occ);
}

std::string SpaceSpec::label_of(int index) const {
  const auto occ = occupations(index);
  std::string s;
  for (int m = 0; m < 3; ++m) s += char('0' + occ[m]);
  return s;
}

QuantumState QuantumState::pure_state(Eigen::VectorXcd v) {
  QuantumState s;
  s.pure = true;
  s.psi = std::move(v);
  return s;
}

QuantumState QuantumState::basis_state(const SpaceSpec& space, const std::string& label) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(space.dim());
  v(space.index_of_label(label)) = 1.0;
  return pure_state(std::move(v));
}

QuantumState QuantumState::mixed_state(Eigen::MatrixXcd m) {
  QuantumState s;
  s.pure = false;
  s.rho = std::move(m);
  return s;
}

Eigen::MatrixXcd QuantumState::density() const {
  if (pure) return psi * psi.adjoint();
  return rho;
}

void QuantumState::validate() const {
  if (pure) {
    if (std::abs(psi.norm() - 1.0) > 1e-9) {
      throw ValidationError("pure state norm deviates from 1");
    }
    return;
  }
  if (rho.rows() != rho.cols()) throw ValidationError("density matrix not square");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ValidationError("density matrix not Hermitian");
  }
  if (std::abs(rho.trace().real() - 1.0) > 1e-9) {
    throw ValidationError("density matrix trace deviates from 1");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
  if (es.eigenvalues().minCoeff() < -1e-8) {
    throw ValidationError("density matrix has a negative eigenvalue");
  }
}

namespace {

Operator embed_single_mode(const SpaceSpec& space, int mode,
                           const Eigen::MatrixXcd& op) {
  const int d = space.dim();
  Operator out = Operator::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const auto occ_i = space.occupations(i);
    for (int a = 0; a < space.levels[mode]; ++a) {
      const auto v = op(a, occ_i[mode]);
      if (v == std::complex<double>(0.0, 0.0)) continue;
      auto occ_j = occ_i;
      occ_j[mode] = a;
      out(space.index_of(occ_j), i) = v;
    }
  }
  return out;
}

}  // namespace

Operator number_op(const SpaceSpec& space, int mode) {
  space.validate();
  const int l = space.levels[mode];
  Eigen::MatrixXcd n = Eigen::MatrixXcd::Zero(l, l);
  for (int k = 0; k < l; ++k) n(k, k) = double(k);
  return embed_single_mode(space, mode, n);
}

Operator lowering_op(const SpaceSpec& space, int mode) {
  space.validate();
  const int l = space.levels[mode];
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(l, l);
  for (int k = 1; k < l; ++k) a(k - 1, k) = std::sqrt(double(k));
  return embed_single_mode(space, mode, a);
}

bool is_hermitian(const Operator& op, double tol) {
  return (op - op.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

double basis_energy(const circuit::ModeParams& p, const std::array<int, 3>& occ) {
  double e = 0.0;
  for (int mu = 0; mu < 3; ++mu) {
    const double n = occ[mu];
    e += p.omega_hz[mu] * n - p.self_kerr_hz[mu] * n * n;
  }
  e -= 2.0 * p.cross_kerr_hz[0] * occ[0] * occ[1];
  e -= 2.0 * p.cross_kerr_hz[1] * occ[1] * occ[2];
  e -= 2.0 * p.cross_kerr_hz[2] * occ[2] * occ[0];
  return e;
}

Operator static_hamiltonian(const circuit::ModeParams& p, const SpaceSpec& space) {
  space.validate();
  const int d = space.dim();
  Operator h = Operator::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    h(i, i) = basis_energy(p, space.occupations(i));
  }
  return h;
}

double transition_frequency(const Operator& h, const SpaceSpec& space,
                            const std::string& from, const std::string& to) {
  const int i = space.index_of_label(from);
  const int j = space.index_of_label(to);
  return (h(j, j) - h(i, i)).real();
}

}  // namespace trimon::hilbert
