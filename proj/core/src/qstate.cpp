#include "sagnac/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

#include "sagnac/errors.hpp"

namespace sagnac {
namespace {

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

// Factor A with rho = A A^dagger, built from the eigendecomposition with
// negative eigenvalues clamped to zero.
Matrix4c psd_factor(const Matrix4c& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> solver(rho);
  // Eigenvalues at rounding level are zero; their square roots would not be.
  const double cutoff = 1e-14 * solver.eigenvalues().maxCoeff();
  Eigen::Vector4d roots =
      (solver.eigenvalues().array() > cutoff).select(solver.eigenvalues().cwiseSqrt(), 0.0);
  return solver.eigenvectors() * roots.asDiagonal();
}

Matrix4c spin_flip() {
  Matrix2c sy;
  sy << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
  return Eigen::kroneckerProduct(sy, sy).eval();
}

}  // namespace

PureState::PureState(const Ket4& amplitudes) : amplitudes_(amplitudes) {
  const double norm2 = amplitudes_.squaredNorm();
  if (!(std::abs(norm2 - 1.0) <= 1e-12)) {
    throw InputError("pure state has squared norm " + std::to_string(norm2) +
                     ", expected 1");
  }
}

PureState PureState::normalized(const Ket4& amplitudes) {
  const double norm = amplitudes.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw InputError("cannot normalize a zero or non-finite state vector");
  }
  return PureState(amplitudes / norm);
}

DensityMatrix::DensityMatrix(const Matrix4c& entries, Constraint constraint)
    : entries_(entries), constraint_(constraint) {
  if (!entries_.allFinite()) {
    throw InputError("density matrix has non-finite entries");
  }
  const double asym = max_abs(entries_ - entries_.adjoint());
  if (asym > kHermitianTolerance) {
    throw InputError("density matrix is not Hermitian (max |rho - rho^dagger| = " +
                     std::to_string(asym) + ")");
  }
  entries_ = 0.5 * (entries_ + entries_.adjoint()).eval();
  const double trace = entries_.trace().real();
  if (std::abs(trace - 1.0) > kTraceTolerance) {
    throw InputError("density matrix trace is " + std::to_string(trace) + ", expected 1");
  }
  if (constraint_ == Constraint::Physical) {
    const double lowest = min_eigenvalue();
    if (lowest < kEigenvalueFloor) {
      throw InputError("density matrix has negative eigenvalue " + std::to_string(lowest));
    }
  }
}

DensityMatrix DensityMatrix::from_pure(const PureState& state) {
  return DensityMatrix(state.projector());
}

DensityMatrix DensityMatrix::maximally_mixed() {
  return DensityMatrix(Matrix4c::Identity() * 0.25);
}

DensityMatrix DensityMatrix::basis_state(ProductBasis basis) {
  Matrix4c m = Matrix4c::Zero();
  const int i = static_cast<int>(basis);
  m(i, i) = 1.0;
  return DensityMatrix(m);
}

Eigen::Vector4d DensityMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Matrix4c> solver(entries_, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double DensityMatrix::purity() const { return (entries_ * entries_).trace().real(); }

double DensityMatrix::trace_distance(const DensityMatrix& other) const {
  Eigen::SelfAdjointEigenSolver<Matrix4c> solver(entries_ - other.entries_,
                                                 Eigen::EigenvaluesOnly);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

Projector1Q::Projector1Q(const Matrix2c& entries) : entries_(entries) {
  if (!entries_.allFinite()) throw InputError("projector has non-finite entries");
  if (max_abs(entries_ - entries_.adjoint()) > 1e-10) {
    throw InputError("projector is not Hermitian");
  }
  if (max_abs(entries_ * entries_ - entries_) > 1e-10) {
    throw InputError("projector is not idempotent");
  }
  if (std::abs(entries_.trace().real() - 1.0) > 1e-10) {
    throw InputError("projector does not have rank 1");
  }
  entries_ = 0.5 * (entries_ + entries_.adjoint()).eval();
}

Projector1Q Projector1Q::from_ket(const Ket2& ket) {
  const double norm = ket.norm();
  if (!(norm > 0.0)) throw InputError("projector ket is zero");
  const Ket2 unit = ket / norm;
  return Projector1Q(unit * unit.adjoint());
}

Ket2 Projector1Q::ket() const {
  // Column with the largest diagonal entry is proportional to the ket.
  const int col = entries_(0, 0).real() >= entries_(1, 1).real() ? 0 : 1;
  Ket2 v = entries_.col(col);
  return v / v.norm() * std::polar(1.0, -std::arg(v(col)));
}

PureState make_bell_psi_minus() {
  const double r = 1.0 / std::sqrt(2.0);
  Ket4 amps;
  amps << 0.0, r, -r, 0.0;
  return PureState(amps);
}

Ket2 linear_ket(double alpha) {
  Ket2 k;
  k << std::cos(alpha), std::sin(alpha);
  return k;
}

Projector1Q linear_projector(double alpha) { return Projector1Q::from_ket(linear_ket(alpha)); }

double fidelity_to_pure(const DensityMatrix& rho, const PureState& psi) {
  const Ket4& v = psi.amplitudes();
  return (v.adjoint() * rho.matrix() * v)(0, 0).real();
}

double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  for (const DensityMatrix* m : {&rho, &sigma}) {
    if (m->min_eigenvalue() < -1e-8) {
      throw InputError("Uhlmann fidelity needs positive semidefinite inputs");
    }
  }
  // With rho = A A^dagger and sigma = B B^dagger the fidelity is the squared
  // nuclear norm of B^dagger A; this avoids taking roots of tiny eigenvalues.
  const Matrix4c a = psd_factor(rho.matrix());
  const Matrix4c b = psd_factor(sigma.matrix());
  Eigen::JacobiSVD<Matrix4c> svd(b.adjoint() * a);
  const double nuclear = svd.singularValues().sum();
  return std::clamp(nuclear * nuclear, 0.0, 1.0);
}

double concurrence(const DensityMatrix& rho) {
  const Matrix4c yy = spin_flip();
  Eigen::Vector4d lambdas;
  if (!rho.unconstrained()) {
    // rho rho~ has the same spectrum as (B^dagger A)(B^dagger A)^dagger with
    // rho = A A^dagger and rho~ = B B^dagger, B = (yy) A*. The singular
    // values of the complex-symmetric A^T (yy) A are the Wootters lambdas.
    const Matrix4c a = psd_factor(rho.matrix());
    Eigen::JacobiSVD<Matrix4c> svd(a.transpose() * yy * a);
    lambdas = svd.singularValues();  // descending
  } else {
    const Matrix4c r = rho.matrix() * yy * rho.matrix().conjugate() * yy;
    Eigen::ComplexEigenSolver<Matrix4c> solver(r, false);
    for (int i = 0; i < 4; ++i) {
      lambdas(i) = std::sqrt(std::max(0.0, solver.eigenvalues()(i).real()));
    }
    std::sort(lambdas.data(), lambdas.data() + 4, std::greater<>());
  }
  return std::clamp(lambdas(0) - lambdas(1) - lambdas(2) - lambdas(3), 0.0, 1.0);
}

double born_probability(const DensityMatrix& rho, const Projector1Q& ma,
                        const Projector1Q& mb) {
  const Matrix4c joint = Eigen::kroneckerProduct(ma.matrix(), mb.matrix()).eval();
  double p = (rho.matrix() * joint).trace().real();
  if (p < 0.0 && p > -1e-12) p = 0.0;
  if (p > 1.0 && p < 1.0 + 1e-12) p = 1.0;
  return p;
}

}  // namespace sagnac
