#pragma once

// Two-qubit polarization states and the scalar figures of merit computed on
// them. Every 4-dimensional object uses the basis order (HH, HV, VH, VV); the
// first factor is mode A, the second mode B.

#include <complex>

#include <Eigen/Dense>

namespace sagnac {

using Complex = std::complex<double>;
using Ket2 = Eigen::Vector2cd;
using Ket4 = Eigen::Vector4cd;
using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-12;
inline constexpr double kEigenvalueFloor = -1e-10;

/// Index of a product basis vector in the (HH, HV, VH, VV) ordering.
enum class ProductBasis : int { HH = 0, HV = 1, VH = 2, VV = 3 };

/// Normalized two-qubit ket.
class PureState {
 public:
  /// Throws InputError unless the squared norm is 1 within 1e-12.
  explicit PureState(const Ket4& amplitudes);

  /// Rescales `amplitudes` to unit norm; throws on the zero vector.
  static PureState normalized(const Ket4& amplitudes);

  const Ket4& amplitudes() const noexcept { return amplitudes_; }
  Complex operator[](int index) const { return amplitudes_(index); }
  Matrix4c projector() const { return amplitudes_ * amplitudes_.adjoint(); }

 private:
  Ket4 amplitudes_;
};

/// 4x4 density matrix with validated Hermiticity and unit trace.
///
/// Physical matrices must also be positive semidefinite (eigenvalues not
/// below -1e-10). Linear-inversion tomography legitimately produces small
/// negative eigenvalues; those matrices carry the Unconstrained tag and skip
/// the PSD check.
class DensityMatrix {
 public:
  enum class Constraint { Physical, Unconstrained };

  explicit DensityMatrix(const Matrix4c& entries,
                         Constraint constraint = Constraint::Physical);

  static DensityMatrix from_pure(const PureState& state);
  static DensityMatrix maximally_mixed();
  /// |ab><ab| for a product basis vector.
  static DensityMatrix basis_state(ProductBasis basis);

  const Matrix4c& matrix() const noexcept { return entries_; }
  Complex operator()(int row, int col) const { return entries_(row, col); }
  bool unconstrained() const noexcept { return constraint_ == Constraint::Unconstrained; }
  Constraint constraint() const noexcept { return constraint_; }

  /// Eigenvalues in ascending order.
  Eigen::Vector4d eigenvalues() const;
  double min_eigenvalue() const { return eigenvalues()(0); }
  double purity() const;
  double trace_distance(const DensityMatrix& other) const;

 private:
  Matrix4c entries_;
  Constraint constraint_;
};

/// Rank-1 single-qubit projector |m><m|.
class Projector1Q {
 public:
  /// Validates Hermiticity, idempotence (1e-10) and unit trace.
  explicit Projector1Q(const Matrix2c& entries);

  static Projector1Q from_ket(const Ket2& ket);

  const Matrix2c& matrix() const noexcept { return entries_; }
  /// The normalized ket the projector transmits, phase fixed so that the
  /// largest component is real and positive.
  Ket2 ket() const;
  /// Populations |<H|m>|^2 and |<V|m>|^2.
  double h_population() const { return entries_(0, 0).real(); }
  double v_population() const { return entries_(1, 1).real(); }

 private:
  Matrix2c entries_;
};

/// (|HV> - |VH>)/sqrt(2).
PureState make_bell_psi_minus();

/// cos(alpha)|H> + sin(alpha)|V>.
Ket2 linear_ket(double alpha);
Projector1Q linear_projector(double alpha);

/// <psi|rho|psi>.
double fidelity_to_pure(const DensityMatrix& rho, const PureState& psi);

/// Squared Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2. Inputs may
/// be unconstrained but eigenvalues below -1e-8 are rejected.
double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

/// Wootters concurrence max(0, l1 - l2 - l3 - l4) with l_i the descending
/// square roots of the eigenvalues of rho (sy x sy) rho* (sy x sy).
double concurrence(const DensityMatrix& rho);

/// Tr(rho (ma x mb)).
double born_probability(const DensityMatrix& rho, const Projector1Q& ma,
                        const Projector1Q& mb);

}  // namespace sagnac
