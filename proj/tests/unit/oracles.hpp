#pragma once

// Independent reference computations shared by the unit and acceptance
// tests. Nothing here calls into the library's own numerics beyond the
// value types.

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "sagnac/qstate.hpp"

namespace oracle {

using sagnac::Complex;
using sagnac::DensityMatrix;
using sagnac::Ket4;
using sagnac::Matrix4c;
using sagnac::PureState;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDeg = kPi / 180.0;

inline Ket4 random_ket(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Ket4 v;
  for (int i = 0; i < 4; ++i) v(i) = Complex(g(rng), g(rng));
  return v.normalized();
}

inline PureState random_pure(std::mt19937_64& rng) { return PureState(random_ket(rng)); }

/// Ginibre ensemble G G^dagger / Tr, full rank with probability 1.
inline DensityMatrix random_mixed(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix4c m;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m(i, j) = Complex(g(rng), g(rng));
  }
  Matrix4c rho = m * m.adjoint();
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return DensityMatrix(rho);
}

/// Rank-1 product state |a><a| x |b><b|.
inline DensityMatrix random_product(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Vector2cd a(Complex(g(rng), g(rng)), Complex(g(rng), g(rng)));
  Eigen::Vector2cd b(Complex(g(rng), g(rng)), Complex(g(rng), g(rng)));
  a.normalize();
  b.normalize();
  Ket4 v;
  v << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return DensityMatrix::from_pure(PureState(v));
}

/// Concurrence of a pure state from its coefficient matrix: 2 |det C|.
inline double pure_concurrence(const Ket4& v) {
  return 2.0 * std::abs(v(0) * v(3) - v(1) * v(2));
}

/// Correlation tensor restricted to the (Z, X) plane that linear analyzers
/// probe: T(i, j) = Tr(rho sigma_i x sigma_j).
inline Eigen::Matrix2d zx_correlation_tensor(const DensityMatrix& rho) {
  Eigen::Matrix2cd z;
  z << 1, 0, 0, -1;
  Eigen::Matrix2cd x;
  x << 0, 1, 1, 0;
  const Eigen::Matrix2cd ops[2] = {z, x};
  Eigen::Matrix2d t;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      Matrix4c k;
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) k.block<2, 2>(2 * r, 2 * c) = ops[i](r, c) * ops[j];
      }
      t(i, j) = (rho.matrix() * k).trace().real();
    }
  }
  return t;
}

/// Linear-analyzer correlator E(alpha, beta) = r(alpha)^T T r(beta) with
/// r(x) = (cos 2x, sin 2x).
inline double correlator(const Eigen::Matrix2d& t, double alpha, double beta) {
  const Eigen::Vector2d ra(std::cos(2 * alpha), std::sin(2 * alpha));
  const Eigen::Vector2d rb(std::cos(2 * beta), std::sin(2 * beta));
  return ra.dot(t * rb);
}

/// 2x2 Hermitian trace distance.
inline double trace_distance2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(a - b);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

/// Poisson delta-S of a singlet-like quadruple set with flux D per quadruple
/// and |E| = 1/sqrt(2) in every correlator: each dE = sqrt(1 - E^2)/sqrt(D).
inline double singlet_delta_s(double flux) {
  return 2.0 * std::sqrt(0.5) / std::sqrt(flux);
}

}  // namespace oracle
