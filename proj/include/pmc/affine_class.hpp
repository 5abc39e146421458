#pragma once

// Normalized affine functions ℓ = |b| + b·x on the unit sphere, the equivalence
// H₂ ~ H₁ ⇔ H₂ − H₁ = ℓ, and the balanced representative of a class.

#include <optional>

#include "pmc/sphere_charts.hpp"

namespace pmc {

/// ℓ(p) = |b| + b·p. The constant is implied by b and never stored.
template <typename Scalar>
struct BasicAffineFunction {
  using Vector = Eigen::Matrix<Scalar, 3, 1>;

  Vector b = Vector::Zero();

  Scalar constant() const { return b.norm(); }
  Scalar operator()(const Vector& p) const { return constant() + b.dot(p); }

  /// ℓ∘R⁻¹ for a rotation R.
  BasicAffineFunction rotated(const Eigen::Matrix<Scalar, 3, 3>& R) const { return {R * b}; }
  bool is_zero() const { return b.isZero(Scalar(0)); }
};

using AffineFunction = BasicAffineFunction<double>;

/// ℓ at every grid node.
Eigen::VectorXd evaluate(const AffineFunction& ell, const SphericalGrid& grid);

/// M_jk = ∫ V_j(x_k) dV, with V_j = grad x_j. Throws SingularSystemError when cond(M) > 1e12.
Eigen::Matrix3d balancing_matrix(const Eigen::VectorXd& area_weight, const SphericalGrid& grid);

struct CanonicalRepresentative {
  Eigen::VectorXd values;  // H + ℓ
  AffineFunction ell;
  double condition = 1.0;  // condition number of the balancing matrix
};

/// Solves M b = −v so that H + ℓ has vanishing obstruction under `area_weight`.
CanonicalRepresentative canonical_representative(const Eigen::VectorXd& H, const Eigen::VectorXd& area_weight,
                                                 const SphericalGrid& grid);

/// ℓ with H₂ = H₁ + ℓ when H₂ − H₁ is a normalized affine function (fit residual and
/// normalization defect both below `tolerance`), otherwise nothing.
std::optional<AffineFunction> class_membership(const Eigen::VectorXd& H1, const Eigen::VectorXd& H2,
                                               const SphericalGrid& grid, double tolerance = 1e-8);

}  // namespace pmc
