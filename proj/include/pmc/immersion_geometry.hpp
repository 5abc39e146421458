#pragma once

// Differential geometry of a spectrally represented immersion F: S² → R³.

#include <vector>

#include "pmc/branch_points.hpp"
#include "pmc/sphere_charts.hpp"

namespace pmc {

/// κ in F_{z̄z} = κ · iH (F̄_z × F_z), calibrated so the unit sphere with H = 2 (H = tr_γ A,
/// outward normal) has zero residual. Direct algebra gives F_{z̄z} = ¼Δ₀F and
/// i(F̄_z × F_z) = ½ F_u × F_v, hence κ = −½ under this sign and trace convention.
inline constexpr double kMeanCurvatureConstant = -0.5;

/// Default threshold on min |F_z|² for an immersion to count as regular.
inline constexpr double kImmersionThreshold = 1e-8;

/// Curvature of a parametrized surface at one point, in the parameter coordinates.
struct SurfacePoint {
  Vec3 normal = Vec3::Zero();
  Eigen::Matrix2d metric = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d second_form = Eigen::Matrix2d::Zero();
  double mean = 0.0;
  double gauss = 0.0;
  double second_form_norm2 = 0.0;
  double area_density = 0.0;  // |F_u × F_v|
};

/// N = (F_u × F_v)/|F_u × F_v|, A_ij = −F_ij·N, H = tr_γ A, K = det A / det γ.
SurfacePoint surface_point(const Vec3& Fu, const Vec3& Fv, const Vec3& Fuu, const Vec3& Fuv, const Vec3& Fvv);

/// F together with its nodal derivatives and per-chart complex gradients on one grid.
class ImmersionField {
 public:
  ImmersionField(HarmonicField coefficients, const SphericalGrid& grid);

  const HarmonicField& coefficients() const { return coefficients_; }
  int grid_degree() const { return grid_degree_; }
  const NodalDerivatives& nodal() const { return nodal_; }
  Vec3 position(int node) const { return nodal_.value.row(node).transpose(); }

  /// F_z at every node in the node's preferred chart, node_count × 3.
  const Eigen::MatrixXcd& preferred_gradient() const { return preferred_gradient_; }
  const ChartGradient& chart_gradient(Chart chart) const { return chart == Chart::north ? north_ : south_; }

  /// min over nodes of |F_z|² in the preferred chart.
  double min_gradient_norm2() const;
  bool is_regular(double threshold = kImmersionThreshold) const { return min_gradient_norm2() > threshold; }

  void check_grid(const SphericalGrid& grid) const;

 private:
  HarmonicField coefficients_;
  int grid_degree_;
  NodalDerivatives nodal_;
  Eigen::MatrixXcd preferred_gradient_;
  ChartGradient north_, south_;
};

/// Pointwise first and second fundamental forms. Metric and second form are expressed in
/// (θ, φ) coordinates; the conformal factor λ² = 2 F_z·F_z̄ is taken in the node's preferred chart.
struct FundamentalForms {
  std::vector<Chart> chart;
  Eigen::VectorXd conformal_factor;
  std::vector<Eigen::Matrix2d> metric;
  std::vector<Eigen::Matrix2d> second_form;
  Eigen::Matrix3Xd normal;
  Eigen::VectorXd mean_curvature;
  Eigen::VectorXd gauss_curvature;
  Eigen::VectorXd second_form_norm2;  // |A|²
  Eigen::VectorXd area_weight;        // dV_γ / dV_round (0 at singular nodes)
  std::vector<bool> singular;
  bool orientation_flipped = false;

  int regular_count() const;
};

/// Orientation follows the chart normal F_u × F_v, flipped globally if H < 0 at the node
/// maximizing |F|². Nodes with |F_u × F_v| < 1e-12 are flagged singular and carry NaN curvatures.
FundamentalForms fundamental_forms(const ImmersionField& F, const SphericalGrid& grid);

/// F_z·F_z per node in `chart` (NaN where masked).
Eigen::VectorXcd conformality_residual(const ImmersionField& F, const SphericalGrid& grid, Chart chart);
/// F_z·F_z per node, each node in its preferred chart.
Eigen::VectorXcd conformality_residual(const ImmersionField& F, const SphericalGrid& grid);

/// F_{z̄z} − κ iH(F̄_z × F_z) per node (3 × node_count) in the preferred chart. The residual is
/// real. Throws PreconditionError when sup |F_z·F_z| exceeds `conformality_tolerance`.
Eigen::Matrix3Xd mc_residual(const ImmersionField& F, const Eigen::VectorXd& target_mean_curvature,
                             const SphericalGrid& grid, double conformality_tolerance = 1e-6);
/// Same, in a fixed chart; masked nodes hold NaN.
Eigen::Matrix3Xd mc_residual(const ImmersionField& F, const Eigen::VectorXd& target_mean_curvature,
                             const SphericalGrid& grid, Chart chart, double conformality_tolerance = 1e-6);

/// ∫|A|² dV_γ − ∫H² dV_γ + 8π.
double gauss_identity_residual(const ImmersionField& F, const SphericalGrid& grid);
/// ∫K dV_γ.
double total_gauss_curvature(const ImmersionField& F, const SphericalGrid& grid);

/// L² norm (in dV_γ) of the divergence of A − Hγ. The tensor is pushed forward to a smooth
/// ambient 3×3 field, analyzed, and differentiated spectrally.
double codazzi_residual(const ImmersionField& F, const SphericalGrid& grid);

/// V_j(H) = ⟨grad x_j, grad H⟩_round at every node, 3 × node_count.
Eigen::Matrix3Xd conformal_derivatives(const Eigen::VectorXd& values, const SphericalGrid& grid);
/// v_j = ∫ V_j(H) dV_γ for the conformal fields V_j = grad x_j.
Vec3 obstruction_vector(const Eigen::VectorXd& mean_curvature, const Eigen::VectorXd& area_weight,
                        const SphericalGrid& grid);

/// Local minima of |F_z| below 1e-4 · median, each resolved by a local (z − q)^k G fit.
BranchDetection detect_branch_points(const ImmersionField& F, const SphericalGrid& grid);

struct VerificationReport {
  double area = 0.0;
  double int_a2 = 0.0;
  double int_h2 = 0.0;
  double total_gauss_curvature = 0.0;
  double gauss_identity = 0.0;
  double codazzi_norm = 0.0;
  Vec3 obstruction = Vec3::Zero();
  double conformality_sup = 0.0;
  double min_gradient_norm2 = 0.0;
  double mc_constant = kMeanCurvatureConstant;
  BranchDetection branches;
};

VerificationReport verify_immersion(const ImmersionField& F, const SphericalGrid& grid);

}  // namespace pmc
