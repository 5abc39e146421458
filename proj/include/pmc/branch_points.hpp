#pragma once

// Detection of conformal branch points F_z = (z − q)^k G with G·G = 0, G(q) ≠ 0,
// independent of where F_z comes from (spherical chart or planar domain).

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "pmc/sphere_charts.hpp"

namespace pmc {

struct BranchPoint {
  ChartPoint location;
  int order = 0;
  CVec3 leading = CVec3::Zero();  // G(q)
  double fit_residual = 0.0;      // relative least-squares residual of the local fit
  double null_defect = 0.0;       // |G·G| / |G|²
};

struct UnresolvedSingularPoint {
  ChartPoint location;
  double fit_residual = 0.0;
  std::string reason;
};

struct BranchDetection {
  std::vector<BranchPoint> branch_points;
  std::vector<UnresolvedSingularPoint> unresolved;
};

using GradientSampler = std::function<CVec3(Complex)>;

struct BranchFitOptions {
  double radius = 0.05;           // sampling radius in chart coordinates
  int max_order = 6;
  double max_fit_residual = 0.1;  // relative to the local |F_z| norm
  double null_tolerance = 1e-6;   // |G·G| < tol · |G|²
  double min_leading = 1e-6;      // |G| > min_leading
};

/// Locates the zero of F_z near `guess` (argument principle on a circle), then fits
/// F_z ≈ (z − q)^k (G₀ + G₁(z − q) + G₂ conj(z − q)) for k = 1..max_order and keeps the
/// largest k whose fit is acceptable.
std::variant<BranchPoint, UnresolvedSingularPoint> resolve_singular_point(const GradientSampler& sampler,
                                                                          Chart chart, Complex guess,
                                                                          const BranchFitOptions& options);

/// Indices of values that are local minima over `neighbours` and below `threshold`.
std::vector<int> gradient_minima(const Eigen::VectorXd& gradient_norm,
                                 const std::vector<std::vector<int>>& neighbours, double threshold);

}  // namespace pmc
