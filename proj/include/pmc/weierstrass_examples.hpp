#pragma once

// Explicit minimal immersions of planar domains: Enneper's surface and its
// blow-downs, and the odd/even Weierstrass families. Each coordinate is
// x_j = Re ψ_j(ζ) for a complex polynomial ψ_j.

#include <array>
#include <string>
#include <vector>

#include "pmc/branch_points.hpp"
#include "pmc/sphere_charts.hpp"

namespace pmc {

/// Polar grid on the disk |ζ| ≤ R: Gauss-Legendre radii on [0, R], uniform angles.
class DiskGrid {
 public:
  DiskGrid(double radius, int radial_count, int angular_count);

  double radius() const { return radius_; }
  int radial_count() const { return static_cast<int>(r_.size()); }
  int angular_count() const { return static_cast<int>(phi_.size()); }
  int node_count() const { return radial_count() * angular_count(); }
  int node(int ring, int angle) const { return ring * angular_count() + angle; }

  double r(int ring) const { return r_(ring); }
  double phi(int angle) const { return phi_(angle); }
  Complex point(int node) const;
  /// Area weights r·w_i·Δφ, summing to πR².
  const Eigen::VectorXd& weights() const { return weights_; }

 private:
  double radius_;
  Eigen::VectorXd r_, phi_, weights_;
};

enum class Family { odd, even };

/// Position and parameter derivatives of a planar immersion at one point ζ = u + iv.
struct PlanarJet {
  Vec3 position, Fu, Fv, Fuu, Fuv, Fvv;
  CVec3 Fz;  // ½(F_u − i F_v)
};

class PlanarImmersion {
 public:
  /// Odd family (k = 1 is Enneper) or even family (f = z, g = z^k), blown down by t;
  /// t = 1 gives the formulas of the undeformed surface.
  PlanarImmersion(Family family, int k, double t = 1.0);

  Family family() const { return family_; }
  int k() const { return k_; }
  double t() const { return t_; }
  std::string name() const;

  PlanarJet jet(Complex zeta) const;
  Vec3 position(Complex zeta) const { return jet(zeta).position; }
  CVec3 gradient(Complex zeta) const { return jet(zeta).Fz; }

 private:
  // ψ_j = Σ coeff · ζ^power; two monomials for x₁, x₂ and one for x₃.
  struct Monomial {
    Complex coeff;
    int power;
  };
  Family family_;
  int k_;
  double t_;
  std::array<std::vector<Monomial>, 3> potential_;
};

/// E_t: x₁ = Re(t²ζ − ζ³/3), x₂ = Im(t²ζ + ζ³/3), x₃ = t Re ζ².
PlanarImmersion enneper_blowdown(double t);
PlanarImmersion weierstrass_family(Family family, int k, double t = 1.0);

/// Geometry of a planar immersion sampled on a disk grid.
struct PlanarSurface {
  Eigen::Matrix3Xd position;
  Eigen::MatrixXcd gradient;  // node_count × 3
  Eigen::VectorXd mean_curvature, gauss_curvature, second_form_norm2, area_density;
};
PlanarSurface sample(const PlanarImmersion& P, const DiskGrid& grid);

/// sup over grid nodes of |(E_{t+h} − E_{t−h})/2h − (2tu, 2tv, u² − v²)|, h = 1e-5.
double variation_field_check(double t, const DiskGrid& grid);

/// sup over grid nodes of |P(ζ) − Q(ζ)|.
double sup_distance(const PlanarImmersion& P, const PlanarImmersion& Q, const DiskGrid& grid);

struct TotalCurvature {
  double radius = 0.0;
  double abs_gauss = 0.0;          // ∫|K| dV, equal to the Gauss map area
  double second_form_norm2 = 0.0;  // ∫|A|² dV = 2∫|K| dV for a minimal surface
};

/// Curvature integrals over |ζ| ≤ R for each radius, by geometric radial panels of
/// Gauss-Legendre nodes. Per map: a 2-fold cover counts twice.
std::vector<TotalCurvature> total_curvature(const PlanarImmersion& P, const std::vector<double>& radii);

/// Local minima of |F_z| below 1e-4 · median on the disk grid, resolved by the local fit.
BranchDetection detect_branch_points(const PlanarImmersion& P, const DiskGrid& grid);

}  // namespace pmc
