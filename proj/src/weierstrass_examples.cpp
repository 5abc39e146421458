#include "pmc/weierstrass_examples.hpp"

#include <algorithm>

#include "pmc/immersion_geometry.hpp"

namespace pmc {

DiskGrid::DiskGrid(double radius, int radial_count, int angular_count) : radius_(radius) {
  if (!(radius > 0.0) || radial_count < 1 || angular_count < 3)
    throw ConfigurationError("disk grid needs a positive radius, one ring and three angles");
  Eigen::VectorXd x, w;
  gauss_legendre(radial_count, x, w);
  r_ = radius * 0.5 * (1.0 - x.array());
  const double dphi = 2.0 * kPi / angular_count;
  phi_ = Eigen::VectorXd::LinSpaced(angular_count, 0.0, dphi * (angular_count - 1));
  weights_.resize(node_count());
  for (int i = 0; i < radial_count; ++i)
    for (int j = 0; j < angular_count; ++j) weights_(node(i, j)) = r_(i) * 0.5 * radius * w(i) * dphi;
}

Complex DiskGrid::point(int node) const {
  return std::polar(r_(node / angular_count()), phi_(node % angular_count()));
}

PlanarImmersion::PlanarImmersion(Family family, int k, double t) : family_(family), k_(k), t_(t) {
  if (k < 1) throw ConfigurationError("Weierstrass family index k must be at least 1");
  const Complex i(0.0, 1.0);
  const double t2k = std::pow(t, 2 * k), tk = std::pow(t, k);
  if (family == Family::odd) {
    const double top = 1.0 / (2 * k + 1);
    potential_[0] = {{t2k, 1}, {-top, 2 * k + 1}};
    potential_[1] = {{-i * t2k, 1}, {-i * top, 2 * k + 1}};
    potential_[2] = {{2.0 * tk / (k + 1), k + 1}};
  } else {
    const double top = 1.0 / (2 * k + 2);
    potential_[0] = {{0.5 * t2k, 2}, {-top, 2 * k + 2}};
    potential_[1] = {{-0.5 * i * t2k, 2}, {-i * top, 2 * k + 2}};
    potential_[2] = {{2.0 * tk / (k + 2), k + 2}};
  }
}

std::string PlanarImmersion::name() const {
  if (family_ == Family::odd && k_ == 1) return "enneper";
  return family_ == Family::odd ? "odd" : "even";
}

PlanarJet PlanarImmersion::jet(Complex zeta) const {
  PlanarJet out;
  for (int j = 0; j < 3; ++j) {
    Complex psi{0.0, 0.0}, d1{0.0, 0.0}, d2{0.0, 0.0};
    for (const Monomial& mono : potential_[j]) {
      const int p = mono.power;
      psi += mono.coeff * std::pow(zeta, p);
      d1 += mono.coeff * static_cast<double>(p) * std::pow(zeta, p - 1);
      if (p >= 2) d2 += mono.coeff * static_cast<double>(p * (p - 1)) * std::pow(zeta, p - 2);
    }
    out.position(j) = psi.real();
    out.Fu(j) = d1.real();
    out.Fv(j) = -d1.imag();
    out.Fuu(j) = d2.real();
    out.Fuv(j) = -d2.imag();
    out.Fvv(j) = -d2.real();
    out.Fz(j) = 0.5 * d1;
  }
  return out;
}

PlanarImmersion enneper_blowdown(double t) { return PlanarImmersion(Family::odd, 1, t); }

PlanarImmersion weierstrass_family(Family family, int k, double t) { return PlanarImmersion(family, k, t); }

PlanarSurface sample(const PlanarImmersion& P, const DiskGrid& grid) {
  const int nodes = grid.node_count();
  PlanarSurface out;
  out.position.resize(3, nodes);
  out.gradient.resize(nodes, 3);
  out.mean_curvature.resize(nodes);
  out.gauss_curvature.resize(nodes);
  out.second_form_norm2.resize(nodes);
  out.area_density.resize(nodes);
  for (int n = 0; n < nodes; ++n) {
    const PlanarJet j = P.jet(grid.point(n));
    const SurfacePoint p = surface_point(j.Fu, j.Fv, j.Fuu, j.Fuv, j.Fvv);
    out.position.col(n) = j.position;
    out.gradient.row(n) = j.Fz.transpose();
    out.mean_curvature(n) = p.mean;
    out.gauss_curvature(n) = p.gauss;
    out.second_form_norm2(n) = p.second_form_norm2;
    out.area_density(n) = p.area_density;
  }
  return out;
}

double variation_field_check(double t, const DiskGrid& grid) {
  constexpr double h = 1e-5;
  const PlanarImmersion plus = enneper_blowdown(t + h), minus = enneper_blowdown(t - h);
  double sup = 0.0;
  for (int n = 0; n < grid.node_count(); ++n) {
    const Complex z = grid.point(n);
    const double u = z.real(), v = z.imag();
    const Vec3 X(2.0 * t * u, 2.0 * t * v, u * u - v * v);
    const Vec3 fd = (plus.position(z) - minus.position(z)) / (2.0 * h);
    sup = std::max(sup, (fd - X).norm());
  }
  return sup;
}

double sup_distance(const PlanarImmersion& P, const PlanarImmersion& Q, const DiskGrid& grid) {
  double sup = 0.0;
  for (int n = 0; n < grid.node_count(); ++n) {
    const Complex z = grid.point(n);
    sup = std::max(sup, (P.position(z) - Q.position(z)).norm());
  }
  return sup;
}

std::vector<TotalCurvature> total_curvature(const PlanarImmersion& P, const std::vector<double>& radii) {
  constexpr int kPanelNodes = 32;
  constexpr int kAngles = 64;
  Eigen::VectorXd x, w;
  gauss_legendre(kPanelNodes, x, w);

  std::vector<TotalCurvature> out;
  double previous = -1.0;
  for (double R : radii) {
    if (!(R > previous) || !(R > 0.0)) throw ConfigurationError("total curvature radii must increase");
    previous = R;
    std::vector<double> edges{0.0};
    for (double e = std::min(R, 0.25); e < R; e *= 2.0) edges.push_back(e);
    edges.push_back(R);

    TotalCurvature tc;
    tc.radius = R;
    const double dphi = 2.0 * kPi / kAngles;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const double a = edges[p], b = edges[p + 1], half = 0.5 * (b - a);
      for (int i = 0; i < kPanelNodes; ++i) {
        const double r = a + half * (1.0 - x(i));
        for (int j = 0; j < kAngles; ++j) {
          const PlanarJet jet = P.jet(std::polar(r, j * dphi));
          const SurfacePoint s = surface_point(jet.Fu, jet.Fv, jet.Fuu, jet.Fuv, jet.Fvv);
          if (s.area_density == 0.0) continue;
          const double weight = half * w(i) * r * dphi * s.area_density;
          tc.abs_gauss += std::abs(s.gauss) * weight;
          tc.second_form_norm2 += s.second_form_norm2 * weight;
        }
      }
    }
    out.push_back(tc);
  }
  return out;
}

BranchDetection detect_branch_points(const PlanarImmersion& P, const DiskGrid& grid) {
  const int nodes = grid.node_count(), rings = grid.radial_count(), angles = grid.angular_count();
  Eigen::VectorXd norms(nodes);
  for (int n = 0; n < nodes; ++n) norms(n) = P.gradient(grid.point(n)).norm();
  std::vector<double> sorted(norms.data(), norms.data() + nodes);
  std::nth_element(sorted.begin(), sorted.begin() + nodes / 2, sorted.end());
  const double threshold = 1e-4 * sorted[nodes / 2];

  std::vector<std::vector<int>> neighbours(nodes);
  for (int i = 0; i < rings; ++i)
    for (int j = 0; j < angles; ++j) {
      auto& nb = neighbours[grid.node(i, j)];
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if ((di == 0 && dj == 0) || i + di < 0 || i + di >= rings) continue;
          nb.push_back(grid.node(i + di, (j + dj + angles) % angles));
        }
      // The innermost ring surrounds the origin.
      if (i == 0)
        for (int jj = 0; jj < angles; ++jj)
          if (jj != j) nb.push_back(grid.node(0, jj));
    }

  BranchFitOptions options;
  options.radius = 0.05 * grid.radius();
  const GradientSampler sampler = [&P](Complex z) { return P.gradient(z); };
  BranchDetection out;
  for (int n : gradient_minima(norms, neighbours, threshold)) {
    auto result = resolve_singular_point(sampler, Chart::north, grid.point(n), options);
    if (auto* bp = std::get_if<BranchPoint>(&result)) {
      const bool seen = std::any_of(out.branch_points.begin(), out.branch_points.end(), [&](const BranchPoint& b) {
        return std::abs(b.location.z - bp->location.z) < 1e-6 * grid.radius();
      });
      if (!seen) out.branch_points.push_back(*bp);
    } else {
      out.unresolved.push_back(std::get<UnresolvedSingularPoint>(result));
    }
  }
  return out;
}

}  // namespace pmc
