#include "pmc/immersion_geometry.hpp"

#include <algorithm>
#include <limits>

namespace pmc {
namespace {

constexpr double kSingularDensity = 1e-12;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

Vec3 row3(const Eigen::MatrixXd& m, int node) { return m.row(node).transpose(); }

CVec3 preferred_row(const Eigen::MatrixXcd& m, int node) { return m.row(node).transpose(); }

Eigen::MatrixXcd preferred_chart_gradient(const NodalDerivatives& d, const SphericalGrid& grid) {
  Eigen::MatrixXcd out(grid.node_count(), d.value.cols());
  for (int n = 0; n < grid.node_count(); ++n) {
    const double theta = grid.node_theta(n);
    const Complex factor = chart_frame_factor(grid.preferred_chart(n), theta, grid.node_phi(n));
    const double inv_sin = 1.0 / std::sin(theta);
    for (int c = 0; c < d.value.cols(); ++c) out(n, c) = factor * Complex(d.d_theta(n, c), -d.d_phi(n, c) * inv_sin);
  }
  return out;
}

// Complex bilinear dot product (no conjugation).
Complex bilinear(const CVec3& a, const CVec3& b) { return a(0) * b(0) + a(1) * b(1) + a(2) * b(2); }

// Real vector i (conj(a) × a).
Vec3 hermitian_cross(const CVec3& a) {
  const CVec3 c = bilinear_cross(a.conjugate(), a);
  return (Complex(0.0, 1.0) * c).real();
}

Vec3 mc_node_residual(const Vec3& laplacian, double laplacian_factor, const CVec3& Fz, double H) {
  return laplacian_factor * laplacian - kMeanCurvatureConstant * H * hermitian_cross(Fz);
}

double conformality_sup_norm(const ImmersionField& F) {
  double sup = 0.0;
  const auto& g = F.preferred_gradient();
  for (int n = 0; n < g.rows(); ++n) sup = std::max(sup, std::abs(bilinear(preferred_row(g, n), preferred_row(g, n))));
  return sup;
}

}  // namespace

SurfacePoint surface_point(const Vec3& Fu, const Vec3& Fv, const Vec3& Fuu, const Vec3& Fuv, const Vec3& Fvv) {
  SurfacePoint p;
  const Vec3 cross = Fu.cross(Fv);
  p.area_density = cross.norm();
  p.metric << Fu.dot(Fu), Fu.dot(Fv), Fu.dot(Fv), Fv.dot(Fv);
  if (p.area_density == 0.0) {
    p.mean = p.gauss = p.second_form_norm2 = kNaN;
    return p;
  }
  p.normal = cross / p.area_density;
  p.second_form << -Fuu.dot(p.normal), -Fuv.dot(p.normal), -Fuv.dot(p.normal), -Fvv.dot(p.normal);
  const Eigen::Matrix2d inv = p.metric.inverse();
  const Eigen::Matrix2d shape = inv * p.second_form;
  p.mean = shape.trace();
  p.gauss = p.second_form.determinant() / p.metric.determinant();
  p.second_form_norm2 = (shape * shape).trace();
  return p;
}

ImmersionField::ImmersionField(HarmonicField coefficients, const SphericalGrid& grid)
    : coefficients_(std::move(coefficients)),
      grid_degree_(grid.degree()),
      nodal_(synthesize_derivatives(coefficients_, grid)),
      preferred_gradient_(preferred_chart_gradient(nodal_, grid)),
      north_(pmc::chart_gradient(coefficients_, grid, Chart::north)),
      south_(pmc::chart_gradient(coefficients_, grid, Chart::south)) {
  if (coefficients_.components() != 3) throw ConfigurationError("an immersion needs three components");
}

double ImmersionField::min_gradient_norm2() const {
  return preferred_gradient_.rowwise().squaredNorm().minCoeff();
}

void ImmersionField::check_grid(const SphericalGrid& grid) const {
  if (grid.degree() != grid_degree_) throw ConfigurationError("immersion was evaluated on a different grid");
}

int FundamentalForms::regular_count() const {
  return static_cast<int>(std::count(singular.begin(), singular.end(), false));
}

FundamentalForms fundamental_forms(const ImmersionField& F, const SphericalGrid& grid) {
  F.check_grid(grid);
  const int nodes = grid.node_count();
  const NodalDerivatives& d = F.nodal();
  FundamentalForms out;
  out.chart.resize(nodes);
  out.conformal_factor.resize(nodes);
  out.metric.resize(nodes);
  out.second_form.resize(nodes);
  out.normal.resize(3, nodes);
  out.mean_curvature.resize(nodes);
  out.gauss_curvature.resize(nodes);
  out.second_form_norm2.resize(nodes);
  out.area_weight.resize(nodes);
  out.singular.resize(nodes);

  for (int n = 0; n < nodes; ++n) {
    const double sin_theta = std::sin(grid.node_theta(n));
    const SurfacePoint p = surface_point(row3(d.d_theta, n), row3(d.d_phi, n), row3(d.d_theta2, n),
                                         row3(d.d_theta_phi, n), row3(d.d_phi2, n));
    out.chart[n] = grid.preferred_chart(n);
    out.conformal_factor(n) = 2.0 * F.preferred_gradient().row(n).squaredNorm();
    out.metric[n] = p.metric;
    const bool singular = p.area_density / sin_theta < kSingularDensity;
    out.singular[n] = singular;
    if (singular) {
      out.second_form[n].setConstant(kNaN);
      out.normal.col(n).setConstant(kNaN);
      out.mean_curvature(n) = out.gauss_curvature(n) = out.second_form_norm2(n) = kNaN;
      out.area_weight(n) = 0.0;
      continue;
    }
    out.second_form[n] = p.second_form;
    out.normal.col(n) = p.normal;
    out.mean_curvature(n) = p.mean;
    out.gauss_curvature(n) = p.gauss;
    out.second_form_norm2(n) = p.second_form_norm2;
    out.area_weight(n) = p.area_density / sin_theta;
  }

  int farthest = -1;
  double best = -1.0;
  for (int n = 0; n < nodes; ++n) {
    if (out.singular[n]) continue;
    const double r2 = d.value.row(n).squaredNorm();
    if (r2 > best) {
      best = r2;
      farthest = n;
    }
  }
  if (farthest >= 0 && out.mean_curvature(farthest) < 0.0) {
    out.orientation_flipped = true;
    for (int n = 0; n < nodes; ++n) {
      if (out.singular[n]) continue;
      out.normal.col(n) *= -1.0;
      out.second_form[n] *= -1.0;
      out.mean_curvature(n) *= -1.0;
    }
  }
  return out;
}

Eigen::VectorXcd conformality_residual(const ImmersionField& F, const SphericalGrid& grid, Chart chart) {
  F.check_grid(grid);
  const ChartGradient& g = F.chart_gradient(chart);
  Eigen::VectorXcd out(grid.node_count());
  for (int n = 0; n < grid.node_count(); ++n) {
    if (g.masked(n)) {
      out(n) = Complex(kNaN, kNaN);
      continue;
    }
    const CVec3 fz = g.values().row(n).transpose();
    out(n) = bilinear(fz, fz);
  }
  return out;
}

Eigen::VectorXcd conformality_residual(const ImmersionField& F, const SphericalGrid& grid) {
  F.check_grid(grid);
  Eigen::VectorXcd out(grid.node_count());
  for (int n = 0; n < grid.node_count(); ++n) {
    const CVec3 fz = preferred_row(F.preferred_gradient(), n);
    out(n) = bilinear(fz, fz);
  }
  return out;
}

namespace {

void check_mc_inputs(const ImmersionField& F, const Eigen::VectorXd& H, const SphericalGrid& grid,
                     double tolerance) {
  F.check_grid(grid);
  if (H.size() != grid.node_count()) throw ConfigurationError("mean curvature target needs one value per node");
  if (!H.allFinite()) throw DataError("mean curvature target has non-finite values");
  const double sup = conformality_sup_norm(F);
  if (sup > tolerance)
    throw PreconditionError("mean curvature residual requires a conformal immersion; sup |F_z·F_z| = " +
                                std::to_string(sup),
                            sup);
}

}  // namespace

Eigen::Matrix3Xd mc_residual(const ImmersionField& F, const Eigen::VectorXd& H, const SphericalGrid& grid,
                             double conformality_tolerance) {
  check_mc_inputs(F, H, grid, conformality_tolerance);
  Eigen::Matrix3Xd out(3, grid.node_count());
  for (int n = 0; n < grid.node_count(); ++n) {
    const double c = chart_laplacian_factor(grid.preferred_chart(n), grid.node_theta(n));
    out.col(n) = mc_node_residual(row3(F.nodal().laplacian, n), c, preferred_row(F.preferred_gradient(), n), H(n));
  }
  return out;
}

Eigen::Matrix3Xd mc_residual(const ImmersionField& F, const Eigen::VectorXd& H, const SphericalGrid& grid,
                             Chart chart, double conformality_tolerance) {
  check_mc_inputs(F, H, grid, conformality_tolerance);
  const ChartGradient& g = F.chart_gradient(chart);
  Eigen::Matrix3Xd out(3, grid.node_count());
  for (int n = 0; n < grid.node_count(); ++n) {
    if (g.masked(n)) {
      out.col(n).setConstant(kNaN);
      continue;
    }
    const double c = chart_laplacian_factor(chart, grid.node_theta(n));
    out.col(n) = mc_node_residual(row3(F.nodal().laplacian, n), c, g.values().row(n).transpose(), H(n));
  }
  return out;
}

namespace {

Eigen::VectorXd regular_values(const Eigen::VectorXd& values, const FundamentalForms& forms) {
  Eigen::VectorXd out = values;
  for (int n = 0; n < out.size(); ++n)
    if (forms.singular[n]) out(n) = 0.0;
  return out;
}

}  // namespace

double gauss_identity_residual(const ImmersionField& F, const SphericalGrid& grid) {
  const FundamentalForms forms = fundamental_forms(F, grid);
  const double a2 = integrate(regular_values(forms.second_form_norm2, forms), grid, forms.area_weight);
  const Eigen::VectorXd h2 = forms.mean_curvature.array().square();
  return a2 - integrate(regular_values(h2, forms), grid, forms.area_weight) + 8.0 * kPi;
}

double total_gauss_curvature(const ImmersionField& F, const SphericalGrid& grid) {
  const FundamentalForms forms = fundamental_forms(F, grid);
  return integrate(regular_values(forms.gauss_curvature, forms), grid, forms.area_weight);
}

double codazzi_residual(const ImmersionField& F, const SphericalGrid& grid) {
  const FundamentalForms forms = fundamental_forms(F, grid);
  const NodalDerivatives& d = F.nodal();
  const int nodes = grid.node_count();
  // Ambient tensor T = Σ T^{ij} F_i ⊗ F_j, stored as (xx, xy, xz, yy, yz, zz).
  static constexpr int kRow[6] = {0, 0, 0, 1, 1, 2};
  static constexpr int kCol[6] = {0, 1, 2, 1, 2, 2};
  Eigen::MatrixXd ambient(nodes, 6);
  for (int n = 0; n < nodes; ++n) {
    if (forms.singular[n]) {
      ambient.row(n).setZero();
      continue;
    }
    const Eigen::Matrix2d inv = forms.metric[n].inverse();
    const Eigen::Matrix2d T = inv * (forms.second_form[n] - forms.mean_curvature(n) * forms.metric[n]) * inv;
    Eigen::Matrix<double, 3, 2> frame;
    frame.col(0) = row3(d.d_theta, n);
    frame.col(1) = row3(d.d_phi, n);
    const Eigen::Matrix3d push = frame * T * frame.transpose();
    for (int k = 0; k < 6; ++k) ambient(n, k) = push(kRow[k], kCol[k]);
  }
  const NodalDerivatives td = synthesize_derivatives(analyze(ambient, grid), grid);

  Eigen::VectorXd density(nodes);
  for (int n = 0; n < nodes; ++n) {
    if (forms.singular[n]) {
      density(n) = 0.0;
      continue;
    }
    auto unpack = [&](const Eigen::MatrixXd& m) {
      Eigen::Matrix3d t;
      for (int k = 0; k < 6; ++k) t(kRow[k], kCol[k]) = t(kCol[k], kRow[k]) = m(n, k);
      return t;
    };
    const Eigen::Matrix3d dT[2] = {unpack(td.d_theta), unpack(td.d_phi)};
    const Vec3 frame[2] = {row3(d.d_theta, n), row3(d.d_phi, n)};
    const Eigen::Matrix2d inv = forms.metric[n].inverse();
    Vec3 div = Vec3::Zero();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) div += inv(i, j) * dT[i] * frame[j];
    const Vec3 N = forms.normal.col(n);
    const Vec3 tangential = div - N.dot(div) * N;
    density(n) = tangential.squaredNorm();
  }
  return std::sqrt(integrate(density, grid, forms.area_weight));
}

Eigen::Matrix3Xd conformal_derivatives(const Eigen::VectorXd& values, const SphericalGrid& grid) {
  if (values.size() != grid.node_count()) throw ConfigurationError("expected one value per grid node");
  const NodalDerivatives d = synthesize_derivatives(analyze(values, grid), grid);
  Eigen::Matrix3Xd out(3, grid.node_count());
  for (int n = 0; n < grid.node_count(); ++n) {
    const double t = grid.node_theta(n), p = grid.node_phi(n);
    const double st = std::sin(t), ct = std::cos(t), sp = std::sin(p), cp = std::cos(p);
    const Vec3 dx_theta(ct * cp, ct * sp, -st);
    // ∂_φ x / sin θ
    const Vec3 dx_phi_scaled(-sp, cp, 0.0);
    out.col(n) = dx_theta * d.d_theta(n, 0) + dx_phi_scaled * (d.d_phi(n, 0) / st);
  }
  return out;
}

Vec3 obstruction_vector(const Eigen::VectorXd& mean_curvature, const Eigen::VectorXd& area_weight,
                        const SphericalGrid& grid) {
  if (area_weight.size() != grid.node_count()) throw ConfigurationError("expected one weight per grid node");
  const Eigen::Matrix3Xd v = conformal_derivatives(mean_curvature, grid);
  Vec3 out;
  for (int j = 0; j < 3; ++j) out(j) = integrate(v.row(j).transpose(), grid, area_weight);
  return out;
}

BranchDetection detect_branch_points(const ImmersionField& F, const SphericalGrid& grid) {
  F.check_grid(grid);
  const int nodes = grid.node_count();
  const Eigen::VectorXd norms = F.preferred_gradient().rowwise().norm();
  std::vector<double> sorted(norms.data(), norms.data() + nodes);
  std::nth_element(sorted.begin(), sorted.begin() + nodes / 2, sorted.end());
  const double threshold = 1e-4 * sorted[nodes / 2];

  std::vector<std::vector<int>> neighbours(nodes);
  const int rings = grid.ring_count(), lons = grid.longitude_count();
  for (int i = 0; i < rings; ++i)
    for (int j = 0; j < lons; ++j)
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if ((di == 0 && dj == 0) || i + di < 0 || i + di >= rings) continue;
          neighbours[grid.node(i, j)].push_back(grid.node(i + di, (j + dj + lons) % lons));
        }

  BranchDetection out;
  const double spacing = kPi / grid.ring_count();
  for (int n : gradient_minima(norms, neighbours, threshold)) {
    const Chart chart = grid.preferred_chart(n);
    const ChartPoint start = ChartPoint::from_angles(chart, grid.node_theta(n), grid.node_phi(n));
    BranchFitOptions options;
    options.radius = 3.0 * spacing * 0.5 * (1.0 + std::norm(start.z));
    const HarmonicField& coeffs = F.coefficients();
    const GradientSampler sampler = [&coeffs, chart](Complex z) -> CVec3 {
      return chart_gradient_at(coeffs, ChartPoint{chart, z});
    };
    auto result = resolve_singular_point(sampler, chart, start.z, options);
    if (auto* bp = std::get_if<BranchPoint>(&result))
      out.branch_points.push_back(*bp);
    else
      out.unresolved.push_back(std::get<UnresolvedSingularPoint>(result));
  }
  return out;
}

VerificationReport verify_immersion(const ImmersionField& F, const SphericalGrid& grid) {
  const FundamentalForms forms = fundamental_forms(F, grid);
  VerificationReport r;
  r.area = integrate(Eigen::VectorXd::Ones(grid.node_count()), grid, forms.area_weight);
  r.int_a2 = integrate(regular_values(forms.second_form_norm2, forms), grid, forms.area_weight);
  const Eigen::VectorXd h2 = forms.mean_curvature.array().square();
  r.int_h2 = integrate(regular_values(h2, forms), grid, forms.area_weight);
  r.total_gauss_curvature = integrate(regular_values(forms.gauss_curvature, forms), grid, forms.area_weight);
  r.gauss_identity = r.int_a2 - r.int_h2 + 8.0 * kPi;
  r.codazzi_norm = codazzi_residual(F, grid);
  r.obstruction = obstruction_vector(regular_values(forms.mean_curvature, forms), forms.area_weight, grid);
  r.conformality_sup = conformality_sup_norm(F);
  r.min_gradient_norm2 = F.min_gradient_norm2();
  r.branches = detect_branch_points(F, grid);
  return r;
}

}  // namespace pmc
