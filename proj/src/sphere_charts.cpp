#include "pmc/sphere_charts.hpp"

#include <algorithm>
#include <limits>

namespace pmc {

void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = z;
        p0 = 1.0;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute the derivative at the converged node for the weight.
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = (n == 1) ? 1.0 : n * (z * p1 - p0) / (z * z - 1.0);
    x(i) = z;
    w(i) = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

double order_scale(int m) { return m == 0 ? 1.0 : kSqrt2; }

void check_finite(const Eigen::Ref<const Eigen::MatrixXd>& values, const char* what) {
  if (!values.allFinite()) throw DataError(std::string(what) + ": non-finite input values");
}

// Sums Σ_l c_lm T(l, m) for one ring. `table` is one of value/d1/d2.
// Returns cosine-part (m ≥ 0) and sine-part (m > 0) partial sums, already scaled by √2 for m > 0.
void ring_partial_sums(const Eigen::Ref<const Eigen::VectorXd>& coeffs, int degree,
                       const Eigen::ArrayXd& table, bool laplacian, Eigen::VectorXd& cos_part,
                       Eigen::VectorXd& sin_part) {
  cos_part.setZero(degree + 1);
  sin_part.setZero(degree + 1);
  for (int m = 0; m <= degree; ++m) {
    double a = 0.0, b = 0.0;
    for (int l = m; l <= degree; ++l) {
      const double t = table(LegendreTable::index(l, m)) * (laplacian ? -l * (l + 1.0) : 1.0);
      a += coeffs(harmonic_index(l, m)) * t;
      if (m > 0) b += coeffs(harmonic_index(l, -m)) * t;
    }
    cos_part(m) = order_scale(m) * a;
    sin_part(m) = order_scale(m) * b;
  }
}

}  // namespace

LegendreTable normalized_legendre(int degree, double theta) {
  LegendreTable t;
  t.degree = degree;
  const int size = (degree + 1) * (degree + 2) / 2;
  t.value.setZero(size);
  t.d1.setZero(size);
  t.d2.setZero(size);
  const double x = std::cos(theta);
  const double s = std::sin(theta);
  auto P = [&](int l, int m) -> double& { return t.value(LegendreTable::index(l, m)); };

  P(0, 0) = 1.0 / std::sqrt(kFourPi);
  for (int m = 1; m <= degree; ++m) P(m, m) = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * P(m - 1, m - 1);
  for (int m = 0; m < degree; ++m) P(m + 1, m) = std::sqrt(2.0 * m + 3.0) * x * P(m, m);
  for (int m = 0; m <= degree; ++m) {
    for (int l = m + 2; l <= degree; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
      const double b = std::sqrt(((l - 1.0) * (l - 1.0) - static_cast<double>(m) * m) /
                                 (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
      P(l, m) = a * (x * P(l - 1, m) - b * P(l - 2, m));
    }
  }

  // d/dθ P̄^m = ½[√((l+m)(l−m+1)) P̄^{m−1} − √((l+m+1)(l−m)) P̄^{m+1}],  d/dθ P̄^0 = −√(l(l+1)) P̄^1.
  auto differentiate = [degree](const Eigen::ArrayXd& in, Eigen::ArrayXd& out) {
    for (int l = 0; l <= degree; ++l) {
      for (int m = 0; m <= l; ++m) {
        const double up = (m + 1 <= l) ? in(LegendreTable::index(l, m + 1)) : 0.0;
        double d;
        if (m == 0) {
          d = -std::sqrt(l * (l + 1.0)) * up;
        } else {
          const double down = in(LegendreTable::index(l, m - 1));
          d = 0.5 * (std::sqrt((l + m) * (l - m + 1.0)) * down - std::sqrt((l + m + 1.0) * (l - m)) * up);
        }
        out(LegendreTable::index(l, m)) = d;
      }
    }
  };
  differentiate(t.value, t.d1);
  differentiate(t.d1, t.d2);
  return t;
}

ChartPoint ChartPoint::from_angles(Chart chart, double theta, double phi) {
  if (chart == Chart::north) return {chart, std::polar(std::tan(0.5 * theta), phi)};
  return {chart, std::polar(1.0 / std::tan(0.5 * theta), -phi)};
}

double ChartPoint::theta() const {
  const double r = std::abs(z);
  return chart == Chart::north ? 2.0 * std::atan(r) : kPi - 2.0 * std::atan(r);
}

double ChartPoint::phi() const {
  double p = chart == Chart::north ? std::arg(z) : -std::arg(z);
  if (p < 0.0) p += 2.0 * kPi;
  return p;
}

ChartPoint ChartPoint::in_chart(Chart target) const {
  if (target == chart) return *this;
  if (std::abs(z) == 0.0) throw DomainError("chart transition undefined at the pole");
  return {target, 1.0 / z};
}

double ChartPoint::distance_to_excluded_pole() const {
  return chart == Chart::north ? kPi - theta() : theta();
}

Complex chart_frame_factor(Chart chart, double theta, double phi) {
  if (chart == Chart::north) {
    const double c = std::cos(0.5 * theta);
    return std::polar(c * c, -phi);
  }
  const double s = std::sin(0.5 * theta);
  return -std::polar(s * s, phi);
}

double chart_laplacian_factor(Chart chart, double theta) {
  const double c = chart == Chart::north ? std::cos(0.5 * theta) : std::sin(0.5 * theta);
  return c * c * c * c;
}

SphericalGrid::SphericalGrid(int degree) : degree_(degree) {
  if (degree < 1) throw ConfigurationError("grid degree must be at least 1");
  Eigen::VectorXd x, w;
  gauss_legendre(ring_count(), x, w);
  theta_.resize(ring_count());
  for (int i = 0; i < ring_count(); ++i) theta_(i) = std::acos(x(i));
  const double dphi = 2.0 * kPi / longitude_count();
  phi_.resize(longitude_count());
  for (int j = 0; j < longitude_count(); ++j) phi_(j) = j * dphi;
  ring_weights_ = w;

  weights_.resize(node_count());
  points_.resize(3, node_count());
  for (int i = 0; i < ring_count(); ++i) {
    const double st = std::sin(theta_(i)), ct = std::cos(theta_(i));
    for (int j = 0; j < longitude_count(); ++j) {
      const int n = node(i, j);
      weights_(n) = w(i) * dphi;
      points_.col(n) << st * std::cos(phi_(j)), st * std::sin(phi_(j)), ct;
    }
  }

  legendre_.reserve(ring_count());
  for (int i = 0; i < ring_count(); ++i) legendre_.push_back(normalized_legendre(degree_, theta_(i)));

  cos_.resize(longitude_count(), degree_ + 1);
  sin_.resize(longitude_count(), degree_ + 1);
  for (int j = 0; j < longitude_count(); ++j)
    for (int m = 0; m <= degree_; ++m) {
      cos_(j, m) = std::cos(m * phi_(j));
      sin_(j, m) = std::sin(m * phi_(j));
    }
}

bool SphericalGrid::masked(int node, Chart chart) const {
  const double t = node_theta(node);
  return chart == Chart::north ? (kPi - t) < kPoleMaskRadius : t < kPoleMaskRadius;
}

namespace {

void check_degree(const HarmonicField& field, const SphericalGrid& grid) {
  if (field.degree() > grid.degree())
    throw ConfigurationError("field degree " + std::to_string(field.degree()) + " exceeds grid degree " +
                             std::to_string(grid.degree()));
}

NodalDerivatives synthesize_impl(const HarmonicField& field, const SphericalGrid& grid, bool derivatives) {
  check_degree(field, grid);
  const HarmonicField f = field.with_degree(grid.degree());
  const int L = grid.degree();
  const int nodes = grid.node_count();
  const int comps = f.components();
  NodalDerivatives out;
  out.value.resize(nodes, comps);
  if (derivatives) {
    out.d_theta.resize(nodes, comps);
    out.d_phi.resize(nodes, comps);
    out.d_theta2.resize(nodes, comps);
    out.d_theta_phi.resize(nodes, comps);
    out.d_phi2.resize(nodes, comps);
    out.laplacian.resize(nodes, comps);
  }
  const Eigen::MatrixXd& C = grid.cos_table();
  const Eigen::MatrixXd& S = grid.sin_table();
  Eigen::VectorXd mvec = Eigen::VectorXd::LinSpaced(L + 1, 0.0, L);
  Eigen::VectorXd a0, b0, a1, b1, a2, b2, al, bl;

  for (int i = 0; i < grid.ring_count(); ++i) {
    const LegendreTable& t = grid.legendre(i);
    const int first = grid.node(i, 0);
    const int count = grid.longitude_count();
    for (int c = 0; c < comps; ++c) {
      const auto coeffs = f.coeffs().col(c);
      ring_partial_sums(coeffs, L, t.value, false, a0, b0);
      out.value.block(first, c, count, 1) = C * a0 + S * b0;
      if (!derivatives) continue;
      ring_partial_sums(coeffs, L, t.d1, false, a1, b1);
      ring_partial_sums(coeffs, L, t.d2, false, a2, b2);
      ring_partial_sums(coeffs, L, t.value, true, al, bl);
      // ∂φ cos(mφ) = −m sin(mφ), ∂φ sin(mφ) = m cos(mφ).
      out.d_theta.block(first, c, count, 1) = C * a1 + S * b1;
      out.d_theta2.block(first, c, count, 1) = C * a2 + S * b2;
      out.d_phi.block(first, c, count, 1) = C * mvec.cwiseProduct(b0) - S * mvec.cwiseProduct(a0);
      out.d_theta_phi.block(first, c, count, 1) = C * mvec.cwiseProduct(b1) - S * mvec.cwiseProduct(a1);
      const Eigen::VectorXd m2 = mvec.cwiseProduct(mvec);
      out.d_phi2.block(first, c, count, 1) = -(C * m2.cwiseProduct(a0) + S * m2.cwiseProduct(b0));
      out.laplacian.block(first, c, count, 1) = C * al + S * bl;
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd synthesize(const HarmonicField& field, const SphericalGrid& grid) {
  return synthesize_impl(field, grid, false).value;
}

NodalDerivatives synthesize_derivatives(const HarmonicField& field, const SphericalGrid& grid) {
  return synthesize_impl(field, grid, true);
}

HarmonicField analyze(const Eigen::Ref<const Eigen::MatrixXd>& values, const SphericalGrid& grid) {
  if (values.rows() != grid.node_count())
    throw ConfigurationError("analyze: expected one row per grid node");
  check_finite(values, "analyze");
  const int L = grid.degree();
  const int comps = static_cast<int>(values.cols());
  HarmonicField out(comps, L);
  const double dphi = 2.0 * kPi / grid.longitude_count();
  const int count = grid.longitude_count();
  for (int i = 0; i < grid.ring_count(); ++i) {
    const LegendreTable& t = grid.legendre(i);
    const double wr = grid.ring_weights()(i) * dphi;
    for (int c = 0; c < comps; ++c) {
      const auto ring = values.block(grid.node(i, 0), c, count, 1);
      const Eigen::VectorXd A = grid.cos_table().transpose() * ring;
      const Eigen::VectorXd B = grid.sin_table().transpose() * ring;
      for (int m = 0; m <= L; ++m) {
        const double sa = wr * order_scale(m) * A(m);
        const double sb = wr * order_scale(m) * B(m);
        for (int l = m; l <= L; ++l) {
          const double p = t.value(LegendreTable::index(l, m));
          out.coeffs()(harmonic_index(l, m), c) += sa * p;
          if (m > 0) out.coeffs()(harmonic_index(l, -m), c) += sb * p;
        }
      }
    }
  }
  return out;
}

PointEvaluation evaluate(const HarmonicField& field, double theta, double phi) {
  const int L = field.degree();
  const LegendreTable t = normalized_legendre(L, theta);
  const int comps = field.components();
  PointEvaluation out;
  for (auto* v : {&out.value, &out.d_theta, &out.d_phi, &out.d_theta2, &out.d_theta_phi, &out.d_phi2})
    v->setZero(comps);
  Eigen::VectorXd a0, b0, a1, b1, a2, b2;
  for (int c = 0; c < comps; ++c) {
    const auto coeffs = field.coeffs().col(c);
    ring_partial_sums(coeffs, L, t.value, false, a0, b0);
    ring_partial_sums(coeffs, L, t.d1, false, a1, b1);
    ring_partial_sums(coeffs, L, t.d2, false, a2, b2);
    for (int m = 0; m <= L; ++m) {
      const double cm = std::cos(m * phi), sm = std::sin(m * phi);
      out.value(c) += a0(m) * cm + b0(m) * sm;
      out.d_theta(c) += a1(m) * cm + b1(m) * sm;
      out.d_theta2(c) += a2(m) * cm + b2(m) * sm;
      out.d_phi(c) += m * (b0(m) * cm - a0(m) * sm);
      out.d_theta_phi(c) += m * (b1(m) * cm - a1(m) * sm);
      out.d_phi2(c) -= m * m * (a0(m) * cm + b0(m) * sm);
    }
  }
  return out;
}

HarmonicField round_laplacian(const HarmonicField& field) {
  HarmonicField out = field;
  for (int l = 0; l <= field.degree(); ++l)
    for (int m = -l; m <= l; ++m) out.coeffs().row(harmonic_index(l, m)) *= -l * (l + 1.0);
  return out;
}

Eigen::RowVectorXcd ChartGradient::at(int node) const {
  if (masked_[node]) throw DomainError("chart gradient requested at a masked node");
  return values_.row(node);
}

ChartGradient chart_gradient(const HarmonicField& field, const SphericalGrid& grid, Chart chart) {
  const NodalDerivatives d = synthesize_derivatives(field, grid);
  const int nodes = grid.node_count();
  Eigen::MatrixXcd values(nodes, field.components());
  std::vector<bool> masked(nodes);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int n = 0; n < nodes; ++n) {
    masked[n] = grid.masked(n, chart);
    if (masked[n]) {
      values.row(n).setConstant(Complex(nan, nan));
      continue;
    }
    const double theta = grid.node_theta(n);
    const Complex factor = chart_frame_factor(chart, theta, grid.node_phi(n));
    const double inv_sin = 1.0 / std::sin(theta);
    for (int c = 0; c < field.components(); ++c)
      values(n, c) = factor * Complex(d.d_theta(n, c), -d.d_phi(n, c) * inv_sin);
  }
  return ChartGradient(chart, std::move(values), std::move(masked));
}

Eigen::VectorXcd chart_gradient_at(const HarmonicField& field, const ChartPoint& point) {
  if (point.distance_to_excluded_pole() < kPoleMaskRadius)
    throw DomainError("chart point lies within the masked cap around the excluded pole");
  const double theta = point.theta(), phi = point.phi();
  Eigen::VectorXcd out(field.components());
  if (std::abs(point.z) == 0.0) {
    // At the chart centre F_z = ½(F_u − i F_v) with F_u = 2 ∂_θF|_{φ=0}, F_v = ±2 ∂_θF|_{φ=π/2}.
    const double pole_theta = point.chart == Chart::north ? 0.0 : kPi;
    const PointEvaluation eu = evaluate(field, pole_theta, 0.0);
    const PointEvaluation ev = evaluate(field, pole_theta, point.chart == Chart::north ? 0.5 * kPi : 1.5 * kPi);
    const double sign = point.chart == Chart::north ? 1.0 : -1.0;
    for (int c = 0; c < field.components(); ++c)
      out(c) = Complex(sign * eu.d_theta(c), -sign * ev.d_theta(c));
    return out;
  }
  const PointEvaluation e = evaluate(field, theta, phi);
  const Complex factor = chart_frame_factor(point.chart, theta, phi);
  const double inv_sin = 1.0 / std::sin(theta);
  for (int c = 0; c < field.components(); ++c) out(c) = factor * Complex(e.d_theta(c), -e.d_phi(c) * inv_sin);
  return out;
}

double integrate(const Eigen::Ref<const Eigen::VectorXd>& values, const SphericalGrid& grid,
                 const Eigen::Ref<const Eigen::VectorXd>& area_weight) {
  if (values.size() != grid.node_count() || area_weight.size() != grid.node_count())
    throw ConfigurationError("integrate: expected one value per grid node");
  check_finite(values, "integrate");
  check_finite(area_weight, "integrate");
  return (values.array() * area_weight.array() * grid.weights().array()).sum();
}

double integrate(const Eigen::Ref<const Eigen::VectorXd>& values, const SphericalGrid& grid) {
  if (values.size() != grid.node_count()) throw ConfigurationError("integrate: expected one value per grid node");
  check_finite(values, "integrate");
  return values.dot(grid.weights());
}

HarmonicField coordinate_field(int degree) {
  if (degree < 1) throw ConfigurationError("coordinate functions need degree ≥ 1");
  HarmonicField out(3, degree);
  const double s = std::sqrt(kFourPi / 3.0);
  out(0, 1, 1) = s;
  out(1, 1, -1) = s;
  out(2, 1, 0) = s;
  return out;
}

HarmonicField round_embedding(double radius, int degree) { return radius * coordinate_field(degree); }

}  // namespace pmc
