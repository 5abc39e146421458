#pragma once

// Spectral atlas of the unit sphere: real orthonormal spherical harmonics on a
// Gauss-Legendre x uniform-longitude collocation grid, the two stereographic
// charts, and quadrature.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "pmc/errors.hpp"

namespace pmc {

using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kFourPi = 4.0 * kPi;

/// Nodes closer than this angle (radians) to a chart's excluded pole are masked.
inline constexpr double kPoleMaskRadius = 0.1;

constexpr int harmonic_count(int degree) { return (degree + 1) * (degree + 1); }
constexpr int harmonic_index(int l, int m) { return l * l + l + m; }

/// Inverse of harmonic_index.
inline std::pair<int, int> harmonic_degree_order(int index) {
  int l = static_cast<int>(std::sqrt(static_cast<double>(index)));
  while ((l + 1) * (l + 1) <= index) ++l;
  while (l * l > index) --l;
  return {l, index - l * l - l};
}

/// Bilinear cross product; Eigen's cross() conjugates complex results.
inline CVec3 bilinear_cross(const CVec3& a, const CVec3& b) {
  return CVec3(a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0));
}

/// Gauss-Legendre nodes on [-1, 1] in descending order, with weights.
void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

/// Real spherical-harmonic coefficients, one column per component.
///
/// Row `harmonic_index(l, m)` holds the coefficient of Y_lm, where
/// Y_l0 = P̄_l^0(cos θ), Y_lm = √2 P̄_l^m(cos θ) cos(mφ) and
/// Y_l,-m = √2 P̄_l^m(cos θ) sin(mφ) for m > 0; every Y_lm has unit L² norm on S².
template <typename Scalar>
class BasicHarmonicField {
 public:
  using Coefficients = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  BasicHarmonicField() = default;

  BasicHarmonicField(int components, int degree)
      : degree_(degree), coeffs_(Coefficients::Zero(harmonic_count(checked(degree)), components)) {
    if (components < 1) throw ConfigurationError("harmonic field needs at least one component");
  }

  BasicHarmonicField(int degree, Coefficients coeffs) : degree_(checked(degree)), coeffs_(std::move(coeffs)) {
    if (coeffs_.rows() != harmonic_count(degree_) || coeffs_.cols() < 1)
      throw ConfigurationError("coefficient matrix does not match degree");
  }

  int components() const { return static_cast<int>(coeffs_.cols()); }
  int degree() const { return degree_; }

  Scalar operator()(int component, int l, int m) const { return coeffs_(harmonic_index(l, m), component); }
  Scalar& operator()(int component, int l, int m) { return coeffs_(harmonic_index(l, m), component); }

  const Coefficients& coeffs() const { return coeffs_; }
  Coefficients& coeffs() { return coeffs_; }

  /// Zero-pads or truncates to `degree`.
  BasicHarmonicField with_degree(int degree) const {
    BasicHarmonicField out(components(), degree);
    const int rows = std::min(harmonic_count(degree), harmonic_count(degree_));
    out.coeffs_.topRows(rows) = coeffs_.topRows(rows);
    return out;
  }

  BasicHarmonicField component(int c) const { return BasicHarmonicField(degree_, Coefficients(coeffs_.col(c))); }

  template <typename Other>
  BasicHarmonicField<Other> cast() const {
    return BasicHarmonicField<Other>(degree_, coeffs_.template cast<Other>());
  }

  BasicHarmonicField& operator+=(const BasicHarmonicField& rhs) {
    match(rhs);
    coeffs_ += rhs.coeffs_;
    return *this;
  }
  BasicHarmonicField& operator-=(const BasicHarmonicField& rhs) {
    match(rhs);
    coeffs_ -= rhs.coeffs_;
    return *this;
  }
  BasicHarmonicField& operator*=(Scalar s) {
    coeffs_ *= s;
    return *this;
  }

 private:
  static int checked(int degree) {
    if (degree < 0) throw ConfigurationError("harmonic degree must be non-negative");
    return degree;
  }
  void match(const BasicHarmonicField& rhs) const {
    if (rhs.degree_ != degree_ || rhs.components() != components())
      throw ConfigurationError("harmonic fields differ in degree or component count");
  }

  int degree_ = 0;
  Coefficients coeffs_;
};

template <typename Scalar>
BasicHarmonicField<Scalar> operator+(BasicHarmonicField<Scalar> lhs, const BasicHarmonicField<Scalar>& rhs) {
  return lhs += rhs;
}
template <typename Scalar>
BasicHarmonicField<Scalar> operator-(BasicHarmonicField<Scalar> lhs, const BasicHarmonicField<Scalar>& rhs) {
  return lhs -= rhs;
}
template <typename Scalar>
BasicHarmonicField<Scalar> operator*(Scalar s, BasicHarmonicField<Scalar> field) {
  return field *= s;
}

using HarmonicField = BasicHarmonicField<double>;

/// Normalized associated Legendre functions P̄_l^m(cos θ) and their first two
/// θ-derivatives for 0 ≤ m ≤ l ≤ degree; no Condon-Shortley phase.
struct LegendreTable {
  int degree = 0;
  Eigen::ArrayXd value, d1, d2;
  static int index(int l, int m) { return l * (l + 1) / 2 + m; }
};

LegendreTable normalized_legendre(int degree, double theta);

enum class Chart { north, south };

/// A point of S² in stereographic coordinates. The north chart is centred at
/// θ = 0 with z = tan(θ/2) e^{iφ}; the south chart uses z_south = 1 / z_north.
struct ChartPoint {
  Chart chart = Chart::north;
  Complex z{0.0, 0.0};

  static ChartPoint from_angles(Chart chart, double theta, double phi);
  double theta() const;
  double phi() const;
  /// Same point in the other chart; throws DomainError at the point the target chart cannot see.
  ChartPoint in_chart(Chart target) const;
  /// Angular distance from the pole excluded by this chart.
  double distance_to_excluded_pole() const;
};

/// F_z = chart_frame_factor · (F_θ − i F_φ / sin θ) in the given chart.
Complex chart_frame_factor(Chart chart, double theta, double phi);
/// Factor c with F_{z̄z} = c · Δ_{S²}F in the given chart (cos⁴(θ/2) north, sin⁴(θ/2) south).
double chart_laplacian_factor(Chart chart, double theta);
/// Chart in which the node is farthest from the excluded pole.
inline Chart preferred_chart(double theta) { return theta <= 0.5 * kPi ? Chart::north : Chart::south; }

class SphericalGrid {
 public:
  explicit SphericalGrid(int degree);

  int degree() const { return degree_; }
  int ring_count() const { return degree_ + 1; }
  int longitude_count() const { return 2 * degree_ + 2; }
  int node_count() const { return ring_count() * longitude_count(); }
  int node(int ring, int lon) const { return ring * longitude_count() + lon; }
  int ring_of(int node) const { return node / longitude_count(); }
  int lon_of(int node) const { return node % longitude_count(); }

  double theta(int ring) const { return theta_(ring); }
  double phi(int lon) const { return phi_(lon); }
  double node_theta(int node) const { return theta_(ring_of(node)); }
  double node_phi(int node) const { return phi_(lon_of(node)); }

  /// Quadrature weights per node (steradians), summing to 4π.
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::VectorXd& ring_weights() const { return ring_weights_; }
  /// Unit-sphere positions of the nodes, 3 × node_count.
  const Eigen::Matrix3Xd& points() const { return points_; }

  const LegendreTable& legendre(int ring) const { return legendre_[ring]; }
  /// cos(mφ_j), sin(mφ_j); longitude_count × (degree + 1).
  const Eigen::MatrixXd& cos_table() const { return cos_; }
  const Eigen::MatrixXd& sin_table() const { return sin_; }

  bool masked(int node, Chart chart) const;
  Chart preferred_chart(int node) const { return pmc::preferred_chart(node_theta(node)); }

 private:
  int degree_;
  Eigen::VectorXd theta_, phi_, ring_weights_, weights_;
  Eigen::Matrix3Xd points_;
  std::vector<LegendreTable> legendre_;
  Eigen::MatrixXd cos_, sin_;
};

/// Nodal values and (θ, φ) derivatives, each node_count × components.
struct NodalDerivatives {
  Eigen::MatrixXd value, d_theta, d_phi, d_theta2, d_theta_phi, d_phi2, laplacian;
};

/// Node values, node_count × components.
Eigen::MatrixXd synthesize(const HarmonicField& field, const SphericalGrid& grid);
/// Values, first and second (θ, φ) derivatives and the round Laplacian at every node.
NodalDerivatives synthesize_derivatives(const HarmonicField& field, const SphericalGrid& grid);
/// Quadrature projection onto harmonics of degree ≤ grid degree; exact for band-limited input.
HarmonicField analyze(const Eigen::Ref<const Eigen::MatrixXd>& values, const SphericalGrid& grid);

struct PointEvaluation {
  Eigen::VectorXd value, d_theta, d_phi, d_theta2, d_theta_phi, d_phi2;
};
/// Evaluates a field and its derivatives at an arbitrary point; valid at the poles for
/// value and d_theta (the latter taken along the meridian φ).
PointEvaluation evaluate(const HarmonicField& field, double theta, double phi);

/// Round Laplacian in coefficient space (multiplies by −l(l+1)).
HarmonicField round_laplacian(const HarmonicField& field);

/// Per-node complex derivative ∂/∂z in one chart; masked nodes hold NaN.
class ChartGradient {
 public:
  ChartGradient(Chart chart, Eigen::MatrixXcd values, std::vector<bool> masked)
      : chart_(chart), values_(std::move(values)), masked_(std::move(masked)) {}
  Chart chart() const { return chart_; }
  const Eigen::MatrixXcd& values() const { return values_; }
  bool masked(int node) const { return masked_[node]; }
  /// Throws DomainError when the node is masked in this chart.
  Eigen::RowVectorXcd at(int node) const;

 private:
  Chart chart_;
  Eigen::MatrixXcd values_;
  std::vector<bool> masked_;
};

ChartGradient chart_gradient(const HarmonicField& field, const SphericalGrid& grid, Chart chart);
/// ∂F/∂z at a chart point; throws DomainError within kPoleMaskRadius of the excluded pole.
Eigen::VectorXcd chart_gradient_at(const HarmonicField& field, const ChartPoint& point);

/// Σ values · weight · w_ij. `area_weight` is dV/dV_round at each node.
double integrate(const Eigen::Ref<const Eigen::VectorXd>& values, const SphericalGrid& grid,
                 const Eigen::Ref<const Eigen::VectorXd>& area_weight);
double integrate(const Eigen::Ref<const Eigen::VectorXd>& values, const SphericalGrid& grid);

/// Coordinate functions (x₁, x₂, x₃) restricted to S², as a 3-component field of the given degree.
HarmonicField coordinate_field(int degree);
/// Round sphere of the given radius centred at the origin.
HarmonicField round_embedding(double radius, int degree);

}  // namespace pmc
