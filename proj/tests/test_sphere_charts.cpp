#include <doctest.h>

#include <cmath>
#include <random>

#include "pmc/sphere_charts.hpp"

using namespace pmc;

namespace {

HarmonicField random_field(int components, int degree, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal;
  HarmonicField f(components, degree);
  for (int c = 0; c < components; ++c)
    for (int h = 0; h < harmonic_count(degree); ++h) f.coeffs()(h, c) = scale * normal(rng);
  return f;
}

// Every harmonic of degree ≤ L as a separate component.
HarmonicField basis(int degree) {
  const int n = harmonic_count(degree);
  return HarmonicField(degree, Eigen::MatrixXd::Identity(n, n));
}

double value_at(const HarmonicField& f, Chart chart, Complex z) {
  const ChartPoint p{chart, z};
  return evaluate(f, p.theta(), p.phi()).value(0);
}

}  // namespace

TEST_CASE("grid has the documented node counts and total weight") {
  for (int L : {1, 5, 24}) {
    const SphericalGrid grid(L);
    CHECK(grid.ring_count() == L + 1);
    CHECK(grid.longitude_count() == 2 * L + 2);
    CHECK(grid.node_count() == (L + 1) * (2 * L + 2));
    CHECK(std::abs(grid.weights().sum() - kFourPi) < 1e-12 * kFourPi);
    CHECK(std::abs(grid.points().colwise().norm().maxCoeff() - 1.0) < 1e-15);
  }
  CHECK_THROWS_AS(SphericalGrid(0), ConfigurationError);
}

TEST_CASE("harmonic index round trip") {
  for (int l = 0; l <= 30; ++l)
    for (int m = -l; m <= l; ++m) {
      const auto [l2, m2] = harmonic_degree_order(harmonic_index(l, m));
      CHECK(l2 == l);
      CHECK(m2 == m);
    }
}

TEST_CASE("constant and single-mode synthesis") {
  const SphericalGrid grid(8);
  HarmonicField c(1, 8);
  c(0, 0, 0) = 3.0;
  const Eigen::VectorXd v = synthesize(c, grid).col(0);
  CHECK((v.array() - 3.0 / std::sqrt(kFourPi)).abs().maxCoeff() < 1e-14);

  HarmonicField z(1, 8);
  z(0, 1, 0) = 1.0;
  const Eigen::VectorXd w = synthesize(z, grid).col(0);
  const double norm = std::sqrt(3.0 / kFourPi);
  for (int n = 0; n < grid.node_count(); ++n) CHECK(std::abs(w(n) - norm * std::cos(grid.node_theta(n))) < 1e-14);

  const Eigen::MatrixXd x = synthesize(coordinate_field(8), grid);
  CHECK((x.transpose() - grid.points()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("analysis of elementary values") {
  const SphericalGrid grid(10);
  const HarmonicField one = analyze(Eigen::VectorXd::Ones(grid.node_count()), grid);
  CHECK(std::abs(one(0, 0, 0) - std::sqrt(kFourPi)) < 1e-12);
  CHECK(one.coeffs().bottomRows(harmonic_count(10) - 1).cwiseAbs().maxCoeff() < 1e-13);

  Eigen::VectorXd cos_theta(grid.node_count());
  for (int n = 0; n < grid.node_count(); ++n) cos_theta(n) = std::cos(grid.node_theta(n));
  HarmonicField c = analyze(cos_theta, grid);
  CHECK(std::abs(c(0, 1, 0) - std::sqrt(kFourPi / 3.0)) < 1e-12);
  c(0, 1, 0) = 0.0;
  CHECK(c.coeffs().cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("analyze inverts synthesize for band-limited fields") {
  std::mt19937_64 rng(7);
  const SphericalGrid grid(12);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const HarmonicField f = random_field(1 + 2 * (trial % 2), 12, rng);
    const HarmonicField g = analyze(synthesize(f, grid), grid);
    worst = std::max(worst, (g.coeffs() - f.coeffs()).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("aliasing of an under-resolved field is bounded by its tail") {
  std::mt19937_64 rng(11);
  const int L = 10;
  const HarmonicField f = random_field(1, L + 3, rng);
  const SphericalGrid coarse(L), dense(2 * L);
  Eigen::VectorXd sampled(coarse.node_count());
  for (int n = 0; n < coarse.node_count(); ++n) sampled(n) = evaluate(f, coarse.node_theta(n), coarse.node_phi(n)).value(0);
  const HarmonicField aliased = analyze(sampled, coarse);
  const HarmonicField exact = analyze(synthesize(f, dense), dense).with_degree(L);
  const double tail = f.coeffs().bottomRows(harmonic_count(L + 3) - harmonic_count(L)).norm();
  const double error = (aliased.coeffs() - exact.coeffs()).norm();
  CHECK(tail > 0.0);
  CHECK(error <= tail);
  CHECK((exact.coeffs() - f.with_degree(L).coeffs()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("quadrature reproduces the harmonic Gram matrix") {
  const int L = 9;
  const SphericalGrid grid(L);
  const Eigen::MatrixXd Y = synthesize(basis(L), grid);
  const Eigen::MatrixXd gram = Y.transpose() * grid.weights().asDiagonal() * Y;
  CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("integration of moments") {
  const SphericalGrid grid(16);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(grid.node_count());
  const Eigen::VectorXd x3 = grid.points().row(2).transpose();
  CHECK(std::abs(integrate(one, grid) - kFourPi) < 1e-10);
  CHECK(std::abs(integrate(x3, grid)) < 1e-10);
  CHECK(std::abs(integrate(x3.array().square().matrix(), grid) - kFourPi / 3.0) < 1e-9);
  CHECK(std::abs(integrate(x3, grid, 2.0 * one) - integrate(x3, grid) * 2.0) < 1e-12);
  const Eigen::VectorXd bad = Eigen::VectorXd::Constant(grid.node_count(), std::nan(""));
  CHECK_THROWS_AS(integrate(bad, grid), DataError);
}

TEST_CASE("spectral derivatives agree with centered differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const HarmonicField f = random_field(1, 8, rng, 0.3);
    const double theta = 0.2 + (kPi - 0.4) * uniform(rng), phi = 2.0 * kPi * uniform(rng);
    const PointEvaluation e = evaluate(f, theta, phi);
    const double dt = (evaluate(f, theta + h, phi).value(0) - evaluate(f, theta - h, phi).value(0)) / (2.0 * h);
    const double dp = (evaluate(f, theta, phi + h).value(0) - evaluate(f, theta, phi - h).value(0)) / (2.0 * h);
    worst = std::max({worst, std::abs(dt - e.d_theta(0)), std::abs(dp - e.d_phi(0))});
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("nodal derivatives match point evaluation") {
  std::mt19937_64 rng(5);
  const SphericalGrid grid(7);
  const HarmonicField f = random_field(3, 7, rng);
  const NodalDerivatives d = synthesize_derivatives(f, grid);
  double worst = 0.0;
  for (int n = 0; n < grid.node_count(); n += 7) {
    const PointEvaluation e = evaluate(f, grid.node_theta(n), grid.node_phi(n));
    worst = std::max({worst, (d.value.row(n).transpose() - e.value).cwiseAbs().maxCoeff(),
                      (d.d_theta.row(n).transpose() - e.d_theta).cwiseAbs().maxCoeff(),
                      (d.d_phi2.row(n).transpose() - e.d_phi2).cwiseAbs().maxCoeff(),
                      (d.d_theta_phi.row(n).transpose() - e.d_theta_phi).cwiseAbs().maxCoeff()});
  }
  CHECK(worst < 1e-11);
  const HarmonicField lap = analyze(d.laplacian, grid);
  CHECK((lap.coeffs() - round_laplacian(f).coeffs()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("chart transition and pole distances") {
  const ChartPoint p = ChartPoint::from_angles(Chart::north, 1.1, 0.4);
  const ChartPoint q = p.in_chart(Chart::south);
  CHECK(std::abs(q.z - 1.0 / p.z) < 1e-15);
  CHECK(std::abs(q.theta() - 1.1) < 1e-14);
  CHECK(std::abs(q.phi() - 0.4) < 1e-14);
  CHECK(std::abs(p.distance_to_excluded_pole() - (kPi - 1.1)) < 1e-14);
  CHECK(std::abs(q.distance_to_excluded_pole() - 1.1) < 1e-14);
  CHECK_THROWS_AS(ChartPoint::from_angles(Chart::north, 0.0, 0.0).in_chart(Chart::south), DomainError);
}

TEST_CASE("every node is unmasked in its preferred chart") {
  const SphericalGrid grid(24);
  for (int n = 0; n < grid.node_count(); ++n) CHECK_FALSE(grid.masked(n, grid.preferred_chart(n)));
}

TEST_CASE("chart gradient of a constant vanishes") {
  const SphericalGrid grid(6);
  HarmonicField c(1, 6);
  c(0, 0, 0) = 1.7;
  for (Chart chart : {Chart::north, Chart::south}) {
    const ChartGradient g = chart_gradient(c, grid, chart);
    for (int n = 0; n < grid.node_count(); ++n)
      if (!g.masked(n)) CHECK(std::abs(g.values()(n, 0)) < 1e-14);
  }
}

TEST_CASE("chart gradient agrees with finite differences in chart coordinates") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const HarmonicField f = random_field(1, 6, rng, 0.2);
    const Chart chart = trial % 2 ? Chart::south : Chart::north;
    const Complex z(uniform(rng), uniform(rng));
    const Complex fd = 0.5 * (value_at(f, chart, z + h) - value_at(f, chart, z - h)) / (2.0 * h) -
                       Complex(0.0, 0.5) * (value_at(f, chart, z + Complex(0, h)) - value_at(f, chart, z - Complex(0, h))) /
                           (2.0 * h);
    worst = std::max(worst, std::abs(chart_gradient_at(f, ChartPoint{chart, z})(0) - fd));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("nodal chart gradient matches the pointwise one") {
  std::mt19937_64 rng(17);
  const SphericalGrid grid(8);
  const HarmonicField f = random_field(3, 8, rng);
  for (Chart chart : {Chart::north, Chart::south}) {
    const ChartGradient g = chart_gradient(f, grid, chart);
    for (int n = 0; n < grid.node_count(); n += 5) {
      if (g.masked(n)) {
        CHECK_THROWS_AS(g.at(n), DomainError);
        continue;
      }
      const ChartPoint p = ChartPoint::from_angles(chart, grid.node_theta(n), grid.node_phi(n));
      CHECK((g.at(n).transpose() - chart_gradient_at(f, p)).cwiseAbs().maxCoeff() < 1e-11);
    }
  }
  CHECK_THROWS_AS(chart_gradient_at(f, ChartPoint::from_angles(Chart::north, kPi - 0.05, 0.0)), DomainError);
}

TEST_CASE("north and south gradients satisfy the transition rule") {
  std::mt19937_64 rng(19);
  const SphericalGrid grid(12);
  const HarmonicField f = random_field(3, 12, rng);
  const ChartGradient north = chart_gradient(f, grid, Chart::north);
  const ChartGradient south = chart_gradient(f, grid, Chart::south);
  int compared = 0;
  for (int n = 0; n < grid.node_count(); ++n) {
    if (north.masked(n) || south.masked(n)) continue;
    const Complex zn = ChartPoint::from_angles(Chart::north, grid.node_theta(n), grid.node_phi(n)).z;
    // z_north = 1 / z_south, so ∂/∂z_south = −z_north² ∂/∂z_north.
    const Eigen::RowVectorXcd expected = -zn * zn * north.at(n);
    CHECK((south.at(n) - expected).cwiseAbs().maxCoeff() < 1e-8);
    ++compared;
  }
  CHECK(compared > grid.node_count() / 2);
}

TEST_CASE("stereographic parametrization of the round sphere is conformal") {
  const SphericalGrid grid(16);
  const HarmonicField F = round_embedding(1.0, 16);
  for (Chart chart : {Chart::north, Chart::south}) {
    const ChartGradient g = chart_gradient(F, grid, chart);
    double worst = 0.0;
    for (int n = 0; n < grid.node_count(); ++n)
      if (!g.masked(n)) worst = std::max(worst, std::abs(g.at(n).transpose().cwiseProduct(g.at(n).transpose()).sum()));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("input validation") {
  const SphericalGrid grid(4);
  CHECK_THROWS_AS(synthesize(HarmonicField(1, 5), grid), ConfigurationError);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(grid.node_count());
  v(3) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(analyze(v, grid), DataError);
  CHECK_THROWS_AS(analyze(Eigen::VectorXd::Ones(5), grid), ConfigurationError);
  CHECK_THROWS_AS(HarmonicField(0, 3), ConfigurationError);
  HarmonicField a(1, 3), b(1, 4);
  CHECK_THROWS_AS(a += b, ConfigurationError);
}

TEST_CASE("templated field casts to extended precision") {
  std::mt19937_64 rng(23);
  const HarmonicField f = random_field(2, 3, rng);
  const auto g = f.cast<long double>();
  CHECK(g.degree() == 3);
  CHECK(static_cast<double>(g(1, 2, -1)) == f(1, 2, -1));
}
