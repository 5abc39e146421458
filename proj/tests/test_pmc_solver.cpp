#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "pmc/immersion_geometry.hpp"
#include "pmc/pmc_solver.hpp"

using namespace pmc;

namespace {

HarmonicField constant_target(double value, int degree = 0) {
  HarmonicField H(1, degree);
  H(0, 0, 0) = value * std::sqrt(kFourPi);
  return H;
}

Eigen::VectorXd constant(const SphericalGrid& grid, double c) { return Eigen::VectorXd::Constant(grid.node_count(), c); }

SolverConfig small_config(int degree) {
  SolverConfig c;
  c.degree = degree;
  c.threads = 1;
  return c;
}

// Deviation of |F − centre| from r over the nodes, centre = mean of the nodal positions.
double sphere_deviation(const HarmonicField& F, double r, const SphericalGrid& grid) {
  const Eigen::MatrixXd x = synthesize(F, grid);
  const Eigen::RowVector3d centre = (grid.weights().transpose() * x) / kFourPi;
  return ((x.rowwise() - centre).rowwise().norm().array() - r).abs().maxCoeff();
}

}  // namespace

TEST_CASE("configuration validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.tol = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigurationError);
  c = SolverConfig{};
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigurationError);
  c = SolverConfig{};
  c.damping = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigurationError);
  c = SolverConfig{};
  c.degree = 0;
  CHECK_THROWS_AS(c.validate(), ConfigurationError);
}

TEST_CASE("worker count") {
  SolverConfig c;
  c.threads = 1;
  CHECK(worker_count(c) == 1);
  c.threads = 0;
  setenv("PMC_THREADS", "1", 1);
  CHECK(worker_count(c) == 1);
  unsetenv("PMC_THREADS");
  CHECK(worker_count(c) >= 1);
}

TEST_CASE("residual of the based unit sphere vanishes") {
  const SphericalGrid grid(12);
  const HarmonicField F = rigid_rebase(round_embedding(1.0, 12));
  const ResidualBreakdown r = residual(F, Vec3::Zero(), constant(grid, 2.0), grid);
  CHECK(r.norm < 1e-8);
  CHECK(r.based_norm < 1e-14);
  CHECK(r.balance_norm < 1e-12);
  CHECK(std::abs(evaluate(F, 0.0, 0.0).value.norm()) < 1e-14);
}

TEST_CASE("residual detects the wrong radius") {
  const SphericalGrid grid(12);
  const HarmonicField F = rigid_rebase(round_embedding(2.0, 12));
  const ResidualBreakdown r = residual(F, Vec3::Zero(), constant(grid, 2.0), grid);
  CHECK(r.conformality_l2 < 1e-10);
  CHECK(r.mc_l2 > 0.5);
}

TEST_CASE("residual depends only on H_target + ℓ") {
  const SphericalGrid grid(10);
  const HarmonicField F = rigid_rebase(perturbed_sphere(10, 0.05, 3));
  const Vec3 b(0.2, -0.1, 0.3);
  const Eigen::VectorXd H = constant(grid, 2.0) + 0.1 * grid.points().row(0).transpose();
  const Eigen::VectorXd shifted = H + evaluate(AffineFunction{b}, grid);
  const ResidualBreakdown r1 = residual(F, b, H, grid);
  const ResidualBreakdown r2 = residual(F, Vec3::Zero(), shifted, grid);
  CHECK((r1.stacked - r2.stacked).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("residual rejects non-positive targets") {
  const SphericalGrid grid(6);
  const HarmonicField F = rigid_rebase(round_embedding(1.0, 6));
  Eigen::VectorXd H = constant(grid, 2.0);
  H(5) = 0.0;
  CHECK_THROWS_AS(residual(F, Vec3::Zero(), H, grid), DomainError);
  CHECK_THROWS_AS(residual(F, Vec3::Zero(), Eigen::VectorXd::Ones(4), grid), ConfigurationError);
}

TEST_CASE("gauge basis") {
  const SphericalGrid grid(10);
  for (double amplitude : {0.0, 0.05}) {
    const HarmonicField F = rigid_rebase(perturbed_sphere(10, amplitude, 8));
    const GaugeBasis g = gauge_basis(F, grid);
    CHECK(g.directions.cols() == 9);
    CHECK(g.gram_condition() < 1e10);
    const Eigen::MatrixXd Q = g.rigid_motions();
    CHECK(Q.rows() == F.coeffs().size() + 3);
    CHECK((Q.transpose() * Q - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gauge directions leave the residual invariant at the sphere") {
  const SphericalGrid grid(10);
  const HarmonicField F = rigid_rebase(round_embedding(1.0, 10));
  const Eigen::VectorXd H = constant(grid, 2.0);
  const GaugeBasis g = gauge_basis(F, grid);
  const double eps = 1e-6;
  for (int j = 0; j < 9; ++j) {
    HarmonicField moved = F;
    moved.coeffs() += eps * Eigen::Map<const Eigen::MatrixXd>(g.directions.col(j).data(), F.coeffs().rows(), 3) /
                      g.directions.col(j).norm();
    const ResidualBreakdown r = residual(moved, Vec3::Zero(), H, grid);
    CHECK(r.conformality_l2 / eps < 1e-4);
    CHECK(r.mc_l2 / eps < 1e-4);
  }
}

TEST_CASE("rigid rebase fixes the base point and frame") {
  const HarmonicField F = rigid_rebase(perturbed_sphere(8, 0.1, 2));
  const PointEvaluation e0 = evaluate(F, 0.0, 0.0), e1 = evaluate(F, 0.0, 0.5 * kPi);
  CHECK(e0.value.norm() < 1e-14);
  const Vec3 N = Vec3(e0.d_theta).cross(Vec3(e1.d_theta)).normalized();
  CHECK((N - Vec3::UnitZ()).norm() < 1e-14);
  CHECK(std::abs(e0.d_theta(1)) < 1e-14);
  CHECK(e0.d_theta(0) > 0.0);
}

TEST_CASE("a step from the exact solution does not move it") {
  const SphericalGrid grid(8);
  ContinuationState state;
  state.coefficients = rigid_rebase(round_embedding(1.0, 8));
  const NewtonStep step = gauge_projected_step(state, constant(grid, 2.0), grid, small_config(8));
  CHECK(step.update.norm() < 1e-10);
}

TEST_CASE("Newton converges from a perturbed sphere with rigid-orthogonal updates") {
  const int L = 12;
  const SphericalGrid grid(L);
  const SolverConfig config = small_config(L);
  ContinuationState state;
  state.coefficients = rigid_rebase(perturbed_sphere(L, 1e-3, 4));
  const Eigen::VectorXd H = constant(grid, 2.0);
  double last = residual(state.coefficients, state.b, H, grid).norm;
  int iterations = 0;
  while (last > 1e-8 && iterations < 10) {
    const Eigen::MatrixXd Q = gauge_basis(state.coefficients, grid).rigid_motions();
    const NewtonStep step = gauge_projected_step(state, H, grid, config);
    ++iterations;
    REQUIRE(step.accepted);
    CHECK(step.residual_after < step.residual_before);
    CHECK((Q.transpose() * step.update).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, step.update.norm()));
    last = step.residual_after;
  }
  CHECK(last < 1e-8);
  CHECK(iterations <= 10);
  for (std::size_t i = 1; i < state.residual_history.size(); ++i)
    CHECK(state.residual_history[i] < state.residual_history[i - 1]);
}

TEST_CASE("gauge_projected_step validates its state") {
  const SphericalGrid grid(6);
  ContinuationState state;
  state.coefficients = rigid_rebase(round_embedding(1.0, 8));
  CHECK_THROWS_AS(gauge_projected_step(state, constant(grid, 2.0), grid, small_config(6)), ConfigurationError);
}

TEST_CASE("Hopf recovery") {
  SolverConfig config = small_config(12);
  config.initial_noise = 1e-2;
  const SolveResult r = solve_pmc(constant_target(2.0), config);
  REQUIRE(r.converged);
  const SphericalGrid grid(12);
  CHECK(sphere_deviation(r.F, 1.0, grid) < 1e-7);
  CHECK(r.ell.b.norm() < 1e-8);
  CHECK(r.balanced_ell.b.norm() < 1e-8);
  CHECK(r.final_residual.conformality_l2 < config.tol);
  CHECK(r.final_residual.mc_l2 < config.tol);
  CHECK(r.report.obstruction.norm() < 1e-6);
  CHECK(r.state.s == 1.0);
  CHECK(r.diagnostic.empty());
}

TEST_CASE("constant target 4 gives the half sphere radius") {
  const SolveResult r = solve_pmc(constant_target(4.0), small_config(10));
  REQUIRE(r.converged);
  CHECK(sphere_deviation(r.F, 0.5, SphericalGrid(10)) < 1e-7);
  CHECK(r.ell.b.norm() < 1e-8);
}

TEST_CASE("non-constant target is realized up to the returned affine function") {
  const int L = 16;
  HarmonicField target = constant_target(2.0, 2);
  // 0.1·(x₁² − x₂²) = 0.1·√(16π/15)·Y₂₂
  target(0, 2, 2) = 0.1 * std::sqrt(16.0 * kPi / 15.0);
  const SolverConfig config = small_config(L);
  const SolveResult r = solve_pmc(target, config);
  REQUIRE(r.converged);
  CHECK(r.final_residual.conformality_l2 < config.tol);
  CHECK(r.final_residual.mc_l2 < config.tol);
  CHECK(r.final_residual.conformality_sup < 100.0 * config.tol);
  CHECK(r.final_residual.mc_sup < 100.0 * config.tol);
  const SphericalGrid grid(L);
  const FundamentalForms forms = fundamental_forms(ImmersionField(r.F, grid), grid);
  const Eigen::VectorXd expected =
      synthesize(target.with_degree(L), grid).col(0) + evaluate(r.ell, grid);
  CHECK((forms.mean_curvature - expected).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(obstruction_vector(expected, forms.area_weight, grid).norm() < 1e-6);
  CHECK((r.balanced_ell.b - r.ell.b).norm() < 1e-6);
}

TEST_CASE("results do not depend on the worker count") {
  HarmonicField target = constant_target(2.0, 1);
  target(0, 1, 1) = 0.2;
  SolverConfig one = small_config(8), two = small_config(8);
  one.initial_noise = two.initial_noise = 1e-3;
  two.threads = 2;
  const SolveResult a = solve_pmc(target, one), b = solve_pmc(target, two);
  CHECK(a.converged == b.converged);
  CHECK((a.F.coeffs() - b.F.coeffs()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.ell.b == b.ell.b);
}

TEST_CASE("a solve that cannot reach its tolerance reports a stall") {
  SolverConfig config = small_config(6);
  config.max_newton = 1;
  config.tol = 1e-15;
  config.initial_noise = 0.05;
  const SolveResult r = solve_pmc(constant_target(2.0), config);
  CHECK_FALSE(r.converged);
  CHECK_FALSE(r.diagnostic.empty());
  CHECK(r.state.steps.size() >= 1);
}

TEST_CASE("solver input validation") {
  CHECK_THROWS_AS(solve_pmc(HarmonicField(3, 2), small_config(6)), ConfigurationError);
  CHECK_THROWS_AS(solve_pmc(constant_target(2.0, 8), small_config(6)), ConfigurationError);
  HarmonicField negative = constant_target(0.5, 1);
  negative(0, 1, 0) = 2.0;
  CHECK_THROWS_AS(solve_pmc(negative, small_config(6)), DomainError);
}

TEST_CASE("perturbed sphere") {
  CHECK((perturbed_sphere(6, 0.0, 1).coeffs() - round_embedding(1.0, 6).coeffs()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((perturbed_sphere(6, 0.1, 9).coeffs() - perturbed_sphere(6, 0.1, 9).coeffs()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((perturbed_sphere(6, 0.1, 9).coeffs() - perturbed_sphere(6, 0.1, 10).coeffs()).norm() > 0.0);
}

TEST_CASE("normal variation operator on the unit sphere") {
  const SphericalGrid grid(12);
  const ImmersionField F(round_embedding(1.0, 12), grid);
  for (int j = 0; j < 3; ++j)
    CHECK(normal_variation_operator(F, grid.points().row(j).transpose(), grid).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((normal_variation_operator(F, constant(grid, 1.0), grid).array() + 2.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("normal variation operator is the derivative of H") {
  const int L = 16;
  const SphericalGrid grid(L);
  HarmonicField f(1, L);
  f(0, 2, 1) = 0.4;
  f(0, 3, -2) = -0.3;
  f(0, 0, 0) = 0.2;
  const Eigen::VectorXd fv = synthesize(f, grid).col(0);
  const double eps = 1e-5;
  auto mean_curvature = [&](double s) {
    Eigen::MatrixXd x(grid.node_count(), 3);
    for (int n = 0; n < grid.node_count(); ++n) x.row(n) = (1.0 + s * fv(n)) * grid.points().col(n).transpose();
    return fundamental_forms(ImmersionField(analyze(x, grid), grid), grid).mean_curvature;
  };
  const Eigen::VectorXd dH = (mean_curvature(eps) - mean_curvature(-eps)) / (2.0 * eps);
  const Eigen::VectorXd predicted = normal_variation_operator(ImmersionField(round_embedding(1.0, L), grid), fv, grid);
  CHECK((dH - predicted).cwiseAbs().maxCoeff() < 1e-4 * predicted.cwiseAbs().maxCoeff());
}

TEST_CASE("affine cokernel") {
  const SphericalGrid grid(16);
  const Eigen::Matrix3Xd& p = grid.points();
  CHECK(affine_insolvability_check(grid, constant(grid, 1.0)) < 1e-10);
  CHECK(std::abs(affine_insolvability_check(grid) - std::sqrt(kFourPi / 3.0)) < 1e-8);
  const Eigen::VectorXd x12 = (p.row(0) + p.row(1)).transpose();
  CHECK(std::abs(affine_insolvability_check(grid, x12) - std::sqrt(2.0 * kFourPi / 3.0)) < 1e-8);
}
