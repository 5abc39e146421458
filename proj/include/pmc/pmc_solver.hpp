#pragma once

// Gauss-Newton continuation for a conformal immersion F: S² → R³ with mean
// curvature H_target + ℓ, starting from the round sphere.

#include <cstdint>
#include <string>
#include <vector>

#include "pmc/affine_class.hpp"
#include "pmc/immersion_geometry.hpp"
#include "pmc/sphere_charts.hpp"

namespace pmc {

struct SolverConfig {
  int degree = 24;
  double tol = 1e-8;
  int max_newton = 30;
  int steps = 10;
  double min_step = 1.0 / 160.0;  // smallest continuation step before declaring a stall
  double damping = 0.5;           // line-search contraction
  int max_halvings = 20;
  double fd_step = 1e-6;
  double initial_noise = 0.0;  // amplitude of the perturbation of the round start
  std::uint64_t seed = 1;
  int threads = 0;  // 0: PMC_THREADS, else the hardware concurrency

  /// Throws ConfigurationError for a non-positive tolerance, step count, degree, ...
  void validate() const;
};

/// Worker count for Jacobian columns: config.threads, else PMC_THREADS, capped by the hardware.
int worker_count(const SolverConfig& config);

/// Unknowns are [coefficients column-major (component-wise), b]; the residual stacks, per node
/// and weighted by √w, Re/Im of F_z·F_z and the three components of the mean-curvature residual
/// with H = H_target + ℓ_b, then six based-immersion rows at the north pole p₀
/// (F(p₀) = 0, N(p₀) ∥ e₃, F_u(p₀) ∥ e₁) and three balance rows ∫x dV_F = 0.
struct ResidualBreakdown {
  Eigen::VectorXd stacked;
  double norm = 0.0;
  double conformality_l2 = 0.0;
  double conformality_sup = 0.0;
  double mc_l2 = 0.0;
  double mc_sup = 0.0;
  double based_norm = 0.0;
  double balance_norm = 0.0;
};

/// Throws DomainError when H_target ≤ 0 at some node.
ResidualBreakdown residual(const HarmonicField& F, const Vec3& b, const Eigen::VectorXd& H_target,
                           const SphericalGrid& grid);

/// Directions in coefficient space along which the residual is (infinitesimally) invariant:
/// 3 translations, 3 ambient rotations and 3 conformal fields dF(grad x_j).
struct GaugeBasis {
  Eigen::MatrixXd directions;  // coefficient_count × 9
  Eigen::MatrixXd gram;        // 9 × 9
  double gram_condition() const;
  /// Orthonormal basis of the 6 rigid-motion directions, with zero rows for b appended.
  Eigen::MatrixXd rigid_motions() const;
};
GaugeBasis gauge_basis(const HarmonicField& F, const SphericalGrid& grid);

/// Translate F(p₀) to the origin and rotate so N(p₀) = e₃ and F_u(p₀) ∥ e₁.
HarmonicField rigid_rebase(const HarmonicField& F);

struct StepRecord {
  double s = 0.0;
  double ds = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool accepted = false;
};

struct ContinuationState {
  double s = 0.0;
  HarmonicField coefficients;
  Vec3 b = Vec3::Zero();
  std::vector<double> residual_history;  // residual norm after every accepted Newton iterate
  std::vector<StepRecord> steps;
};

struct NewtonStep {
  bool accepted = false;
  int halvings = 0;
  double residual_before = 0.0;
  double residual_after = 0.0;
  Eigen::VectorXd update;  // full Gauss-Newton update before the line search
};

/// One Gauss-Newton iterate with a finite-difference Jacobian. The coefficient update is
/// orthogonal to the six rigid motions (the based rows are restored by rebasing instead of
/// entering the Jacobian); the balance rows fix the conformal motions. The affine unknowns are
/// solved on the cone a = |b| exactly, since |b| has a kink at b = 0. The line search contracts
/// by config.damping until the residual decreases. The state is left unchanged on failure.
NewtonStep gauge_projected_step(ContinuationState& state, const Eigen::VectorXd& H, const SphericalGrid& grid,
                                const SolverConfig& config);

struct SolveResult {
  bool converged = false;
  std::string diagnostic;
  HarmonicField F;
  AffineFunction ell;
  AffineFunction balanced_ell;  // recomputed from H_target and dV_F at the solution
  ContinuationState state;
  ResidualBreakdown final_residual;
  VerificationReport report;
  double wall_seconds = 0.0;
};

/// Continuation along H_s = (1 − s)·2 + s·H_target. Returns the last accepted state with
/// converged = false and branch diagnostics when the step falls below config.min_step.
SolveResult solve_pmc(const HarmonicField& H_target, const SolverConfig& config);

/// Round sphere plus coefficient noise amplitude·N(0,1)/(1 + l)² in every component.
HarmonicField perturbed_sphere(int degree, double amplitude, std::uint64_t seed);

/// −Δ_γ f − |A|² f with Δ_γ = Δ_round / (dV_γ/dV_round) for conformal F.
Eigen::VectorXd normal_variation_operator(const ImmersionField& F, const Eigen::VectorXd& f,
                                          const SphericalGrid& grid);

/// L² norm of the least-squares residual of −Δf − 2f = rhs over f of degree ≤ L on the unit sphere.
double affine_insolvability_check(const SphericalGrid& grid, const Eigen::VectorXd& rhs);
/// Same with rhs = 1 + x₃.
double affine_insolvability_check(const SphericalGrid& grid);

}  // namespace pmc
