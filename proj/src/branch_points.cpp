#include "pmc/branch_points.hpp"

#include <algorithm>

namespace pmc {
namespace {

constexpr int kCircleSamples = 256;
constexpr int kFitRings = 6;
constexpr int kFitAngles = 48;

struct ZeroEstimate {
  int winding = 0;
  Complex centre;
};

// Winding number of the dominant component on a circle, and the zero centroid
// (1/2πik) ∮ z d log f.
ZeroEstimate locate_zero(const GradientSampler& sampler, Complex guess, double radius) {
  std::vector<Complex> z(kCircleSamples);
  std::vector<CVec3> f(kCircleSamples);
  Eigen::Vector3d magnitude = Eigen::Vector3d::Zero();
  for (int n = 0; n < kCircleSamples; ++n) {
    z[n] = guess + std::polar(radius, 2.0 * kPi * n / kCircleSamples);
    f[n] = sampler(z[n]);
    magnitude += f[n].cwiseAbs();
  }
  int c = 0;
  magnitude.maxCoeff(&c);

  double total_arg = 0.0;
  Complex moment{0.0, 0.0};
  for (int n = 0; n < kCircleSamples; ++n) {
    const int next = (n + 1) % kCircleSamples;
    const Complex dlog = std::log(f[next](c) / f[n](c));
    total_arg += dlog.imag();
    moment += 0.5 * (z[n] + z[next]) * dlog;
  }
  ZeroEstimate out;
  out.winding = static_cast<int>(std::lround(total_arg / (2.0 * kPi)));
  out.centre = out.winding > 0 ? moment / (Complex(0.0, 2.0 * kPi) * static_cast<double>(out.winding)) : guess;
  return out;
}

struct LocalFit {
  CVec3 leading;
  double residual;
};

// Least squares F_z ≈ d^k (G₀ + G₁ d + G₂ d̄), d = z − q, over several rings around q.
LocalFit fit_order(const std::vector<Complex>& d, const Eigen::MatrixXcd& samples, int k) {
  const int n = static_cast<int>(d.size());
  Eigen::MatrixXcd design(n, 3);
  for (int i = 0; i < n; ++i) {
    const Complex dk = std::pow(d[i], k);
    design(i, 0) = dk;
    design(i, 1) = dk * d[i];
    design(i, 2) = dk * std::conj(d[i]);
  }
  const Eigen::MatrixXcd G = design.colPivHouseholderQr().solve(samples);
  LocalFit out;
  out.leading = G.row(0).transpose();
  out.residual = (design * G - samples).norm() / samples.norm();
  return out;
}

}  // namespace

std::variant<BranchPoint, UnresolvedSingularPoint> resolve_singular_point(const GradientSampler& sampler,
                                                                          Chart chart, Complex guess,
                                                                          const BranchFitOptions& options) {
  const ZeroEstimate zero = locate_zero(sampler, guess, options.radius);
  if (zero.winding <= 0) {
    return UnresolvedSingularPoint{ChartPoint{chart, guess}, 1.0, "no zero of F_z enclosed by the search circle"};
  }
  const Complex q = zero.centre;

  std::vector<Complex> d;
  Eigen::MatrixXcd samples(kFitRings * kFitAngles, 3);
  for (int ring = 0; ring < kFitRings; ++ring) {
    const double rho = options.radius * (ring + 1) / kFitRings;
    for (int a = 0; a < kFitAngles; ++a) {
      const Complex offset = std::polar(rho, 2.0 * kPi * (a + 0.5 * ring) / kFitAngles);
      samples.row(static_cast<int>(d.size())) = sampler(q + offset).transpose();
      d.push_back(offset);
    }
  }

  double best_residual = 1.0;
  for (int k = options.max_order; k >= 1; --k) {
    const LocalFit fit = fit_order(d, samples, k);
    best_residual = std::min(best_residual, fit.residual);
    if (fit.residual >= options.max_fit_residual || fit.leading.norm() <= options.min_leading) continue;
    BranchPoint bp;
    bp.location = ChartPoint{chart, q};
    bp.order = k;
    bp.leading = fit.leading;
    bp.fit_residual = fit.residual;
    bp.null_defect = std::abs(fit.leading.array().square().sum()) / fit.leading.squaredNorm();
    if (bp.null_defect >= options.null_tolerance)
      return UnresolvedSingularPoint{bp.location, fit.residual, "leading coefficient is not isotropic"};
    return bp;
  }
  return UnresolvedSingularPoint{ChartPoint{chart, q}, best_residual, "no order up to the cap fits the local gradient"};
}

std::vector<int> gradient_minima(const Eigen::VectorXd& gradient_norm, const std::vector<std::vector<int>>& neighbours,
                                 double threshold) {
  std::vector<int> out;
  for (int n = 0; n < gradient_norm.size(); ++n) {
    const double v = gradient_norm(n);
    if (!(v < threshold)) continue;
    const bool minimum = std::all_of(neighbours[n].begin(), neighbours[n].end(), [&](int m) {
      return v < gradient_norm(m) || (v == gradient_norm(m) && n < m);
    });
    if (minimum) out.push_back(n);
  }
  return out;
}

}  // namespace pmc
