#include "pmc/pmc_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

namespace pmc {

void SolverConfig::validate() const {
  if (degree < 2) throw ConfigurationError("solver degree must be at least 2");
  if (!(tol > 0.0)) throw ConfigurationError("tolerance must be positive");
  if (steps < 1) throw ConfigurationError("continuation needs at least one step");
  if (max_newton < 1) throw ConfigurationError("max Newton iterations must be positive");
  if (!(damping > 0.0 && damping < 1.0)) throw ConfigurationError("damping must lie in (0, 1)");
  if (!(fd_step > 0.0)) throw ConfigurationError("finite-difference step must be positive");
  if (!(min_step > 0.0 && min_step <= 1.0 / steps)) throw ConfigurationError("minimum step must lie in (0, 1/steps]");
  if (!(initial_noise >= 0.0)) throw ConfigurationError("initial noise must be non-negative");
  if (threads < 0) throw ConfigurationError("thread count must be non-negative");
}

int worker_count(const SolverConfig& config) {
  const int hardware = std::max(1u, std::thread::hardware_concurrency());
  int requested = config.threads;
  if (requested == 0) {
    requested = hardware;
    if (const char* env = std::getenv("PMC_THREADS")) {
      char* end = nullptr;
      const long value = std::strtol(env, &end, 10);
      if (end != env && value > 0) requested = static_cast<int>(value);
    }
  }
  return std::clamp(requested, 1, hardware);
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kNodeRows = 5;
constexpr int kBasedRows = 6;
constexpr int kBalanceRows = 3;

// An identity coefficient matrix: component h is Y_h.
HarmonicField harmonic_basis(int degree) {
  const int count = harmonic_count(degree);
  return HarmonicField(degree, Eigen::MatrixXd::Identity(count, count));
}

Eigen::VectorXd laplacian_eigenvalues(int degree) {
  Eigen::VectorXd out(harmonic_count(degree));
  for (int h = 0; h < out.size(); ++h) {
    const int l = harmonic_degree_order(h).first;
    out(h) = -l * (l + 1.0);
  }
  return out;
}

// Pole jets: value at p₀ and F_u = 2∂_θF(0, 0), F_v = 2∂_θF(0, π/2) in the north chart.
struct PoleRows {
  Eigen::RowVectorXd value, u, v;
};

PoleRows pole_rows(int degree) {
  const HarmonicField basis = harmonic_basis(degree);
  const PointEvaluation e0 = evaluate(basis, 0.0, 0.0);
  const PointEvaluation e1 = evaluate(basis, 0.0, 0.5 * kPi);
  return {e0.value.transpose(), 2.0 * e0.d_theta.transpose(), 2.0 * e1.d_theta.transpose()};
}

struct PoleFrame {
  Vec3 value, u, v;
};

PoleFrame pole_frame(const PoleRows& rows, const Eigen::MatrixXd& C) {
  return {(rows.value * C).transpose(), (rows.u * C).transpose(), (rows.v * C).transpose()};
}

// Residual evaluation with the synthesis matrices of one grid cached.
class Model {
 public:
  explicit Model(const SphericalGrid& grid) : grid_(grid), degree_(grid.degree()) {
    const NodalDerivatives basis = synthesize_derivatives(harmonic_basis(degree_), grid);
    b0_ = basis.value;
    bt_ = basis.d_theta;
    bp_ = basis.d_phi;
    lap_eig_ = laplacian_eigenvalues(degree_);
    poles_ = pole_rows(degree_);
    const int nodes = grid.node_count();
    sqrt_w_ = grid.weights().array().sqrt();
    inv_sin_.resize(nodes);
    lap_factor_.resize(nodes);
    frame_factor_.resize(nodes);
    for (int n = 0; n < nodes; ++n) {
      const double theta = grid.node_theta(n);
      const Chart chart = grid.preferred_chart(n);
      inv_sin_(n) = 1.0 / std::sin(theta);
      lap_factor_(n) = chart_laplacian_factor(chart, theta);
      frame_factor_(n) = chart_frame_factor(chart, theta, grid.node_phi(n));
    }
  }

  int harmonics() const { return harmonic_count(degree_); }
  int unknowns() const { return 3 * harmonics() + 4; }  // coefficients, b, a
  int rows() const { return kNodeRows * grid_.node_count() + kBasedRows + kBalanceRows; }
  const SphericalGrid& grid() const { return grid_; }
  int based_row() const { return kNodeRows * grid_.node_count(); }
  const PoleRows& poles() const { return poles_; }

  struct Nodal {
    Eigen::MatrixXd dt, dp, lap;
    PoleFrame pole;
  };

  Nodal nodal(const Eigen::MatrixXd& C) const {
    return {bt_ * C, bp_ * C, b0_ * (lap_eig_.asDiagonal() * C), pole_frame(poles_, C)};
  }

  // Adds δ·(basis function h) to component c.
  void perturb(Nodal& d, int h, int c, double delta) const {
    d.dt.col(c) += delta * bt_.col(h);
    d.dp.col(c) += delta * bp_.col(h);
    d.lap.col(c) += (delta * lap_eig_(h)) * b0_.col(h);
    d.pole.value(c) += delta * poles_.value(h);
    d.pole.u(c) += delta * poles_.u(h);
    d.pole.v(c) += delta * poles_.v(h);
  }

  // The affine part is a + b·x; the solver keeps a = |b| but the Jacobian treats a separately.
  void fill(const Nodal& d, double a, const Vec3& b, const Eigen::VectorXd& H,
            Eigen::Ref<Eigen::VectorXd> out) const {
    const Complex i(0.0, 1.0);
    const int nodes = grid_.node_count();
    const Eigen::Matrix3Xd& p = grid_.points();
    const Eigen::VectorXd& w = grid_.weights();
    Vec3 balance = Vec3::Zero();
    for (int n = 0; n < nodes; ++n) {
      const Vec3 ft = d.dt.row(n).transpose(), fp = d.dp.row(n).transpose();
      const CVec3 Fz = frame_factor_(n) * (ft.cast<Complex>() - (i * inv_sin_(n)) * fp.cast<Complex>());
      const Complex conf = Fz.array().square().sum();
      const Vec3 hc = (i * bilinear_cross(Fz.conjugate(), Fz)).real();
      const double Hn = H(n) + a + b.dot(p.col(n));
      const Vec3 mc = lap_factor_(n) * d.lap.row(n).transpose() - kMeanCurvatureConstant * Hn * hc;
      const double s = sqrt_w_(n);
      out(kNodeRows * n) = s * conf.real();
      out(kNodeRows * n + 1) = s * conf.imag();
      out.segment<3>(kNodeRows * n + 2) = s * mc;
      balance += p.col(n) * (ft.cross(fp).norm() * inv_sin_(n) * w(n));
    }
    const int base = kNodeRows * nodes;
    const Vec3 cross = d.pole.u.cross(d.pole.v);
    const double cross_norm = cross.norm(), u_norm = d.pole.u.norm();
    out.segment<3>(base) = d.pole.value;
    out(base + 3) = cross_norm > 0.0 ? cross(0) / cross_norm : 1.0;
    out(base + 4) = cross_norm > 0.0 ? cross(1) / cross_norm : 1.0;
    out(base + 5) = u_norm > 0.0 ? d.pole.u(1) / u_norm : 1.0;
    out.segment<3>(base + kBasedRows) = balance;
  }

  Eigen::VectorXd evaluate(const Eigen::MatrixXd& C, const Vec3& b, const Eigen::VectorXd& H) const {
    Eigen::VectorXd out(rows());
    fill(nodal(C), b.norm(), b, H, out);
    return out;
  }

  ResidualBreakdown breakdown(Eigen::VectorXd stacked) const {
    ResidualBreakdown r;
    const int nodes = grid_.node_count();
    double conf2 = 0.0, mc2 = 0.0;
    for (int n = 0; n < nodes; ++n) {
      const double s = sqrt_w_(n);
      const double c2 = stacked.segment<2>(kNodeRows * n).squaredNorm();
      const double m2 = stacked.segment<3>(kNodeRows * n + 2).squaredNorm();
      conf2 += c2;
      mc2 += m2;
      r.conformality_sup = std::max(r.conformality_sup, std::sqrt(c2) / s);
      r.mc_sup = std::max(r.mc_sup, std::sqrt(m2) / s);
    }
    r.conformality_l2 = std::sqrt(conf2);
    r.mc_l2 = std::sqrt(mc2);
    r.based_norm = stacked.segment<kBasedRows>(kNodeRows * nodes).norm();
    r.balance_norm = stacked.tail<kBalanceRows>().norm();
    r.norm = stacked.norm();
    r.stacked = std::move(stacked);
    return r;
  }

  // Forward-difference Jacobian; each column reuses the base nodal data and perturbs one unknown.
  Eigen::MatrixXd jacobian(const Eigen::MatrixXd& C, const Vec3& b, const Eigen::VectorXd& H,
                           const Eigen::VectorXd& r0, double fd_step, int workers) const {
    const Nodal base = nodal(C);
    const int n = unknowns(), m = rows(), harm = harmonics();
    const double a = b.norm();
    Eigen::MatrixXd J(m, n);
    auto work = [&](int first) {
      Eigen::VectorXd r(m);
      for (int k = first; k < n; k += workers) {
        if (k < 3 * harm) {
          const int c = k / harm, h = k % harm;
          const double step = fd_step * std::max(1.0, std::abs(C(h, c)));
          Nodal d = base;
          perturb(d, h, c, step);
          fill(d, a, b, H, r);
          J.col(k) = (r - r0) / step;
        } else if (k < 3 * harm + 3) {
          const int j = k - 3 * harm;
          const double step = fd_step * std::max(1.0, std::abs(b(j)));
          Vec3 bp = b;
          bp(j) += step;
          fill(base, a, bp, H, r);
          J.col(k) = (r - r0) / step;
        } else {
          const double step = fd_step * std::max(1.0, a);
          fill(base, a + step, b, H, r);
          J.col(k) = (r - r0) / step;
        }
      }
    };
    if (workers <= 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < workers; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    return J;
  }

 private:
  const SphericalGrid& grid_;
  int degree_;
  Eigen::MatrixXd b0_, bt_, bp_;
  Eigen::VectorXd lap_eig_;
  PoleRows poles_;
  Eigen::VectorXd sqrt_w_, inv_sin_, lap_factor_;
  Eigen::VectorXcd frame_factor_;
};

Eigen::Matrix3d cross_matrix(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v(2), v(1), v(2), 0.0, -v(0), -v(1), v(0), 0.0;
  return m;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& C) { return Eigen::Map<const Eigen::VectorXd>(C.data(), C.size()); }

Eigen::MatrixXd unflatten(const Eigen::VectorXd& x, int harmonics) {
  return Eigen::Map<const Eigen::MatrixXd>(x.data(), harmonics, 3);
}

Eigen::MatrixXd rigid_directions(const Eigen::MatrixXd& C) {
  const int harm = static_cast<int>(C.rows());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3 * harm, 6);
  for (int j = 0; j < 3; ++j) D(j * harm, j) = std::sqrt(kFourPi);
  for (int j = 0; j < 3; ++j) D.col(3 + j) = flatten(C * cross_matrix(Vec3::Unit(j)).transpose());
  return D;
}

Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& D) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(D);
  return qr.householderQ() * Eigen::MatrixXd::Identity(D.rows(), D.cols());
}

Eigen::VectorXd pack(const HarmonicField& F, const Vec3& b) {
  Eigen::VectorXd x(F.coeffs().size() + 3);
  x << flatten(F.coeffs()), b;
  return x;
}

void check_target(const Eigen::VectorXd& H) {
  if (!H.allFinite()) throw DataError("target mean curvature has non-finite values");
  if (!(H.minCoeff() > 0.0)) throw DomainError("target mean curvature must be positive everywhere");
}

// Minimizes the reduced model vᵀSv + 2hᵀv over v = (β − b, |β| − |b|). The constraint has a kink
// at β = 0, so the direction of β is found by fixed-point iteration and β = 0 is tried as well.
Eigen::Vector4d affine_update(const Eigen::Matrix4d& S, const Eigen::Vector4d& h, const Vec3& b) {
  const double a = b.norm();
  auto make = [&](const Vec3& beta) {
    Eigen::Vector4d v;
    v << beta - b, beta.norm() - a;
    return v;
  };
  auto model = [&](const Eigen::Vector4d& v) { return v.dot(S * v) + 2.0 * h.dot(v); };
  Eigen::Vector4d best = make(Vec3::Zero());
  double best_q = model(best);
  const Eigen::Vector4d free = S.completeOrthogonalDecomposition().solve(-h);
  Vec3 beta = b + free.head<3>();
  for (int it = 0; it < 50 && beta.norm() > 0.0; ++it) {
    const Vec3 d = beta.normalized();
    // v = M β + v0 with |β| linearized as d·β
    Eigen::Matrix<double, 4, 3> M;
    M << Eigen::Matrix3d::Identity(), d.transpose();
    Eigen::Vector4d v0;
    v0 << -b, -a;
    const Eigen::Matrix3d Sr = M.transpose() * S * M;
    const Vec3 g = M.transpose() * (S * v0 + h);
    const Vec3 next = Sr.ldlt().solve(-g);
    const Eigen::Vector4d v = make(next);
    const double q = model(v);
    if (q < best_q) {
      best_q = q;
      best = v;
    }
    if ((next - beta).norm() <= 1e-15 * std::max(1.0, beta.norm())) break;
    beta = next;
  }
  return best;
}

NewtonStep newton_step(const Model& model, ContinuationState& state, const Eigen::VectorXd& H,
                       const SolverConfig& config) {
  const int harm = model.harmonics(), n = model.unknowns();
  const Eigen::MatrixXd& C = state.coefficients.coeffs();
  const Eigen::VectorXd r0 = model.evaluate(C, state.b, H);
  NewtonStep step;
  step.residual_before = step.residual_after = r0.norm();

  Eigen::MatrixXd J = model.jacobian(C, state.b, H, r0, config.fd_step, worker_count(config));
  J.middleRows(model.based_row(), kBasedRows).setZero();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  A.selfadjointView<Eigen::Lower>().rankUpdate(J.transpose());
  A = A.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd c = J.transpose() * r0;

  // Rigid rebasing restores the based rows after every step, so the coefficient update is
  // instead kept orthogonal to the rigid motions Q. Adding ρQQᵀ does not change the constrained
  // minimizer and removes the rigid null space; the constraint is then imposed by a Schur complement.
  const int nf = 3 * harm;
  const Eigen::MatrixXd Q = orthonormal_columns(rigid_directions(C));
  Eigen::MatrixXd Aff = A.topLeftCorner(nf, nf);
  const double rho = Aff.diagonal().maxCoeff();
  Aff.noalias() += rho * Q * Q.transpose();
  Aff.diagonal().array() += 1e-14 * rho;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(Aff);
  const Eigen::MatrixXd X = ldlt.solve(Q);
  const Eigen::LDLT<Eigen::MatrixXd> schur(Q.transpose() * X);
  auto constrained_solve = [&](const Eigen::MatrixXd& rhs) -> Eigen::MatrixXd {
    const Eigen::MatrixXd y = ldlt.solve(rhs);
    return y - X * schur.solve(Q.transpose() * y);
  };
  Eigen::MatrixXd rhs(nf, 5);
  rhs << A.topRightCorner(nf, 4), c.head(nf);
  const Eigen::MatrixXd E = constrained_solve(rhs);
  const Eigen::Matrix4d S = A.bottomRightCorner(4, 4) - A.bottomLeftCorner(4, nf) * E.leftCols(4);
  const Eigen::Vector4d h = c.tail(4) - A.bottomLeftCorner(4, nf) * E.col(4);
  const Eigen::Vector4d v = affine_update(S, h, state.b);
  step.update.resize(nf + 3);
  step.update << -E.col(4) - E.leftCols(4) * v, v.head<3>();

  const Eigen::VectorXd x0 = pack(state.coefficients, state.b);
  double alpha = 1.0;
  for (int attempt = 0; attempt <= config.max_halvings; ++attempt, alpha *= config.damping) {
    const Eigen::VectorXd x = x0 + alpha * step.update;
    const Eigen::MatrixXd Ct = unflatten(x.head(3 * harm), harm);
    const Vec3 bt = x.tail<3>();
    const Eigen::VectorXd rt = model.evaluate(Ct, bt, H);
    if (rt.allFinite() && rt.norm() < step.residual_before) {
      state.coefficients = rigid_rebase(HarmonicField(state.coefficients.degree(), Ct));
      state.b = bt;
      step.accepted = true;
      step.halvings = attempt;
      step.residual_after = model.evaluate(state.coefficients.coeffs(), state.b, H).norm();
      state.residual_history.push_back(step.residual_after);
      return step;
    }
  }
  step.halvings = config.max_halvings;
  return step;
}

struct NewtonRun {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

NewtonRun newton(const Model& model, ContinuationState& state, const Eigen::VectorXd& H, double target,
                 const SolverConfig& config) {
  NewtonRun run;
  run.residual = model.evaluate(state.coefficients.coeffs(), state.b, H).norm();
  while (run.residual > target) {
    if (run.iterations == config.max_newton) return run;
    const NewtonStep step = newton_step(model, state, H, config);
    ++run.iterations;
    if (!step.accepted) return run;
    run.residual = step.residual_after;
  }
  run.converged = true;
  return run;
}

}  // namespace

ResidualBreakdown residual(const HarmonicField& F, const Vec3& b, const Eigen::VectorXd& H_target,
                           const SphericalGrid& grid) {
  if (F.components() != 3) throw ConfigurationError("an immersion needs three components");
  if (F.degree() > grid.degree()) throw ConfigurationError("field degree exceeds grid degree");
  if (H_target.size() != grid.node_count()) throw ConfigurationError("target needs one value per grid node");
  check_target(H_target);
  const Model model(grid);
  return model.breakdown(model.evaluate(F.with_degree(grid.degree()).coeffs(), b, H_target));
}

double GaugeBasis::gram_condition() const {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
  const Eigen::VectorXd s = svd.singularValues();
  return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

Eigen::MatrixXd GaugeBasis::rigid_motions() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(directions.rows() + 3, 6);
  out.topRows(directions.rows()) = orthonormal_columns(directions.leftCols(6));
  return out;
}

GaugeBasis gauge_basis(const HarmonicField& F, const SphericalGrid& grid) {
  if (F.components() != 3) throw ConfigurationError("an immersion needs three components");
  const HarmonicField G = F.with_degree(grid.degree());
  const NodalDerivatives d = synthesize_derivatives(G, grid);
  GaugeBasis out;
  out.directions.resize(G.coeffs().size(), 9);
  out.directions.leftCols(6) = rigid_directions(G.coeffs());
  for (int j = 0; j < 3; ++j) {
    Eigen::MatrixXd push(grid.node_count(), 3);
    for (int n = 0; n < grid.node_count(); ++n) {
      const double t = grid.node_theta(n), p = grid.node_phi(n), st = std::sin(t);
      const Vec3 dtheta(std::cos(t) * std::cos(p), std::cos(t) * std::sin(p), -st);
      const Vec3 dphi_over_sin(-std::sin(p), std::cos(p), 0.0);
      push.row(n) = d.d_theta.row(n) * dtheta(j) + d.d_phi.row(n) * (dphi_over_sin(j) / st);
    }
    out.directions.col(6 + j) = flatten(analyze(push, grid).coeffs());
  }
  out.gram = out.directions.transpose() * out.directions;
  return out;
}

HarmonicField rigid_rebase(const HarmonicField& F) {
  if (F.components() != 3) throw ConfigurationError("an immersion needs three components");
  const PointEvaluation e0 = evaluate(F, 0.0, 0.0);
  const PointEvaluation e1 = evaluate(F, 0.0, 0.5 * kPi);
  const Vec3 Fu = e0.d_theta, Fv = e1.d_theta;
  const Vec3 cross = Fu.cross(Fv);
  if (cross.norm() == 0.0 || Fu.norm() == 0.0) throw DomainError("immersion is singular at the base point");
  const Vec3 N = cross.normalized();
  const Vec3 t1 = (Fu - Fu.dot(N) * N).normalized();
  Eigen::Matrix3d R;
  R.row(0) = t1.transpose();
  R.row(1) = N.cross(t1).transpose();
  R.row(2) = N.transpose();
  HarmonicField out = F;
  out.coeffs().row(0) -= std::sqrt(kFourPi) * e0.value.transpose();
  out.coeffs() = out.coeffs() * R.transpose();
  return out;
}

NewtonStep gauge_projected_step(ContinuationState& state, const Eigen::VectorXd& H, const SphericalGrid& grid,
                                const SolverConfig& config) {
  config.validate();
  if (state.coefficients.degree() != grid.degree() || state.coefficients.components() != 3)
    throw ConfigurationError("state coefficients must be a 3-component field of the grid degree");
  if (H.size() != grid.node_count()) throw ConfigurationError("target needs one value per grid node");
  check_target(H);
  const Model model(grid);
  return newton_step(model, state, H, config);
}

HarmonicField perturbed_sphere(int degree, double amplitude, std::uint64_t seed) {
  HarmonicField F = round_embedding(1.0, degree);
  if (amplitude == 0.0) return F;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int c = 0; c < 3; ++c)
    for (int h = 0; h < harmonic_count(degree); ++h) {
      const int l = harmonic_degree_order(h).first;
      F.coeffs()(h, c) += amplitude * normal(rng) / ((1.0 + l) * (1.0 + l));
    }
  return F;
}

SolveResult solve_pmc(const HarmonicField& H_target, const SolverConfig& config) {
  const auto start = Clock::now();
  config.validate();
  if (H_target.components() != 1) throw ConfigurationError("target mean curvature must be a scalar field");
  if (H_target.degree() > config.degree) throw ConfigurationError("target degree exceeds solver degree");
  const SphericalGrid grid(config.degree);
  const Eigen::VectorXd Ht = synthesize(H_target.with_degree(config.degree), grid).col(0);
  check_target(Ht);
  const Model model(grid);
  auto homotopy = [&](double s) -> Eigen::VectorXd { return ((1.0 - s) * 2.0 + s * Ht.array()).matrix(); };

  SolveResult result;
  ContinuationState& state = result.state;
  state.coefficients = rigid_rebase(perturbed_sphere(config.degree, config.initial_noise, config.seed));
  const double coarse = 10.0 * config.tol;

  auto record = [&](double s, double ds, const NewtonRun& run) {
    state.steps.push_back({s, ds, run.iterations, run.residual, run.converged});
  };

  NewtonRun run = newton(model, state, homotopy(0.0), coarse, config);
  record(0.0, 0.0, run);
  bool stalled = !run.converged;

  const double max_step = 1.0 / config.steps;
  double ds = max_step, ds_prev = 0.0;
  Eigen::VectorXd x_prev;
  while (!stalled && state.s < 1.0) {
    ds = std::min(ds, 1.0 - state.s);
    const double s_next = 1.0 - (state.s + ds) < 1e-12 ? 1.0 : state.s + ds;
    ContinuationState trial = state;
    const Eigen::VectorXd x_now = pack(state.coefficients, state.b);
    if (x_prev.size() == x_now.size()) {
      const Eigen::VectorXd x = x_now + (ds / ds_prev) * (x_now - x_prev);
      trial.coefficients = HarmonicField(config.degree, unflatten(x.head(x.size() - 3), model.harmonics()));
      trial.b = x.tail<3>();
    }
    run = newton(model, trial, homotopy(s_next), coarse, config);
    record(s_next, ds, run);
    if (run.converged) {
      x_prev = x_now;
      ds_prev = ds;
      state.coefficients = trial.coefficients;
      state.b = trial.b;
      state.residual_history = trial.residual_history;
      state.s = s_next;
      ds = std::min(2.0 * ds, max_step);
    } else {
      ds *= 0.5;
      if (ds < config.min_step * (1.0 - 1e-12)) stalled = true;
    }
  }

  if (!stalled) {
    run = newton(model, state, Ht, config.tol, config);
    record(1.0, 0.0, run);
    stalled = !run.converged;
  }

  result.converged = !stalled;
  result.F = state.coefficients;
  result.ell.b = state.b;
  result.final_residual =
      model.breakdown(model.evaluate(state.coefficients.coeffs(), state.b, homotopy(state.s)));
  const ImmersionField F(state.coefficients, grid);
  if (stalled) {
    result.diagnostic = "continuation stalled at s = " + std::to_string(state.s) +
                        " with the step below the minimum; residual " + std::to_string(result.final_residual.norm);
    result.report.branches = detect_branch_points(F, grid);
    result.report.conformality_sup = result.final_residual.conformality_sup;
    result.report.min_gradient_norm2 = F.min_gradient_norm2();
  } else {
    result.report = verify_immersion(F, grid);
    const FundamentalForms forms = fundamental_forms(F, grid);
    result.balanced_ell = canonical_representative(Ht, forms.area_weight, grid).ell;
  }
  result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

Eigen::VectorXd normal_variation_operator(const ImmersionField& F, const Eigen::VectorXd& f,
                                          const SphericalGrid& grid) {
  if (f.size() != grid.node_count()) throw ConfigurationError("expected one value per grid node");
  const FundamentalForms forms = fundamental_forms(F, grid);
  if (forms.regular_count() != grid.node_count()) throw PreconditionError("immersion has singular nodes", 0.0);
  const Eigen::VectorXd lap = synthesize_derivatives(analyze(f, grid), grid).laplacian.col(0);
  return (-lap.array() / forms.area_weight.array() - forms.second_form_norm2.array() * f.array()).matrix();
}

double affine_insolvability_check(const SphericalGrid& grid, const Eigen::VectorXd& rhs) {
  if (rhs.size() != grid.node_count()) throw ConfigurationError("expected one value per grid node");
  const int L = grid.degree();
  const Eigen::MatrixXd Y = synthesize(harmonic_basis(L), grid);
  const Eigen::ArrayXd sqrt_w = grid.weights().array().sqrt();
  Eigen::MatrixXd A = sqrt_w.matrix().asDiagonal() * Y;
  const Eigen::VectorXd eig = laplacian_eigenvalues(L);
  for (int h = 0; h < A.cols(); ++h) A.col(h) *= -eig(h) - 2.0;
  const Eigen::VectorXd y = (rhs.array() * sqrt_w).matrix();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  cod.setThreshold(1e-10);
  return (A * cod.solve(y) - y).norm();
}

double affine_insolvability_check(const SphericalGrid& grid) {
  const Eigen::VectorXd rhs = (1.0 + grid.points().row(2).array()).matrix().transpose();
  return affine_insolvability_check(grid, rhs);
}

}  // namespace pmc
