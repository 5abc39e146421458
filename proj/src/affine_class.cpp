#include "pmc/affine_class.hpp"

#include "pmc/immersion_geometry.hpp"

namespace pmc {

namespace {

constexpr double kMaxCondition = 1e12;

void check_nodes(const Eigen::VectorXd& values, const SphericalGrid& grid, const char* what) {
  if (values.size() != grid.node_count())
    throw ConfigurationError(std::string(what) + ": expected one value per grid node");
}

}  // namespace

Eigen::VectorXd evaluate(const AffineFunction& ell, const SphericalGrid& grid) {
  return (ell.b.transpose() * grid.points()).transpose().array() + ell.constant();
}

Eigen::Matrix3d balancing_matrix(const Eigen::VectorXd& area_weight, const SphericalGrid& grid) {
  check_nodes(area_weight, grid, "balancing_matrix");
  if ((area_weight.array() < 0.0).any()) throw DataError("area weight must be non-negative");
  Eigen::Matrix3d M;
  for (int k = 0; k < 3; ++k) M.col(k) = obstruction_vector(grid.points().row(k).transpose(), area_weight, grid);
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(M);
  const Eigen::Vector3d s = svd.singularValues();
  const double condition = s(2) > 0.0 ? s(0) / s(2) : std::numeric_limits<double>::infinity();
  if (!(condition <= kMaxCondition))
    throw SingularSystemError("balancing matrix is singular; the representative is not unique", condition);
  return M;
}

CanonicalRepresentative canonical_representative(const Eigen::VectorXd& H, const Eigen::VectorXd& area_weight,
                                                 const SphericalGrid& grid) {
  check_nodes(H, grid, "canonical_representative");
  const Eigen::Matrix3d M = balancing_matrix(area_weight, grid);
  const Vec3 v = obstruction_vector(H, area_weight, grid);
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  CanonicalRepresentative out;
  out.ell.b = svd.solve(-v);
  out.condition = svd.singularValues()(0) / svd.singularValues()(2);
  out.values = H + evaluate(out.ell, grid);
  return out;
}

std::optional<AffineFunction> class_membership(const Eigen::VectorXd& H1, const Eigen::VectorXd& H2,
                                               const SphericalGrid& grid, double tolerance) {
  check_nodes(H1, grid, "class_membership");
  check_nodes(H2, grid, "class_membership");
  const int nodes = grid.node_count();
  const Eigen::ArrayXd sqrt_w = grid.weights().array().sqrt();
  Eigen::MatrixXd design(nodes, 4);
  design.col(0) = sqrt_w.matrix();
  for (int k = 0; k < 3; ++k) design.col(k + 1) = (grid.points().row(k).transpose().array() * sqrt_w).matrix();
  const Eigen::VectorXd rhs = ((H2 - H1).array() * sqrt_w).matrix();
  const Eigen::Vector4d c = design.colPivHouseholderQr().solve(rhs);
  const double residual = (design * c - rhs).norm();
  AffineFunction ell{c.tail<3>()};
  if (!(residual < tolerance) || !(std::abs(c(0) - ell.constant()) < tolerance)) return std::nullopt;
  return ell;
}

}  // namespace pmc
