#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "kbump/ansatz_geometry.hpp"
#include "kbump/potential.hpp"

namespace kbump {

/// Target node spacing of a sector grid. The radial step is `step`; the
/// angular step is chosen so that the arc length at `focus_radius` (the
/// largest ring radius the grid must resolve) does not exceed `step`.
struct SectorResolution {
  double step = 0.1;
  double focus_radius = 0.0;
  /// Required clearance R_out - focus_radius, in decay lengths.
  double margin = 15.0;
};

/// Cell-centred polar grid on the half sector 0 <= theta <= pi/k, rho <= R_out.
///
/// Nodes sit at rho_i = (i + 1/2) drho and theta_j = (j + 1/2) dtheta. Both
/// angular edges are mirror planes, so a sector field is the restriction of
/// a function that is invariant under the dihedral group generated by
/// rotation through 2pi/k and y2 -> -y2. Every full-space integral is 2k
/// times the sector quadrature. Homogeneous Dirichlet data sit on rho = R_out.
class SectorGrid {
 public:
  SectorGrid(int k, double outer_radius, const SectorResolution& resolution);

  [[nodiscard]] int k() const { return k_; }
  [[nodiscard]] double half_angle() const;
  [[nodiscard]] double outer_radius() const { return outer_radius_; }
  [[nodiscard]] int radial_count() const { return n_rho_; }
  [[nodiscard]] int angular_count() const { return n_theta_; }
  [[nodiscard]] double radial_step() const { return d_rho_; }
  [[nodiscard]] double angular_step() const { return d_theta_; }
  [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(n_rho_) * n_theta_; }
  [[nodiscard]] Eigen::Index index(int i, int j) const { return static_cast<Eigen::Index>(i) * n_theta_ + j; }
  [[nodiscard]] double radius(int i) const { return (i + 0.5) * d_rho_; }
  [[nodiscard]] double angle(int j) const { return (j + 0.5) * d_theta_; }
  [[nodiscard]] Point2 node(Eigen::Index n) const;
  /// Full-space integrals are symmetry_factor() times sector sums.
  [[nodiscard]] double symmetry_factor() const { return 2.0 * k_; }

  /// Sector quadrature weights rho_i drho dtheta.
  [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }
  /// Node distances |y| from the origin.
  [[nodiscard]] const Eigen::VectorXd& node_radii() const { return node_radii_; }
  /// Symmetric matrix S with u^T S v = sector quadrature of Du . Dv.
  [[nodiscard]] const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }

  /// Sample a function given in Cartesian coordinates at every node.
  [[nodiscard]] Eigen::VectorXd sample(const std::function<double(Point2)>& f) const;
  /// Bilinear interpolation of nodal values at any point of the plane,
  /// folded into the sector by the dihedral symmetry.
  [[nodiscard]] double interpolate(const Eigen::VectorXd& values, Point2 y) const;

 private:
  int k_;
  double outer_radius_;
  int n_rho_;
  int n_theta_;
  double d_rho_;
  double d_theta_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd node_radii_;
  Eigen::SparseMatrix<double> stiffness_;
};

using GridPtr = std::shared_ptr<const SectorGrid>;

/// Throws ValidationError when k < 1, the step is not positive or
/// R_out < focus_radius + margin.
GridPtr build_sector_grid(int k, double outer_radius, const SectorResolution& resolution);

/// Nodal values on a sector grid, standing for their symmetric extension.
struct Field {
  GridPtr grid;
  Eigen::VectorXd values;

  Field() = default;
  Field(GridPtr g, Eigen::VectorXd v);
  static Field zeros(GridPtr g);
  static Field sampled(GridPtr g, const std::function<double(Point2)>& f);

  [[nodiscard]] Eigen::Index size() const { return values.size(); }
};

/// Pointwise (-Delta_h u) = W^{-1} S u.
Field apply_laplacian(const Field& u);
/// (-Delta_h + V) u.
Field apply_hamiltonian(const Field& u, const PotentialSpec& potential);

/// Full-space integral of Du . Dv computed face by face; must agree with
/// the quadrature of v (-Delta_h u).
double gradient_quadrature(const Field& u, const Field& v);
/// Full-space integral of u v.
double l2_inner(const Field& u, const Field& v);
/// <u, v> = int Du . Dv + V u v over the full space.
double inner_product_h1v(const Field& u, const Field& v, const PotentialSpec& potential);

/// I(u) = 1/2 int (|Du|^2 + V u^2) - 1/(p+1) int |u|^{p+1}.
double energy_functional(const Field& u, const PotentialSpec& potential, double exponent);

/// -Delta_h u + V u - |u|^{p-1} u and its full-space weighted L^2 norm.
std::pair<Field, double> pde_residual(const Field& u, const PotentialSpec& potential, double exponent);

/// The H^1_V Gram operator G = S + diag(w V) on one grid, factorised once.
/// Shared read-only between every reduction on that grid.
class H1VOperator {
 public:
  H1VOperator(GridPtr grid, const PotentialSpec& potential);

  [[nodiscard]] const GridPtr& grid() const { return grid_; }
  [[nodiscard]] const PotentialSpec& potential() const { return potential_; }
  [[nodiscard]] const Eigen::SparseMatrix<double>& matrix() const { return gram_; }
  /// Nodal V(|y|).
  [[nodiscard]] const Eigen::VectorXd& potential_values() const { return potential_values_; }

  /// Full-space <u, v> from nodal vectors.
  [[nodiscard]] double inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const;
  [[nodiscard]] double norm(const Eigen::VectorXd& u) const;
  /// Riesz representative: the x with <x, v> = 2k d^T v for all v.
  [[nodiscard]] Eigen::VectorXd riesz(const Eigen::VectorXd& dual) const;

 private:
  GridPtr grid_;
  PotentialSpec potential_;
  Eigen::VectorXd potential_values_;
  Eigen::SparseMatrix<double> gram_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
};

/// Node table x,y,value for plotting.
void write_field_csv(std::ostream& out, const Field& u);

}  // namespace kbump
