#include "kbump/field_discretization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

#include "kbump/errors.hpp"

namespace kbump {

namespace {

void require_same_grid(const Field& u, const Field& v) {
  if (u.grid != v.grid) throw ValidationError("fields live on different sector grids");
}

Eigen::VectorXd nodal_potential(const SectorGrid& grid, const PotentialSpec& potential) {
  return grid.node_radii().unaryExpr([&](double r) { return potential(r); });
}

}  // namespace

SectorGrid::SectorGrid(int k, double outer_radius, const SectorResolution& resolution)
    : k_(k), outer_radius_(outer_radius) {
  if (k < 1) throw ValidationError("sector grid: k must be >= 1");
  if (!(resolution.step > 0.0)) throw ValidationError("sector grid: step must be > 0");
  if (!(outer_radius > 0.0) || outer_radius < resolution.focus_radius + resolution.margin) {
    std::ostringstream msg;
    msg << "sector grid: R_out = " << outer_radius << " must be >= focus radius " << resolution.focus_radius
        << " + margin " << resolution.margin;
    throw ValidationError(msg.str());
  }

  n_rho_ = std::max(2, static_cast<int>(std::ceil(outer_radius / resolution.step)));
  d_rho_ = outer_radius / n_rho_;
  const double span = half_angle();
  const double arc = span * std::max(resolution.focus_radius, resolution.step);
  n_theta_ = std::max(2, static_cast<int>(std::ceil(arc / resolution.step)));
  d_theta_ = span / n_theta_;

  const Eigen::Index n = size();
  weights_.resize(n);
  node_radii_.resize(n);
  for (int i = 0; i < n_rho_; ++i) {
    for (int j = 0; j < n_theta_; ++j) {
      weights_[index(i, j)] = radius(i) * d_rho_ * d_theta_;
      node_radii_[index(i, j)] = radius(i);
    }
  }

  // Finite-volume Dirichlet form: one term per cell face. No flux through the
  // origin or the mirror edges; Dirichlet ghost on the outer circle.
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(n) * 5);
  auto couple = [&](Eigen::Index a, Eigen::Index b, double coef) {
    entries.emplace_back(a, a, coef);
    entries.emplace_back(b, b, coef);
    entries.emplace_back(a, b, -coef);
    entries.emplace_back(b, a, -coef);
  };
  for (int i = 0; i < n_rho_; ++i) {
    for (int j = 0; j < n_theta_; ++j) {
      if (i + 1 < n_rho_) couple(index(i, j), index(i + 1, j), (i + 1) * d_theta_);
      if (j + 1 < n_theta_) couple(index(i, j), index(i, j + 1), d_rho_ / (radius(i) * d_theta_));
    }
  }
  for (int j = 0; j < n_theta_; ++j)
    entries.emplace_back(index(n_rho_ - 1, j), index(n_rho_ - 1, j), 2.0 * outer_radius_ * d_theta_ / d_rho_);
  stiffness_.resize(n, n);
  stiffness_.setFromTriplets(entries.begin(), entries.end());
  stiffness_.makeCompressed();
}

double SectorGrid::half_angle() const { return std::numbers::pi / k_; }

Point2 SectorGrid::node(Eigen::Index n) const {
  const int i = static_cast<int>(n / n_theta_);
  const int j = static_cast<int>(n % n_theta_);
  return {radius(i) * std::cos(angle(j)), radius(i) * std::sin(angle(j))};
}

Eigen::VectorXd SectorGrid::sample(const std::function<double(Point2)>& f) const {
  Eigen::VectorXd out(size());
  for (Eigen::Index n = 0; n < size(); ++n) out[n] = f(node(n));
  return out;
}

double SectorGrid::interpolate(const Eigen::VectorXd& values, Point2 y) const {
  const double rho = y.norm();
  if (rho >= outer_radius_) return 0.0;
  // Fold the polar angle into [0, pi/k].
  const double period = 2.0 * half_angle();
  double theta = std::fmod(std::atan2(y.y, y.x), period);
  if (theta < 0.0) theta += period;
  if (theta > half_angle()) theta = period - theta;

  const double fi = rho / d_rho_ - 0.5;
  const double fj = std::clamp(theta / d_theta_ - 0.5, 0.0, n_theta_ - 1.0);
  const int j0 = std::min(static_cast<int>(fj), n_theta_ - 2);
  const double tj = fj - j0;

  auto ring = [&](int i) {
    return (1.0 - tj) * values[index(i, j0)] + tj * values[index(i, j0 + 1)];
  };
  if (fi <= 0.0) return ring(0);
  if (fi >= n_rho_ - 1) {
    // Linear decay to the Dirichlet value on the outer circle.
    const double t = (rho - radius(n_rho_ - 1)) / (outer_radius_ - radius(n_rho_ - 1));
    return (1.0 - t) * ring(n_rho_ - 1);
  }
  const int i0 = static_cast<int>(fi);
  const double ti = fi - i0;
  return (1.0 - ti) * ring(i0) + ti * ring(i0 + 1);
}

GridPtr build_sector_grid(int k, double outer_radius, const SectorResolution& resolution) {
  return std::make_shared<const SectorGrid>(k, outer_radius, resolution);
}

Field::Field(GridPtr g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
  if (!grid) throw ValidationError("field without grid");
  if (values.size() != grid->size()) throw ValidationError("field size does not match its grid");
}

Field Field::zeros(GridPtr g) {
  const auto n = g->size();
  return Field(std::move(g), Eigen::VectorXd::Zero(n));
}

Field Field::sampled(GridPtr g, const std::function<double(Point2)>& f) {
  auto values = g->sample(f);
  return Field(std::move(g), std::move(values));
}

Field apply_laplacian(const Field& u) {
  const auto& grid = *u.grid;
  Eigen::VectorXd out = grid.stiffness() * u.values;
  out.array() /= grid.weights().array();
  return Field(u.grid, std::move(out));
}

Field apply_hamiltonian(const Field& u, const PotentialSpec& potential) {
  Field out = apply_laplacian(u);
  out.values.array() += nodal_potential(*u.grid, potential).array() * u.values.array();
  return out;
}

double gradient_quadrature(const Field& u, const Field& v) {
  require_same_grid(u, v);
  const auto& g = *u.grid;
  const auto& a = u.values;
  const auto& b = v.values;
  double sum = 0.0;
  for (int i = 0; i < g.radial_count(); ++i) {
    for (int j = 0; j < g.angular_count(); ++j) {
      const auto here = g.index(i, j);
      if (i + 1 < g.radial_count()) {
        const auto out = g.index(i + 1, j);
        // Face length (i+1) drho dtheta, normal difference over drho.
        sum += (i + 1) * g.angular_step() * (a[out] - a[here]) * (b[out] - b[here]);
      } else {
        sum += 2.0 * g.outer_radius() * g.angular_step() / g.radial_step() * a[here] * b[here];
      }
      if (j + 1 < g.angular_count()) {
        const auto side = g.index(i, j + 1);
        sum += g.radial_step() / (g.radius(i) * g.angular_step()) * (a[side] - a[here]) * (b[side] - b[here]);
      }
    }
  }
  return g.symmetry_factor() * sum;
}

double l2_inner(const Field& u, const Field& v) {
  require_same_grid(u, v);
  return u.grid->symmetry_factor() * (u.grid->weights().array() * u.values.array() * v.values.array()).sum();
}

double inner_product_h1v(const Field& u, const Field& v, const PotentialSpec& potential) {
  require_same_grid(u, v);
  const auto& g = *u.grid;
  const double gradient = u.values.dot(g.stiffness() * v.values);
  const double mass =
      (g.weights().array() * nodal_potential(g, potential).array() * u.values.array() * v.values.array()).sum();
  return g.symmetry_factor() * (gradient + mass);
}

double energy_functional(const Field& u, const PotentialSpec& potential, double exponent) {
  const auto& g = *u.grid;
  const double quadratic = inner_product_h1v(u, u, potential);
  const double power = g.symmetry_factor() * (g.weights().array() * u.values.array().abs().pow(exponent + 1.0)).sum();
  return 0.5 * quadratic - power / (exponent + 1.0);
}

std::pair<Field, double> pde_residual(const Field& u, const PotentialSpec& potential, double exponent) {
  Field residual = apply_hamiltonian(u, potential);
  residual.values.array() -= u.values.array().abs().pow(exponent - 1.0) * u.values.array();
  const double norm = std::sqrt(l2_inner(residual, residual));
  return {std::move(residual), norm};
}

H1VOperator::H1VOperator(GridPtr grid, const PotentialSpec& potential)
    : grid_(std::move(grid)), potential_(potential), potential_values_(nodal_potential(*grid_, potential)) {
  gram_ = grid_->stiffness();
  Eigen::VectorXd mass = grid_->weights().array() * potential_values_.array();
  gram_.diagonal() += mass;
  factor_.compute(gram_);
  if (factor_.info() != Eigen::Success) throw NumericalError("H1_V Gram matrix factorisation failed");
}

double H1VOperator::inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  return grid_->symmetry_factor() * u.dot(gram_ * v);
}

double H1VOperator::norm(const Eigen::VectorXd& u) const { return std::sqrt(std::max(0.0, inner(u, u))); }

Eigen::VectorXd H1VOperator::riesz(const Eigen::VectorXd& dual) const { return factor_.solve(dual); }

void write_field_csv(std::ostream& out, const Field& u) {
  out << "x,y,value\n";
  char line[128];
  for (Eigen::Index n = 0; n < u.size(); ++n) {
    const Point2 p = u.grid->node(n);
    std::snprintf(line, sizeof line, "%.16e,%.16e,%.16e\n", p.x, p.y, u.values[n]);
    out << line;
  }
}

}  // namespace kbump
