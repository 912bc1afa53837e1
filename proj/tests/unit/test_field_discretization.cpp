#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/special_functions/bessel.hpp>

#include "kbump/field_discretization.hpp"

using namespace kbump;
using std::numbers::pi;

namespace {

const RadialProfile& townes() {
  static const RadialProfile profile = solve_ground_state(2, 3.0);
  return profile;
}

const PotentialSpec flat{0.0, 2.0};

Field random_field(const GridPtr& grid, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(grid->size());
  for (auto& x : v) x = normal(rng);
  return Field(grid, v);
}

Field bump_field(const GridPtr& grid, Point2 center) {
  const auto& u = townes();
  return Field::sampled(grid, [&](Point2 y) { return u.value((y - center).norm()); });
}

}  // namespace

TEST_CASE("grid construction") {
  const auto half_plane = build_sector_grid(1, 20.0, {.step = 0.25, .focus_radius = 5.0});
  CHECK(half_plane->half_angle() == doctest::Approx(pi));
  CHECK(half_plane->symmetry_factor() == 2.0);

  const auto g8 = build_sector_grid(8, 30.0, {.step = 0.1, .focus_radius = 15.0});
  CHECK(g8->radial_count() == 300);
  CHECK(g8->angular_count() == 59);
  CHECK(g8->size() == 300 * 59);
  CHECK(g8->radial_step() <= 0.1 + 1e-12);
  CHECK(15.0 * g8->angular_step() <= 0.1);

  // 2k times the sector measure is the disc area.
  CHECK(g8->symmetry_factor() * g8->weights().sum() == doctest::Approx(pi * 30.0 * 30.0).epsilon(1e-12));
  CHECK((g8->weights().array() > 0.0).all());

  CHECK_THROWS_AS(build_sector_grid(8, 10.0, {.step = 0.1, .focus_radius = 12.0}), ValidationError);
  CHECK_THROWS_AS(build_sector_grid(0, 30.0, {}), ValidationError);
}

TEST_CASE("constants are annihilated by the Laplacian away from the Dirichlet ring") {
  const auto grid = build_sector_grid(6, 20.0, {.step = 0.2, .focus_radius = 5.0});
  const Field c(grid, Eigen::VectorXd::Constant(grid->size(), 2.5));
  const Field hc = apply_hamiltonian(c, flat);
  for (int i = 0; i + 1 < grid->radial_count(); ++i)
    for (int j = 0; j < grid->angular_count(); ++j) REQUIRE(hc.values[grid->index(i, j)] == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("separable eigenfunction J_2k(alpha rho) cos(2k theta)") {
  const int k = 2;
  const double alpha = 1.3;
  auto max_error = [&](double step) {
    const auto grid = build_sector_grid(k, 20.0, {.step = step, .focus_radius = 5.0});
    const Field u = Field::sampled(grid, [&](Point2 y) {
      return boost::math::cyl_bessel_j(2 * k, alpha * y.norm()) * std::cos(2 * k * std::atan2(y.y, y.x));
    });
    const Field lu = apply_laplacian(u);
    double worst = 0.0;
    for (int i = 0; i < grid->radial_count(); ++i) {
      const double rho = grid->radius(i);
      if (rho < 3.0 || rho > 12.0) continue;
      for (int j = 0; j < grid->angular_count(); ++j) {
        const auto n = grid->index(i, j);
        worst = std::max(worst, std::abs(lu.values[n] - alpha * alpha * u.values[n]));
      }
    }
    return worst;
  };
  const double coarse = max_error(0.2);
  const double fine = max_error(0.1);
  CHECK(coarse < 5e-2);
  CHECK(coarse / fine >= 3.5);
}

TEST_CASE("discrete integration by parts holds to round-off") {
  const auto grid = build_sector_grid(5, 18.0, {.step = 0.3, .focus_radius = 3.0});
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const Field u = random_field(grid, seed);
    const Field v = random_field(grid, seed + 100);
    const double by_faces = gradient_quadrature(u, v);
    const double by_operator = l2_inner(v, apply_laplacian(u));
    CHECK(by_operator == doctest::Approx(by_faces).epsilon(1e-12));
    CHECK(gradient_quadrature(v, u) == doctest::Approx(by_faces).epsilon(1e-12));
  }
}

TEST_CASE("inner product basics") {
  const auto grid = build_sector_grid(3, 20.0, {.step = 0.25, .focus_radius = 4.0});
  const PotentialSpec v{1.0, 2.0};
  const Field a = random_field(grid, 7);
  const Field b = random_field(grid, 8);
  CHECK(inner_product_h1v(Field::zeros(grid), b, v) == 0.0);
  CHECK(inner_product_h1v(a, b, v) == doctest::Approx(inner_product_h1v(b, a, v)).epsilon(1e-13));
  CHECK(inner_product_h1v(a, a, v) > 0.0);

  const auto other = build_sector_grid(3, 20.0, {.step = 0.5, .focus_radius = 4.0});
  CHECK_THROWS_AS(inner_product_h1v(a, Field::zeros(other), v), ValidationError);
}

TEST_CASE("ground-state identities converge at second order") {
  const auto& u = townes();
  const double integral_p1 = radial_integral(u, 4.0);
  const double a_const = 0.25 * integral_p1;
  double previous_ip = 0, previous_energy = 0, previous_residual = 0;
  for (double step : {0.2, 0.1, 0.05}) {
    const auto grid = build_sector_grid(1, 25.0, {.step = step, .focus_radius = 5.0});
    const Field bump = bump_field(grid, {5.0, 0.0});
    const double ip_error = std::abs(inner_product_h1v(bump, bump, flat) - integral_p1);
    const double energy_error = std::abs(energy_functional(bump, flat, 3.0) - a_const);
    const double residual = pde_residual(bump, flat, 3.0).second;
    if (previous_ip > 0) {
      MESSAGE("h=" << step << " ip ratio " << previous_ip / ip_error << " energy ratio "
                   << previous_energy / energy_error << " residual ratio " << previous_residual / residual);
      CHECK(previous_ip / ip_error >= std::pow(2.0, 1.8));
      CHECK(previous_energy / energy_error >= std::pow(2.0, 1.8));
      CHECK(previous_residual / residual >= std::pow(2.0, 1.8));
    }
    CHECK(ip_error < 2e-2 * integral_p1);
    CHECK(energy_error < 2e-2 * a_const);
    previous_ip = ip_error;
    previous_energy = energy_error;
    previous_residual = residual;
  }
}

TEST_CASE("energy scaling derivative equals the residual pairing") {
  const auto grid = build_sector_grid(4, 22.0, {.step = 0.2, .focus_radius = 6.0});
  const PotentialSpec v{1.0, 2.0};
  const auto config = place_bumps(4, 6.0);
  const Field w = Field::sampled(grid, [&](Point2 y) { return eval_ansatz(config, townes(), y); });
  CHECK(energy_functional(Field::zeros(grid), v, 3.0) == 0.0);
  CHECK(pde_residual(Field::zeros(grid), v, 3.0).second == 0.0);

  auto scaled_energy = [&](double t) {
    Field s = w;
    s.values *= t;
    return energy_functional(s, v, 3.0);
  };
  const double dt = 1e-5;
  const double fd = (scaled_energy(1 + dt) - scaled_energy(1 - dt)) / (2 * dt);
  const double pairing = l2_inner(pde_residual(w, v, 3.0).first, w);
  CHECK(fd == doctest::Approx(pairing).epsilon(1e-7));
}

TEST_CASE("energy of a smooth field converges at second order") {
  const PotentialSpec v{1.0, 2.0};
  std::vector<double> energies;
  std::vector<double> products;
  for (double step : {0.2, 0.1, 0.05}) {
    const auto grid = build_sector_grid(2, 20.0, {.step = step, .focus_radius = 3.0});
    const Field g = Field::sampled(grid, [](Point2 y) {
      // Dihedral-invariant smooth field: two Gaussians on the x axis.
      return std::exp(-std::pow(y.x - 3.0, 2) - y.y * y.y) + std::exp(-std::pow(y.x + 3.0, 2) - y.y * y.y);
    });
    energies.push_back(energy_functional(g, v, 3.0));
    products.push_back(inner_product_h1v(g, g, v));
  }
  const double energy_order = std::log2(std::abs(energies[0] - energies[1]) / std::abs(energies[1] - energies[2]));
  const double product_order = std::log2(std::abs(products[0] - products[1]) / std::abs(products[1] - products[2]));
  MESSAGE("energy order " << energy_order << ", inner product order " << product_order);
  CHECK(energy_order >= 1.8);
  CHECK(product_order >= 1.8);
}

TEST_CASE("Dirichlet truncation of the ansatz energy") {
  const PotentialSpec v{1.0, 2.0};
  const double r = 5.3;
  const auto config = place_bumps(8, r);
  const double outer = r + 15.0;
  const auto near_grid = build_sector_grid(8, outer, {.step = 0.1, .focus_radius = r});
  const auto far_grid = build_sector_grid(8, 2 * outer, {.step = 0.1, .focus_radius = r});
  auto ansatz = [&](const GridPtr& g) { return Field::sampled(g, [&](Point2 y) { return eval_ansatz(config, townes(), y); }); };
  const double near_energy = energy_functional(ansatz(near_grid), v, 3.0);
  const double far_energy = energy_functional(ansatz(far_grid), v, 3.0);
  CHECK(std::abs(near_energy - far_energy) / std::abs(far_energy) < std::exp(-outer / 2));

  const double residual = pde_residual(ansatz(near_grid), v, 3.0).second;
  CHECK(residual > 0.0);
}

TEST_CASE("interpolation and Riesz map") {
  const auto grid = build_sector_grid(6, 20.0, {.step = 0.05, .focus_radius = 5.0});
  const auto config = place_bumps(6, 5.0);
  auto exact = [&](Point2 y) { return eval_ansatz(config, townes(), y); };
  const Field w = Field::sampled(grid, exact);
  for (Point2 y : {Point2{5.0, 0.0}, Point2{-2.0, 4.1}, Point2{0.3, -6.0}, Point2{0.0, 0.0}})
    CHECK(grid->interpolate(w.values, y) == doctest::Approx(exact(y)).epsilon(2e-3).scale(1.0));
  CHECK(grid->interpolate(w.values, {25.0, 0.0}) == 0.0);

  const PotentialSpec v{1.0, 2.0};
  const H1VOperator gram(grid, v);
  const Field d = random_field(grid, 11);
  const Field x(grid, gram.riesz(d.values));
  const Field t = random_field(grid, 12);
  CHECK(gram.inner(x.values, t.values) == doctest::Approx(grid->symmetry_factor() * d.values.dot(t.values)).epsilon(1e-9));
  CHECK(gram.inner(w.values, t.values) == doctest::Approx(inner_product_h1v(w, t, v)).epsilon(1e-10));
}

TEST_CASE("field CSV export") {
  const auto grid = build_sector_grid(4, 16.0, {.step = 0.5, .focus_radius = 1.0});
  std::stringstream out;
  write_field_csv(out, Field::zeros(grid));
  std::string line;
  int rows = 0;
  std::getline(out, line);
  CHECK(line == "x,y,value");
  while (std::getline(out, line)) ++rows;
  CHECK(rows == grid->size());
}
