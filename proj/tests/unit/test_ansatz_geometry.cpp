#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "kbump/ansatz_geometry.hpp"

using namespace kbump;
using std::numbers::pi;

namespace {

const RadialProfile& townes() {
  static const RadialProfile profile = solve_ground_state(2, 3.0);
  return profile;
}

Point2 rotate(Point2 p, double angle) {
  return {std::cos(angle) * p.x - std::sin(angle) * p.y, std::sin(angle) * p.x + std::cos(angle) * p.y};
}

}  // namespace

TEST_CASE("bump placement") {
  const auto four = place_bumps(4, 1.0);
  const Point2 expected[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int j = 0; j < 4; ++j) {
    CHECK(four.centers[j].x == doctest::Approx(expected[j].x).epsilon(1e-15).scale(1.0));
    CHECK(four.centers[j].y == doctest::Approx(expected[j].y).epsilon(1e-15).scale(1.0));
  }

  const auto six = place_bumps(6, 10.0);
  CHECK((six.centers[1] - six.centers[0]).norm() == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(six.nearest_neighbor_distance() == doctest::Approx(10.0).epsilon(1e-14));

  const auto one = place_bumps(1, 5.0);
  REQUIRE(one.centers.size() == 1);
  CHECK(one.centers[0].x == 5.0);
  CHECK(one.centers[0].y == 0.0);

  CHECK_THROWS_AS(place_bumps(0, 1.0), ValidationError);
  CHECK_THROWS_AS(place_bumps(3, 0.0), ValidationError);
}

TEST_CASE("pairwise distances follow the chord formula") {
  for (int k : {3, 7, 12}) {
    const auto config = place_bumps(k, 6.5);
    for (int i = 0; i < k; ++i) {
      CHECK(config.centers[i].norm() == doctest::Approx(6.5).epsilon(1e-14));
      for (int j = 0; j < k; ++j) {
        const double expected = 2.0 * 6.5 * std::abs(std::sin(std::abs(i - j) * pi / k));
        CHECK((config.centers[i] - config.centers[j]).norm() == doctest::Approx(expected).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("admissible interval") {
  const auto s8 = admissible_radii(8, 2.0, 0.05);
  CHECK(s8.lower == doctest::Approx(4.464).epsilon(2e-4));
  CHECK(s8.upper == doctest::Approx(6.127).epsilon(2e-4));
  CHECK(s8.lower < s8.upper);

  const auto point = admissible_radii(8, 2.0, 0.0);
  CHECK(point.lower == point.upper);
  CHECK(point.lower == doctest::Approx(5.295).epsilon(2e-4));

  CHECK_THROWS_AS(admissible_radii(8, 2.0, 1.0 / pi), ValidationError);
  CHECK_THROWS_AS(admissible_radii(8, 2.0, 0.5), ValidationError);
  CHECK_THROWS_AS(admissible_radii(1, 2.0, 0.1), ValidationError);

  // e^{-2 pi r / k} = k^{-(m -+ 2 pi beta)} at the endpoints.
  for (int k : {6, 10, 12}) {
    const double beta = 0.1;
    const auto s = admissible_radii(k, 2.0, beta);
    CHECK(std::exp(-2 * pi * s.lower / k) == doctest::Approx(std::pow(k, -(2.0 - 2 * pi * beta))).epsilon(1e-12));
    CHECK(std::exp(-2 * pi * s.upper / k) == doctest::Approx(std::pow(k, -(2.0 + 2 * pi * beta))).epsilon(1e-12));
  }
}

TEST_CASE("ansatz values") {
  const auto& u = townes();
  const auto config = place_bumps(8, 5.3);
  CHECK(eval_ansatz(config, u, {0, 0}) == doctest::Approx(8 * u.value(5.3)).epsilon(1e-14));

  double direct = u.center_value();
  for (int j = 1; j < 8; ++j) direct += u.value(2 * 5.3 * std::sin(j * pi / 8));
  CHECK(eval_ansatz(config, u, config.centers[0]) == doctest::Approx(direct).epsilon(1e-14));

  const auto single = place_bumps(1, 4.0);
  CHECK(eval_ansatz(single, u, single.centers[0]) == u.center_value());
}

TEST_CASE("ansatz symmetry under the dihedral group") {
  const auto& u = townes();
  for (int k : {3, 6, 8}) {
    const auto config = place_bumps(k, 4.7);
    for (Point2 y : {Point2{1.3, 0.4}, Point2{-3.0, 2.2}, Point2{5.5, -0.7}}) {
      const double base = eval_ansatz(config, u, y);
      CHECK(eval_ansatz(config, u, rotate(y, 2 * pi / k)) == doctest::Approx(base).epsilon(1e-12));
      CHECK(eval_ansatz(config, u, {y.x, -y.y}) == doctest::Approx(base).epsilon(1e-12));
    }
  }
}

TEST_CASE("radial translation direction Z_1") {
  const auto& u = townes();
  const auto config = place_bumps(6, 4.0);
  const Point2 x1 = config.centers[0];
  CHECK(eval_z1(config, u, x1) == 0.0);
  for (double t : {0.3, 1.0, 2.5}) {
    CHECK(eval_z1(config, u, {x1.x + t, x1.y}) == doctest::Approx(-u.eval(t).derivative).epsilon(1e-14));
    CHECK(eval_z1(config, u, {x1.x, x1.y + t}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  }
  // Z_1 is the r-derivative of U(|y - x_1(r)|): compare with a central difference.
  const Point2 y{3.1, 0.8};
  const double step = 1e-5;
  const double fd = (u.value((y - place_bumps(6, 4.0 + step).centers[0]).norm()) -
                     u.value((y - place_bumps(6, 4.0 - step).centers[0]).norm())) /
                    (2 * step);
  CHECK(eval_z1(config, u, y) == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("tail bound check") {
  const auto& u = townes();
  const auto single = place_bumps(1, 5.0);
  const auto points = sector_samples(single, 10.0, 5, 5);
  CHECK(tail_bound_check(single, u, 0.5, points).measured_constant == 0.0);

  const double r8 = admissible_radii(8, 2.0, 0.1).midpoint();
  const auto config8 = place_bumps(8, r8);
  const auto samples8 = sector_samples(config8, 10.0, 10, 10);
  REQUIRE(samples8.size() == 100);
  const auto report8 = tail_bound_check(config8, u, 0.5, samples8);
  CHECK(std::isfinite(report8.measured_constant));
  CHECK(report8.measured_constant > 0.0);

  const double r16 = admissible_radii(16, 2.0, 0.1).midpoint();
  const auto config16 = place_bumps(16, r16);
  const auto report16 = tail_bound_check(config16, u, 0.5, sector_samples(config16, 10.0, 10, 10));
  MESSAGE("C(k=8) = " << report8.measured_constant << ", C(k=16) = " << report16.measured_constant);
  CHECK(report16.measured_constant <= 2.0 * report8.measured_constant);

  // At y = x_1 with eta = 1 the check reduces to a direct sum over the other bumps.
  const Point2 at_center[] = {config8.centers[0]};
  double direct = 0.0;
  for (int j = 1; j < 8; ++j) direct += u.value(2 * r8 * std::sin(j * pi / 8));
  const auto report_center = tail_bound_check(config8, u, 1.0, at_center);
  CHECK(report_center.measured_constant == doctest::Approx(direct * std::exp(pi * r8 / 8)).epsilon(1e-13));

  const Point2 outside[] = {{0.0, r8}};
  CHECK_THROWS_AS(tail_bound_check(config8, u, 0.5, outside), ValidationError);
  CHECK_THROWS_AS(tail_bound_check(config8, u, 0.0, at_center), ValidationError);
}
