#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <sstream>

#include "kbump/radial_core.hpp"
#include "oracles.hpp"

using namespace kbump;

namespace {

double max_error_vs_soliton(const RadialProfile& profile, double p) {
  double worst = 0.0;
  for (double s = 0.0; s <= 40.0; s += 0.0137) worst = std::max(worst, std::abs(profile.value(s) - oracle::soliton_1d(p, s)));
  return worst;
}

const RadialProfile& townes() {
  static const RadialProfile profile = solve_ground_state(2, 3.0);
  return profile;
}

}  // namespace

TEST_CASE("1-D cubic ground state matches sqrt(2) sech(s)") {
  GroundStateReport report;
  const auto profile = solve_ground_state(1, 3.0, {.tol = 1e-10}, &report);
  CHECK(profile.center_value() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(max_error_vs_soliton(profile, 3.0) <= 1e-6);
  CHECK(profile.far_field_amplitude() == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-5));
  CHECK(report.seam_slope_mismatch < 1e-6);
}

TEST_CASE("1-D quadratic ground state matches (3/2) sech^2(s/2)") {
  const auto profile = solve_ground_state(1, 2.0, {.tol = 1e-10});
  CHECK(profile.center_value() == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(max_error_vs_soliton(profile, 2.0) <= 1e-6);
}

TEST_CASE("supercritical and invalid exponents are rejected") {
  CHECK_THROWS_AS(solve_ground_state(3, 5.0), ValidationError);
  CHECK_THROWS_AS(solve_ground_state(3, 7.0), ValidationError);
  CHECK_THROWS_AS(solve_ground_state(2, 1.0), ValidationError);
  CHECK_THROWS_AS(solve_ground_state(0, 3.0), ValidationError);
  try {
    solve_ground_state(3, 5.0);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("supercritical") != std::string::npos);
  }
}

TEST_CASE("radial integrals of the 1-D soliton") {
  const auto profile = solve_ground_state(1, 3.0);
  CHECK(radial_integral(profile, 2.0) == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(radial_integral(profile, 4.0) == doctest::Approx(16.0 / 3.0).epsilon(1e-8));
  CHECK_THROWS_AS(radial_integral(profile, 0.5), ValidationError);
}

TEST_CASE("zero profile integrates to zero") {
  const RadialProfile zero(2, 3.0, 0.1, std::vector<double>(11, 0.0), std::vector<double>(11, 0.0));
  CHECK(radial_integral(zero, 2.0) == 0.0);
  CHECK(radial_integral(zero, 3.5) == 0.0);
}

TEST_CASE("expansion constants") {
  const auto profile = solve_ground_state(1, 3.0);
  const auto c = expansion_constants(profile, PotentialSpec(2.0, 2.0));
  CHECK(c.A == doctest::Approx(4.0 / 3.0).epsilon(1e-8));
  CHECK(c.B1 == doctest::Approx(4.0).epsilon(1e-8));

  const auto flat = expansion_constants(profile, PotentialSpec(0.0, 2.0));
  CHECK(flat.B1 == 0.0);
  CHECK(flat.A == doctest::Approx(c.A).epsilon(1e-15));

  const auto doubled = expansion_constants(profile, PotentialSpec(4.0, 2.0));
  CHECK(doubled.B1 == doctest::Approx(2.0 * c.B1).epsilon(1e-14));
  CHECK(doubled.A == c.A);

  const auto two_d = expansion_constants(townes(), PotentialSpec(1.0, 2.0));
  CHECK(two_d.A > 0.0);
  CHECK(two_d.B1 > 0.0);
  // Pohozaev in 2-D with p = 3: int U^4 = 2 int U^2, hence A = B1 for a = 1.
  CHECK(two_d.A == doctest::Approx(two_d.B1).epsilon(1e-8));
}

TEST_CASE("profile evaluation") {
  const auto profile = solve_ground_state(1, 3.0);
  const auto origin = profile.eval(0.0);
  CHECK(origin.value == profile.center_value());
  CHECK(origin.derivative == 0.0);
  CHECK(profile.value(1.0) == doctest::Approx(std::sqrt(2.0) / std::cosh(1.0)).epsilon(1e-8));
  CHECK(profile.eval(1.0).derivative == doctest::Approx(oracle::soliton_1d_derivative(3.0, 1.0)).epsilon(1e-7));

  const double far = 2.0 * profile.s_max();
  CHECK(profile.value(far) == profile.far_field(far).value);

  const auto& t = townes();
  const double seam = t.s_max();
  const double inside = t.value(seam - 1e-9);
  const double outside = t.value(seam + 1e-9);
  CHECK(std::abs(inside - outside) <= 1e-6 * inside);
}

TEST_CASE("2-D ground state invariants") {
  GroundStateReport report;
  const auto profile = solve_ground_state(2, 3.0, {}, &report);
  CHECK(profile.center_value() == doctest::Approx(2.20620086465).epsilon(1e-9));
  const auto u = profile.values();
  const auto du = profile.derivatives();
  for (std::size_t i = 1; i < u.size(); ++i) {
    REQUIRE(u[i] > 0.0);
    REQUIRE(u[i] < u[i - 1]);
    REQUIRE(du[i] < 0.0);
  }
  CHECK(du[0] == 0.0);
  CHECK(report.ode_residual < 1e-7);
  // -(ln U)' at s_max approaches 1.
  const double log_slope = -du.back() / u.back();
  CHECK(std::abs(log_slope - 1.0) < 0.02);
}

TEST_CASE("output step does not move U(0); integrals converge under grid halving") {
  const auto coarse = solve_ground_state(2, 3.0, {.grid_step = 0.01});
  const auto fine = solve_ground_state(2, 3.0, {.grid_step = 0.005});
  // U(0) comes from the adaptive shot: any change is far below O(h^2).
  CHECK(std::abs(coarse.center_value() - fine.center_value()) <= 1e-3 * 0.01 * 0.01);
  for (double q : {2.0, 4.0}) {
    const double a = radial_integral(coarse, q);
    const double b = radial_integral(fine, q);
    CHECK(std::abs(a - b) <= 1e-6 * std::abs(b));
  }
}

TEST_CASE("profile CSV round trip") {
  const auto profile = solve_ground_state(1, 3.0, {.grid_step = 0.05});
  std::stringstream buffer;
  write_profile_csv(buffer, profile);
  const auto back = read_profile_csv(buffer);
  CHECK(back.dimension() == 1);
  CHECK(back.exponent() == 3.0);
  CHECK(back.size() == profile.size());
  CHECK(back.far_field_amplitude() == doctest::Approx(profile.far_field_amplitude()).epsilon(1e-14));
  for (double s : {0.0, 0.3, 7.7, 45.0}) CHECK(back.value(s) == doctest::Approx(profile.value(s)).epsilon(1e-14));

  std::stringstream bad("s,U,dU\n0,1,0\n");
  CHECK_THROWS_AS(read_profile_csv(bad), ValidationError);
}

TEST_CASE("ground state solve is fast") {
  const auto start = std::chrono::steady_clock::now();
  (void)solve_ground_state(1, 3.0);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 1.0);
}
