#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "kbump/potential.hpp"

namespace kbump {

/// Surface measure |S^{N-1}| of the unit sphere in R^N (2 for N = 1).
double sphere_area(int dimension);

/// Ground state U of -U'' - ((N-1)/s) U' + U = U^p, sampled on s_i = i h.
///
/// Beyond the last node the profile continues with the far-field law
/// U(s) = c s^{-(N-1)/2} e^{-s}, where c is fixed so that the law meets the
/// last sample exactly. Immutable after construction.
class RadialProfile {
 public:
  struct Sample {
    double value;
    double derivative;
  };

  /// Build from samples on a uniform grid starting at s = 0.
  RadialProfile(int dimension, double exponent, double grid_step, std::vector<double> values,
                std::vector<double> derivatives);

  [[nodiscard]] int dimension() const { return dimension_; }
  [[nodiscard]] double exponent() const { return exponent_; }
  [[nodiscard]] double grid_step() const { return grid_step_; }
  [[nodiscard]] double s_max() const { return grid_step_ * static_cast<double>(values_.size() - 1); }
  [[nodiscard]] double far_field_amplitude() const { return far_field_amplitude_; }
  [[nodiscard]] double center_value() const { return values_.front(); }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<const double> derivatives() const { return derivatives_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  /// (U, U') at s >= 0: cubic Hermite on the grid, far-field law past s_max.
  [[nodiscard]] Sample eval(double s) const;
  [[nodiscard]] double value(double s) const { return eval(s).value; }

  /// Far-field law c s^{-(N-1)/2} e^{-s} and its derivative.
  [[nodiscard]] Sample far_field(double s) const;

  /// Max over interior nodes of |U'' - rhs(s, U, U')|, with U'' taken as a
  /// fourth-order central difference of the derivative samples.
  [[nodiscard]] double ode_residual() const;

  /// Right-hand side of U'' = -((N-1)/s) U' + U - |U|^{p-1} U (regular at s = 0).
  [[nodiscard]] double second_derivative(double s, double u, double du) const;

 private:
  int dimension_;
  double exponent_;
  double grid_step_;
  std::vector<double> values_;
  std::vector<double> derivatives_;
  std::vector<double> second_derivatives_;
  double far_field_amplitude_ = 0.0;
};

struct GroundStateOptions {
  double tol = 1e-10;         ///< absolute/relative tolerance of the ODE integrator
  double grid_step = 0.005;   ///< output sampling step h
  double s_max = 30.0;        ///< last sampled radius, in decay lengths
  int max_bisection_steps = 200;
};

/// Diagnostics of the shooting solve, kept next to the profile.
struct GroundStateReport {
  double center_value = 0.0;     ///< U(0)
  double bracket_width = 0.0;    ///< final bisection interval on U(0)
  int bisection_steps = 0;
  double match_radius = 0.0;     ///< seam between forward shot and backward tail
  double seam_slope_mismatch = 0.0;  ///< |U'_fwd - U'_tail| / |U'| at the seam
  double ode_residual = 0.0;
};

/// Positive radial ground state by shooting on U(0) with bisection between
/// trajectories that cross zero and trajectories that turn upward. The
/// trusted part of the forward shot is joined to a backward-integrated
/// decaying tail.
///
/// Throws ValidationError for N < 1, p <= 1 or p >= (N+2)/(N-2) when N >= 3;
/// NumericalError when no bracket is found or bisection does not converge.
RadialProfile solve_ground_state(int dimension, double exponent, const GroundStateOptions& options = {},
                                 GroundStateReport* report = nullptr);

/// |S^{N-1}| * int_0^inf U(s)^q s^{N-1} ds: composite Simpson on the grid plus
/// the far-field tail in closed form (upper incomplete gamma).
double radial_integral(const RadialProfile& profile, double q);

/// Constants of the single-bump energy expansion I(U_x) = A + B1/|x|^m + ...
struct ExpansionConstants {
  double A = 0.0;   ///< (1/2 - 1/(p+1)) int U^{p+1}
  double B1 = 0.0;  ///< (a/2) int U^2
};

ExpansionConstants expansion_constants(const RadialProfile& profile, const PotentialSpec& potential);

/// CSV with a `# N=..,p=..,h=..,c=..` header line and columns s,U,dU.
void write_profile_csv(std::ostream& out, const RadialProfile& profile);
RadialProfile read_profile_csv(std::istream& in);

}  // namespace kbump
