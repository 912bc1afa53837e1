#include "kbump/radial_core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/numeric/odeint.hpp>

#include "kbump/errors.hpp"

namespace kbump {

namespace {

using State = std::array<double, 2>;
namespace odeint = boost::numeric::odeint;

// Upper incomplete gamma Gamma(a, x) for any real a, x > 0.
double upper_gamma(double a, double x) {
  if (a > 0.0) return boost::math::tgamma(a, x);
  if (a == 0.0) return boost::math::expint(1, x);
  return (upper_gamma(a + 1.0, x) - std::pow(x, a) * std::exp(-x)) / a;
}

struct GroundStateOde {
  int dimension;
  double exponent;

  void operator()(const State& y, State& dy, double s) const {
    dy[0] = y[1];
    const double friction = s > 0.0 ? (dimension - 1) / s * y[1] : 0.0;
    dy[1] = -friction + y[0] - std::pow(std::abs(y[0]), exponent - 1.0) * y[0];
  }
};

enum class Outcome { crosses_zero, turns_upward, undecided };

struct Trajectory {
  Outcome outcome = Outcome::undecided;
  std::vector<double> u;
  std::vector<double> du;
};

// Forward shot from U(0) = alpha, sampled at s_i = i h until the trajectory
// leaves the positive decreasing branch.
Trajectory shoot(const GroundStateOde& ode, double alpha, double h, std::size_t n_nodes, double tol) {
  const int n = ode.dimension;
  const double p = ode.exponent;
  const double f0 = alpha - std::pow(alpha, p);
  const double a2 = f0 / (2.0 * n);
  const double a4 = (1.0 - p * std::pow(alpha, p - 1.0)) * a2 / (4.0 * (n + 2));

  Trajectory traj;
  traj.u.reserve(n_nodes);
  traj.du.reserve(n_nodes);
  traj.u.push_back(alpha);
  traj.du.push_back(0.0);

  const double s0 = std::min(1e-2, 0.5 * h);
  State y{alpha + a2 * s0 * s0 + a4 * s0 * s0 * s0 * s0, 2.0 * a2 * s0 + 4.0 * a4 * s0 * s0 * s0};
  double s = s0;
  double ds = std::min(1e-3, s0);
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());

  for (std::size_t i = 1; i < n_nodes; ++i) {
    const double target = static_cast<double>(i) * h;
    while (s < target) {
      double step = std::min(ds, target - s);
      const bool hit_target = step == target - s;
      double trial = step;
      if (stepper.try_step(ode, y, s, trial) == odeint::success) {
        // try_step advanced s and proposed the next step in `trial`.
        if (hit_target) s = target;
        ds = trial;
      } else {
        ds = trial;
      }
      if (y[0] < 0.0) {
        traj.outcome = Outcome::crosses_zero;
        return traj;
      }
      if (y[1] > 0.0) {
        traj.outcome = Outcome::turns_upward;
        return traj;
      }
    }
    traj.u.push_back(y[0]);
    traj.du.push_back(y[1]);
  }
  return traj;
}

// Backward integration of the decaying tail from s_max down to node `first`,
// starting on the far-field law with amplitude c.
Trajectory backward_tail(const GroundStateOde& ode, double c, double h, std::size_t n_nodes, std::size_t first,
                         double tol) {
  const int n = ode.dimension;
  const std::size_t last = n_nodes - 1;
  const double s_end = h * static_cast<double>(last);
  const double law = c * std::pow(s_end, -0.5 * (n - 1)) * std::exp(-s_end);
  State y{law, -law * (1.0 + 0.5 * (n - 1) / s_end)};

  Trajectory tail;
  tail.u.assign(n_nodes, 0.0);
  tail.du.assign(n_nodes, 0.0);
  tail.u[last] = y[0];
  tail.du[last] = y[1];

  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
  double s = s_end;
  double ds = -h;
  for (std::size_t i = last; i-- > first;) {
    const double target = h * static_cast<double>(i);
    while (s > target) {
      double step = std::max(ds, target - s);
      const bool hit_target = step == target - s;
      double trial = step;
      if (stepper.try_step(ode, y, s, trial) == odeint::success) {
        if (hit_target) s = target;
      }
      ds = trial;
    }
    tail.u[i] = y[0];
    tail.du[i] = y[1];
  }
  return tail;
}

}  // namespace

double sphere_area(int dimension) {
  if (dimension < 1) throw ValidationError("dimension must be >= 1");
  const double half = 0.5 * dimension;
  return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

RadialProfile::RadialProfile(int dimension, double exponent, double grid_step, std::vector<double> values,
                             std::vector<double> derivatives)
    : dimension_(dimension),
      exponent_(exponent),
      grid_step_(grid_step),
      values_(std::move(values)),
      derivatives_(std::move(derivatives)) {
  if (dimension_ < 1) throw ValidationError("profile dimension must be >= 1");
  if (!(exponent_ > 1.0)) throw ValidationError("profile exponent must be > 1");
  if (!(grid_step_ > 0.0)) throw ValidationError("profile grid step must be > 0");
  if (values_.size() < 2 || values_.size() != derivatives_.size())
    throw ValidationError("profile needs >= 2 samples with matching derivative samples");

  second_derivatives_.resize(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i)
    second_derivatives_[i] = second_derivative(grid_step_ * static_cast<double>(i), values_[i], derivatives_[i]);

  const double s_end = s_max();
  far_field_amplitude_ = values_.back() * std::pow(s_end, 0.5 * (dimension_ - 1)) * std::exp(s_end);
}

double RadialProfile::second_derivative(double s, double u, double du) const {
  const double source = u - std::pow(std::abs(u), exponent_ - 1.0) * u;
  // At the origin U'' = f(U(0))/N by l'Hopital on U'/s.
  if (s <= 0.0) return source / dimension_;
  return -(dimension_ - 1) / s * du + source;
}

RadialProfile::Sample RadialProfile::far_field(double s) const {
  const double value = far_field_amplitude_ * std::pow(s, -0.5 * (dimension_ - 1)) * std::exp(-s);
  return {value, -value * (1.0 + 0.5 * (dimension_ - 1) / s)};
}

RadialProfile::Sample RadialProfile::eval(double s) const {
  s = std::abs(s);
  if (s >= s_max()) return far_field(s);

  const auto i = std::min(static_cast<std::size_t>(s / grid_step_), values_.size() - 2);
  const double h = grid_step_;
  const double t = (s - h * static_cast<double>(i)) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  const double value = h00 * values_[i] + h10 * h * derivatives_[i] + h01 * values_[i + 1] + h11 * h * derivatives_[i + 1];
  const double derivative = h00 * derivatives_[i] + h10 * h * second_derivatives_[i] + h01 * derivatives_[i + 1] +
                            h11 * h * second_derivatives_[i + 1];
  return {value, derivative};
}

double RadialProfile::ode_residual() const {
  const double h = grid_step_;
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < values_.size(); ++i) {
    const double d2 = (-derivatives_[i + 2] + 8.0 * derivatives_[i + 1] - 8.0 * derivatives_[i - 1] +
                       derivatives_[i - 2]) /
                      (12.0 * h);
    worst = std::max(worst, std::abs(d2 - second_derivatives_[i]));
  }
  return worst;
}

RadialProfile solve_ground_state(int dimension, double exponent, const GroundStateOptions& options,
                                 GroundStateReport* report) {
  if (dimension < 1) throw ValidationError("dimension N must be >= 1");
  if (!(exponent > 1.0)) throw ValidationError("exponent p must be > 1");
  if (dimension >= 3) {
    const double critical = (dimension + 2.0) / (dimension - 2.0);
    if (exponent >= critical) {
      std::ostringstream msg;
      msg << "supercritical exponent: p = " << exponent << " >= (N+2)/(N-2) = " << critical << " for N = " << dimension;
      throw ValidationError(msg.str());
    }
  }
  if (!(options.grid_step > 0.0) || !(options.s_max > options.grid_step))
    throw ValidationError("ground state grid needs 0 < h < s_max");
  if (!(options.tol > 0.0)) throw ValidationError("ground state tolerance must be > 0");

  // Even number of intervals keeps composite Simpson exact-order on the grid.
  auto intervals = static_cast<std::size_t>(std::ceil(options.s_max / options.grid_step));
  if (intervals % 2 == 1) ++intervals;
  const double h = options.s_max / static_cast<double>(intervals);
  const std::size_t n_nodes = intervals + 1;
  const GroundStateOde ode{dimension, exponent};
  const double ode_tol = std::max(options.tol * 1e-2, 1e-14);

  // U(0) <= 1 never leaves the constant solution's basin downward; start just above it.
  double lo = 1.0 + 1e-8;
  double hi = 2.0;
  if (shoot(ode, lo, h, n_nodes, ode_tol).outcome != Outcome::turns_upward) {
    throw NumericalError("ground state bracket not found: lower end U(0) = 1+1e-8 does not turn upward");
  }
  int expansions = 0;
  while (shoot(ode, hi, h, n_nodes, ode_tol).outcome != Outcome::crosses_zero) {
    lo = hi;
    hi *= 2.0;
    if (++expansions > 40) {
      std::ostringstream msg;
      msg << "ground state bracket not found on U(0) in [1, " << hi << "]";
      throw NumericalError(msg.str());
    }
  }

  int steps = 0;
  while (hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi) {
    if (++steps > options.max_bisection_steps) {
      std::ostringstream msg;
      msg << "ground state bisection did not converge in " << options.max_bisection_steps
          << " steps; bracket [" << lo << ", " << hi << "]";
      throw NumericalError(msg.str());
    }
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const Outcome outcome = shoot(ode, mid, h, n_nodes, ode_tol).outcome;
    if (outcome == Outcome::crosses_zero) {
      hi = mid;
    } else if (outcome == Outcome::turns_upward) {
      lo = mid;
    } else {
      lo = hi = mid;
    }
  }

  const Trajectory below = shoot(ode, lo, h, n_nodes, ode_tol);
  const Trajectory above = shoot(ode, hi, h, n_nodes, ode_tol);

  // Trust the forward shot while the two bracketing trajectories agree.
  std::size_t seam = 0;
  const std::size_t common = std::min(below.u.size(), above.u.size());
  while (seam + 1 < common) {
    const double u = 0.5 * (below.u[seam + 1] + above.u[seam + 1]);
    if (!(u > 0.0) || std::abs(below.u[seam + 1] - above.u[seam + 1]) > 1e-9 * u) break;
    ++seam;
  }
  // Back off a little from the divergence point.
  seam = seam > 40 ? seam - 20 : seam;
  if (seam < 4 || seam + 2 >= n_nodes)
    throw NumericalError("ground state shot diverges before a usable matching radius");

  std::vector<double> values(n_nodes);
  std::vector<double> derivatives(n_nodes);
  for (std::size_t i = 0; i <= seam; ++i) {
    values[i] = 0.5 * (below.u[i] + above.u[i]);
    derivatives[i] = 0.5 * (below.du[i] + above.du[i]);
  }

  // Decaying tail: fix its amplitude so that it meets the forward shot.
  double amplitude = 1.0;
  Trajectory tail;
  for (int pass = 0; pass < 6; ++pass) {
    tail = backward_tail(ode, amplitude, h, n_nodes, seam, ode_tol);
    const double ratio = values[seam] / tail.u[seam];
    amplitude *= ratio;
    if (std::abs(ratio - 1.0) < 1e-14) break;
  }
  const double slope_mismatch = std::abs(tail.du[seam] - derivatives[seam]) / std::abs(derivatives[seam]);
  for (std::size_t i = seam + 1; i < n_nodes; ++i) {
    values[i] = tail.u[i];
    derivatives[i] = tail.du[i];
  }
  derivatives[0] = 0.0;

  RadialProfile profile(dimension, exponent, h, std::move(values), std::move(derivatives));
  if (report) {
    report->center_value = profile.center_value();
    report->bracket_width = hi - lo;
    report->bisection_steps = steps;
    report->match_radius = h * static_cast<double>(seam);
    report->seam_slope_mismatch = slope_mismatch;
    report->ode_residual = profile.ode_residual();
  }
  return profile;
}

double radial_integral(const RadialProfile& profile, double q) {
  if (!(q >= 1.0)) throw ValidationError("radial_integral needs q >= 1");
  const int n = profile.dimension();
  const double h = profile.grid_step();
  const auto values = profile.values();
  const std::size_t intervals = values.size() - 1;

  auto integrand = [&](std::size_t i) {
    const double s = h * static_cast<double>(i);
    const double weight = n == 1 ? 1.0 : std::pow(s, n - 1);
    return std::pow(std::abs(values[i]), q) * weight;
  };

  // Composite Simpson; an odd interval count closes with Simpson's 3/8 rule.
  const std::size_t simpson_end = intervals % 2 == 0 ? intervals : intervals - 3;
  double sum = 0.0;
  for (std::size_t i = 0; i + 2 <= simpson_end; i += 2)
    sum += h / 3.0 * (integrand(i) + 4.0 * integrand(i + 1) + integrand(i + 2));
  if (simpson_end != intervals) {
    const std::size_t i = simpson_end;
    sum += 3.0 * h / 8.0 * (integrand(i) + 3.0 * integrand(i + 1) + 3.0 * integrand(i + 2) + integrand(i + 3));
  }

  // int_S^inf (c s^{-(N-1)/2} e^{-s})^q s^{N-1} ds = c^q q^{-a} Gamma(a, qS), a = N - q(N-1)/2.
  const double c = profile.far_field_amplitude();
  if (c > 0.0) {
    const double a = n - 0.5 * q * (n - 1);
    const double s_end = profile.s_max();
    sum += std::pow(c, q) * std::pow(q, -a) * upper_gamma(a, q * s_end);
  }
  return sphere_area(n) * sum;
}

ExpansionConstants expansion_constants(const RadialProfile& profile, const PotentialSpec& potential) {
  potential.validate();
  const double p = profile.exponent();
  ExpansionConstants constants;
  constants.A = (0.5 - 1.0 / (p + 1.0)) * radial_integral(profile, p + 1.0);
  constants.B1 = 0.5 * potential.a * radial_integral(profile, 2.0);
  return constants;
}

void write_profile_csv(std::ostream& out, const RadialProfile& profile) {
  char line[160];
  std::snprintf(line, sizeof line, "# N=%d,p=%.17g,h=%.17g,c=%.17g\n", profile.dimension(), profile.exponent(),
                profile.grid_step(), profile.far_field_amplitude());
  out << line << "s,U,dU\n";
  const auto values = profile.values();
  const auto derivatives = profile.derivatives();
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(line, sizeof line, "%.16e,%.16e,%.16e\n", profile.grid_step() * static_cast<double>(i), values[i],
                  derivatives[i]);
    out << line;
  }
}

RadialProfile read_profile_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw ValidationError("profile CSV: missing '# N=..' header");
  int dimension = 0;
  double exponent = 0.0;
  double step = 0.0;
  double amplitude = 0.0;
  if (std::sscanf(line.c_str(), "# N=%d,p=%lf,h=%lf,c=%lf", &dimension, &exponent, &step, &amplitude) != 4)
    throw ValidationError("profile CSV: malformed header '" + line + "'");
  if (!std::getline(in, line) || line != "s,U,dU") throw ValidationError("profile CSV: expected column header s,U,dU");

  std::vector<double> values;
  std::vector<double> derivatives;
  std::size_t row = 2;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    double s = 0.0;
    double u = 0.0;
    double du = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &s, &u, &du) != 3)
      throw ValidationError("profile CSV: malformed row " + std::to_string(row));
    values.push_back(u);
    derivatives.push_back(du);
  }
  return RadialProfile(dimension, exponent, step, std::move(values), std::move(derivatives));
}

}  // namespace kbump
