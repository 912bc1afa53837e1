#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "kbump/potential.hpp"
#include "kbump/radial_core.hpp"

namespace kbump {

/// Point in the y' = (y1, y2) plane; the remaining coordinates are zero for
/// every bump center.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  [[nodiscard]] double norm() const { return std::hypot(x, y); }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
};

/// k bumps on the circle of radius r, x_j = r (cos 2(j-1)pi/k, sin 2(j-1)pi/k).
struct BumpConfiguration {
  int k = 1;
  double ring_radius = 0.0;
  std::vector<Point2> centers;

  /// |x_2 - x_1| = 2 r sin(pi/k); zero for k = 1.
  [[nodiscard]] double nearest_neighbor_distance() const;
  /// |x_i - x_j| = 2 r sin(|i-j| pi/k).
  [[nodiscard]] double chord(int index_gap) const;
};

BumpConfiguration place_bumps(int k, double r);

/// S_k = [(m/2pi - beta) k ln k, (m/2pi + beta) k ln k].
struct AdmissibleInterval {
  double lower = 0.0;
  double upper = 0.0;
  double beta = 0.0;

  [[nodiscard]] double width() const { return upper - lower; }
  [[nodiscard]] double midpoint() const { return 0.5 * (lower + upper); }
  [[nodiscard]] bool contains(double r) const { return r >= lower && r <= upper; }
};

/// Throws ValidationError unless k >= 2 and 0 <= beta < m/2pi.
AdmissibleInterval admissible_radii(int k, double m, double beta);

/// W_r(y) = sum_j U(|y - x_j|).
double eval_ansatz(const BumpConfiguration& config, const RadialProfile& profile, Point2 y);

/// Z_1(y) = d/dr U(|y - x_1(r)|) = -U'(|y - x_1|) <(y - x_1)/|y - x_1|, x_1/r>.
double eval_z1(const BumpConfiguration& config, const RadialProfile& profile, Point2 y);

/// Z_j for any bump index j in [0, k).
double eval_zj(const BumpConfiguration& config, const RadialProfile& profile, int j, Point2 y);

/// Outcome of the far-bump tail estimate on the sector Omega_1.
struct TailBoundReport {
  double measured_constant = 0.0;  ///< max over samples of tail / envelope
  Point2 worst_sample;
  std::size_t samples = 0;
};

/// Measures C in sum_{j>=2} U_{x_j}(y) <= C e^{-eta r pi/k} e^{-(1-eta)|y - x_1|}
/// over the given points. Every sample must lie in
/// Omega_1 = {y : <y'/|y'|, x_1/|x_1|> >= cos(pi/k)}; ValidationError otherwise.
TailBoundReport tail_bound_check(const BumpConfiguration& config, const RadialProfile& profile, double eta,
                                 std::span<const Point2> samples);

/// Deterministic polar lattice of points inside Omega_1 with |y| <= r + reach.
std::vector<Point2> sector_samples(const BumpConfiguration& config, double reach, int radial_count,
                                   int angular_count);

}  // namespace kbump
