#include "kbump/ansatz_geometry.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

#include "kbump/errors.hpp"

namespace kbump {

double BumpConfiguration::nearest_neighbor_distance() const { return chord(1); }

double BumpConfiguration::chord(int index_gap) const {
  if (k == 1) return 0.0;
  return 2.0 * ring_radius * std::abs(std::sin(index_gap * std::numbers::pi / k));
}

BumpConfiguration place_bumps(int k, double r) {
  if (k < 1) throw ValidationError("place_bumps: k must be >= 1");
  if (!(r > 0.0)) throw ValidationError("place_bumps: ring radius must be > 0");
  BumpConfiguration config{k, r, {}};
  config.centers.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double angle = 2.0 * j * std::numbers::pi / k;
    config.centers.push_back({r * std::cos(angle), r * std::sin(angle)});
  }
  return config;
}

AdmissibleInterval admissible_radii(int k, double m, double beta) {
  if (k < 2) throw ValidationError("admissible_radii: k must be >= 2");
  const double center = m / (2.0 * std::numbers::pi);
  if (!(beta >= 0.0) || beta >= center) {
    std::ostringstream msg;
    msg << "admissible_radii: beta = " << beta << " must lie in [0, m/2pi = " << center << ")";
    throw ValidationError(msg.str());
  }
  const double scale = k * std::log(static_cast<double>(k));
  return {(center - beta) * scale, (center + beta) * scale, beta};
}

double eval_ansatz(const BumpConfiguration& config, const RadialProfile& profile, Point2 y) {
  double sum = 0.0;
  for (const auto& center : config.centers) sum += profile.value((y - center).norm());
  return sum;
}

double eval_zj(const BumpConfiguration& config, const RadialProfile& profile, int j, Point2 y) {
  const Point2 center = config.centers.at(static_cast<std::size_t>(j));
  const Point2 offset = y - center;
  const double distance = offset.norm();
  if (distance == 0.0) return 0.0;
  const double radial = (offset.x * center.x + offset.y * center.y) / (distance * config.ring_radius);
  return -profile.eval(distance).derivative * radial;
}

double eval_z1(const BumpConfiguration& config, const RadialProfile& profile, Point2 y) {
  return eval_zj(config, profile, 0, y);
}

TailBoundReport tail_bound_check(const BumpConfiguration& config, const RadialProfile& profile, double eta,
                                 std::span<const Point2> samples) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("tail_bound_check: eta must lie in (0, 1]");
  const Point2 x1 = config.centers.front();
  const double cos_half_angle = std::cos(std::numbers::pi / config.k);

  TailBoundReport report;
  report.samples = samples.size();
  for (const auto& y : samples) {
    const double radius = y.norm();
    if (config.k > 1 && radius > 0.0) {
      const double alignment = (y.x * x1.x + y.y * x1.y) / (radius * config.ring_radius);
      if (alignment < cos_half_angle - 1e-12) {
        std::ostringstream msg;
        msg << "tail_bound_check: sample (" << y.x << ", " << y.y << ") lies outside Omega_1";
        throw ValidationError(msg.str());
      }
    }
    double tail = 0.0;
    for (int j = 1; j < config.k; ++j) tail += profile.value((y - config.centers[static_cast<std::size_t>(j)]).norm());
    const double envelope = std::exp(-eta * config.ring_radius * std::numbers::pi / config.k) *
                            std::exp(-(1.0 - eta) * (y - x1).norm());
    const double ratio = tail / envelope;
    if (ratio > report.measured_constant) {
      report.measured_constant = ratio;
      report.worst_sample = y;
    }
  }
  return report;
}

std::vector<Point2> sector_samples(const BumpConfiguration& config, double reach, int radial_count,
                                   int angular_count) {
  std::vector<Point2> points;
  const double half_angle = std::numbers::pi / config.k;
  const double outer = config.ring_radius + reach;
  points.reserve(static_cast<std::size_t>(radial_count * angular_count));
  for (int i = 0; i < radial_count; ++i) {
    const double radius = outer * (i + 0.5) / radial_count;
    for (int j = 0; j < angular_count; ++j) {
      const double angle = -half_angle + 2.0 * half_angle * (j + 0.5) / angular_count;
      points.push_back({radius * std::cos(angle), radius * std::sin(angle)});
    }
  }
  return points;
}

}  // namespace kbump
