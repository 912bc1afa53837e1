#include "kbump/energy_asymptotics.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "kbump/csv.hpp"
#include "kbump/errors.hpp"
#include "kbump/parallel.hpp"

namespace kbump {

double interaction_integral(const RadialProfile& profile, double d, const InteractionQuadrature& quadrature) {
  if (!(d >= 0.0)) throw ValidationError("interaction_integral: d must be >= 0");
  if (!(quadrature.step > 0.0) || !(quadrature.margin > 0.0))
    throw ValidationError("interaction_integral: quadrature step and margin must be > 0");
  const int n = profile.dimension();
  const double p = profile.exponent();
  const double h = quadrature.step;

  // Axial coordinate z runs over [-margin, d + margin].
  const auto axial_count = static_cast<int>(std::ceil((d + 2.0 * quadrature.margin) / h));
  const double hz = (d + 2.0 * quadrature.margin) / axial_count;
  auto term = [&](double z, double rho) {
    const double near = profile.value(std::hypot(z, rho));
    const double far = profile.value(std::hypot(z - d, rho));
    return std::pow(near, p) * far;
  };

  double sum = 0.0;
  if (n == 1) {
    for (int a = 0; a < axial_count; ++a) sum += term(-quadrature.margin + (a + 0.5) * hz, 0.0);
    return sum * hz;
  }

  const double rho_max = 0.5 * d + quadrature.margin;
  const auto radial_count = static_cast<int>(std::ceil(rho_max / h));
  const double hr = rho_max / radial_count;
  const double shell = sphere_area(n - 1);
  for (int b = 0; b < radial_count; ++b) {
    const double rho = (b + 0.5) * hr;
    const double measure = n == 2 ? 1.0 : std::pow(rho, n - 2);
    double line = 0.0;
    for (int a = 0; a < axial_count; ++a) line += term(-quadrature.margin + (a + 0.5) * hz, rho);
    sum += measure * line;
  }
  return shell * sum * hz * hr;
}

double InteractionLaw::operator()(double d) const { return amplitude * std::pow(d, -nu) * std::exp(-lambda * d); }

InteractionLaw fit_interaction_law(std::span<const InteractionSample> samples) {
  if (samples.size() < 4) throw ValidationError("fit_interaction_law: need at least 4 samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i].d > 0.0) || !(samples[i].psi > 0.0))
      throw ValidationError("fit_interaction_law: samples need d > 0 and Psi > 0");
    if (i > 0 && !(samples[i].d > samples[i - 1].d))
      throw ValidationError("fit_interaction_law: d must be strictly increasing");
  }

  const auto m = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(m, 3);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = samples[static_cast<std::size_t>(i)].d;
    design(i, 0) = 1.0;
    design(i, 1) = -std::log(d);
    design(i, 2) = -d;
    rhs[i] = std::log(samples[static_cast<std::size_t>(i)].psi);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[2] <= 1e-12 * sv[0]) throw ValidationError("fit_interaction_law: degenerate sample set");
  const Eigen::VectorXd coef = svd.solve(rhs);

  InteractionLaw law;
  law.amplitude = std::exp(coef[0]);
  law.nu = coef[1];
  law.lambda = coef[2];
  law.d_min = samples.front().d;
  law.d_max = samples.back().d;
  law.residual = std::sqrt((design * coef - rhs).squaredNorm() / static_cast<double>(m));
  return law;
}

std::vector<InteractionSample> interaction_ladder(const RadialProfile& profile, double d_min, double d_max, int count,
                                                  const InteractionQuadrature& quadrature, int jobs) {
  if (count < 2 || !(d_max > d_min)) throw ValidationError("interaction_ladder: need count >= 2 and d_max > d_min");
  std::vector<InteractionSample> samples(static_cast<std::size_t>(count));
  parallel_for_index(samples.size(), jobs, [&](std::size_t i) {
    const double d = d_min + (d_max - d_min) * static_cast<double>(i) / (count - 1);
    samples[i] = {d, interaction_integral(profile, d, quadrature)};
  });
  return samples;
}

Field sample_ansatz(const GridPtr& grid, const BumpConfiguration& config, const RadialProfile& profile) {
  return Field::sampled(grid, [&](Point2 y) { return eval_ansatz(config, profile, y); });
}

std::vector<SingleBumpRow> single_bump_energy_report(const RadialProfile& profile, const PotentialSpec& potential,
                                                     std::span<const double> radii, double grid_step, int jobs) {
  for (double r : radii)
    if (!(r >= 5.0)) throw ValidationError("single_bump_energy_report: every r must be >= 5");
  const auto constants = expansion_constants(profile, potential);
  const double p = profile.exponent();
  const PotentialSpec flat(0.0, potential.m);

  std::vector<SingleBumpRow> rows(radii.size());
  parallel_for_index(rows.size(), jobs, [&](std::size_t i) {
    const double r = radii[i];
    const auto grid = build_sector_grid(1, r + 15.0, {.step = grid_step, .focus_radius = r});
    const Field bump = sample_ansatz(grid, place_bumps(1, r), profile);
    SingleBumpRow row;
    row.r = r;
    row.energy = energy_functional(bump, potential, p);
    row.grid_baseline = energy_functional(bump, flat, p);
    row.potential_term = constants.B1 / std::pow(r, potential.m);
    const double scale = std::pow(r, potential.m);
    row.scaled_residual = (row.energy - row.grid_baseline - row.potential_term) * scale;
    row.raw_scaled_residual = (row.energy - constants.A - row.potential_term) * scale;
    rows[i] = row;
  });
  return rows;
}

double ansatz_energy_asymptotic(int k, double r, const ExpansionConstants& constants, double b2, double m) {
  if (k < 1 || !(r > 0.0)) throw ValidationError("ansatz_energy_asymptotic: need k >= 1 and r > 0");
  const double interaction = k == 1 ? 0.0 : b2 * std::exp(-2.0 * std::numbers::pi * r / k);
  return k * (constants.A + constants.B1 / std::pow(r, m) - interaction);
}

double effective_b2(const InteractionLaw& law, int k, double r) {
  if (k < 2) return 0.0;
  const double d = 2.0 * r * std::sin(std::numbers::pi / k);
  return law(d) * std::exp(2.0 * std::numbers::pi * r / k);
}

std::vector<ExpansionRow> expansion_comparison(const RadialProfile& profile, const PotentialSpec& potential,
                                               const ExpansionConstants& constants, const InteractionLaw& law,
                                               std::span<const ExpansionCase> cases, double grid_step, int jobs) {
  std::vector<ExpansionRow> rows(cases.size());
  parallel_for_index(rows.size(), jobs, [&](std::size_t i) {
    const auto [k, r] = cases[i];
    const auto config = place_bumps(k, r);
    const auto grid = build_sector_grid(k, r + 15.0, {.step = grid_step, .focus_radius = r});
    const Field w = sample_ansatz(grid, config, profile);
    ExpansionRow row;
    row.k = k;
    row.r = r;
    row.energy = energy_functional(w, potential, profile.exponent());
    row.asymptotic = ansatz_energy_asymptotic(k, r, constants, effective_b2(law, k, r), potential.m);
    row.mismatch = std::abs(row.energy - row.asymptotic) / std::abs(row.energy);
    rows[i] = row;
  });
  return rows;
}

void write_interaction_csv(std::ostream& out, std::span<const InteractionSample> samples, const InteractionLaw& law) {
  csv::row(out, {"d", "psi", "psi_fit"});
  for (const auto& s : samples) csv::row(out, {csv::number(s.d), csv::number(s.psi), csv::number(law(s.d))});
}

void write_expansion_csv(std::ostream& out, std::span<const ExpansionRow> rows) {
  csv::row(out, {"k", "r", "I_numeric", "I_asymptotic", "mismatch"});
  for (const auto& r : rows)
    csv::row(out, {std::to_string(r.k), csv::number(r.r), csv::number(r.energy), csv::number(r.asymptotic),
                   csv::number(r.mismatch)});
}

void write_single_bump_csv(std::ostream& out, std::span<const SingleBumpRow> rows) {
  csv::row(out, {"r", "I_numeric", "A_grid", "B1_over_r_m", "scaled_residual", "raw_scaled_residual"});
  for (const auto& r : rows)
    csv::row(out, {csv::number(r.r), csv::number(r.energy), csv::number(r.grid_baseline), csv::number(r.potential_term),
                   csv::number(r.scaled_residual), csv::number(r.raw_scaled_residual)});
}

}  // namespace kbump
