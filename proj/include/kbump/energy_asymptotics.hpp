#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "kbump/field_discretization.hpp"
#include "kbump/radial_core.hpp"

namespace kbump {

struct InteractionQuadrature {
  double step = 0.04;     ///< midpoint spacing
  double margin = 20.0;   ///< box half-width beyond d/2
};

/// Pair interaction Psi(d) = int U^p(y) U(y - d e_1) dy by midpoint
/// quadrature on a box around both centres. For N >= 2 the integrand is
/// axisymmetric about e_1 and is integrated over (z, rho) with weight
/// |S^{N-2}| rho^{N-2}.
double interaction_integral(const RadialProfile& profile, double d, const InteractionQuadrature& quadrature = {});

struct InteractionSample {
  double d = 0.0;
  double psi = 0.0;
};

/// Psi(d) ~ amplitude * d^{-nu} * e^{-lambda d} over [d_min, d_max].
struct InteractionLaw {
  double amplitude = 0.0;   ///< B~2
  double lambda = 1.0;
  double nu = 0.0;
  double d_min = 0.0;
  double d_max = 0.0;
  double residual = 0.0;    ///< RMS of the log-space fit residual

  [[nodiscard]] double operator()(double d) const;
};

/// Least squares on ln Psi = ln B~2 - nu ln d - lambda d. Needs >= 4 samples
/// with strictly increasing d and Psi > 0; throws ValidationError otherwise
/// or when the design matrix is rank deficient.
InteractionLaw fit_interaction_law(std::span<const InteractionSample> samples);

/// Psi on an evenly spaced ladder of d values, computed concurrently.
std::vector<InteractionSample> interaction_ladder(const RadialProfile& profile, double d_min, double d_max, int count,
                                                  const InteractionQuadrature& quadrature = {}, int jobs = 1);

struct SingleBumpRow {
  double r = 0.0;
  double energy = 0.0;          ///< I(U_{x_1}) on the grid
  double grid_baseline = 0.0;   ///< same field, V = 1: the grid's own value of A
  double potential_term = 0.0;  ///< B1 / r^m
  /// (I - A_grid - B1/r^m) r^m; the gradient discretisation error cancels
  /// against the baseline.
  double scaled_residual = 0.0;
  /// (I - A - B1/r^m) r^m with A from the radial integrals.
  double raw_scaled_residual = 0.0;
};

/// Single bump at distance r from the origin on a half-plane sector grid.
/// Every r must be >= 5 (ValidationError).
std::vector<SingleBumpRow> single_bump_energy_report(const RadialProfile& profile, const PotentialSpec& potential,
                                                     std::span<const double> radii, double grid_step = 0.1,
                                                     int jobs = 1);

/// k (A + B1/r^m - B2 e^{-2 pi r/k}); the interaction term is absent for k = 1.
double ansatz_energy_asymptotic(int k, double r, const ExpansionConstants& constants, double b2, double m);

/// B2 such that B2 e^{-2 pi r/k} equals the fitted law at the nearest
/// neighbour distance 2 r sin(pi/k).
double effective_b2(const InteractionLaw& law, int k, double r);

struct ExpansionRow {
  int k = 1;
  double r = 0.0;
  double energy = 0.0;       ///< numeric I(W_r)
  double asymptotic = 0.0;   ///< k (A + B1/r^m - B2 e^{-2 pi r/k})
  double mismatch = 0.0;     ///< |energy - asymptotic| / |energy|
};

struct ExpansionCase {
  int k = 1;
  double r = 0.0;
};

/// Numeric ansatz energy on a sector grid against the three-term formula,
/// with B2 taken from the fitted law at the nearest-neighbour distance.
std::vector<ExpansionRow> expansion_comparison(const RadialProfile& profile, const PotentialSpec& potential,
                                               const ExpansionConstants& constants, const InteractionLaw& law,
                                               std::span<const ExpansionCase> cases, double grid_step = 0.1,
                                               int jobs = 1);

/// Ansatz W_r sampled on a grid.
Field sample_ansatz(const GridPtr& grid, const BumpConfiguration& config, const RadialProfile& profile);

void write_interaction_csv(std::ostream& out, std::span<const InteractionSample> samples, const InteractionLaw& law);
void write_expansion_csv(std::ostream& out, std::span<const ExpansionRow> rows);
void write_single_bump_csv(std::ostream& out, std::span<const SingleBumpRow> rows);

}  // namespace kbump
