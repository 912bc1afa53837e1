#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kbump/lyapunov_schmidt.hpp"

namespace kbump {

/// k (A + B1/r^m - B2 e^{-2 pi r/k}). With a fitted law, B2 e^{-2 pi r/k} is
/// replaced by the law at the nearest-neighbour distance 2 r sin(pi/k).
struct EnergyExpansion {
  ExpansionConstants constants;
  double m = 2.0;
  double b2 = 0.0;
  std::optional<InteractionLaw> law;

  [[nodiscard]] double operator()(int k, double r) const;
  /// d/dr of the same expression.
  [[nodiscard]] double derivative(int k, double r) const;
};

struct DriverSettings {
  double beta = 0.1;
  double grid_step = 0.1;
  double margin = 15.0;            ///< R_out - (largest ring radius)
  int n_samples = 9;               ///< coarse scan points over the window
  double golden_tol = 1e-3;        ///< final bracket, relative to the window width
  CorrectionOptions correction;
  int n_probe = 80;
  std::uint64_t probe_seed = 20240917;
  /// Upper end of the search beyond S_k, as r/(k ln k); 0 disables it.
  double extended_upper = 0.8;
  int jobs = 1;
};

struct ReducedEnergySample {
  double r = 0.0;
  double energy = 0.0;          ///< F(r) = J(phi(r))
  double ansatz_energy = 0.0;   ///< I(W_r)
  double asymptotic = 0.0;      ///< expansion value, 0 when none is attached
  double phi_norm = 0.0;
  double lk_norm = 0.0;
  int iterations = 0;
  double max_ratio = 0.0;
  bool ok = true;
  std::string failure;          ///< message of the failed correction solve
};

/// F(r) for one k on one grid whose Gram operator is built once and shared
/// by every radius up to r_max.
class ReducedEnergyModel {
 public:
  ReducedEnergyModel(const RadialProfile& profile, const PotentialSpec& potential, int k, double r_max,
                     const DriverSettings& settings, std::optional<EnergyExpansion> expansion = std::nullopt,
                     ReductionHooks hooks = {});

  [[nodiscard]] int k() const { return k_; }
  [[nodiscard]] double r_max() const { return r_max_; }
  [[nodiscard]] const OperatorPtr& op() const { return op_; }
  [[nodiscard]] const RadialProfile& profile() const { return profile_; }
  [[nodiscard]] const DriverSettings& settings() const { return settings_; }
  [[nodiscard]] ReducedProblem problem(double r) const;

  /// Throws on a failed correction solve (ContractionError or NumericalError).
  [[nodiscard]] ReducedEnergySample evaluate(double r, CorrectionResult* correction = nullptr) const;

 private:
  RadialProfile profile_;
  int k_;
  double r_max_;
  DriverSettings settings_;
  std::optional<EnergyExpansion> expansion_;
  ReductionHooks hooks_;
  OperatorPtr op_;
};

struct ReducedEnergyCurve {
  int k = 0;
  double lower = 0.0;          ///< search window
  double upper = 0.0;
  std::vector<ReducedEnergySample> samples;  ///< coarse scan, sorted by r
  double argmax = 0.0;
  double max_value = 0.0;
  bool interior = false;       ///< argmax at least one coarse step from both ends
  double normalized = 0.0;     ///< argmax / (k ln k)
  int refinement_evaluations = 0;
  int failed_samples = 0;
};

/// Golden-section maximisation of a unimodal f on [a, b] to a bracket of
/// width tol. Returns the abscissa; evaluations are counted when asked.
double golden_section_maximize(const std::function<double(double)>& f, double a, double b, double tol,
                               int* evaluations = nullptr);

/// Coarse scan (n >= 9) then golden section around the best sample. A sample
/// whose evaluation throws NumericalError is recorded as failed and ranks
/// below every finite value. Throws NumericalError if every sample fails.
ReducedEnergyCurve maximize_on_window(int k, double lower, double upper, int n_samples, double golden_tol,
                                      const std::function<ReducedEnergySample(double)>& evaluate, int jobs = 1);

/// Full mode over [lower, upper] (normally S_k).
ReducedEnergyCurve maximize_reduced_energy(const ReducedEnergyModel& model, double lower, double upper);
/// Expansion-only mode over S_k.
ReducedEnergyCurve maximize_expansion(int k, const EnergyExpansion& expansion, double beta, int n_samples = 9,
                                      double golden_tol = 1e-3);

struct NewtonOptions {
  double tol = 1e-6;         ///< weighted L^2 norm of the nodal PDE residual
  int max_steps = 20;
  int max_halvings = 30;
};

struct CertifiedSolution {
  int k = 1;
  double ring_radius = 0.0;
  Field u;
  double start_residual = 0.0;
  double residual = 0.0;          ///< the certified residual
  double grid_residual = 0.0;     ///< plain -Delta_h u + V u - |u|^{p-1} u, for comparison
  bool defect_corrected = false;
  std::vector<double> residual_history;
  int newton_steps = 0;
  double min_value = 0.0;
  Point2 min_location{};
  double max_value = 0.0;
  double nonradiality = 0.0;  ///< (max - min)/max of u on |y| = ring_radius
  double energy = 0.0;
};

/// Damped Newton on -Delta_h u + V u - |u|^{p-1} u = 0 from `start`, with no
/// constraint. Given the ansatz defect of a ReducedProblem, the equation is
/// the one the reduction solves: the bump sum W keeps its exact Laplacian
/// and only u - W is discretised, so an exact ansatz has zero residual on
/// any grid. Throws NumericalError when the line search is exhausted, the
/// step budget runs out, a node is not positive (location in the message),
/// or the iterate collapses towards u = 0 (a positive solution has
/// max u >= 1 because V >= 1).
CertifiedSolution polish_and_certify(const Field& start, const PotentialSpec& potential, double exponent,
                                     double ring_radius, const NewtonOptions& options = {},
                                     const Eigen::VectorXd* ansatz_defect = nullptr);

/// (max - min)/max of u on the circle |y| = radius.
double nonradiality_index(const Field& u, double radius, int samples = 720);

struct ScalingRow {
  int k = 0;
  double lower = 0.0;
  double upper = 0.0;
  ReducedEnergyCurve curve;
  double r_k = 0.0;
  double normalized = 0.0;
  double distance = 0.0;        ///< |r_k/(k ln k) - m/2pi|
  double phi_norm = 0.0;
  double lk_norm = 0.0;
  double rho = 0.0;
  double energy = 0.0;          ///< F(r_k)
  double energy_per_bump = 0.0;
  double max_ratio = 0.0;       ///< largest contraction ratio at r_k
  double norm_bound = 0.0;      ///< 2 (||l_k|| + ||R'(phi)||) / rho
  std::optional<ReducedEnergyCurve> extended;  ///< search beyond S_k
};

struct ScalingStudy {
  std::vector<ScalingRow> rows;
  double center = 0.0;          ///< m/2pi
};

/// For each k (increasing, >= 2): maximise F over S_k, then measure phi,
/// l_k and rho at r_k. Rows run concurrently and are merged by k.
ScalingStudy scaling_study(const RadialProfile& profile, const PotentialSpec& potential,
                           const std::vector<int>& ks, const DriverSettings& settings,
                           std::optional<EnergyExpansion> expansion = std::nullopt);

/// Least-squares slope s of ln y = c - s ln k.
double fitted_decay_exponent(const std::vector<int>& ks, const std::vector<double>& values);

void write_curve_csv(std::ostream& out, const ReducedEnergyCurve& curve);
void write_scaling_csv(std::ostream& out, const ScalingStudy& study);

}  // namespace kbump
