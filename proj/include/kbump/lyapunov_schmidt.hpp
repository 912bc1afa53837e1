#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "kbump/energy_asymptotics.hpp"
#include "kbump/errors.hpp"
#include "kbump/field_discretization.hpp"

namespace kbump {

/// Test switches. Neither is meant for production runs.
struct ReductionHooks {
  bool zero_ansatz_in_L = false;  ///< use W = 0 inside L, which makes L the identity on E
  bool drop_constraint = false;   ///< P = identity: L acts on the whole symmetric space
};

/// Sector form of the k constraints int U_{x_j}^{p-1} Z_j v = 0.
///
/// By symmetry they reduce to one functional c(v) = int g v with
/// g = sum_j U_{x_j}^{p-1} Z_j. The projector onto E = ker c removes the
/// H^1_V-orthogonal complement of E, spanned by zeta = G^{-1}(w g).
struct ConstraintSpec {
  Eigen::VectorXd weight;      ///< g at the nodes
  Eigen::VectorXd translation; ///< Z = sum_j Z_j = dW/dr at the nodes
  Eigen::VectorXd direction;   ///< zeta
  double gamma = 0.0;          ///< c(Z)
  double pairing = 0.0;        ///< sector sum of w g zeta
};

struct RieszResult {
  Eigen::VectorXd lk;            ///< l_k in E
  Eigen::VectorXd potential;     ///< projected Riesz image of the (V - 1) W part
  Eigen::VectorXd interaction;   ///< projected Riesz image of the -(W^p - sum U^p) part
  double norm = 0.0;
  double potential_norm = 0.0;
  double interaction_norm = 0.0;
};

struct RemainderResult {
  double value = 0.0;
  Eigen::VectorXd gradient;  ///< R'(phi) in E
};

struct KrylovReport {
  int iterations = 0;
  double residual = 0.0;  ///< final ||b - L x|| estimate, relative to ||b||
  bool converged = false;
};

struct CoercivityResult {
  double rho = 0.0;           ///< sqrt of the smallest Ritz value of L^2 on E
  double largest = 0.0;       ///< sqrt of the largest Ritz value
  double ritz_residual = 0.0; ///< ||L^2 y - theta y|| for the smallest pair
  int steps = 0;
  std::uint64_t seed = 0;
};

struct CorrectionResult {
  int k = 1;
  double r = 0.0;
  Eigen::VectorXd phi;
  double norm = 0.0;                 ///< ||phi|| in H^1_V
  int iterations = 0;
  std::vector<double> step_norms;    ///< ||phi_{n+1} - phi_n||
  std::vector<double> ratios;        ///< successive step-norm ratios
  double projected_residual = 0.0;   ///< ||P G^{-1} J'(phi)||
  double constraint_value = 0.0;     ///< c(phi)
  double lk_norm = 0.0;
  double remainder_gradient_norm = 0.0;  ///< ||R'(phi)|| at the fixed point
  int krylov_iterations = 0;
};

struct CorrectionOptions {
  double tol = 1e-8;          ///< absolute H^1_V norm of the last update
  int max_iterations = 30;
  int max_krylov = 1000;
  double krylov_tol = 1e-12;  ///< relative residual of each inner solve
};

/// Thrown when a fixed-point step fails to contract. Carries the history.
class ContractionError : public NumericalError {
 public:
  ContractionError(const std::string& what, std::vector<double> ratios)
      : NumericalError(what), ratios_(std::move(ratios)) {}
  [[nodiscard]] const std::vector<double>& ratios() const { return ratios_; }

 private:
  std::vector<double> ratios_;
};

using OperatorPtr = std::shared_ptr<const H1VOperator>;

/// Everything the reduction needs at one ring radius r, on a grid whose
/// Gram operator is shared read-only. Instances are independent, so
/// different radii can be handled concurrently.
///
/// The first variation uses the identity -Delta U_{x_i} + U_{x_i} = U_{x_i}^p
/// of the continuum bumps. The grid energy of W differs from it by a fixed
/// linear defect (the Laplacian error on the exact bumps), which is
/// subtracted from J so that J'(0) is exactly l and an exact solution
/// gives l = 0 on any grid.
class ReducedProblem {
 public:
  ReducedProblem(OperatorPtr op, const RadialProfile& profile, double r, ReductionHooks hooks = {});

  [[nodiscard]] const BumpConfiguration& config() const { return config_; }
  [[nodiscard]] const OperatorPtr& op() const { return op_; }
  [[nodiscard]] const GridPtr& grid() const { return op_->grid(); }
  [[nodiscard]] const Field& ansatz() const { return ansatz_; }
  [[nodiscard]] const ConstraintSpec& constraint() const { return constraint_; }
  [[nodiscard]] double exponent() const { return p_; }
  /// Sector dual of I_h'(W) - l: the grid's Laplacian error on the bumps.
  [[nodiscard]] const Eigen::VectorXd& ansatz_defect() const { return defect_; }

  /// c(v) = int g v over the full space.
  [[nodiscard]] double constraint_value(const Eigen::VectorXd& v) const;
  /// H^1_V-orthogonal projection onto E; idempotent.
  [[nodiscard]] Eigen::VectorXd project(const Eigen::VectorXd& v) const;

  /// L v = P G^{-1} (G v - p w W^{p-1} v), symmetric on E.
  [[nodiscard]] Eigen::VectorXd apply_L(const Eigen::VectorXd& v) const;
  /// MINRES for L x = b in the H^1_V inner product, re-projecting onto E
  /// every iteration.
  [[nodiscard]] Eigen::VectorXd solve_L(const Eigen::VectorXd& b, const CorrectionOptions& options,
                                        KrylovReport* report = nullptr) const;

  [[nodiscard]] RieszResult riesz_lk() const;
  [[nodiscard]] RemainderResult nonlinear_remainder(const Eigen::VectorXd& phi) const;

  /// J(phi) = I_h(W + phi) minus the fixed defect pairing.
  [[nodiscard]] double reduced_functional(const Eigen::VectorXd& phi) const;
  /// P G^{-1} J'(phi).
  [[nodiscard]] Eigen::VectorXd projected_gradient(const Eigen::VectorXd& phi) const;

  /// Lanczos with full reorthogonalisation on L^2 restricted to E. Needs
  /// n_probe >= 20. Throws NumericalError when the smallest Ritz pair has
  /// not settled.
  [[nodiscard]] CoercivityResult coercivity_probe(int n_probe = 80, std::uint64_t seed = 20240917) const;

  /// Fixed point phi = L^{-1}(R'(phi) - l_k) from phi = 0. Throws
  /// ContractionError when a step ratio reaches 1 and NumericalError when
  /// the iteration or an inner solve does not converge.
  [[nodiscard]] CorrectionResult solve_correction(const CorrectionOptions& options = {}) const;

 private:
  [[nodiscard]] Eigen::VectorXd riesz_projected(const Eigen::VectorXd& dual) const;

  OperatorPtr op_;
  RadialProfile profile_;
  double p_;
  BumpConfiguration config_;
  ReductionHooks hooks_;
  Field ansatz_;
  Eigen::VectorXd bump_power_sum_;  ///< sum_i U_{x_i}^p
  Eigen::VectorXd linear_weight_;   ///< p W^{p-1}, or 0 under the W = 0 hook
  Eigen::VectorXd first_variation_; ///< dual of l
  Eigen::VectorXd defect_;          ///< dual of I_h'(W) - l
  ConstraintSpec constraint_;
};

/// Norms, ratios and counters as one JSON object.
void write_correction_json(std::ostream& out, const CorrectionResult& result);

}  // namespace kbump
