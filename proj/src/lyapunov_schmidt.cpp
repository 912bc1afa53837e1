#include "kbump/lyapunov_schmidt.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace kbump {

namespace {

Eigen::ArrayXd signed_power(const Eigen::VectorXd& u, double q) { return u.array().abs().pow(q - 1.0) * u.array(); }

std::string ratio_history(const std::vector<double>& ratios) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < ratios.size(); ++i) out << (i ? ", " : "") << ratios[i];
  out << "]";
  return out.str();
}

}  // namespace

ReducedProblem::ReducedProblem(OperatorPtr op, const RadialProfile& profile, double r, ReductionHooks hooks)
    : op_(std::move(op)), profile_(profile), p_(profile.exponent()), hooks_(hooks) {
  if (!op_) throw ValidationError("reduction without a Gram operator");
  const auto& grid = *op_->grid();
  config_ = place_bumps(grid.k(), r);
  ansatz_ = sample_ansatz(op_->grid(), config_, profile_);
  const Eigen::VectorXd& w = grid.weights();
  const Eigen::VectorXd& W = ansatz_.values;

  bump_power_sum_ = Eigen::VectorXd::Zero(grid.size());
  constraint_.weight = Eigen::VectorXd::Zero(grid.size());
  constraint_.translation = Eigen::VectorXd::Zero(grid.size());
  for (Eigen::Index n = 0; n < grid.size(); ++n) {
    const Point2 y = grid.node(n);
    for (int j = 0; j < config_.k; ++j) {
      const double u = profile_.value((y - config_.centers[static_cast<std::size_t>(j)]).norm());
      const double z = eval_zj(config_, profile_, j, y);
      const double u_pm1 = std::pow(u, p_ - 1.0);
      bump_power_sum_[n] += u_pm1 * u;
      constraint_.translation[n] += z;
      constraint_.weight[n] += u_pm1 * z;
    }
  }

  linear_weight_ = hooks_.zero_ansatz_in_L ? Eigen::VectorXd::Zero(grid.size())
                                           : Eigen::VectorXd(p_ * W.array().abs().pow(p_ - 1.0));

  const Eigen::ArrayXd excess = op_->potential_values().array() - 1.0;
  const Eigen::VectorXd w_pow = signed_power(W, p_);
  first_variation_ = w.array() * (excess * W.array() - (w_pow.array() - bump_power_sum_.array()));
  defect_ = op_->matrix() * W - Eigen::VectorXd(w.array() * w_pow.array()) - first_variation_;

  const Eigen::VectorXd wg = w.array() * constraint_.weight.array();
  constraint_.direction = op_->riesz(wg);
  constraint_.pairing = wg.dot(constraint_.direction);
  constraint_.gamma = constraint_value(constraint_.translation);
  if (!hooks_.drop_constraint && !(std::abs(constraint_.pairing) > 0.0))
    throw NumericalError("constraint weight is numerically zero (degenerate profile)");
}

double ReducedProblem::constraint_value(const Eigen::VectorXd& v) const {
  const auto& grid = *op_->grid();
  return grid.symmetry_factor() * (grid.weights().array() * constraint_.weight.array() * v.array()).sum();
}

Eigen::VectorXd ReducedProblem::project(const Eigen::VectorXd& v) const {
  if (hooks_.drop_constraint) return v;
  const double c = (op_->grid()->weights().array() * constraint_.weight.array() * v.array()).sum();
  return v - (c / constraint_.pairing) * constraint_.direction;
}

Eigen::VectorXd ReducedProblem::riesz_projected(const Eigen::VectorXd& dual) const { return project(op_->riesz(dual)); }

Eigen::VectorXd ReducedProblem::apply_L(const Eigen::VectorXd& v) const {
  const Eigen::VectorXd dual = op_->grid()->weights().array() * linear_weight_.array() * v.array();
  return project(v - op_->riesz(dual));
}

Eigen::VectorXd ReducedProblem::solve_L(const Eigen::VectorXd& rhs, const CorrectionOptions& options,
                                        KrylovReport* report) const {
  const Eigen::Index n = rhs.size();
  const Eigen::VectorXd b = project(rhs);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  KrylovReport local;
  const double beta1 = op_->norm(b);
  if (beta1 == 0.0) {
    local.converged = true;
    if (report) *report = local;
    return x;
  }

  Eigen::VectorXd v_prev = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd v = b / beta1;
  Eigen::VectorXd w_older = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd w_old = Eigen::VectorXd::Zero(n);
  double beta = 0.0;
  double cs = -1.0, sn = 0.0, dbar = 0.0, epsln = 0.0, phibar = beta1;

  for (int it = 1; it <= options.max_krylov; ++it) {
    Eigen::VectorXd q = apply_L(v);
    if (it > 1) q -= beta * v_prev;
    const double alpha = op_->inner(v, q);
    q -= alpha * v;
    q = project(q);
    const double beta_next = op_->norm(q);

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alpha;
    const double gbar = sn * dbar - cs * alpha;
    epsln = sn * beta_next;
    dbar = -cs * beta_next;
    const double gamma = std::hypot(gbar, beta_next);
    if (gamma == 0.0) throw NumericalError("MINRES: L is singular on the Krylov space");
    cs = gbar / gamma;
    sn = beta_next / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    Eigen::VectorXd w_new = (v - oldeps * w_older - delta * w_old) / gamma;
    x += phi * w_new;
    w_older = std::move(w_old);
    w_old = std::move(w_new);

    local.iterations = it;
    local.residual = std::abs(phibar) / beta1;
    if (local.residual <= options.krylov_tol || beta_next <= 1e-14 * beta1) {
      local.converged = true;
      break;
    }
    v_prev = std::move(v);
    v = q / beta_next;
    beta = beta_next;
  }
  if (report) *report = local;
  return project(x);
}

RieszResult ReducedProblem::riesz_lk() const {
  const auto& w = op_->grid()->weights();
  const Eigen::VectorXd& W = ansatz_.values;
  const Eigen::VectorXd potential_dual = w.array() * (op_->potential_values().array() - 1.0) * W.array();
  RieszResult out;
  out.potential = riesz_projected(potential_dual);
  out.interaction = riesz_projected(first_variation_ - potential_dual);
  out.lk = riesz_projected(first_variation_);
  out.norm = op_->norm(out.lk);
  out.potential_norm = op_->norm(out.potential);
  out.interaction_norm = op_->norm(out.interaction);
  return out;
}

RemainderResult ReducedProblem::nonlinear_remainder(const Eigen::VectorXd& phi) const {
  const auto& grid = *op_->grid();
  const Eigen::ArrayXd W = ansatz_.values.array();
  const Eigen::ArrayXd f = phi.array();
  const Eigen::ArrayXd u = W + f;
  const Eigen::ArrayXd Wp1 = W.abs().pow(p_ - 1.0);
  const Eigen::ArrayXd Wp = Wp1 * W;

  const Eigen::ArrayXd density =
      u.abs().pow(p_ + 1.0) - W.abs().pow(p_ + 1.0) - (p_ + 1.0) * Wp * f - 0.5 * (p_ + 1.0) * p_ * Wp1 * f * f;
  RemainderResult out;
  out.value = grid.symmetry_factor() / (p_ + 1.0) * (grid.weights().array() * density).sum();
  const Eigen::VectorXd dual = grid.weights().array() * (u.abs().pow(p_ - 1.0) * u - Wp - p_ * Wp1 * f);
  out.gradient = riesz_projected(dual);
  return out;
}

double ReducedProblem::reduced_functional(const Eigen::VectorXd& phi) const {
  const Field u(op_->grid(), ansatz_.values + phi);
  return energy_functional(u, op_->potential(), p_) - op_->grid()->symmetry_factor() * defect_.dot(phi);
}

Eigen::VectorXd ReducedProblem::projected_gradient(const Eigen::VectorXd& phi) const {
  const Eigen::VectorXd u = ansatz_.values + phi;
  const Eigen::VectorXd dual = op_->matrix() * u -
                               Eigen::VectorXd(op_->grid()->weights().array() * signed_power(u, p_)) - defect_;
  return riesz_projected(dual);
}

CoercivityResult ReducedProblem::coercivity_probe(int n_probe, std::uint64_t seed) const {
  if (n_probe < 20) throw ValidationError("coercivity_probe: n_probe must be >= 20");
  const Eigen::Index n = ansatz_.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd start(n);
  for (Eigen::Index i = 0; i < n; ++i) start[i] = normal(rng);
  start = project(start);

  std::vector<Eigen::VectorXd> basis;
  basis.push_back(start / op_->norm(start));
  std::vector<double> alpha;
  std::vector<double> beta;
  double last_beta = 0.0;
  const int steps = static_cast<int>(std::min<Eigen::Index>(n_probe, n));
  for (int j = 0; j < steps; ++j) {
    Eigen::VectorXd q = apply_L(apply_L(basis[static_cast<std::size_t>(j)]));
    alpha.push_back(op_->inner(basis[static_cast<std::size_t>(j)], q));
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) q -= op_->inner(b, q) * b;
    // Round-off leaks out of E and grows when beta is small.
    q = project(q);
    last_beta = op_->norm(q);
    if (last_beta <= 1e-12 * std::max(1.0, std::abs(alpha.back()))) {
      last_beta = 0.0;
      break;
    }
    if (j + 1 == steps) break;
    beta.push_back(last_beta);
    basis.push_back(q / last_beta);
  }

  const auto m = static_cast<Eigen::Index>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    t(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
  if (eig.info() != Eigen::Success) throw NumericalError("coercivity_probe: tridiagonal eigensolve failed");

  CoercivityResult out;
  out.steps = static_cast<int>(m);
  out.seed = seed;
  const double smallest = std::max(0.0, eig.eigenvalues()[0]);
  const double largest = eig.eigenvalues()[m - 1];
  out.rho = std::sqrt(smallest);
  out.largest = std::sqrt(std::max(0.0, largest));
  out.ritz_residual = last_beta * std::abs(eig.eigenvectors()(m - 1, 0));
  if (out.ritz_residual > 1e-3 * largest) {
    std::ostringstream msg;
    msg << "coercivity_probe: smallest Ritz pair stagnated after " << m << " steps (residual " << out.ritz_residual
        << ")";
    throw NumericalError(msg.str());
  }
  return out;
}

CorrectionResult ReducedProblem::solve_correction(const CorrectionOptions& options) const {
  const RieszResult l = riesz_lk();
  CorrectionResult out;
  out.k = config_.k;
  out.r = config_.ring_radius;
  out.lk_norm = l.norm;
  out.phi = Eigen::VectorXd::Zero(ansatz_.size());

  bool converged = false;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const RemainderResult rem = nonlinear_remainder(out.phi);
    KrylovReport krylov;
    Eigen::VectorXd next = solve_L(rem.gradient - l.lk, options, &krylov);
    out.krylov_iterations += krylov.iterations;
    if (!krylov.converged) {
      std::ostringstream msg;
      msg << "solve_correction: MINRES stopped at relative residual " << krylov.residual << " (k = " << config_.k
          << ", r = " << config_.ring_radius << ")";
      throw NumericalError(msg.str());
    }
    const double step = op_->norm(next - out.phi);
    out.phi = std::move(next);
    out.iterations = it;
    if (!out.step_norms.empty() && out.step_norms.back() > 0.0) {
      out.ratios.push_back(step / out.step_norms.back());
      if (out.ratios.back() >= 1.0 && step > options.tol) {
        std::ostringstream msg;
        msg << "solve_correction: contraction failed at k = " << config_.k << ", r = " << config_.ring_radius
            << ", ratios " << ratio_history(out.ratios);
        throw ContractionError(msg.str(), out.ratios);
      }
    }
    out.step_norms.push_back(step);
    if (step <= options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "solve_correction: no convergence in " << options.max_iterations << " iterations, ratios "
        << ratio_history(out.ratios);
    throw NumericalError(msg.str());
  }
  out.norm = op_->norm(out.phi);
  out.projected_residual = op_->norm(projected_gradient(out.phi));
  out.constraint_value = constraint_value(out.phi);
  out.remainder_gradient_norm = op_->norm(nonlinear_remainder(out.phi).gradient);
  return out;
}

void write_correction_json(std::ostream& out, const CorrectionResult& result) {
  nlohmann::ordered_json j;
  j["k"] = result.k;
  j["r"] = result.r;
  j["phi_norm_h1v"] = result.norm;
  j["iterations"] = result.iterations;
  j["step_norms"] = result.step_norms;
  j["contraction_ratios"] = result.ratios;
  j["projected_residual"] = result.projected_residual;
  j["constraint_value"] = result.constraint_value;
  j["lk_norm_h1v"] = result.lk_norm;
  j["remainder_gradient_norm_h1v"] = result.remainder_gradient_norm;
  j["krylov_iterations"] = result.krylov_iterations;
  out << j.dump(2) << "\n";
}

}  // namespace kbump
