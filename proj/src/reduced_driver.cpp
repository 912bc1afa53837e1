#include "kbump/reduced_driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/SparseLU>

#include "kbump/csv.hpp"
#include "kbump/parallel.hpp"

namespace kbump {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double k_log_k(int k) { return k * std::log(static_cast<double>(k)); }

}  // namespace

double EnergyExpansion::operator()(int k, double r) const {
  if (law && k >= 2) {
    const double pair = (*law)(2.0 * r * std::sin(std::numbers::pi / k));
    return k * (constants.A + constants.B1 / std::pow(r, m) - pair);
  }
  return ansatz_energy_asymptotic(k, r, constants, b2, m);
}

double EnergyExpansion::derivative(int k, double r) const {
  const double tail = -m * constants.B1 / std::pow(r, m + 1.0);
  if (k < 2) return k * tail;
  if (law) {
    const double chord = 2.0 * std::sin(std::numbers::pi / k);
    const double d = chord * r;
    const double slope = (*law)(d) * (-law->nu / d - law->lambda) * chord;
    return k * (tail - slope);
  }
  const double rate = 2.0 * std::numbers::pi / k;
  return k * (tail + rate * b2 * std::exp(-rate * r));
}

ReducedEnergyModel::ReducedEnergyModel(const RadialProfile& profile, const PotentialSpec& potential, int k,
                                       double r_max, const DriverSettings& settings,
                                       std::optional<EnergyExpansion> expansion, ReductionHooks hooks)
    : profile_(profile), k_(k), r_max_(r_max), settings_(settings), expansion_(std::move(expansion)), hooks_(hooks) {
  auto grid = build_sector_grid(
      k, r_max + settings.margin, {.step = settings.grid_step, .focus_radius = r_max, .margin = settings.margin});
  op_ = std::make_shared<const H1VOperator>(std::move(grid), potential);
}

ReducedProblem ReducedEnergyModel::problem(double r) const {
  if (!(r > 0.0) || r > r_max_ * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "reduced energy: r = " << r << " outside (0, " << r_max_ << "] covered by the grid";
    throw ValidationError(msg.str());
  }
  return ReducedProblem(op_, profile_, r, hooks_);
}

ReducedEnergySample ReducedEnergyModel::evaluate(double r, CorrectionResult* correction) const {
  const ReducedProblem pr = problem(r);
  CorrectionResult result = pr.solve_correction(settings_.correction);
  ReducedEnergySample s;
  s.r = r;
  s.energy = pr.reduced_functional(result.phi);
  s.ansatz_energy = pr.reduced_functional(Eigen::VectorXd::Zero(result.phi.size()));
  s.asymptotic = expansion_ ? (*expansion_)(k_, r) : 0.0;
  s.phi_norm = result.norm;
  s.lk_norm = result.lk_norm;
  s.iterations = result.iterations;
  for (double q : result.ratios) s.max_ratio = std::max(s.max_ratio, q);
  if (correction) *correction = std::move(result);
  return s;
}

double golden_section_maximize(const std::function<double(double)>& f, double a, double b, double tol,
                               int* evaluations) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int count = 2;
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++count;
  }
  if (evaluations) *evaluations = count;
  return fc >= fd ? c : d;
}

ReducedEnergyCurve maximize_on_window(int k, double lower, double upper, int n_samples, double golden_tol,
                                      const std::function<ReducedEnergySample(double)>& evaluate, int jobs) {
  if (n_samples < 9) throw ValidationError("maximize: n_samples must be >= 9");
  if (!(upper > lower)) throw ValidationError("maximize: empty window");
  ReducedEnergyCurve curve;
  curve.k = k;
  curve.lower = lower;
  curve.upper = upper;
  curve.samples.resize(static_cast<std::size_t>(n_samples));
  const double step = (upper - lower) / (n_samples - 1);

  auto guarded = [&](double r) {
    try {
      return evaluate(r);
    } catch (const NumericalError& e) {
      ReducedEnergySample failed;
      failed.r = r;
      failed.ok = false;
      failed.failure = e.what();
      return failed;
    }
  };
  parallel_for_index(curve.samples.size(), jobs, [&](std::size_t i) {
    const double r = i + 1 == curve.samples.size() ? upper : lower + static_cast<double>(i) * step;
    curve.samples[i] = guarded(r);
  });

  std::size_t best = curve.samples.size();
  for (std::size_t i = 0; i < curve.samples.size(); ++i) {
    const auto& s = curve.samples[i];
    if (!s.ok) {
      ++curve.failed_samples;
      continue;
    }
    if (best == curve.samples.size() || s.energy > curve.samples[best].energy) best = i;
  }
  if (best == curve.samples.size()) {
    std::ostringstream msg;
    msg << "maximize: every sample failed for k = " << k << " (first: " << curve.samples.front().failure << ")";
    throw NumericalError(msg.str());
  }

  const double a = curve.samples[best > 0 ? best - 1 : 0].r;
  const double b = curve.samples[std::min(best + 1, curve.samples.size() - 1)].r;
  auto objective = [&](double r) {
    const auto s = guarded(r);
    return s.ok ? s.energy : kNegInf;
  };
  const double candidate =
      golden_section_maximize(objective, a, b, golden_tol * (upper - lower), &curve.refinement_evaluations);
  const auto refined = guarded(candidate);
  ++curve.refinement_evaluations;
  if (refined.ok && refined.energy >= curve.samples[best].energy) {
    curve.argmax = refined.r;
    curve.max_value = refined.energy;
  } else {
    curve.argmax = curve.samples[best].r;
    curve.max_value = curve.samples[best].energy;
  }
  const double slack = 1e-9 * step;
  curve.interior = curve.argmax - lower >= step - slack && upper - curve.argmax >= step - slack;
  curve.normalized = k >= 2 ? curve.argmax / k_log_k(k) : 0.0;
  return curve;
}

ReducedEnergyCurve maximize_reduced_energy(const ReducedEnergyModel& model, double lower, double upper) {
  const auto& s = model.settings();
  return maximize_on_window(
      model.k(), lower, upper, s.n_samples, s.golden_tol, [&](double r) { return model.evaluate(r); }, s.jobs);
}

ReducedEnergyCurve maximize_expansion(int k, const EnergyExpansion& expansion, double beta, int n_samples,
                                      double golden_tol) {
  const auto window = admissible_radii(k, expansion.m, beta);
  return maximize_on_window(k, window.lower, window.upper, n_samples, golden_tol, [&](double r) {
    ReducedEnergySample s;
    s.r = r;
    s.energy = s.asymptotic = expansion(k, r);
    return s;
  });
}

double nonradiality_index(const Field& u, double radius, int samples) {
  const auto& g = *u.grid;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i <= samples; ++i) {
    const double t = g.half_angle() * i / samples;
    const double v = g.interpolate(u.values, {radius * std::cos(t), radius * std::sin(t)});
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi > 0.0 ? (hi - lo) / hi : 0.0;
}

CertifiedSolution polish_and_certify(const Field& start, const PotentialSpec& potential, double exponent,
                                     double ring_radius, const NewtonOptions& options,
                                     const Eigen::VectorXd* ansatz_defect) {
  const auto& grid = *start.grid;
  const Eigen::VectorXd& w = grid.weights();
  const Eigen::VectorXd v = grid.node_radii().unaryExpr([&](double r) { return potential(r); });
  Eigen::SparseMatrix<double> gram = grid.stiffness();
  gram.diagonal() += Eigen::VectorXd(w.array() * v.array());
  const double p = exponent;

  if (ansatz_defect && ansatz_defect->size() != start.size())
    throw ValidationError("polish_and_certify: defect does not match the grid");
  auto plain_dual = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return gram * u - Eigen::VectorXd(w.array() * u.array().abs().pow(p - 1.0) * u.array());
  };
  auto norm_of = [&](const Eigen::VectorXd& d) {
    return std::sqrt(grid.symmetry_factor() * (d.array().square() / w.array()).sum());
  };
  auto residual_of = [&](const Eigen::VectorXd& u, Eigen::VectorXd* dual) {
    Eigen::VectorXd d = plain_dual(u);
    if (ansatz_defect) d -= *ansatz_defect;
    const double norm = norm_of(d);
    if (dual) *dual = std::move(d);
    return norm;
  };

  CertifiedSolution out;
  out.k = grid.k();
  out.ring_radius = ring_radius;
  Eigen::VectorXd u = start.values;
  Eigen::VectorXd dual;
  double res = residual_of(u, &dual);
  out.start_residual = res;
  out.residual_history.push_back(res);

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analysed = false;
  while (res > options.tol) {
    if (out.newton_steps == options.max_steps) {
      std::ostringstream msg;
      msg << "Newton: residual " << res << " after " << out.newton_steps << " steps";
      throw NumericalError(msg.str());
    }
    Eigen::SparseMatrix<double> jac = gram;
    jac.diagonal() -= Eigen::VectorXd(p * w.array() * u.array().abs().pow(p - 1.0));
    if (!analysed) {
      lu.analyzePattern(jac);
      analysed = true;
    }
    lu.factorize(jac);
    if (lu.info() != Eigen::Success) throw NumericalError("Newton: Jacobian factorisation failed");
    const Eigen::VectorXd delta = lu.solve(-dual);

    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd trial = u + t * delta;
      Eigen::VectorXd trial_dual;
      const double trial_res = residual_of(trial, &trial_dual);
      if (trial_res < (1.0 - 1e-4 * t) * res) {
        u = trial;
        dual = std::move(trial_dual);
        res = trial_res;
        accepted = true;
        break;
      }
    }
    ++out.newton_steps;
    out.residual_history.push_back(res);
    if (!accepted) {
      std::ostringstream msg;
      msg << "Newton: step damping exhausted at step " << out.newton_steps << ", residual " << res;
      throw NumericalError(msg.str());
    }
  }

  Eigen::Index at_min = 0;
  Eigen::Index at_max = 0;
  out.min_value = u.minCoeff(&at_min);
  out.max_value = u.maxCoeff(&at_max);
  out.min_location = grid.node(at_min);
  if (out.max_value < 1.0) {
    std::ostringstream msg;
    msg << "Newton: iterate collapsed towards u = 0 (max u = " << out.max_value << ")";
    throw NumericalError(msg.str());
  }
  if (!(out.min_value > 0.0)) {
    std::ostringstream msg;
    msg << "Newton: solution not positive, u = " << out.min_value << " at (" << out.min_location.x << ", "
        << out.min_location.y << ")";
    throw NumericalError(msg.str());
  }
  out.residual = res;
  out.grid_residual = norm_of(plain_dual(u));
  out.defect_corrected = ansatz_defect != nullptr;
  out.u = Field(start.grid, std::move(u));
  out.nonradiality = nonradiality_index(out.u, ring_radius);
  out.energy = energy_functional(out.u, potential, p);
  return out;
}

ScalingStudy scaling_study(const RadialProfile& profile, const PotentialSpec& potential, const std::vector<int>& ks,
                           const DriverSettings& settings, std::optional<EnergyExpansion> expansion) {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 2) throw ValidationError("scaling_study: every k must be >= 2");
    if (i > 0 && ks[i] <= ks[i - 1]) throw ValidationError("scaling_study: k list must be increasing");
  }
  ScalingStudy study;
  study.center = potential.m / (2.0 * std::numbers::pi);
  study.rows.resize(ks.size());

  DriverSettings inner = settings;
  inner.jobs = std::max(1, settings.jobs / std::max<int>(1, static_cast<int>(ks.size())));
  parallel_for_index(ks.size(), settings.jobs, [&](std::size_t i) {
    const int k = ks[i];
    const auto window = admissible_radii(k, potential.m, settings.beta);
    const double extended_upper = settings.extended_upper * k_log_k(k);
    const double r_max = std::max(window.upper, extended_upper);
    const ReducedEnergyModel model(profile, potential, k, r_max, inner, expansion);

    ScalingRow row;
    row.k = k;
    row.lower = window.lower;
    row.upper = window.upper;
    row.curve = maximize_reduced_energy(model, window.lower, window.upper);
    row.r_k = row.curve.argmax;
    row.normalized = row.curve.normalized;
    row.distance = std::abs(row.normalized - study.center);

    CorrectionResult correction;
    const auto sample = model.evaluate(row.r_k, &correction);
    row.phi_norm = sample.phi_norm;
    row.lk_norm = sample.lk_norm;
    row.energy = sample.energy;
    row.energy_per_bump = sample.energy / k;
    row.max_ratio = sample.max_ratio;
    row.rho = model.problem(row.r_k).coercivity_probe(settings.n_probe, settings.probe_seed).rho;
    row.norm_bound = 2.0 * (correction.lk_norm + correction.remainder_gradient_norm) / row.rho;

    if (extended_upper > window.upper)
      row.extended = maximize_reduced_energy(model, study.center * k_log_k(k), extended_upper);
    study.rows[i] = std::move(row);
  });
  return study;
}

double fitted_decay_exponent(const std::vector<int>& ks, const std::vector<double>& values) {
  if (ks.size() != values.size() || ks.size() < 2) throw ValidationError("decay fit: need >= 2 matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(values[i] > 0.0) || ks[i] < 1) throw ValidationError("decay fit: values and k must be positive");
    const double x = std::log(static_cast<double>(ks[i]));
    const double y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) throw ValidationError("decay fit: k values must not all coincide");
  return -(n * sxy - sx * sy) / denom;
}

void write_curve_csv(std::ostream& out, const ReducedEnergyCurve& curve) {
  csv::row(out, {"k", "r", "F", "I_ansatz", "I_asymptotic", "phi_norm", "lk_norm", "iterations", "status"});
  for (const auto& s : curve.samples) {
    csv::row(out, {std::to_string(curve.k), csv::number(s.r), csv::number(s.energy), csv::number(s.ansatz_energy),
                   csv::number(s.asymptotic), csv::number(s.phi_norm), csv::number(s.lk_norm),
                   std::to_string(s.iterations), s.ok ? "ok" : "contraction_failed"});
  }
}

void write_scaling_csv(std::ostream& out, const ScalingStudy& study) {
  csv::row(out, {"k", "S_lower", "S_upper", "r_k", "r_k_over_klnk", "distance_to_center", "trend", "interior",
                 "phi_norm", "lk_norm", "rho", "F", "F_over_k", "max_ratio", "norm_bound", "r_star",
                 "r_star_over_klnk", "r_star_interior"});
  for (std::size_t i = 0; i < study.rows.size(); ++i) {
    const auto& r = study.rows[i];
    const std::string trend = i == 0 ? "" : csv::number(r.distance - study.rows[i - 1].distance);
    const bool ext = r.extended.has_value();
    csv::row(out, {std::to_string(r.k), csv::number(r.lower), csv::number(r.upper), csv::number(r.r_k),
                   csv::number(r.normalized), csv::number(r.distance), trend, r.curve.interior ? "1" : "0",
                   csv::number(r.phi_norm), csv::number(r.lk_norm), csv::number(r.rho), csv::number(r.energy),
                   csv::number(r.energy_per_bump), csv::number(r.max_ratio), csv::number(r.norm_bound),
                   ext ? csv::number(r.extended->argmax) : "", ext ? csv::number(r.extended->normalized) : "",
                   ext ? (r.extended->interior ? "1" : "0") : ""});
  }
}

}  // namespace kbump
