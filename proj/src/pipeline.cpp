#include "kbump/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "kbump/csv.hpp"
#include "kbump/energy_asymptotics.hpp"
#include "kbump/reduced_driver.hpp"

namespace kbump {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string join_lines(const std::vector<std::string>& problems) {
  std::string out = "invalid config:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

std::string where(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return key + ": ";
  return "line " + std::to_string(line_of_offset(text, pos)) + ": " + key + ": ";
}

// Reads one key into `slot` when present; records type problems.
class Reader {
 public:
  Reader(const ojson& j, const std::string& text, std::vector<std::string>& problems)
      : j_(j), text_(text), problems_(problems) {}

  void number(const std::string& key, double& slot) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_number()) return bad(key, "expected a number");
    slot = j_[key].get<double>();
  }
  void integer(const std::string& key, int& slot) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_number_integer()) return bad(key, "expected an integer");
    slot = j_[key].get<int>();
  }
  void unsigned_integer(const std::string& key, std::uint64_t& slot) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_number_unsigned()) return bad(key, "expected a non-negative integer");
    slot = j_[key].get<std::uint64_t>();
  }
  void text(const std::string& key, std::string& slot) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_string()) return bad(key, "expected a string");
    slot = j_[key].get<std::string>();
  }
  void integers(const std::string& key, std::vector<int>& slot) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    const auto& v = j_[key];
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const ojson& e) { return e.is_number_integer(); }))
      return bad(key, "expected an array of integers");
    slot = v.get<std::vector<int>>();
  }
  void numbers(const std::string& key, std::vector<double>& slot) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    const auto& v = j_[key];
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const ojson& e) { return e.is_number(); }))
      return bad(key, "expected an array of numbers");
    slot = v.get<std::vector<double>>();
  }
  void unknown_keys() {
    for (const auto& [key, value] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) bad(key, "unknown key");
  }

 private:
  void bad(const std::string& key, const std::string& what) { problems_.push_back(where(text_, key) + what); }

  const ojson& j_;
  const std::string& text_;
  std::vector<std::string>& problems_;
  std::vector<std::string> seen_;
};

void check_ranges(const RunConfig& c, const std::string& text, std::vector<std::string>& problems) {
  auto require = [&](bool ok, const std::string& key, const std::string& what) {
    if (!ok) problems.push_back(where(text, key) + what);
  };
  require(c.N >= 1, "N", "dimension must be >= 1");
  require(c.p > 1.0, "p", "exponent must be > 1");
  if (c.N >= 3 && c.p > 1.0) {
    const double critical = (c.N + 2.0) / (c.N - 2.0);
    std::ostringstream msg;
    msg << "supercritical rule: p must be < (N+2)/(N-2) = " << critical << " for N = " << c.N;
    require(c.p < critical, "p", msg.str());
  }
  require(c.N == 2, "N", "the sector-grid stages (expansion onwards) are implemented for N = 2 only");
  require(c.a >= 0.0, "a", "potential amplitude must be >= 0");
  require(c.m > 1.0, "m", "potential decay power must be > 1");
  require(c.beta >= 0.0 && c.beta < c.m / (2.0 * std::numbers::pi), "beta", "need 0 <= beta < m/2pi");
  require(!c.k_list.empty(), "k_list", "must not be empty");
  for (std::size_t i = 0; i < c.k_list.size(); ++i) {
    require(c.k_list[i] >= 2, "k_list", "every k must be >= 2");
    if (i > 0) require(c.k_list[i] > c.k_list[i - 1], "k_list", "must be strictly increasing");
  }
  require(c.grid_step > 0.0 && c.grid_step <= 0.5, "grid_step", "need 0 < grid_step <= 0.5");
  require(c.outer_margin_decay_lengths >= 5.0, "outer_margin_decay_lengths", "must be >= 5");
  require(c.ground_state_step > 0.0 && c.ground_state_step <= 0.05, "ground_state_step",
          "need 0 < ground_state_step <= 0.05");
  require(c.ground_state_tol > 0.0 && c.ground_state_tol < 1e-4, "ground_state_tol", "need 0 < tol < 1e-4");
  require(c.ground_state_s_max >= 10.0, "ground_state_s_max", "must be >= 10");
  for (double r : c.single_bump_radii) require(r >= 5.0, "single_bump_radii", "every radius must be >= 5");
  require(c.interaction_d_min > 0.0 && c.interaction_d_max > c.interaction_d_min, "interaction_d_max",
          "need 0 < interaction_d_min < interaction_d_max");
  require(c.interaction_samples >= 4, "interaction_samples", "must be >= 4");
  require(c.interaction_quadrature_step > 0.0 && c.interaction_quadrature_step <= 0.2,
          "interaction_quadrature_step", "need 0 < step <= 0.2");
  require(c.correction_tol_h1v > 0.0, "correction_tol_h1v", "must be > 0");
  require(c.correction_max_iterations >= 1, "correction_max_iterations", "must be >= 1");
  require(c.krylov_tol_relative > 0.0 && c.krylov_tol_relative < 1.0, "krylov_tol_relative", "need 0 < tol < 1");
  require(c.krylov_max_iterations >= 1, "krylov_max_iterations", "must be >= 1");
  require(c.scan_samples >= 9, "scan_samples", "must be >= 9");
  require(c.golden_tol_relative_to_window > 0.0 && c.golden_tol_relative_to_window < 1.0,
          "golden_tol_relative_to_window", "need 0 < tol < 1");
  require(c.extended_upper_over_klnk >= 0.0 && c.extended_upper_over_klnk <= 2.0, "extended_upper_over_klnk",
          "need 0 <= value <= 2");
  require(c.probe_steps >= 20, "probe_steps", "must be >= 20");
  require(c.certify_k >= 2, "certify_k", "must be >= 2");
  require(c.newton_tol_residual_l2 > 0.0, "newton_tol_residual_l2", "must be > 0");
  require(c.newton_max_steps >= 1, "newton_max_steps", "must be >= 1");
  require(!c.output_dir.empty(), "output_dir", "must not be empty");
}

ojson config_json(const RunConfig& c) {
  ojson j;
  j["N"] = c.N;
  j["p"] = c.p;
  j["a"] = c.a;
  j["m"] = c.m;
  j["beta"] = c.beta;
  j["k_list"] = c.k_list;
  j["grid_step"] = c.grid_step;
  j["outer_margin_decay_lengths"] = c.outer_margin_decay_lengths;
  j["ground_state_step"] = c.ground_state_step;
  j["ground_state_tol"] = c.ground_state_tol;
  j["ground_state_s_max"] = c.ground_state_s_max;
  j["single_bump_radii"] = c.single_bump_radii;
  j["interaction_d_min"] = c.interaction_d_min;
  j["interaction_d_max"] = c.interaction_d_max;
  j["interaction_samples"] = c.interaction_samples;
  j["interaction_quadrature_step"] = c.interaction_quadrature_step;
  j["correction_tol_h1v"] = c.correction_tol_h1v;
  j["correction_max_iterations"] = c.correction_max_iterations;
  j["krylov_tol_relative"] = c.krylov_tol_relative;
  j["krylov_max_iterations"] = c.krylov_max_iterations;
  j["scan_samples"] = c.scan_samples;
  j["golden_tol_relative_to_window"] = c.golden_tol_relative_to_window;
  j["extended_upper_over_klnk"] = c.extended_upper_over_klnk;
  j["probe_steps"] = c.probe_steps;
  j["probe_seed"] = c.probe_seed;
  j["certify_k"] = c.certify_k;
  j["newton_tol_residual_l2"] = c.newton_tol_residual_l2;
  j["newton_max_steps"] = c.newton_max_steps;
  j["output_dir"] = c.output_dir;
  return j;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

double k_log_k(int k) { return k * std::log(static_cast<double>(k)); }

// Lazily computed intermediate results shared by the stages of one run.
class RunContext {
 public:
  RunContext(const RunConfig& config, fs::path dir, int jobs)
      : config_(config), dir_(std::move(dir)), jobs_(std::max(1, jobs)), potential_(config.a, config.m) {}

  const RunConfig& config() const { return config_; }
  const fs::path& dir() const { return dir_; }
  int jobs() const { return jobs_; }
  const PotentialSpec& potential() const { return potential_; }

  const RadialProfile& profile() {
    if (!profile_) {
      GroundStateOptions options;
      options.tol = config_.ground_state_tol;
      options.grid_step = config_.ground_state_step;
      options.s_max = config_.ground_state_s_max;
      profile_ = solve_ground_state(config_.N, config_.p, options, &report_);
    }
    return *profile_;
  }
  const GroundStateReport& ground_state_report() {
    (void)profile();
    return report_;
  }
  ExpansionConstants constants() { return expansion_constants(profile(), potential_); }

  const std::vector<InteractionSample>& ladder() {
    if (!ladder_) {
      ladder_ = interaction_ladder(profile(), config_.interaction_d_min, config_.interaction_d_max,
                                   config_.interaction_samples, {.step = config_.interaction_quadrature_step}, jobs_);
    }
    return *ladder_;
  }
  const InteractionLaw& law() {
    if (!law_) law_ = fit_interaction_law(ladder());
    return *law_;
  }
  EnergyExpansion expansion() { return {constants(), config_.m, 0.0, law()}; }

  DriverSettings settings() const {
    DriverSettings s;
    s.beta = config_.beta;
    s.grid_step = config_.grid_step;
    s.margin = config_.outer_margin_decay_lengths;
    s.n_samples = config_.scan_samples;
    s.golden_tol = config_.golden_tol_relative_to_window;
    s.correction.tol = config_.correction_tol_h1v;
    s.correction.max_iterations = config_.correction_max_iterations;
    s.correction.krylov_tol = config_.krylov_tol_relative;
    s.correction.max_krylov = config_.krylov_max_iterations;
    s.n_probe = config_.probe_steps;
    s.probe_seed = config_.probe_seed;
    s.extended_upper = config_.extended_upper_over_klnk;
    s.jobs = jobs_;
    return s;
  }
  // Same grid as the study uses for this k.
  double model_radius(int k) const {
    const auto window = admissible_radii(k, config_.m, config_.beta);
    return std::max(window.upper, config_.extended_upper_over_klnk * k_log_k(k));
  }

  const ScalingStudy& study() {
    if (!study_) study_ = scaling_study(profile(), potential_, config_.k_list, settings(), expansion());
    return *study_;
  }

 private:
  RunConfig config_;
  fs::path dir_;
  int jobs_;
  PotentialSpec potential_;
  std::optional<RadialProfile> profile_;
  GroundStateReport report_;
  std::optional<std::vector<InteractionSample>> ladder_;
  std::optional<InteractionLaw> law_;
  std::optional<ScalingStudy> study_;
};

template <typename Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ostringstream out;
  writer(out);
  write_file(path, out.str());
}

void stage_ground_state(RunContext& ctx) {
  const auto& profile = ctx.profile();
  const auto& rep = ctx.ground_state_report();
  write_with(ctx.dir() / "ground_state.csv", [&](std::ostream& o) { write_profile_csv(o, profile); });
  ojson j;
  j["N"] = profile.dimension();
  j["p"] = profile.exponent();
  j["U0"] = rep.center_value;
  j["bracket_width"] = rep.bracket_width;
  j["bisection_steps"] = rep.bisection_steps;
  j["match_radius"] = rep.match_radius;
  j["seam_slope_mismatch"] = rep.seam_slope_mismatch;
  j["ode_residual"] = rep.ode_residual;
  j["far_field_amplitude"] = profile.far_field_amplitude();
  write_file(ctx.dir() / "ground_state.json", j.dump(2) + "\n");
}

void stage_constants(RunContext& ctx) {
  const auto& profile = ctx.profile();
  const auto c = ctx.constants();
  ojson j;
  j["A"] = c.A;
  j["B1"] = c.B1;
  j["int_U2"] = radial_integral(profile, 2.0);
  j["int_U_p_plus_1"] = radial_integral(profile, ctx.config().p + 1.0);
  j["a"] = ctx.config().a;
  j["m"] = ctx.config().m;
  write_file(ctx.dir() / "constants.json", j.dump(2) + "\n");
  if (!ctx.config().single_bump_radii.empty()) {
    const auto rows = single_bump_energy_report(profile, ctx.potential(), ctx.config().single_bump_radii,
                                                ctx.config().grid_step, ctx.jobs());
    write_with(ctx.dir() / "single_bump.csv", [&](std::ostream& o) { write_single_bump_csv(o, rows); });
  }
}

void stage_interaction(RunContext& ctx) {
  const auto& law = ctx.law();
  write_with(ctx.dir() / "interaction.csv", [&](std::ostream& o) { write_interaction_csv(o, ctx.ladder(), law); });
  ojson j;
  j["B2_tilde"] = law.amplitude;
  j["lambda"] = law.lambda;
  j["nu"] = law.nu;
  j["d_min"] = law.d_min;
  j["d_max"] = law.d_max;
  j["log_residual_rms"] = law.residual;
  // The same samples with the d^{-nu} prefactor dropped.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto& ladder = ctx.ladder();
  const double n = static_cast<double>(ladder.size());
  for (const auto& s : ladder) {
    sx += s.d;
    sy += std::log(s.psi);
    sxx += s.d * s.d;
    sxy += s.d * std::log(s.psi);
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  double rss = 0.0;
  for (const auto& s : ladder) rss += std::pow(std::log(s.psi) - intercept - slope * s.d, 2);
  j["pure_exponential"] = {{"B2", std::exp(intercept)}, {"lambda", -slope}, {"log_residual_rms", std::sqrt(rss / n)}};
  write_file(ctx.dir() / "interaction_law.json", j.dump(2) + "\n");
}

void stage_expansion(RunContext& ctx) {
  std::vector<ExpansionCase> cases;
  for (int k : ctx.config().k_list) cases.push_back({k, admissible_radii(k, ctx.config().m, ctx.config().beta).midpoint()});
  const auto rows = expansion_comparison(ctx.profile(), ctx.potential(), ctx.constants(), ctx.law(), cases,
                                         ctx.config().grid_step, ctx.jobs());
  write_with(ctx.dir() / "expansion.csv", [&](std::ostream& o) { write_expansion_csv(o, rows); });

  ojson tails = ojson::array();
  for (const auto& [k, r] : cases) {
    const auto config = place_bumps(k, r);
    const auto samples = sector_samples(config, 10.0, 40, 24);
    for (double eta : {0.25, 0.5, 0.75}) {
      const auto t = tail_bound_check(config, ctx.profile(), eta, samples);
      tails.push_back({{"k", k}, {"r", r}, {"eta", eta}, {"measured_C", t.measured_constant},
                       {"worst_sample", {t.worst_sample.x, t.worst_sample.y}}, {"samples", t.samples}});
    }
  }
  write_file(ctx.dir() / "tail_bound.json", tails.dump(2) + "\n");
}

void stage_reduce(RunContext& ctx) {
  for (const auto& row : ctx.study().rows) {
    const std::string tag = "k" + std::to_string(row.k);
    write_with(ctx.dir() / ("curve_" + tag + ".csv"), [&](std::ostream& o) { write_curve_csv(o, row.curve); });
    const ReducedEnergyModel model(ctx.profile(), ctx.potential(), row.k, ctx.model_radius(row.k), ctx.settings());
    CorrectionResult correction;
    (void)model.evaluate(row.r_k, &correction);
    write_with(ctx.dir() / ("correction_" + tag + ".json"),
               [&](std::ostream& o) { write_correction_json(o, correction); });
  }
}

void stage_study(RunContext& ctx) {
  const auto& study = ctx.study();
  write_with(ctx.dir() / "scaling.csv", [&](std::ostream& o) { write_scaling_csv(o, study); });
  ojson j;
  j["center_m_over_2pi"] = study.center;
  std::vector<int> ks;
  std::vector<double> phi;
  double rho_min = std::numeric_limits<double>::infinity(), rho_max = 0.0;
  for (const auto& row : study.rows) {
    ks.push_back(row.k);
    phi.push_back(row.phi_norm);
    rho_min = std::min(rho_min, row.rho);
    rho_max = std::max(rho_max, row.rho);
    if (row.extended)
      write_with(ctx.dir() / ("curve_extended_k" + std::to_string(row.k) + ".csv"),
                 [&](std::ostream& o) { write_curve_csv(o, *row.extended); });
  }
  j["rho_min"] = rho_min;
  j["rho_max"] = rho_max;
  if (ks.size() >= 2) j["phi_norm_decay_exponent"] = fitted_decay_exponent(ks, phi);
  j["probe_seed"] = ctx.config().probe_seed;
  j["probe_steps"] = ctx.config().probe_steps;
  write_file(ctx.dir() / "study.json", j.dump(2) + "\n");
}

void stage_certify(RunContext& ctx) {
  const int k = ctx.config().certify_k;
  const ReducedEnergyModel model(ctx.profile(), ctx.potential(), k, ctx.model_radius(k), ctx.settings());

  std::optional<ReducedEnergyCurve> window_curve, extended_curve;
  for (const auto& row : ctx.study().rows) {
    if (row.k != k) continue;
    window_curve = row.curve;
    extended_curve = row.extended;
  }
  if (!window_curve) {
    const auto window = admissible_radii(k, ctx.config().m, ctx.config().beta);
    window_curve = maximize_reduced_energy(model, window.lower, window.upper);
    const double upper = ctx.config().extended_upper_over_klnk * k_log_k(k);
    if (upper > window.upper)
      extended_curve = maximize_reduced_energy(model, ctx.config().m / (2.0 * std::numbers::pi) * k_log_k(k), upper);
  }

  // An interior maximiser of F is a critical point; a boundary one is not.
  double radius = window_curve->argmax;
  std::string source = "S_k interior maximum";
  if (!window_curve->interior && extended_curve && extended_curve->interior) {
    radius = extended_curve->argmax;
    source = "extended-window interior maximum";
  } else if (!window_curve->interior) {
    source = "S_k boundary maximum";
  }

  NewtonOptions newton;
  newton.tol = ctx.config().newton_tol_residual_l2;
  newton.max_steps = ctx.config().newton_max_steps;
  auto start_at = [&](double r, CorrectionResult& correction) {
    (void)model.evaluate(r, &correction);
    const auto pr = model.problem(r);
    return std::make_pair(Field(model.op()->grid(), pr.ansatz().values + correction.phi), pr.ansatz_defect());
  };

  ojson j;
  j["k"] = k;
  if (radius != window_curve->argmax) {
    ojson attempt;
    attempt["ring_radius"] = window_curve->argmax;
    try {
      CorrectionResult correction;
      const auto [start, defect] = start_at(window_curve->argmax, correction);
      const auto c = polish_and_certify(start, ctx.potential(), ctx.config().p, window_curve->argmax, newton, &defect);
      attempt["status"] = "converged";
      attempt["residual"] = c.residual;
      attempt["newton_steps"] = c.newton_steps;
    } catch (const NumericalError& e) {
      attempt["status"] = "failed";
      attempt["error"] = e.what();
    }
    j["boundary_attempt"] = attempt;
  }

  CorrectionResult correction;
  const auto [start, defect] = start_at(radius, correction);
  const auto cert = polish_and_certify(start, ctx.potential(), ctx.config().p, radius, newton, &defect);
  j["ring_radius"] = radius;
  j["ring_radius_over_klnk"] = radius / k_log_k(k);
  j["ring_radius_source"] = source;
  j["phi_norm_h1v"] = correction.norm;
  j["start_residual"] = cert.start_residual;
  j["residual"] = cert.residual;
  j["grid_residual"] = cert.grid_residual;
  j["defect_corrected"] = cert.defect_corrected;
  j["newton_steps"] = cert.newton_steps;
  j["residual_history"] = cert.residual_history;
  j["min_value"] = cert.min_value;
  j["min_location"] = {cert.min_location.x, cert.min_location.y};
  j["max_value"] = cert.max_value;
  j["nonradiality_index"] = cert.nonradiality;
  j["energy"] = cert.energy;
  j["reduced_energy"] = extended_curve && radius == extended_curve->argmax ? extended_curve->max_value
                                                                          : window_curve->max_value;
  const std::string tag = "k" + std::to_string(k);
  write_file(ctx.dir() / ("certificate_" + tag + ".json"), j.dump(2) + "\n");
  write_with(ctx.dir() / ("solution_" + tag + ".csv"), [&](std::ostream& o) { write_field_csv(o, cert.u); });
}

using StageFn = void (*)(RunContext&);

StageFn stage_function(const std::string& name) {
  static const std::map<std::string, StageFn> table{
      {"ground-state", stage_ground_state}, {"constants", stage_constants}, {"interaction", stage_interaction},
      {"expansion", stage_expansion},       {"reduce", stage_reduce},       {"study", stage_study},
      {"certify", stage_certify}};
  const auto it = table.find(name);
  if (it == table.end()) throw ValidationError("unknown stage '" + name + "'");
  return it->second;
}

std::vector<StageRecord> read_stage_records(const fs::path& manifest) {
  std::vector<StageRecord> records;
  if (!fs::exists(manifest)) return records;
  try {
    const auto j = ojson::parse(read_file(manifest));
    for (const auto& s : j.at("stages"))
      records.push_back({s.at("name").get<std::string>(), s.at("status").get<std::string>(),
                         s.value("error", std::string())});
  } catch (const nlohmann::json::exception&) {
    records.clear();
  }
  return records;
}

// Merges `fresh` into the recorded stages and rehashes every file.
void write_manifest(const fs::path& dir, const std::vector<StageRecord>& fresh, const ojson* parameters) {
  const fs::path path = dir / "manifest.json";
  ojson previous;
  if (fs::exists(path)) {
    try {
      previous = ojson::parse(read_file(path));
    } catch (const nlohmann::json::exception&) {
      previous = ojson();
    }
  }
  auto records = read_stage_records(path);
  for (const auto& s : fresh) {
    const auto it = std::find_if(records.begin(), records.end(), [&](const StageRecord& r) { return r.name == s.name; });
    if (it == records.end())
      records.push_back(s);
    else
      *it = s;
  }
  auto order = pipeline_stages();
  order.push_back("report");
  std::stable_sort(records.begin(), records.end(), [&](const StageRecord& x, const StageRecord& y) {
    return std::find(order.begin(), order.end(), x.name) < std::find(order.begin(), order.end(), y.name);
  });

  ojson j;
  j["format"] = "kbump-run-manifest/1";
  if (parameters)
    j["parameters"] = *parameters;
  else if (previous.is_object() && previous.contains("parameters"))
    j["parameters"] = previous["parameters"];
  if (j.contains("parameters")) {
    j["seeds"] = {{"probe_seed", j["parameters"].value("probe_seed", std::uint64_t{0})}};
  }
  ojson stages = ojson::array();
  for (const auto& s : records) {
    ojson e{{"name", s.name}, {"status", s.status}};
    if (!s.error.empty()) e["error"] = s.error;
    stages.push_back(e);
  }
  j["stages"] = stages;

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  ojson listing = ojson::array();
  for (const auto& f : files)
    listing.push_back({{"file", f.filename().string()}, {"bytes", fs::file_size(f)}, {"sha256", sha256_file(f)}});
  j["files"] = listing;
  write_file(path, j.dump(2) + "\n");
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name, const fs::path& file) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError(file.filename().string() + ": missing column " + name);
  return static_cast<std::size_t>(it - header.begin());
}

std::string fixed(double x, int digits = 6) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*g", digits, x);
  return buffer;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : ValidationError(join_lines(problems)), problems_(std::move(problems)) {}

RunConfig parse_config(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({"line " + std::to_string(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0)) +
                       ": malformed JSON: " + e.what()});
  }
  if (!j.is_object()) throw ConfigError({"line 1: config must be a JSON object"});

  RunConfig c;
  std::vector<std::string> problems;
  Reader r(j, text, problems);
  r.integer("N", c.N);
  r.number("p", c.p);
  r.number("a", c.a);
  r.number("m", c.m);
  r.number("beta", c.beta);
  r.integers("k_list", c.k_list);
  r.number("grid_step", c.grid_step);
  r.number("outer_margin_decay_lengths", c.outer_margin_decay_lengths);
  r.number("ground_state_step", c.ground_state_step);
  r.number("ground_state_tol", c.ground_state_tol);
  r.number("ground_state_s_max", c.ground_state_s_max);
  r.numbers("single_bump_radii", c.single_bump_radii);
  r.number("interaction_d_min", c.interaction_d_min);
  r.number("interaction_d_max", c.interaction_d_max);
  r.integer("interaction_samples", c.interaction_samples);
  r.number("interaction_quadrature_step", c.interaction_quadrature_step);
  r.number("correction_tol_h1v", c.correction_tol_h1v);
  r.integer("correction_max_iterations", c.correction_max_iterations);
  r.number("krylov_tol_relative", c.krylov_tol_relative);
  r.integer("krylov_max_iterations", c.krylov_max_iterations);
  r.integer("scan_samples", c.scan_samples);
  r.number("golden_tol_relative_to_window", c.golden_tol_relative_to_window);
  r.number("extended_upper_over_klnk", c.extended_upper_over_klnk);
  r.integer("probe_steps", c.probe_steps);
  r.unsigned_integer("probe_seed", c.probe_seed);
  r.integer("certify_k", c.certify_k);
  r.number("newton_tol_residual_l2", c.newton_tol_residual_l2);
  r.integer("newton_max_steps", c.newton_max_steps);
  r.text("output_dir", c.output_dir);
  r.unknown_keys();
  check_ranges(c, text, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

RunConfig load_config(const fs::path& path) { return parse_config(read_file(path)); }

std::string serialize_config(const RunConfig& config) { return config_json(config).dump(2) + "\n"; }

std::string sha256_file(const fs::path& path) {
  const std::string bytes = read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw NumericalError("sha256 failed for " + path.string());
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

PipelineResult run_pipeline(const RunConfig& config, const std::string& stage, int jobs) {
  std::vector<std::string> todo;
  if (stage == "all") {
    todo = pipeline_stages();
  } else {
    (void)stage_function(stage);
    todo = {stage};
  }
  PipelineResult result;
  result.directory = config.output_dir;
  fs::create_directories(result.directory);
  write_file(result.directory / "config.json", serialize_config(config));

  RunContext ctx(config, result.directory, jobs);
  bool failed = false;
  for (const auto& name : todo) {
    if (failed) {
      result.stages.push_back({name, "skipped", "an earlier stage failed"});
      continue;
    }
    try {
      stage_function(name)(ctx);
      result.stages.push_back({name, "ok", ""});
    } catch (const ValidationError& e) {
      result.stages.push_back({name, "failed", e.what()});
      const ojson params = config_json(config);
      write_manifest(result.directory, result.stages, &params);
      throw;
    } catch (const NumericalError& e) {
      result.stages.push_back({name, "failed", e.what()});
      failed = true;
      result.exit_code = 3;
    }
  }
  const ojson params = config_json(config);
  write_manifest(result.directory, result.stages, &params);
  return result;
}

PipelineResult run_pipeline(const fs::path& config_path, const std::string& stage, int jobs) {
  return run_pipeline(load_config(config_path), stage, jobs);
}

std::string emit_report(const fs::path& dir) {
  for (const char* name : {"manifest.json", "config.json", "constants.json", "interaction_law.json", "expansion.csv",
                           "scaling.csv"}) {
    if (!fs::exists(dir / name)) throw ValidationError("report: missing artifact " + (dir / name).string());
  }
  const auto config = parse_config(read_file(dir / "config.json"));
  const fs::path certificate = dir / ("certificate_k" + std::to_string(config.certify_k) + ".json");
  if (!fs::exists(certificate)) throw ValidationError("report: missing artifact " + certificate.string());

  const auto constants = ojson::parse(read_file(dir / "constants.json"));
  const auto law = ojson::parse(read_file(dir / "interaction_law.json"));
  const auto cert = ojson::parse(read_file(certificate));
  const auto expansion = read_csv(dir / "expansion.csv");
  const auto scaling = read_csv(dir / "scaling.csv");

  std::ostringstream s;
  s << "k-bump run summary (N = " << config.N << ", p = " << fixed(config.p) << ", a = " << fixed(config.a)
    << ", m = " << fixed(config.m) << ", beta = " << fixed(config.beta) << ", h = " << fixed(config.grid_step)
    << ")\n\n";
  s << "Constants\n";
  s << "  A  = " << fixed(constants["A"].get<double>(), 10) << "\n";
  s << "  B1 = " << fixed(constants["B1"].get<double>(), 10) << "\n";
  s << "Interaction law  Psi(d) ~ B2 d^-nu e^-lambda d  on [" << fixed(law["d_min"].get<double>()) << ", "
    << fixed(law["d_max"].get<double>()) << "]\n";
  s << "  B2 = " << fixed(law["B2_tilde"].get<double>()) << ", lambda = " << fixed(law["lambda"].get<double>())
    << ", nu = " << fixed(law["nu"].get<double>()) << "\n";
  if (law.contains("pure_exponential"))
    s << "  without the prefactor: B2 = " << fixed(law["pure_exponential"]["B2"].get<double>())
      << ", lambda = " << fixed(law["pure_exponential"]["lambda"].get<double>()) << "\n";
  s << "  the expansion evaluates the law at the neighbour distance 2 r sin(pi/k) ~ 2 pi r/k\n\n";

  s << "Ansatz energy vs three-term expansion at the S_k midpoint\n";
  {
    const auto& h = expansion.front();
    const auto ck = column(h, "k", "expansion.csv"), cr = column(h, "r", "expansion.csv"),
               cm = column(h, "mismatch", "expansion.csv");
    for (std::size_t i = 1; i < expansion.size(); ++i)
      s << "  k = " << expansion[i][ck] << "  r = " << fixed(std::stod(expansion[i][cr])) << "  mismatch = "
        << fixed(std::stod(expansion[i][cm]), 4) << "\n";
  }

  const auto& h = scaling.front();
  const fs::path sf = "scaling.csv";
  const auto ck = column(h, "k", sf), crk = column(h, "r_k", sf), cn = column(h, "r_k_over_klnk", sf),
             ci = column(h, "interior", sf), crho = column(h, "rho", sf), cphi = column(h, "phi_norm", sf),
             cfk = column(h, "F_over_k", sf), cs = column(h, "r_star", sf), csn = column(h, "r_star_over_klnk", sf),
             csi = column(h, "r_star_interior", sf);
  double rho_min = std::numeric_limits<double>::infinity(), rho_max = 0.0;
  s << "\nReduced energy maxima (center m/2pi = " << fixed(config.m / (2.0 * std::numbers::pi)) << ")\n";
  s << "   k        r_k   r_k/klnk  interior   rho_hat   ||phi||      F/k     r_star  r_star/klnk\n";
  std::ostringstream trend;
  csv::row(trend, {"k", "r_k_over_klnk", "r_star_over_klnk", "center"});
  std::ostringstream curves;
  csv::row(curves, {"k", "window", "r", "F", "status"});
  for (std::size_t i = 1; i < scaling.size(); ++i) {
    const auto& row = scaling[i];
    const double rho = std::stod(row[crho]);
    rho_min = std::min(rho_min, rho);
    rho_max = std::max(rho_max, rho);
    char line[256];
    std::snprintf(line, sizeof line, "  %2s %10.5f %10.5f %9s %9.4f %9.3e %8.5f %10s %12s\n", row[ck].c_str(),
                  std::stod(row[crk]), std::stod(row[cn]), row[ci] == "1" ? "yes" : "no", rho, std::stod(row[cphi]),
                  std::stod(row[cfk]), row[cs].empty() ? "-" : fixed(std::stod(row[cs])).c_str(),
                  row[csn].empty() ? "-" : (fixed(std::stod(row[csn]), 5) + (row[csi] == "1" ? "" : "*")).c_str());
    s << line;
    csv::row(trend, {row[ck], row[cn], row[csn], csv::number(config.m / (2.0 * std::numbers::pi))});
    for (const auto& [window, prefix] : {std::pair{"S_k", "curve_k"}, std::pair{"extended", "curve_extended_k"}}) {
      const fs::path file = dir / (std::string(prefix) + row[ck] + ".csv");
      if (!fs::exists(file)) continue;
      const auto c = read_csv(file);
      const auto cr = column(c.front(), "r", file), cf = column(c.front(), "F", file),
                 cst = column(c.front(), "status", file);
      for (std::size_t q = 1; q < c.size(); ++q) csv::row(curves, {row[ck], window, c[q][cr], c[q][cf], c[q][cst]});
    }
  }
  s << "  rho_hat range [" << fixed(rho_min, 4) << ", " << fixed(rho_max, 4) << "]\n\n";

  s << "Certified solution, k = " << cert["k"].get<int>() << "\n";
  s << "  ring radius " << fixed(cert["ring_radius"].get<double>()) << " ("
    << cert["ring_radius_source"].get<std::string>() << ")\n";
  if (cert.contains("boundary_attempt")) {
    const auto& b = cert["boundary_attempt"];
    s << "  start at the S_k maximiser r = " << fixed(b["ring_radius"].get<double>()) << ": "
      << b["status"].get<std::string>() << "\n";
  }
  s << "  Newton steps " << cert["newton_steps"].get<int>() << ", residual " << fixed(cert["residual"].get<double>(), 3)
    << " (plain grid residual " << fixed(cert["grid_residual"].get<double>(), 3) << ")\n";
  s << "  min u = " << fixed(cert["min_value"].get<double>(), 3) << ", max u = " << fixed(cert["max_value"].get<double>())
    << ", nonradiality index = " << fixed(cert["nonradiality_index"].get<double>(), 4) << "\n";

  const std::string summary = s.str();
  write_file(dir / "summary.txt", summary);
  write_file(dir / "plot_trend.csv", trend.str());
  write_file(dir / "plot_curves.csv", curves.str());
  write_manifest(dir, {{"report", "ok", ""}}, nullptr);
  return summary;
}

}  // namespace kbump
