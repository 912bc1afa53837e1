#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kbump/errors.hpp"

namespace kbump {

/// Flat run configuration. Key names carry their units; every tolerance is
/// absolute unless the key says otherwise.
struct RunConfig {
  int N = 2;
  double p = 3.0;
  double a = 1.0;
  double m = 2.0;
  double beta = 0.1;
  std::vector<int> k_list{6, 8};

  double grid_step = 0.1;
  double outer_margin_decay_lengths = 15.0;  ///< R_out = largest ring radius + margin

  double ground_state_step = 0.005;
  double ground_state_tol = 1e-10;
  double ground_state_s_max = 30.0;

  std::vector<double> single_bump_radii{20.0, 40.0};
  double interaction_d_min = 8.0;
  double interaction_d_max = 16.0;
  int interaction_samples = 9;
  double interaction_quadrature_step = 0.04;

  double correction_tol_h1v = 1e-8;
  int correction_max_iterations = 30;
  double krylov_tol_relative = 1e-12;
  int krylov_max_iterations = 1000;

  int scan_samples = 9;
  double golden_tol_relative_to_window = 1e-3;
  double extended_upper_over_klnk = 0.8;
  int probe_steps = 80;
  std::uint64_t probe_seed = 20240917;

  int certify_k = 6;
  double newton_tol_residual_l2 = 1e-6;
  int newton_max_steps = 20;

  std::string output_dir = "kbump_out";
};

/// All problems found in a config, one message per entry, each prefixed
/// with `line N:` when the offending key can be located in the source text.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  [[nodiscard]] const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Unknown keys, wrong types and out-of-range values are all reported
/// together. Missing keys take their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages{"ground-state", "constants", "interaction", "expansion",
                                               "reduce",       "study",     "certify"};
  return stages;
}

struct StageRecord {
  std::string name;
  std::string status;  ///< ok, failed or skipped
  std::string error;
};

struct PipelineResult {
  std::filesystem::path directory;
  std::vector<StageRecord> stages;
  int exit_code = 0;  ///< 0, or 3 when a stage failed numerically
};

/// Runs `stage` ("all" for every stage in order) and writes its outputs
/// plus config.json and manifest.json into config.output_dir. A stage that
/// throws NumericalError is recorded in the manifest and the remaining
/// stages are skipped. ValidationError propagates.
PipelineResult run_pipeline(const RunConfig& config, const std::string& stage = "all", int jobs = 1);
PipelineResult run_pipeline(const std::filesystem::path& config_path, const std::string& stage = "all",
                            int jobs = 1);

/// summary.txt, plot_curves.csv and plot_trend.csv from a finished run.
/// Throws ValidationError naming the first missing artifact.
std::string emit_report(const std::filesystem::path& directory);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace kbump
