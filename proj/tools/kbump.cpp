// kbump: run the k-bump construction pipeline from a JSON config.
//
//   kbump all --config run.json --out results --jobs 4
//   kbump study --config run.json
//   kbump --config run.json --stage certify
//   kbump report --out results

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kbump/pipeline.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-bump solutions of -Delta u + V(|y|) u = u^p"};
  std::string config_path;
  std::string out_dir;
  std::string stage;
  int jobs = 1;
  app.add_option("--config", config_path, "flat JSON run configuration");
  app.add_option("--out", out_dir, "artifact directory (overrides output_dir)");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 256));
  app.add_option("--stage", stage, "stage to run (same names as the subcommands)");

  std::string chosen;
  for (const auto& name : kbump::pipeline_stages())
    app.add_subcommand(name, "run the " + name + " stage")->callback([&chosen, name] { chosen = name; });
  app.add_subcommand("all", "run every stage in order")->callback([&chosen] { chosen = "all"; });
  app.add_subcommand("report", "summary and plot data from a finished run")->callback([&chosen] {
    chosen = "report";
  });
  app.require_subcommand(0, 1);
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  if (!stage.empty() && !chosen.empty() && stage != chosen) {
    std::cerr << "error: subcommand '" << chosen << "' conflicts with --stage " << stage << "\n";
    return kExitValidation;
  }
  if (chosen.empty()) chosen = stage.empty() ? "all" : stage;

  try {
    if (chosen == "report") {
      if (out_dir.empty()) {
        if (config_path.empty()) throw kbump::ValidationError("report needs --out or --config");
        out_dir = kbump::load_config(config_path).output_dir;
      }
      std::cout << kbump::emit_report(out_dir);
      return 0;
    }
    if (config_path.empty()) throw kbump::ValidationError("--config is required");
    auto config = kbump::load_config(config_path);
    if (!out_dir.empty()) config.output_dir = out_dir;
    const auto result = kbump::run_pipeline(config, chosen, jobs);
    for (const auto& s : result.stages) {
      std::cout << s.name << ": " << s.status;
      if (!s.error.empty()) std::cout << " (" << s.error << ")";
      std::cout << "\n";
    }
    std::cout << "artifacts in " << result.directory.string() << "\n";
    return result.exit_code;
  } catch (const kbump::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const kbump::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}
