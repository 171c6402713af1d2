#include "dem/scenarios_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdarg>
#include <cstdio>
#include <iostream>
#include <optional>

namespace dem {

namespace {

std::string format(const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

void print_summary(const RunConfig& config, const RunResult& result) {
  std::cout << "scenario " << to_string(config.scenario.name) << " (" << to_string(config.scenario.integrator)
            << "): " << result.steps << " steps to t = " << result.trajectory.back().t;
  if (config.scenario.name == ScenarioName::walls) std::cout << ", " << result.collisions << " wall collisions";
  std::cout << "\nwrote " << config.output_dir << "/trajectory.csv and " << config.output_dir << "/diagnostics.csv\n";
}

void print_study(const ConvergenceStudy& study) {
  std::cout << format("alpha = %g\n  %10s %14s %14s\n", study.alpha, "t_c/h", "h", "error");
  for (std::size_t i = 0; i < study.errors.size(); ++i)
    std::cout << format("  %10g %14.6e %14.6e\n", study.fractions[i], study.step_sizes[i], study.errors[i]);
  std::cout << format("  fitted slope %.3f\n", study.slope);
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Discrete element simulations with a variational integrator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  CLI::App* run_cmd = app.add_subcommand("run", "Run a simulation described by a JSON config");
  run_cmd->add_option("--config", config_path, "Config file")->required();
  run_cmd->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  std::string name, integrator;
  std::optional<double> dy, gamma, h_frac, alpha;
  std::optional<long> steps;
  std::string scenario_out = "out";
  CLI::App* scenario_cmd = app.add_subcommand("scenario", "Run a named scenario with its default parameters");
  scenario_cmd->add_option("name", name, "impact, walls, bonded or box")
      ->required()
      ->check(CLI::IsMember({"impact", "walls", "bonded", "box"}));
  scenario_cmd->add_option("--dy", dy, "Lateral offset of the impact");
  scenario_cmd->add_option("--gamma", gamma, "Damping parameter");
  scenario_cmd->add_option("--h-frac", h_frac, "Time step as t_c / h");
  scenario_cmd->add_option("--alpha", alpha, "Quadrature parameter (0 or 0.5)");
  scenario_cmd->add_option("--integrator", integrator, "vi or verlet")->check(CLI::IsMember({"vi", "verlet"}));
  scenario_cmd->add_option("--steps", steps, "Number of steps (default: scenario duration)");
  scenario_cmd->add_option("--out", scenario_out, "Output directory");

  std::string compare_path;
  CLI::App* compare_cmd = app.add_subcommand("compare", "Run VI and velocity Verlet on one config and diff them");
  compare_cmd->add_option("--config", compare_path, "Config file")->required();

  CLI::App* convergence_cmd = app.add_subcommand("convergence", "Fit the global error order for alpha = 0 and 1/2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*run_cmd) {
      RunConfig config = load_config(config_path);
      if (!out_dir.empty()) config.output_dir = out_dir;
      print_summary(config, run(config));
    } else if (*scenario_cmd) {
      nlohmann::json doc = {{"scenario", name}, {"output_dir", scenario_out}};
      if (dy) doc["dy"] = *dy;
      if (gamma) doc["gamma"] = *gamma;
      if (h_frac) doc["h_fraction"] = *h_frac;
      if (alpha) doc["alpha"] = *alpha;
      if (!integrator.empty()) doc["integrator"] = integrator;
      if (steps) doc["steps"] = *steps;
      const RunConfig config = parse_config(doc.dump());
      print_summary(config, run(config));
    } else if (*compare_cmd) {
      const CompareReport r = compare(load_config(compare_path));
      std::cout << format("steps                          %ld\n", r.steps)
                << format("max |KT_vi - KT_verlet| / KT   %.6e\n", r.max_kinetic_difference)
                << format("final position difference      %.6e\n", r.final_position_difference)
                << format("final velocity difference      %.6e\n", r.final_velocity_difference);
    } else if (*convergence_cmd) {
      const ConvergenceStudy first = convergence_study(0);
      const ConvergenceStudy second = convergence_study(0.5);
      print_study(first);
      print_study(second);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dem
