#pragma once

#include "dem/contact.hpp"
#include "dem/diagnostics.hpp"
#include "dem/scenarios.hpp"
#include "dem/vi_integrator.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dem {

struct ConfigError : Error {
  using Error::Error;
};

struct RunConfig {
  ScenarioSpec scenario;
  VIConfig vi;             // alpha and h are taken from `scenario` when a run starts
  real skin = 0.3;         // neighbour-list margin
  long steps = 0;          // 0: run for scenario.duration
  int trajectory_every = 100;
  int diagnostics_every = 10;
  std::string output_dir = "out";
};

// Defaults for a named scenario, including the scenario-dependent ones.
RunConfig default_config(ScenarioName name);

// Throws ConfigError naming the offending key.
void validate(const RunConfig& config);

// Flat JSON object; see README for the keys. Omitted keys take the defaults
// of the named scenario, unknown keys are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// Every key written out, so parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

// Advances one scenario with either integrator.
class Simulation {
 public:
  Simulation(Scenario scenario, IntegratorKind integrator, const VIConfig& vi, real skin = 0.3);
  explicit Simulation(const RunConfig& config);

  void step();

  const GeneralizedState& state() const { return state_; }
  real time() const { return state_.t; }
  long steps() const { return state_.k; }
  real h() const { return vi_.h; }
  const Scenario& scenario() const { return scenario_; }
  IntegratorKind integrator() const { return integrator_; }
  const StepReport& last_report() const { return report_; }

  ParticleSystem current() const;
  ContactSet contacts();
  FrameStats stats();
  Vec3 momentum() const;

 private:
  Scenario scenario_;
  IntegratorKind integrator_;
  VIConfig vi_;
  ContactDetector detector_;
  GeneralizedState state_;
  StepReport report_;
};

// Counts completed particle-wall collisions: maximal runs of steps with overlap > 0.
class CollisionCounter {
 public:
  void update(const ContactSet& contacts);
  int completed() const { return completed_; }
  bool touching() const { return !active_.empty(); }

 private:
  std::vector<ContactId> active_;
  int completed_ = 0;
};

struct TrajectoryFrame {
  real t = 0;
  std::vector<Particle> particles;
};

struct RunResult {
  std::vector<TrajectoryFrame> trajectory;
  std::vector<FrameStats> diagnostics;
  ParticleSystem final_system;
  long steps = 0;
  int collisions = 0;
  real max_residual_ratio = 0;  // max over steps of |R|_inf / accepted limit (VI only)
};

// Runs in memory, sampling trajectory and diagnostics at their cadences and at the final step.
RunResult simulate(const RunConfig& config);

void write_trajectory(std::ostream& out, const std::vector<TrajectoryFrame>& frames);
std::vector<TrajectoryFrame> read_trajectory(std::istream& in);
void write_diagnostics(std::ostream& out, const std::vector<FrameStats>& stats);

// simulate() plus trajectory.csv, diagnostics.csv and config.json in config.output_dir.
RunResult run(const RunConfig& config);

struct CompareReport {
  real max_kinetic_difference = 0;  // max_t |KT_vi - KT_verlet| / max_t KT_vi
  real final_position_difference = 0;
  real final_velocity_difference = 0;
  long steps = 0;
};

CompareReport compare(const RunConfig& config);

struct ConvergenceStudy {
  real alpha = 0;
  std::vector<real> fractions;  // h = t_c / fraction
  std::vector<real> step_sizes;
  std::vector<real> errors;
  real slope = 0;
};

// Head-on impact integrated from contact onset to 0.75 t_c; error is the
// velocity deviation from the analytic solution at that time.
ConvergenceStudy convergence_study(real alpha, real gamma = 30,
                                   const std::vector<real>& fractions = {40, 80, 160, 320},
                                   ForcingMode forcing = ForcingMode::folded);

// Least-squares slope of log(y) against log(x).
real log_log_slope(const std::vector<real>& x, const std::vector<real>& y);

// Command-line entry point; returns the process exit code.
int cli_main(int argc, const char* const* argv);

}  // namespace dem
