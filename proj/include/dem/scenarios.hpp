#pragma once

#include "dem/forces.hpp"
#include "dem/model.hpp"

#include <cstdint>
#include <string>

namespace dem {

enum class ScenarioName { impact, walls, bonded, box };
enum class IntegratorKind { vi, verlet };

std::string to_string(ScenarioName name);
ScenarioName scenario_from_string(const std::string& name);
std::string to_string(IntegratorKind kind);
IntegratorKind integrator_from_string(const std::string& name);

// Reduced units throughout: d = 1, m = 1, and k_n = kd_mg * m g / d with g = 1.
struct ScenarioSpec {
  ScenarioName name = ScenarioName::impact;

  // geometry
  real dy = 0;             // impact offset
  real gap = 1.01;         // wall separation
  real box_width = 6;      // L; the box is L x L x 20 L
  int n_particles = 218;

  // physics
  real kd_mg = 195000;
  real gamma = 30;
  real velocity = 1;
  real bond_stiffness = 48750;  // k_B
  bool gravity = false;
  std::uint64_t seed = 1;

  // integration
  IntegratorKind integrator = IntegratorKind::vi;
  real alpha = 0.5;
  real h_fraction = 160;  // h = t_c / h_fraction
  real duration = 1;
  int collisions = 0;     // walls: stop after this many completed collisions (0 = use duration)

  real diameter() const { return 1; }
  real mass() const { return 1; }
  real k_n() const { return kd_mg * mass() * 1 / diameter(); }
  // t_c = pi sqrt(m / 2 k_n), the two-particle contact duration.
  real contact_time() const;
  real time_step() const { return contact_time() / h_fraction; }
  ContactParams contact_params() const;
};

// Throws InvalidSystem naming the first out-of-range field.
void validate(const ScenarioSpec& spec);

// Reference parameters for a named experiment.
ScenarioSpec default_spec(ScenarioName name);

struct Scenario {
  ParticleSystem system;
  ScenarioSpec spec;
  ContactParams params;
};

struct InfeasibleScenario : Error {
  using Error::Error;
};

// Two spheres at (+-d, +-dy/2, 0) closing at speed v each. Particle 0 is the one on the right.
Scenario build_impact(real dy, real gamma, real velocity);
// One sphere centred between walls at x = +-gap/2 moving along x.
Scenario build_walls(real gap, real velocity);
// Free sphere 0 at +d moving left onto a bonded pair 1 (at -d) and 2 (at -2d) moving right.
Scenario build_bonded(real bond_stiffness, real velocity);
// Jittered lattice of n spheres above the floor of an L x L x 20L box, gravity on.
Scenario build_box(int n_particles, real box_width, std::uint64_t seed);

// Builds from a full spec (the named builder with every spec field honoured).
Scenario build_scenario(const ScenarioSpec& spec);

}  // namespace dem
