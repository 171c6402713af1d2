#include "dem/scenarios.hpp"

#include "dem/contact.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace dem {

std::string to_string(ScenarioName name) {
  switch (name) {
    case ScenarioName::impact: return "impact";
    case ScenarioName::walls: return "walls";
    case ScenarioName::bonded: return "bonded";
    case ScenarioName::box: return "box";
  }
  return "impact";
}

ScenarioName scenario_from_string(const std::string& name) {
  if (name == "impact") return ScenarioName::impact;
  if (name == "walls") return ScenarioName::walls;
  if (name == "bonded") return ScenarioName::bonded;
  if (name == "box") return ScenarioName::box;
  throw Error("unknown scenario '" + name + "' (expected impact, walls, bonded or box)");
}

std::string to_string(IntegratorKind kind) { return kind == IntegratorKind::vi ? "vi" : "verlet"; }

IntegratorKind integrator_from_string(const std::string& name) {
  if (name == "vi") return IntegratorKind::vi;
  if (name == "verlet") return IntegratorKind::verlet;
  throw Error("unknown integrator '" + name + "' (expected vi or verlet)");
}

real ScenarioSpec::contact_time() const { return std::numbers::pi * std::sqrt(mass() / (2 * k_n())); }

ContactParams ScenarioSpec::contact_params() const {
  ContactParams p;
  p.k_n = k_n();
  p.gamma = gamma;
  return p;
}

void validate(const ScenarioSpec& spec) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidSystem(what);
  };
  require(spec.dy >= 0, "dy must be >= 0");
  require(spec.gap > spec.diameter(), "gap must exceed the particle diameter");
  require(spec.box_width > spec.diameter(), "box_width must exceed the particle diameter");
  require(spec.n_particles >= 1, "n_particles must be >= 1");
  require(spec.kd_mg > 0, "kd_mg must be > 0");
  require(spec.gamma >= 0, "gamma must be >= 0");
  require(spec.velocity >= 0, "velocity must be >= 0");
  require(spec.bond_stiffness > 0, "k_bond must be > 0");
  require(spec.alpha == 0 || spec.alpha == 0.5, "alpha must be 0 or 0.5");
  require(spec.h_fraction > 0, "h_fraction must be > 0");
  require(spec.duration > 0, "duration must be > 0");
  require(spec.collisions >= 0, "collisions must be >= 0");
}

ScenarioSpec default_spec(ScenarioName name) {
  ScenarioSpec s;
  s.name = name;
  switch (name) {
    case ScenarioName::impact:
      s.gamma = 30;
      // approach, contact, and the same approach distance again after separation
      s.duration = s.diameter() / s.velocity + s.contact_time();
      break;
    case ScenarioName::walls:
      s.gamma = 0;
      s.collisions = 250;
      s.duration = 100;  // cap; the collision count normally ends the run first
      break;
    case ScenarioName::bonded:
      s.gamma = 0;
      s.bond_stiffness = s.k_n() / 4;
      s.duration = 2;
      break;
    case ScenarioName::box:
      s.gamma = 200;
      s.gravity = true;
      s.velocity = 0;
      s.h_fraction = 20;
      s.duration = 5;
      break;
  }
  return s;
}

namespace {

Scenario assemble(ParticleSystem system, const ScenarioSpec& spec) {
  validate(spec);
  validate(system);
  return Scenario{std::move(system), spec, spec.contact_params()};
}

// Uniform double in [0, 1) from the top 53 bits; std::uniform_real_distribution
// is not specified bit-for-bit across standard libraries.
real unit_uniform(std::mt19937_64& rng) { return static_cast<real>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Scenario build_impact(real dy, real gamma, real velocity) {
  ScenarioSpec spec = default_spec(ScenarioName::impact);
  spec.dy = dy;
  spec.gamma = gamma;
  spec.velocity = velocity;
  if (velocity > 0) spec.duration = spec.diameter() / velocity + spec.contact_time();
  return build_scenario(spec);
}

Scenario build_walls(real gap, real velocity) {
  ScenarioSpec spec = default_spec(ScenarioName::walls);
  spec.gap = gap;
  spec.velocity = velocity;
  return build_scenario(spec);
}

Scenario build_bonded(real bond_stiffness, real velocity) {
  ScenarioSpec spec = default_spec(ScenarioName::bonded);
  spec.bond_stiffness = bond_stiffness;
  spec.velocity = velocity;
  return build_scenario(spec);
}

Scenario build_box(int n_particles, real box_width, std::uint64_t seed) {
  ScenarioSpec spec = default_spec(ScenarioName::box);
  spec.n_particles = n_particles;
  spec.box_width = box_width;
  spec.seed = seed;
  return build_scenario(spec);
}

Scenario build_scenario(const ScenarioSpec& spec) {
  validate(spec);
  const real d = spec.diameter();
  const real m = spec.mass();
  const real v = spec.velocity;
  ParticleSystem sys;
  sys.gravity = spec.gravity ? 1 : 0;

  switch (spec.name) {
    case ScenarioName::impact:
      sys.particles.push_back(sphere(d, m, Vec3(d, spec.dy / 2, 0), Vec3(-v, 0, 0)));
      sys.particles.push_back(sphere(d, m, Vec3(-d, -spec.dy / 2, 0), Vec3(v, 0, 0)));
      break;

    case ScenarioName::walls:
      if (!(spec.gap > d)) throw InfeasibleScenario("wall gap must exceed d, or the particle touches both walls");
      sys.particles.push_back(sphere(d, m, Vec3::Zero(), Vec3(v, 0, 0)));
      sys.walls.push_back(make_wall(Vec3(spec.gap / 2, 0, 0), -Vec3::UnitX()));
      sys.walls.push_back(make_wall(Vec3(-spec.gap / 2, 0, 0), Vec3::UnitX()));
      break;

    case ScenarioName::bonded:
      sys.particles.push_back(sphere(d, m, Vec3(d, 0, 0), Vec3(-v, 0, 0)));
      sys.particles.push_back(sphere(d, m, Vec3(-d, 0, 0), Vec3(v, 0, 0)));
      sys.particles.push_back(sphere(d, m, Vec3(-2 * d, 0, 0), Vec3(v, 0, 0)));
      sys.bonds = create_bonds(sys, spec.bond_stiffness);
      break;

    case ScenarioName::box: {
      // Square layers stacked into each other's hollows (fcc viewed along [001]):
      // n x n sites at pitch s = L / n alternate with (n-1) x (n-1) sites offset by s/2.
      // The jitter is vertical only, so same-layer neighbours at pitch s >= d never overlap.
      const real L = spec.box_width;
      const real H = 20 * L;
      const int n = static_cast<int>(std::floor(L / d));
      const real s = L / n;
      const real jitter = 0.04 * d;
      const real nest = s < std::sqrt(real(2)) * d ? std::sqrt(d * d - s * s / 2) : 0;
      const real pitch = nest + 0.1 * d + 2 * jitter;
      if (n < 2 && spec.n_particles > 1)
        throw InfeasibleScenario("box is too narrow for more than one particle per layer");
      std::mt19937_64 rng(spec.seed);
      real z = d / 2 + 0.1 * d;
      int placed = 0;
      for (int layer = 0; placed < spec.n_particles; ++layer, z += pitch) {
        if (z + jitter > H - d / 2)
          throw InfeasibleScenario("cannot place " + std::to_string(spec.n_particles) + " particles in the box");
        const bool inner = layer % 2 == 1;
        const int per_row = inner ? n - 1 : n;
        const real offset = inner ? s : s / 2;
        for (int b = 0; b < per_row && placed < spec.n_particles; ++b)
          for (int a = 0; a < per_row && placed < spec.n_particles; ++a, ++placed) {
            const Vec3 pos(offset + a * s, offset + b * s, z + jitter * (2 * unit_uniform(rng) - 1));
            sys.particles.push_back(sphere(d, m, pos, Vec3(0, 0, -v)));
          }
      }
      sys.walls.push_back(make_wall(Vec3(0, 0, 0), Vec3::UnitX()));
      sys.walls.push_back(make_wall(Vec3(L, 0, 0), -Vec3::UnitX()));
      sys.walls.push_back(make_wall(Vec3(0, 0, 0), Vec3::UnitY()));
      sys.walls.push_back(make_wall(Vec3(0, L, 0), -Vec3::UnitY()));
      sys.walls.push_back(make_wall(Vec3(0, 0, 0), Vec3::UnitZ()));
      sys.walls.push_back(make_wall(Vec3(0, 0, H), -Vec3::UnitZ()));
      break;
    }
  }
  return assemble(std::move(sys), spec);
}

}  // namespace dem
