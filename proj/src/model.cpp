#include "dem/model.hpp"

#include <cmath>
#include <string>

namespace dem {

Particle sphere(real diameter, real mass, const Vec3& position, const Vec3& velocity,
                const Vec3& angular_velocity) {
  Particle p;
  p.diameter = diameter;
  p.mass = mass;
  p.inertia = real(2) / real(5) * mass * (diameter / 2) * (diameter / 2);
  p.position = position;
  p.velocity = velocity;
  p.angular_velocity = angular_velocity;
  return p;
}

Wall make_wall(const Vec3& point, const Vec3& normal) {
  const real n = normal.norm();
  if (!(n > 0)) throw InvalidSystem("wall normal must be non-zero");
  return Wall{point, normal / n};
}

void validate(const ParticleSystem& system) {
  if (system.particles.empty()) throw InvalidSystem("system has no particles");
  for (int i = 0; i < system.size(); ++i) {
    const Particle& p = system.particles[i];
    if (!(p.mass > 0)) throw InvalidSystem("particle " + std::to_string(i) + " has non-positive mass");
    if (!(p.diameter > 0)) throw InvalidSystem("particle " + std::to_string(i) + " has non-positive diameter");
    if (!(p.inertia > 0)) throw InvalidSystem("particle " + std::to_string(i) + " has non-positive inertia");
  }
  for (const Wall& w : system.walls) {
    if (std::abs(w.normal.norm() - 1) > 1e-12) throw InvalidSystem("wall normal is not unit length");
  }
  for (const Bond& b : system.bonds) {
    if (b.i == b.j) throw InvalidSystem("bond joins a particle to itself");
    if (b.i < 0 || b.j < 0 || b.i >= system.size() || b.j >= system.size())
      throw InvalidSystem("bond references a missing particle");
    if (!(b.stiffness > 0)) throw InvalidSystem("bond stiffness must be positive");
  }
  if (system.gravity < 0) throw InvalidSystem("gravity magnitude must be non-negative");
}

MassMatrix assemble_mass_matrix(const ParticleSystem& system) {
  MassMatrix m;
  m.diagonal.resize(system.dofs());
  for (int i = 0; i < system.size(); ++i) {
    const Particle& p = system.particles[i];
    if (!(p.mass > 0) || !(p.inertia > 0))
      throw InvalidSystem("particle " + std::to_string(i) + " has non-positive mass or inertia");
    m.diagonal.segment<3>(kDofs * i).setConstant(p.mass);
    m.diagonal.segment<3>(kDofs * i + 3).setConstant(p.inertia);
  }
  return m;
}

Vector pack_positions(const ParticleSystem& system) {
  Vector q(system.dofs());
  for (int i = 0; i < system.size(); ++i) {
    q.segment<3>(kDofs * i) = system.particles[i].position;
    q.segment<3>(kDofs * i + 3) = system.particles[i].orientation;
  }
  return q;
}

Vector pack_velocities(const ParticleSystem& system) {
  Vector v(system.dofs());
  for (int i = 0; i < system.size(); ++i) {
    v.segment<3>(kDofs * i) = system.particles[i].velocity;
    v.segment<3>(kDofs * i + 3) = system.particles[i].angular_velocity;
  }
  return v;
}

GeneralizedState pack_state(const ParticleSystem& system) {
  GeneralizedState s;
  s.q = pack_positions(system);
  s.p = assemble_mass_matrix(system).apply(pack_velocities(system));
  return s;
}

ParticleSystem with_coordinates(const ParticleSystem& templ, const Vector& q, const Vector& qdot) {
  if (q.size() != templ.dofs() || qdot.size() != templ.dofs())
    throw DimensionMismatch("coordinate vector length does not match 6 * particle count");
  ParticleSystem out = templ;
  for (int i = 0; i < out.size(); ++i) {
    Particle& p = out.particles[i];
    p.position = q.segment<3>(kDofs * i);
    p.orientation = q.segment<3>(kDofs * i + 3);
    p.velocity = qdot.segment<3>(kDofs * i);
    p.angular_velocity = qdot.segment<3>(kDofs * i + 3);
  }
  return out;
}

ParticleSystem unpack_state(const GeneralizedState& state, const ParticleSystem& templ) {
  if (state.p.size() != templ.dofs())
    throw DimensionMismatch("momentum vector length does not match 6 * particle count");
  return with_coordinates(templ, state.q, assemble_mass_matrix(templ).solve(state.p));
}

}  // namespace dem
