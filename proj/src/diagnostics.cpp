#include "dem/diagnostics.hpp"

namespace dem {

KineticEnergy particle_kinetic(const ParticleSystem& system, int i, KineticMask mask) {
  const Particle& p = system.particles.at(i);
  KineticEnergy k;
  if (mask == KineticMask::planar) {
    k.translational = real(0.5) * p.mass * p.velocity.head<2>().squaredNorm();
    k.rotational = real(0.5) * p.inertia * p.angular_velocity.z() * p.angular_velocity.z();
  } else {
    k.translational = real(0.5) * p.mass * p.velocity.squaredNorm();
    k.rotational = real(0.5) * p.inertia * p.angular_velocity.squaredNorm();
  }
  return k;
}

FrameStats ensemble_stats(const ParticleSystem& system) {
  FrameStats s;
  const int n = system.size();
  Vec3 mean_velocity = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    const KineticEnergy k = particle_kinetic(system, i);
    s.kinetic_translational += k.translational;
    s.kinetic_rotational += k.rotational;
    s.momentum += system.particles[i].mass * system.particles[i].velocity;
    mean_velocity += system.particles[i].velocity;
  }
  mean_velocity /= n;
  s.mean_kinetic = (s.kinetic_translational + s.kinetic_rotational) / n;
  real fluctuation = 0;
  for (const Particle& p : system.particles) fluctuation += (mean_velocity - p.velocity).squaredNorm();
  s.velocity_fluctuation = fluctuation / (3 * n);
  s.total_energy = s.kinetic_translational + s.kinetic_rotational;
  return s;
}

real total_energy(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params) {
  return frame_stats(system, contacts, params).total_energy;
}

FrameStats frame_stats(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params,
                       real t) {
  FrameStats s = ensemble_stats(system);
  s.t = t;
  s.contact_potential = contact_potential(system, contacts, params);
  s.gravitational_potential = gravitational_potential(system, pack_positions(system));
  s.total_energy = s.kinetic_translational + s.kinetic_rotational + s.contact_potential + s.gravitational_potential;
  return s;
}

}  // namespace dem
