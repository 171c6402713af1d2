#pragma once

#include "dem/contact.hpp"
#include "dem/forces.hpp"
#include "dem/model.hpp"

namespace dem {

// planar: translational energy from (v_x, v_y) and rotational from w_z only.
enum class KineticMask { full, planar };

struct KineticEnergy {
  real translational = 0;
  real rotational = 0;
};

KineticEnergy particle_kinetic(const ParticleSystem& system, int i, KineticMask mask = KineticMask::full);

struct FrameStats {
  real t = 0;
  real kinetic_translational = 0;
  real kinetic_rotational = 0;
  real contact_potential = 0;
  real gravitational_potential = 0;
  real total_energy = 0;
  Vec3 momentum = Vec3::Zero();
  real mean_kinetic = 0;          // K-bar
  real velocity_fluctuation = 0;  // delta-v
  int newton_iterations = 0;
  int cg_iterations = 0;
};

// K-bar, delta-v, kinetic totals and linear momentum. Potentials are left at zero.
FrameStats ensemble_stats(const ParticleSystem& system);

real total_energy(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params);

// ensemble_stats plus the potential terms and total energy.
FrameStats frame_stats(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params,
                       real t = 0);

}  // namespace dem
