#pragma once

#include "dem/contact.hpp"
#include "dem/linsolve.hpp"

namespace dem {

// Hookean contact law parameters.
//
// Damping is given through gamma = gamma_n / m_eff, so each contact carries a
// dashpot coefficient gamma_n * m_eff = gamma * m_eff^2 in the normal
// direction and tangential_ratio times that tangentially. The tangential
// spring k_t is kept for completeness but never applied: tangential overlap
// is not tracked, so particles are frictionless.
struct ContactParams {
  real k_n = 195000;
  real k_t = 0;
  real gamma = 0;
  real tangential_ratio = 0.5;

  real normal_damping(real effective_mass) const { return gamma * effective_mass * effective_mass; }
  real tangential_damping(real effective_mass) const { return tangential_ratio * normal_damping(effective_mass); }
};

// Spring stiffness acting on a contact: k_n for unilateral contacts, the bond's own stiffness for bonds.
real contact_stiffness(const ContactKinematics& c, const ParticleSystem& system, const ContactParams& params);

// Overlap entering the spring law: clamped at zero for unilateral contacts, signed for bonds.
real effective_overlap(const ContactKinematics& c);

real contact_potential(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params);
real gravitational_potential(const ParticleSystem& system, const Vector& q);
real potential_energy(const ParticleSystem& system, const Vector& q, const ContactSet& contacts,
                      const ContactParams& params);

// dV/dq. Rotational rows are identically zero.
Vector potential_gradient(const ParticleSystem& system, const Vector& q, const ContactSet& contacts,
                          const ContactParams& params);

// d2V/dq2 (translational blocks only).
BlockMatrix potential_hessian(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params);

// Damping forces and torques Q(q, qdot). Contact kinematics are recomputed at
// (q, qdot) for every identity in `contacts`.
Vector nonconservative_force(const ParticleSystem& system, const Vector& q, const Vector& qdot,
                             const ContactSet& contacts, const ContactParams& params);

// dQ/dqdot with geometry taken from the cached kinematics. Q is linear in
// qdot, so this is exact; it is symmetric negative semi-definite.
BlockMatrix dQ_dv(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params);

struct ForceAssembly {
  real potential = 0;
  Vector gradient;
  Vector damping;
  BlockMatrix damping_jacobian;
};

ForceAssembly assemble_forces(const ParticleSystem& system, const Vector& q, const Vector& qdot,
                              const ContactSet& contacts, const ContactParams& params);

}  // namespace dem
