#pragma once

#include "dem/contact.hpp"
#include "dem/forces.hpp"
#include "dem/model.hpp"

namespace dem {

struct VerletStep {
  GeneralizedState state;
  int contacts = 0;
};

// Kick-drift-kick velocity Verlet over the same force model. The second kick
// evaluates damping with the half-step velocity.
VerletStep verlet_step(const GeneralizedState& state, real h, const ParticleSystem& system,
                       const ContactParams& params, ContactDetector& detector);

// Generalized force -dV/dq + Q at (q, qdot) with contacts detected at q.
Vector total_force(const ParticleSystem& system, const ContactParams& params, const Vector& q, const Vector& qdot,
                   ContactDetector& detector, int* contact_count = nullptr);

}  // namespace dem
