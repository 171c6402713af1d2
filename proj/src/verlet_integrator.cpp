#include "dem/verlet_integrator.hpp"

namespace dem {

Vector total_force(const ParticleSystem& system, const ContactParams& params, const Vector& q, const Vector& qdot,
                   ContactDetector& detector, int* contact_count) {
  const ContactSet contacts = detector.detect(system, q, qdot);
  if (contact_count) *contact_count = static_cast<int>(contacts.size());
  return nonconservative_force(system, q, qdot, contacts, params) - potential_gradient(system, q, contacts, params);
}

VerletStep verlet_step(const GeneralizedState& state, real h, const ParticleSystem& system,
                       const ContactParams& params, ContactDetector& detector) {
  if (!(h > 0)) throw Error("time step must be positive");
  if (state.q.size() != system.dofs() || state.p.size() != system.dofs())
    throw DimensionMismatch("verlet_step: state length mismatch");
  const MassMatrix mass = assemble_mass_matrix(system);
  const Vector v = mass.solve(state.p);

  const Vector v_half = v + (h / 2) * mass.solve(total_force(system, params, state.q, v, detector));
  VerletStep out;
  out.state.q = state.q + h * v_half;
  const Vector v_next =
      v_half + (h / 2) * mass.solve(total_force(system, params, out.state.q, v_half, detector, &out.contacts));
  out.state.p = mass.apply(v_next);
  out.state.t = state.t + h;
  out.state.k = state.k + 1;
  return out;
}

}  // namespace dem
