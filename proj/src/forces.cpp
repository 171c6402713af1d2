#include "dem/forces.hpp"

#include <algorithm>

namespace dem {

namespace {

bool unilateral(const ContactKinematics& c) { return c.id.kind != ContactKind::bond; }

using Map3x6 = Eigen::Matrix<real, 3, 6>;

// Maps the generalized velocity of one particle to its share of the relative
// contact velocity u = v_ij - 1/2 (w_i + w_j) x r_ij.
Map3x6 velocity_map(const Vec3& lever, real sign) {
  Map3x6 b;
  b.leftCols<3>() = sign * Mat3::Identity();
  b.rightCols<3>() = real(0.5) * skew(lever);
  return b;
}

}  // namespace

real contact_stiffness(const ContactKinematics& c, const ParticleSystem& system, const ContactParams& params) {
  if (c.id.kind == ContactKind::bond) return system.bonds.at(c.id.bond).stiffness;
  return params.k_n;
}

real effective_overlap(const ContactKinematics& c) { return unilateral(c) ? std::max(c.overlap, real(0)) : c.overlap; }

real contact_potential(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params) {
  real v = 0;
  for (const ContactKinematics& c : contacts) {
    const real delta = effective_overlap(c);
    v += real(0.5) * contact_stiffness(c, system, params) * delta * delta;
  }
  return v;
}

real gravitational_potential(const ParticleSystem& system, const Vector& q) {
  real v = 0;
  for (int i = 0; i < system.size(); ++i) v += system.particles[i].mass * system.gravity * q(kDofs * i + 2);
  return v;
}

real potential_energy(const ParticleSystem& system, const Vector& q, const ContactSet& contacts,
                      const ContactParams& params) {
  return contact_potential(system, contacts, params) + gravitational_potential(system, q);
}

Vector potential_gradient(const ParticleSystem& system, const Vector& q, const ContactSet& contacts,
                          const ContactParams& params) {
  if (q.size() != system.dofs()) throw DimensionMismatch("potential_gradient: q has the wrong length");
  Vector g = Vector::Zero(system.dofs());
  for (int i = 0; i < system.size(); ++i) g(kDofs * i + 2) = system.particles[i].mass * system.gravity;
  for (const ContactKinematics& c : contacts) {
    const Vec3 force = contact_stiffness(c, system, params) * effective_overlap(c) * c.normal;
    g.segment<3>(kDofs * c.id.i) -= force;
    if (c.id.kind != ContactKind::wall) g.segment<3>(kDofs * c.id.j) += force;
  }
  return g;
}

BlockMatrix potential_hessian(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params) {
  BlockMatrix h(system.size());
  for (const ContactKinematics& c : contacts) {
    if (unilateral(c) && c.overlap <= 0) continue;
    const real k = contact_stiffness(c, system, params);
    const Mat3 nn = c.normal * c.normal.transpose();
    Mat6 block = Mat6::Zero();
    if (c.id.kind == ContactKind::wall) {
      block.topLeftCorner<3, 3>() = k * nn;
      h.add(c.id.i, c.id.i, block);
      continue;
    }
    const real dist = c.lever.norm();
    block.topLeftCorner<3, 3>() = k * nn - (k * c.overlap / dist) * (Mat3::Identity() - nn);
    h.add(c.id.i, c.id.i, block);
    h.add(c.id.j, c.id.j, block);
    h.add(c.id.i, c.id.j, -block);
  }
  return h;
}

Vector nonconservative_force(const ParticleSystem& system, const Vector& q, const Vector& qdot,
                             const ContactSet& contacts, const ContactParams& params) {
  if (qdot.size() != system.dofs()) throw DimensionMismatch("nonconservative_force: velocity has the wrong length");
  Vector out = Vector::Zero(system.dofs());
  if (params.gamma == 0) return out;
  for (const ContactKinematics& cached : contacts) {
    const ContactKinematics c = evaluate(cached.id, system, q, qdot);
    const Vec3 force = -params.normal_damping(c.effective_mass) * c.normal_velocity -
                       params.tangential_damping(c.effective_mass) * c.tangential_velocity;
    const Vec3 torque = real(-0.5) * c.lever.cross(force);
    out.segment<3>(kDofs * c.id.i) += force;
    out.segment<3>(kDofs * c.id.i + 3) += torque;
    if (c.id.kind != ContactKind::wall) {
      out.segment<3>(kDofs * c.id.j) -= force;
      out.segment<3>(kDofs * c.id.j + 3) += torque;
    }
  }
  return out;
}

BlockMatrix dQ_dv(const ParticleSystem& system, const ContactSet& contacts, const ContactParams& params) {
  BlockMatrix jac(system.size());
  if (params.gamma == 0) return jac;
  for (const ContactKinematics& c : contacts) {
    const Mat3 nn = c.normal * c.normal.transpose();
    const Mat3 dashpot = params.normal_damping(c.effective_mass) * nn +
                         params.tangential_damping(c.effective_mass) * (Mat3::Identity() - nn);
    const Map3x6 bi = velocity_map(c.lever, 1);
    jac.add(c.id.i, c.id.i, -bi.transpose() * dashpot * bi);
    if (c.id.kind == ContactKind::wall) continue;
    const Map3x6 bj = velocity_map(c.lever, -1);
    jac.add(c.id.j, c.id.j, -bj.transpose() * dashpot * bj);
    jac.add(c.id.i, c.id.j, -bi.transpose() * dashpot * bj);
  }
  return jac;
}

ForceAssembly assemble_forces(const ParticleSystem& system, const Vector& q, const Vector& qdot,
                              const ContactSet& contacts, const ContactParams& params) {
  ForceAssembly f;
  f.potential = potential_energy(system, q, contacts, params);
  f.gradient = potential_gradient(system, q, contacts, params);
  f.damping = nonconservative_force(system, q, qdot, contacts, params);
  f.damping_jacobian = dQ_dv(system, contacts, params);
  return f;
}

}  // namespace dem
