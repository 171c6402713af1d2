#pragma once

#include "dem/types.hpp"

#include <cstdint>
#include <vector>

namespace dem {

struct Particle {
  real diameter = 1;
  real mass = 1;
  real inertia = 0.1;
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::Zero();  // accumulated rotation pseudo-vector
  Vec3 velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
};

// Solid sphere; the moment of inertia is always (2/5) m (d/2)^2.
Particle sphere(real diameter, real mass, const Vec3& position, const Vec3& velocity = Vec3::Zero(),
                const Vec3& angular_velocity = Vec3::Zero());

// Half-space boundary. Particles live on the side the normal points to.
struct Wall {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

Wall make_wall(const Vec3& point, const Vec3& normal);

struct Bond {
  int i = 0;
  int j = 1;
  real stiffness = 1;
};

struct ParticleSystem {
  std::vector<Particle> particles;
  std::vector<Wall> walls;
  std::vector<Bond> bonds;
  real gravity = 0;  // magnitude, acting along -z

  int size() const { return static_cast<int>(particles.size()); }
  int dofs() const { return kDofs * size(); }
};

// Throws InvalidSystem when a particle has non-positive mass or diameter, a
// wall normal is not unit length, or a bond is malformed.
void validate(const ParticleSystem& system);

struct GeneralizedState {
  Vector q;
  Vector p;
  real t = 0;
  std::int64_t k = 0;
};

struct MassMatrix {
  Vector diagonal;

  Vector apply(const Vector& x) const { return diagonal.cwiseProduct(x); }
  Vector solve(const Vector& x) const { return x.cwiseQuotient(diagonal); }
  int rows() const { return static_cast<int>(diagonal.size()); }
};

MassMatrix assemble_mass_matrix(const ParticleSystem& system);

GeneralizedState pack_state(const ParticleSystem& system);

// Positions and orientations from q, velocities from M^-1 p.
ParticleSystem unpack_state(const GeneralizedState& state, const ParticleSystem& templ);

Vector pack_positions(const ParticleSystem& system);
Vector pack_velocities(const ParticleSystem& system);

// Writes q and qdot back into a copy of the template system.
ParticleSystem with_coordinates(const ParticleSystem& templ, const Vector& q, const Vector& qdot);

}  // namespace dem
