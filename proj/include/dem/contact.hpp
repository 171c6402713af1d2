#pragma once

#include "dem/model.hpp"

#include <utility>
#include <vector>

namespace dem {

enum class ContactKind { pair, wall, bond };

// Identity of an interaction. For walls `j` is the wall index; for bonds it
// is the partner particle and `bond` indexes ParticleSystem::bonds.
struct ContactId {
  ContactKind kind = ContactKind::pair;
  int i = 0;
  int j = 0;
  int bond = -1;

  friend bool operator==(const ContactId&, const ContactId&) = default;
  friend auto operator<=>(const ContactId&, const ContactId&) = default;
};

struct ContactKinematics {
  ContactId id;
  real overlap = 0;             // delta = d - |r_ij| (pairs, bonds) or d/2 - distance (walls)
  Vec3 normal = Vec3::Zero();   // n_ij, from j towards i
  Vec3 lever = Vec3::Zero();    // r_ij; for walls the mirror image 2 * distance * n
  Vec3 relative_velocity = Vec3::Zero();
  Vec3 normal_velocity = Vec3::Zero();
  Vec3 tangential_velocity = Vec3::Zero();
  Vec3 tangent = Vec3::Zero();  // v_t / |v_t|, or zero below the regularisation threshold
  real effective_mass = 0;
};

using ContactSet = std::vector<ContactKinematics>;

// |v_t| below this (in units of d per unit time) leaves t_ij = 0.
inline constexpr real kTangentEpsilon = 1e-12;

ContactKinematics pair_kinematics(const ParticleSystem& system, const Vector& q, const Vector& qdot, int i, int j);
ContactKinematics pair_kinematics(const ParticleSystem& system, int i, int j);

ContactKinematics wall_kinematics(const ParticleSystem& system, const Vector& q, const Vector& qdot, int i,
                                  int wall);
ContactKinematics wall_kinematics(const ParticleSystem& system, int i, int wall);

// Recomputes kinematics for an existing identity at a new (q, qdot).
ContactKinematics evaluate(const ContactId& id, const ParticleSystem& system, const Vector& q, const Vector& qdot);

// One bond per unordered pair whose overlap magnitude is below `threshold`.
std::vector<Bond> create_bonds(const ParticleSystem& system, real threshold, real stiffness);
std::vector<Bond> create_bonds(const ParticleSystem& system, real stiffness);  // threshold d/100

struct NeighborList {
  std::vector<std::pair<int, int>> pairs;  // i < j, sorted
  real skin = 0;
  Vector reference;  // q at the last rebuild

  // Largest translational displacement of any particle since the rebuild.
  real max_displacement(const Vector& q) const;
  bool valid_for(const Vector& q) const;
};

NeighborList build_neighbor_list(const ParticleSystem& system, const Vector& q, real skin);
NeighborList build_neighbor_list(const ParticleSystem& system, real skin);

// All unordered pairs with centre distance < cutoff, by exhaustive search.
std::vector<std::pair<int, int>> brute_force_pairs(const ParticleSystem& system, const Vector& q, real cutoff);

struct StaleNeighborList : Error {
  using Error::Error;
};

// Active contacts at (q, qdot), sorted by id. Throws StaleNeighborList when
// the list no longer covers the configuration.
ContactSet detect_contacts(const ParticleSystem& system, const Vector& q, const Vector& qdot,
                           const NeighborList& list);
ContactSet detect_contacts(const ParticleSystem& system, const NeighborList& list);
ContactSet detect_contacts_brute_force(const ParticleSystem& system, const Vector& q, const Vector& qdot);

// Same identities, kinematics recomputed at (q, qdot).
ContactSet reevaluate(const ContactSet& contacts, const ParticleSystem& system, const Vector& q,
                      const Vector& qdot);

// Owns a neighbour list and rebuilds it when the displacement guard trips.
class ContactDetector {
 public:
  explicit ContactDetector(real skin = 0.3) : skin_(skin) {}

  ContactSet detect(const ParticleSystem& system, const Vector& q, const Vector& qdot);
  void ensure_valid(const ParticleSystem& system, const Vector& q);

  const NeighborList& list() const { return list_; }
  int rebuilds() const { return rebuilds_; }
  real skin() const { return skin_; }

 private:
  real skin_;
  NeighborList list_;
  int rebuilds_ = 0;
};

}  // namespace dem
