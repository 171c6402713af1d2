#include "dem/contact.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <unordered_map>

namespace dem {

namespace {

void split_normal_tangential(ContactKinematics& c, const Vec3& omega_sum) {
  c.normal_velocity = c.relative_velocity.dot(c.normal) * c.normal;
  c.tangential_velocity = c.relative_velocity - c.normal_velocity - real(0.5) * omega_sum.cross(c.lever);
  const real vt = c.tangential_velocity.norm();
  c.tangent = vt < kTangentEpsilon ? Vec3::Zero() : Vec3(c.tangential_velocity / vt);
}

ContactKinematics two_body(const ParticleSystem& system, const Vector& q, const Vector& qdot, int i, int j,
                           ContactKind kind) {
  if (i == j) throw SingularGeometry("contact between a particle and itself");
  const Particle& a = system.particles[i];
  const Particle& b = system.particles[j];
  if (std::abs(a.diameter - b.diameter) > 1e-12 * std::max(a.diameter, b.diameter))
    throw InvalidSystem("contact pairs require equal diameters (" + std::to_string(i) + ", " + std::to_string(j) +
                        ")");
  ContactKinematics c;
  c.id = ContactId{kind, i, j, -1};
  c.lever = translation(q, i) - translation(q, j);
  const real dist = c.lever.norm();
  if (!(dist > 0))
    throw SingularGeometry("coincident centres for particles " + std::to_string(i) + " and " + std::to_string(j));
  c.normal = c.lever / dist;
  c.overlap = a.diameter - dist;
  c.relative_velocity = translation(qdot, i) - translation(qdot, j);
  c.effective_mass = a.mass * b.mass / (a.mass + b.mass);
  split_normal_tangential(c, rotation(qdot, i) + rotation(qdot, j));
  return c;
}

real wall_distance(const Wall& w, const Vec3& x) { return (x - w.point).dot(w.normal); }

std::vector<std::pair<int, int>> bonded_pairs(const ParticleSystem& system) {
  std::vector<std::pair<int, int>> out;
  out.reserve(system.bonds.size());
  for (const Bond& b : system.bonds) out.emplace_back(std::min(b.i, b.j), std::max(b.i, b.j));
  std::sort(out.begin(), out.end());
  return out;
}

real max_diameter(const ParticleSystem& system) {
  real d = 0;
  for (const Particle& p : system.particles) d = std::max(d, p.diameter);
  return d;
}

}  // namespace

ContactKinematics pair_kinematics(const ParticleSystem& system, const Vector& q, const Vector& qdot, int i, int j) {
  return two_body(system, q, qdot, i, j, ContactKind::pair);
}

ContactKinematics pair_kinematics(const ParticleSystem& system, int i, int j) {
  return pair_kinematics(system, pack_positions(system), pack_velocities(system), i, j);
}

ContactKinematics wall_kinematics(const ParticleSystem& system, const Vector& q, const Vector& qdot, int i,
                                  int wall) {
  const Wall& w = system.walls.at(wall);
  const Particle& a = system.particles[i];
  ContactKinematics c;
  c.id = ContactId{ContactKind::wall, i, wall, -1};
  const real dist = wall_distance(w, translation(q, i));
  c.overlap = a.diameter / 2 - dist;
  c.normal = w.normal;
  c.lever = 2 * dist * w.normal;
  c.relative_velocity = translation(qdot, i);
  c.effective_mass = a.mass;
  split_normal_tangential(c, rotation(qdot, i));
  return c;
}

ContactKinematics wall_kinematics(const ParticleSystem& system, int i, int wall) {
  return wall_kinematics(system, pack_positions(system), pack_velocities(system), i, wall);
}

ContactKinematics evaluate(const ContactId& id, const ParticleSystem& system, const Vector& q, const Vector& qdot) {
  switch (id.kind) {
    case ContactKind::pair:
      return pair_kinematics(system, q, qdot, id.i, id.j);
    case ContactKind::wall:
      return wall_kinematics(system, q, qdot, id.i, id.j);
    case ContactKind::bond: {
      ContactKinematics c = two_body(system, q, qdot, id.i, id.j, ContactKind::bond);
      c.id.bond = id.bond;
      return c;
    }
  }
  throw Error("unknown contact kind");
}

std::vector<Bond> create_bonds(const ParticleSystem& system, real threshold, real stiffness) {
  std::vector<Bond> bonds;
  const Vector q = pack_positions(system);
  for (int i = 0; i < system.size(); ++i) {
    for (int j = i + 1; j < system.size(); ++j) {
      const real dist = (translation(q, i) - translation(q, j)).norm();
      const real overlap = system.particles[i].diameter - dist;
      if (std::abs(overlap) < threshold) bonds.push_back(Bond{i, j, stiffness});
    }
  }
  return bonds;
}

std::vector<Bond> create_bonds(const ParticleSystem& system, real stiffness) {
  return create_bonds(system, max_diameter(system) / 100, stiffness);
}

real NeighborList::max_displacement(const Vector& q) const {
  real worst = 0;
  for (int i = 0; i < q.size() / kDofs; ++i)
    worst = std::max(worst, (translation(q, i) - translation(reference, i)).norm());
  return worst;
}

bool NeighborList::valid_for(const Vector& q) const {
  return reference.size() == q.size() && max_displacement(q) < skin / 2;
}

std::vector<std::pair<int, int>> brute_force_pairs(const ParticleSystem& system, const Vector& q, real cutoff) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < system.size(); ++i)
    for (int j = i + 1; j < system.size(); ++j)
      if ((translation(q, i) - translation(q, j)).norm() < cutoff) pairs.emplace_back(i, j);
  return pairs;
}

NeighborList build_neighbor_list(const ParticleSystem& system, const Vector& q, real skin) {
  if (!(skin > 0)) throw Error("neighbour list skin must be positive");
  NeighborList list;
  list.skin = skin;
  list.reference = q;
  const real cutoff = max_diameter(system) + skin;

  // Cell binning with cell edge >= cutoff; only the 27 surrounding cells can hold candidates.
  struct CellHash {
    std::size_t operator()(const std::array<long, 3>& c) const {
      return static_cast<std::size_t>(c[0] * 73856093L ^ c[1] * 19349663L ^ c[2] * 83492791L);
    }
  };
  std::unordered_map<std::array<long, 3>, std::vector<int>, CellHash> cells;
  auto cell_of = [&](int i) {
    const Vec3 x = translation(q, i) / cutoff;
    return std::array<long, 3>{static_cast<long>(std::floor(x.x())), static_cast<long>(std::floor(x.y())),
                               static_cast<long>(std::floor(x.z()))};
  };
  for (int i = 0; i < system.size(); ++i) cells[cell_of(i)].push_back(i);

  for (int i = 0; i < system.size(); ++i) {
    const auto c = cell_of(i);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          auto it = cells.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == cells.end()) continue;
          for (int j : it->second) {
            if (j <= i) continue;
            if ((translation(q, i) - translation(q, j)).norm() < cutoff) list.pairs.emplace_back(i, j);
          }
        }
  }
  std::sort(list.pairs.begin(), list.pairs.end());
  return list;
}

NeighborList build_neighbor_list(const ParticleSystem& system, real skin) {
  return build_neighbor_list(system, pack_positions(system), skin);
}

namespace {

ContactSet collect(const ParticleSystem& system, const Vector& q, const Vector& qdot,
                   const std::vector<std::pair<int, int>>& candidates) {
  const auto bonded = bonded_pairs(system);
  ContactSet contacts;
  for (const auto& [i, j] : candidates) {
    if (std::binary_search(bonded.begin(), bonded.end(), std::make_pair(i, j))) continue;
    const real dist = (translation(q, i) - translation(q, j)).norm();
    if (system.particles[i].diameter - dist > 0) contacts.push_back(pair_kinematics(system, q, qdot, i, j));
  }
  for (int i = 0; i < system.size(); ++i) {
    for (int w = 0; w < static_cast<int>(system.walls.size()); ++w) {
      if (system.particles[i].diameter / 2 - wall_distance(system.walls[w], translation(q, i)) > 0)
        contacts.push_back(wall_kinematics(system, q, qdot, i, w));
    }
  }
  for (int b = 0; b < static_cast<int>(system.bonds.size()); ++b) {
    const Bond& bond = system.bonds[b];
    contacts.push_back(evaluate(ContactId{ContactKind::bond, bond.i, bond.j, b}, system, q, qdot));
  }
  std::sort(contacts.begin(), contacts.end(),
            [](const ContactKinematics& a, const ContactKinematics& b) { return a.id < b.id; });
  return contacts;
}

}  // namespace

ContactSet detect_contacts(const ParticleSystem& system, const Vector& q, const Vector& qdot,
                           const NeighborList& list) {
  if (!list.valid_for(q)) throw StaleNeighborList("neighbour list must be rebuilt before contact detection");
  return collect(system, q, qdot, list.pairs);
}

ContactSet detect_contacts(const ParticleSystem& system, const NeighborList& list) {
  return detect_contacts(system, pack_positions(system), pack_velocities(system), list);
}

ContactSet detect_contacts_brute_force(const ParticleSystem& system, const Vector& q, const Vector& qdot) {
  return collect(system, q, qdot, brute_force_pairs(system, q, max_diameter(system)));
}

ContactSet reevaluate(const ContactSet& contacts, const ParticleSystem& system, const Vector& q,
                      const Vector& qdot) {
  ContactSet out;
  out.reserve(contacts.size());
  for (const ContactKinematics& c : contacts) out.push_back(evaluate(c.id, system, q, qdot));
  return out;
}

void ContactDetector::ensure_valid(const ParticleSystem& system, const Vector& q) {
  if (list_.valid_for(q)) return;
  list_ = build_neighbor_list(system, q, skin_);
  ++rebuilds_;
}

ContactSet ContactDetector::detect(const ParticleSystem& system, const Vector& q, const Vector& qdot) {
  ensure_valid(system, q);
  return detect_contacts(system, q, qdot, list_);
}

}  // namespace dem
