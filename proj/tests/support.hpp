#pragma once

#include "dem/contact.hpp"
#include "dem/forces.hpp"
#include "dem/model.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

namespace dem::testing {

struct RandomOptions {
  int particles = 0;  // 0: draw 2..8
  bool walls = false;
  bool bonds = false;
  bool gravity = false;
  real spread = 1.5;  // box edge per particle^(1/3), in diameters
  real min_gap = 1e-3;  // reject configurations with |delta| below this (kinks of the unilateral law)
};

inline real uniform(std::mt19937_64& rng, real lo, real hi) { return std::uniform_real_distribution<real>(lo, hi)(rng); }

inline Vec3 random_vec(std::mt19937_64& rng, real scale) {
  return Vec3(uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale));
}

// A small cluster of unit spheres with overlapping contacts, random velocities
// and spins, and optionally walls, bonds and gravity.
inline ParticleSystem random_system(std::uint64_t seed, const RandomOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  for (;;) {
    const int n = opt.particles > 0 ? opt.particles : std::uniform_int_distribution<int>(2, 8)(rng);
    const real edge = opt.spread * std::cbrt(static_cast<real>(n));
    ParticleSystem sys;
    for (int i = 0; i < n; ++i) {
      const real mass = uniform(rng, 0.5, 2);
      sys.particles.push_back(sphere(1, mass, Vec3(uniform(rng, 0, edge), uniform(rng, 0, edge), uniform(rng, 0, edge)),
                                     random_vec(rng, 1), random_vec(rng, 1)));
    }
    if (opt.walls) {
      real zmin = 1e300, xmax = -1e300;
      for (const Particle& p : sys.particles) {
        zmin = std::min(zmin, p.position.z());
        xmax = std::max(xmax, p.position.x());
      }
      sys.walls.push_back(make_wall(Vec3(0, 0, zmin - uniform(rng, 0.2, 0.45)), Vec3::UnitZ()));
      sys.walls.push_back(make_wall(Vec3(xmax + uniform(rng, 0.2, 0.45), 0, 0), Vec3(-1, uniform(rng, -0.2, 0.2), 0)));
    }
    if (opt.bonds && n >= 2) {
      const int i = std::uniform_int_distribution<int>(0, n - 2)(rng);
      sys.bonds.push_back(Bond{i, i + 1, uniform(rng, 50, 500)});
    }
    if (opt.gravity) sys.gravity = uniform(rng, 0.5, 2);

    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = i + 1; j < n && ok; ++j) {
        const real dist = (sys.particles[i].position - sys.particles[j].position).norm();
        if (dist < 0.5 || std::abs(1 - dist) < opt.min_gap) ok = false;
      }
      for (const Wall& w : sys.walls)
        if (std::abs(0.5 - (sys.particles[i].position - w.point).dot(w.normal)) < opt.min_gap) ok = false;
    }
    if (ok) return sys;
  }
}

inline ContactParams random_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  ContactParams p;
  p.k_n = uniform(rng, 100, 1000);
  p.gamma = uniform(rng, 0.5, 5);
  return p;
}

// Central-difference derivative of a vector (or scalar, as a 1-vector) function.
inline Eigen::MatrixXd fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, real eps) {
  const Vector f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Vector xp = x, xm = x;
    xp(c) += eps;
    xm(c) -= eps;
    jac.col(c) = (f(xp) - f(xm)) / (2 * eps);
  }
  return jac;
}

inline real relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const real scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), real(1e-300)});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace dem::testing
