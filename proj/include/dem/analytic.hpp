#pragma once

#include "dem/types.hpp"

#include <cmath>
#include <numbers>

namespace dem::analytic {

struct DomainError : Error {
  using Error::Error;
};

// Head-on collision of two equal spheres approaching with speed v each.
// gamma is the damping parameter gamma_n / m_eff of the contact law.
template <typename Scalar = real>
struct ImpactParams {
  Scalar d = 1;
  Scalar m = 1;
  Scalar k_n = 195000;
  Scalar gamma = 0;
  Scalar v = 1;

  // Exponential decay rate of the separation: gamma_n / 2 with gamma_n = gamma * m / 2.
  Scalar decay_rate() const { return gamma * m / 4; }
  Scalar natural_frequency_squared() const { return 2 * k_n / m; }
  bool underdamped() const { return natural_frequency_squared() > decay_rate() * decay_rate(); }
};

template <typename Scalar>
Scalar damped_period_scale(const ImpactParams<Scalar>& p) {
  if (!p.underdamped()) throw DomainError("impact parameters are not underdamped");
  const Scalar beta = p.decay_rate();
  return Scalar(1) / std::sqrt(p.natural_frequency_squared() - beta * beta);
}

template <typename Scalar>
struct CollisionTimes {
  Scalar approach;  // t_A: time from the initial state (centres at +-d) until first touch
  Scalar contact;   // t_C = pi sqrt(m / 2k), the undamped contact duration
  Scalar scale;     // t_gamma
};

template <typename Scalar>
CollisionTimes<Scalar> collision_times(const ImpactParams<Scalar>& p) {
  if (!(p.v > 0)) throw DomainError("approach speed must be positive");
  return {p.d / (2 * p.v), std::numbers::pi_v<Scalar> * std::sqrt(p.m / (2 * p.k_n)), damped_period_scale(p)};
}

// Time at which the damped contact ends (separation returns to d).
template <typename Scalar>
Scalar contact_end(const ImpactParams<Scalar>& p) {
  return std::numbers::pi_v<Scalar> * damped_period_scale(p);
}

// x(t) of the right-hand particle, t measured from contact onset.
template <typename Scalar>
Scalar impact_position(Scalar t, const ImpactParams<Scalar>& p) {
  if (t < 0) throw DomainError("impact oracle is defined from contact onset (t >= 0)");
  const Scalar tg = damped_period_scale(p);
  return p.d / 2 - p.v * tg * std::exp(-p.decay_rate() * t) * std::sin(t / tg);
}

// dx/dt of impact_position.
template <typename Scalar>
Scalar impact_velocity(Scalar t, const ImpactParams<Scalar>& p) {
  if (t < 0) throw DomainError("impact oracle is defined from contact onset (t >= 0)");
  const Scalar tg = damped_period_scale(p);
  const Scalar beta = p.decay_rate();
  return p.v * std::exp(-beta * t) * (beta * tg * std::sin(t / tg) - std::cos(t / tg));
}

// The velocity expression with the literal coefficients
// v exp(-gamma t / m) [(gamma^2 / m) sin(t / t_g) - cos(t / t_g)], t_g = [2k/m - (gamma/m)^2]^(-1/2).
// It agrees with impact_velocity only for gamma = 0.
template <typename Scalar>
Scalar impact_velocity_printed(Scalar t, const ImpactParams<Scalar>& p) {
  const Scalar rate = p.gamma / p.m;
  const Scalar disc = 2 * p.k_n / p.m - rate * rate;
  if (!(disc > 0)) throw DomainError("impact parameters are not underdamped");
  const Scalar tg = Scalar(1) / std::sqrt(disc);
  return p.v * std::exp(-rate * t) * (p.gamma * p.gamma / p.m * std::sin(t / tg) - std::cos(t / tg));
}

}  // namespace dem::analytic
