#include "dem/vi_integrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>

namespace dem {

namespace {

real inf_norm(const Vector& x) { return x.size() == 0 ? real(0) : x.lpNorm<Eigen::Infinity>(); }

std::string format_scientific(real x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

real max_diameter(const ParticleSystem& system) {
  real d = 0;
  for (const Particle& p : system.particles) d = std::max(d, p.diameter);
  return d;
}

struct Evaluation {
  Vector residual;
  Vector gradient;
  Vector damping;  // Q(q_{k+alpha}, u/h)
  ContactSet contacts;
  real scale = 0;
};

// Everything the Newton loop needs at displacement u = q_{k+1} - q_k.
Evaluation evaluate_at(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                       const MassMatrix& mass, const Vector& q_k, const Vector& u, const Vector& p_k,
                       const Vector& forcing_k, ContactDetector& detector, const ContactSet* frozen) {
  const real h = cfg.h;
  const Vector q_a = q_k + cfg.alpha * u;
  const Vector v = u / h;
  Evaluation e;
  e.contacts = frozen ? reevaluate(*frozen, system, q_a, v) : detector.detect(system, q_a, v);
  e.gradient = potential_gradient(system, q_a, e.contacts, params);
  e.damping = nonconservative_force(system, q_a, v, e.contacts, params);
  const Vector inertia = mass.apply(u) / h;
  e.residual = p_k - inertia - h * (1 - cfg.alpha) * e.gradient + (h / 2) * e.damping;
  if (forcing_k.size() > 0) e.residual += forcing_k;
  // Roundoff in R follows the largest individual force, not the net force, which
  // cancels to nothing once a packing is at rest.
  real gross = 0;
  for (const Particle& p : system.particles) gross = std::max(gross, p.mass * system.gravity);
  for (const ContactKinematics& c : e.contacts) {
    const real spring = contact_stiffness(c, system, params) * std::abs(effective_overlap(c));
    const real dashpot = params.normal_damping(c.effective_mass) * c.normal_velocity.norm() +
                         params.tangential_damping(c.effective_mass) * c.tangential_velocity.norm();
    gross = std::max({gross, spring, dashpot});
  }
  e.scale = std::max({inf_norm(p_k), inf_norm(inertia), h * gross, h * inf_norm(e.gradient),
                      h * inf_norm(e.damping), inf_norm(forcing_k)});
  return e;
}

// Symmetrised finite-difference dQ/dq at (q, v) with the contact identities held fixed.
BlockMatrix damping_position_jacobian(const ParticleSystem& system, const ContactParams& params, const Vector& q,
                                      const Vector& v, const ContactSet& contacts) {
  const int n = system.size();
  BlockMatrix out(n);
  if (params.gamma == 0 || contacts.empty()) return out;
  const real eps = 1e-7 * max_diameter(system);

  std::map<std::pair<int, int>, Mat6> blocks;
  std::vector<std::vector<int>> partners(n);
  for (const ContactKinematics& c : contacts) {
    partners[c.id.i].push_back(c.id.i);
    if (c.id.kind != ContactKind::wall) {
      partners[c.id.i].push_back(c.id.j);
      partners[c.id.j].push_back(c.id.j);
      partners[c.id.j].push_back(c.id.i);
    }
  }
  for (int b = 0; b < n; ++b) {
    if (partners[b].empty()) continue;
    std::sort(partners[b].begin(), partners[b].end());
    partners[b].erase(std::unique(partners[b].begin(), partners[b].end()), partners[b].end());
    for (int col = 0; col < kDofs; ++col) {
      Vector qp = q, qm = q;
      qp(kDofs * b + col) += eps;
      qm(kDofs * b + col) -= eps;
      const Vector dq = (nonconservative_force(system, qp, v, contacts, params) -
                         nonconservative_force(system, qm, v, contacts, params)) /
                        (2 * eps);
      for (int a : partners[b]) {
        auto [it, inserted] = blocks.try_emplace({a, b}, Mat6::Zero());
        it->second.col(col) = dq.segment<6>(kDofs * a);
      }
    }
  }
  for (const auto& [key, block] : blocks) {
    const auto [a, b] = key;
    if (a == b) {
      out.add(a, a, real(0.5) * (block + block.transpose()));
    } else if (a < b) {
      auto other = blocks.find({b, a});
      const Mat6 lower = other == blocks.end() ? Mat6::Zero() : Mat6(other->second.transpose());
      out.add(a, b, real(0.5) * (block + lower));
    } else if (blocks.find({b, a}) == blocks.end()) {
      out.add(b, a, real(0.5) * block.transpose());
    }
  }
  return out;
}

// -K, which is symmetric positive definite for the time steps of interest.
BlockMatrix negative_stiffness(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                               const MassMatrix& mass, const Vector& q_a, const Vector& v,
                               const ContactSet& contacts) {
  const real h = cfg.h;
  BlockMatrix a = dQ_dv(system, contacts, params);
  a *= real(-0.5);
  a += BlockMatrix::diagonal(mass.diagonal / h);
  if (cfg.exact_hessian) {
    if (cfg.alpha != 0) {
      BlockMatrix hess = potential_hessian(system, contacts, params);
      hess *= h * (1 - cfg.alpha) * cfg.alpha;
      a += hess;
      BlockMatrix dq = damping_position_jacobian(system, params, q_a, v, contacts);
      dq *= -(h / 2) * cfg.alpha;
      a += dq;
    }
  }
  return a;
}

}  // namespace

void validate(const VIConfig& cfg) {
  if (cfg.alpha != 0 && cfg.alpha != real(0.5)) throw Error("alpha must be 0 or 1/2");
  if (!(cfg.h > 0)) throw Error("time step must be positive");
  if (!(cfg.newton_tol > 0) || !(cfg.residual_tol > 0)) throw Error("Newton tolerances must be positive");
  if (cfg.newton_max < 1) throw Error("newton_max must be at least 1");
  if (!(cfg.cg.tolerance > 0)) throw Error("CG tolerance must be positive");
}

real discrete_lagrangian(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                         const Vector& q_k, const Vector& q_k1, ContactDetector& detector) {
  if (q_k.size() != system.dofs() || q_k1.size() != system.dofs())
    throw DimensionMismatch("discrete_lagrangian: coordinate length mismatch");
  const MassMatrix mass = assemble_mass_matrix(system);
  const Vector dq = q_k1 - q_k;
  const Vector q_a = q_k + cfg.alpha * dq;
  const ContactSet contacts = detector.detect(system, q_a, dq / cfg.h);
  return dq.dot(mass.apply(dq)) / (2 * cfg.h) - cfg.h * potential_energy(system, q_a, contacts, params);
}

Vector momentum_forcing(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                        const Vector& q_k, const Vector& p_k, ContactDetector& detector) {
  if (params.gamma == 0) return Vector::Zero(system.dofs());
  const Vector v = assemble_mass_matrix(system).solve(p_k);
  const ContactSet contacts = detector.detect(system, q_k, v);
  return (cfg.h / 2) * nonconservative_force(system, q_k, v, contacts, params);
}

Vector residual(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg, const Vector& q_k,
                const Vector& q_k1, const Vector& p_k, const Vector& forcing_k, ContactDetector& detector) {
  if (q_k.size() != system.dofs() || q_k1.size() != system.dofs() || p_k.size() != system.dofs())
    throw DimensionMismatch("residual: vector length mismatch");
  const MassMatrix mass = assemble_mass_matrix(system);
  return evaluate_at(system, params, cfg, mass, q_k, q_k1 - q_k, p_k, forcing_k, detector, nullptr).residual;
}

BlockMatrix stiffness(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                      const Vector& q_k, const Vector& q_k1, ContactDetector& detector) {
  const MassMatrix mass = assemble_mass_matrix(system);
  const Vector dq = q_k1 - q_k;
  const Vector q_a = q_k + cfg.alpha * dq;
  const Vector v = dq / cfg.h;
  const ContactSet contacts = detector.detect(system, q_a, v);
  BlockMatrix k = negative_stiffness(system, params, cfg, mass, q_a, v, contacts);
  k *= real(-1);
  return k;
}

PositionSolve implicit_position_solve(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                                      const Vector& q_k, const Vector& p_k, const Vector& forcing_k,
                                      ContactDetector& detector) {
  validate(cfg);
  if (q_k.size() != system.dofs() || p_k.size() != system.dofs())
    throw DimensionMismatch("implicit_position_solve: state length mismatch");
  const MassMatrix mass = assemble_mass_matrix(system);
  const real h = cfg.h;

  Vector u = h * mass.solve(p_k);
  bool frozen = false;
  ContactSet frozen_set;
  Evaluation cur = evaluate_at(system, params, cfg, mass, q_k, u, p_k, forcing_k, detector, nullptr);

  PositionSolve out;
  for (int n = 1; n <= cfg.newton_max; ++n) {
    const BlockMatrix a = negative_stiffness(system, params, cfg, mass, q_k + cfg.alpha * u, u / h, cur.contacts);
    CGSettings cg = cfg.cg;
    if (cg.max_iterations == 0) cg.max_iterations = 10 * system.dofs();
    const auto solved = cg_solve(a, cur.residual, cg);
    out.report.cg_iterations += solved.iterations;
    u += solved.x;

    if (!frozen && n >= cfg.freeze_after) {
      frozen = true;
      frozen_set = cur.contacts;
    }
    cur = evaluate_at(system, params, cfg, mass, q_k, u, p_k, forcing_k, detector, frozen ? &frozen_set : nullptr);

    const real limit = cfg.residual_tol * std::max(cur.scale, std::numeric_limits<real>::min());
    const real r = inf_norm(cur.residual);
    if (inf_norm(solved.x) < cfg.newton_tol && r <= limit) {
      out.report.newton_iterations = n;
      out.report.residual = r;
      out.report.residual_limit = limit;
      out.report.contacts = static_cast<int>(cur.contacts.size());
      out.report.frozen = frozen;
      out.displacement = u;
      out.q_next = q_k + u;
      out.gradient = std::move(cur.gradient);
      out.damping = std::move(cur.damping);
      return out;
    }
  }
  throw StepFailure("Newton iteration did not converge in " + std::to_string(cfg.newton_max) +
                        " iterations (|R|_inf = " + format_scientific(inf_norm(cur.residual)) + ")",
                    inf_norm(cur.residual));
}

Vector momentum_update(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                       const Vector& q_k, const Vector& q_k1, ContactDetector& detector) {
  const MassMatrix mass = assemble_mass_matrix(system);
  const Vector dq = q_k1 - q_k;
  Vector p = mass.apply(dq) / cfg.h;
  if (cfg.alpha != 0) {
    const Vector q_a = q_k + cfg.alpha * dq;
    const ContactSet contacts = detector.detect(system, q_a, dq / cfg.h);
    p -= cfg.h * cfg.alpha * potential_gradient(system, q_a, contacts, params);
  }
  return p;
}

VIStep vi_step(const GeneralizedState& state, const ParticleSystem& system, const ContactParams& params,
               const VIConfig& cfg, ContactDetector& detector) {
  const bool folded = cfg.forcing == ForcingMode::folded && cfg.alpha != 0;
  const Vector forcing = folded ? Vector() : momentum_forcing(system, params, cfg, state.q, state.p, detector);
  PositionSolve solve = implicit_position_solve(system, params, cfg, state.q, state.p, forcing, detector);

  const MassMatrix mass = assemble_mass_matrix(system);
  VIStep out;
  out.state.q = std::move(solve.q_next);
  out.state.p = mass.apply(solve.displacement) / cfg.h;
  if (cfg.alpha != 0) out.state.p -= cfg.h * cfg.alpha * solve.gradient;
  // For alpha = 1/2, q_{k+1-alpha} = q_{k+alpha}, so Q_d+ is the converged damping term.
  if (folded) out.state.p += (cfg.h / 2) * solve.damping;
  out.state.t = state.t + cfg.h;
  out.state.k = state.k + 1;
  out.report = solve.report;
  return out;
}

QuasiStaticResult quasi_static_solve(const ParticleSystem& system, const ContactParams& params, const Vector& q_init,
                                     const QuasiStaticConfig& cfg, ContactDetector& detector) {
  if (q_init.size() != system.dofs()) throw DimensionMismatch("quasi_static_solve: q has the wrong length");
  const real d = max_diameter(system);
  const real tol = cfg.tolerance > 0 ? cfg.tolerance : 1e-8 * params.k_n * d;
  const real max_step = cfg.max_step > 0 ? cfg.max_step : real(0.1) * d;
  const MassMatrix mass = assemble_mass_matrix(system);
  const Vector zero = Vector::Zero(system.dofs());

  Vector translational_mass = mass.diagonal;
  Vector rotational_unit = Vector::Zero(system.dofs());
  for (int i = 0; i < system.size(); ++i) {
    translational_mass.segment<3>(kDofs * i + 3).setZero();
    rotational_unit.segment<3>(kDofs * i + 3).setOnes();
  }
  const real lambda_min = 1e-6 * params.k_n / translational_mass.maxCoeff();
  const real lambda_start = 1e-2 * params.k_n / translational_mass.maxCoeff();

  auto energy_at = [&](const Vector& q) {
    const ContactSet c = detector.detect(system, q, zero);
    return std::make_pair(potential_energy(system, q, c, params), c);
  };

  QuasiStaticResult out;
  out.q = q_init;
  auto [energy, contacts] = energy_at(out.q);
  out.energies.push_back(energy);
  real lambda = 0;
  bool newton_point = true;  // the current iterate came from an undamped full Newton step (or none)

  for (int it = 0; it <= cfg.max_iterations; ++it) {
    const Vector g = potential_gradient(system, out.q, contacts, params);
    out.gradient_norm = inf_norm(g);
    if (out.gradient_norm < tol && newton_point) return out;
    if (it == cfg.max_iterations) break;
    out.iterations = it + 1;

    BlockMatrix a = potential_hessian(system, contacts, params);
    a += BlockMatrix::diagonal(lambda * translational_mass + rotational_unit);
    Vector step;
    try {
      CGSettings cg = cfg.cg;
      if (cg.max_iterations == 0) cg.max_iterations = 10 * system.dofs();
      step = -cg_solve(a, Vector(g), cg).x;
    } catch (const Error&) {
      lambda = std::max(10 * lambda, lambda_start);
      newton_point = false;
      continue;
    }
    const real largest = inf_norm(step);
    const bool clipped = largest > max_step;
    if (clipped) step *= max_step / largest;

    const real slack = 4 * std::numeric_limits<real>::epsilon() * std::max(std::abs(energy), real(1));
    real fraction = 1;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, fraction /= 2) {
      const Vector trial = out.q + fraction * step;
      auto [e_trial, c_trial] = energy_at(trial);
      if (e_trial <= energy + slack) {
        out.q = trial;
        energy = e_trial;
        contacts = std::move(c_trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      lambda = std::max(10 * lambda, lambda_start);
      newton_point = false;
      continue;
    }
    out.energies.push_back(energy);
    newton_point = lambda == 0 && !clipped && fraction == 1;
    lambda = lambda / 10 < lambda_min ? real(0) : lambda / 10;
  }
  throw StepFailure("quasi-static solve did not converge (|dV/dq|_inf = " + std::to_string(out.gradient_norm) + ")",
                    out.gradient_norm);
}

}  // namespace dem
