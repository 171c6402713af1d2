#pragma once

#include "dem/contact.hpp"
#include "dem/forces.hpp"
#include "dem/linsolve.hpp"
#include "dem/model.hpp"

#include <vector>

namespace dem {

// Where the right-end discrete forcing Q_d+ = (h/2) Q(q_{k+1-alpha}, dq/h) goes.
//   folded:   into the momentum, p_{k+1} = D2 L_d + Q_d+; the next residual
//             carries no separate forcing term.
//   momentum: p_{k+1} = D2 L_d, and the next residual adds (h/2) Q(q_k, M^-1 p_k).
// Both give the same trajectory for alpha = 0, where `momentum` is always used
// so that p_{k+1} = M (q_{k+1} - q_k) / h. For alpha = 1/2 only `folded` is
// second-order accurate once damping is present.
enum class ForcingMode { folded, momentum };

struct VIConfig {
  real alpha = 0.5;
  real h = 1e-5;
  real newton_tol = 1e-10;   // on |dq|_inf, absolute length
  int newton_max = 50;
  real residual_tol = 1e-8;  // on |R|_inf relative to the step's momentum scale
  int freeze_after = 10;     // Newton iterations before the contact set is frozen
  bool exact_hessian = false;
  ForcingMode forcing = ForcingMode::folded;
  CGSettings cg{};
};

void validate(const VIConfig& cfg);

struct StepReport {
  int newton_iterations = 0;
  real residual = 0;        // |R(q_{k+1})|_inf
  real residual_limit = 0;  // tolerance the residual was accepted against
  int cg_iterations = 0;
  int contacts = 0;
  bool frozen = false;
};

struct StepFailure : Error {
  StepFailure(const std::string& what, real residual_) : Error(what), residual(residual_) {}
  real residual;
};

// L_d = (1/2h) dq^T M dq - h V(q_{k+alpha}).
real discrete_lagrangian(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                         const Vector& q_k, const Vector& q_k1, ContactDetector& detector);

// (h/2) Q(q_k, M^-1 p_k), the forcing evaluated from the momentum at step k.
Vector momentum_forcing(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                        const Vector& q_k, const Vector& p_k, ContactDetector& detector);

// R = p_k - (1/h) M dq - h (1-alpha) dV/dq(q_{k+alpha}) + (h/2) Q(q_{k+alpha}, dq/h) + forcing_k
Vector residual(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg, const Vector& q_k,
                const Vector& q_k1, const Vector& p_k, const Vector& forcing_k, ContactDetector& detector);

// K = dR/dq_{k+1}. The default drops the position derivatives of the
// potential and damping terms; exact_hessian restores them.
BlockMatrix stiffness(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                      const Vector& q_k, const Vector& q_k1, ContactDetector& detector);

struct PositionSolve {
  Vector q_next;
  Vector displacement;  // q_{k+1} - q_k, without cancellation error
  Vector gradient;      // dV/dq at q_{k+alpha}
  Vector damping;       // Q(q_{k+alpha}, dq/h)
  StepReport report;
};

PositionSolve implicit_position_solve(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                                      const Vector& q_k, const Vector& p_k, const Vector& forcing_k,
                                      ContactDetector& detector);

// p_{k+1} = D2 L_d = (1/h) M (q_{k+1} - q_k) - h alpha dV/dq(q_{k+alpha})
Vector momentum_update(const ParticleSystem& system, const ContactParams& params, const VIConfig& cfg,
                       const Vector& q_k, const Vector& q_k1, ContactDetector& detector);

struct VIStep {
  GeneralizedState state;
  StepReport report;
};

VIStep vi_step(const GeneralizedState& state, const ParticleSystem& system, const ContactParams& params,
               const VIConfig& cfg, ContactDetector& detector);

struct QuasiStaticConfig {
  real tolerance = 0;  // on |dV/dq|_inf; 0 selects 1e-8 * k_n * d
  int max_iterations = 200;
  real max_step = 0;   // per-coordinate step cap; 0 selects 0.1 d
  CGSettings cg{};
};

struct QuasiStaticResult {
  Vector q;
  int iterations = 0;
  real gradient_norm = 0;
  std::vector<real> energies;  // V after every accepted iterate, starting with V(q_init)
};

// Minimises V by damped Newton iteration on dV/dq = 0. Orientations are held fixed.
QuasiStaticResult quasi_static_solve(const ParticleSystem& system, const ContactParams& params, const Vector& q_init,
                                     const QuasiStaticConfig& cfg, ContactDetector& detector);

}  // namespace dem
