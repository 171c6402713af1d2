#include "dem/vi_integrator.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace dem;

namespace {

constexpr real kStiffness = 195000;

real contact_time() { return std::numbers::pi * std::sqrt(1 / (2 * kStiffness)); }

ContactParams impact_params(real gamma) {
  ContactParams p;
  p.k_n = kStiffness;
  p.gamma = gamma;
  return p;
}

// Head-on pair already overlapping by 0.06 d and still approaching.
ParticleSystem mid_contact_pair(real speed = 1) {
  ParticleSystem sys;
  sys.particles.push_back(sphere(1, 1, Vec3(0.47, 0.01, 0), Vec3(-speed, 0.05, 0), Vec3(0, 0, 0.3)));
  sys.particles.push_back(sphere(1, 1, Vec3(-0.47, -0.01, 0), Vec3(speed, 0, 0.02), Vec3(0.1, 0, 0)));
  return sys;
}

VIConfig config(real alpha, real h) {
  VIConfig c;
  c.alpha = alpha;
  c.h = h;
  return c;
}

ParticleSystem single(real mass, const Vec3& x, const Vec3& v, real gravity = 0) {
  ParticleSystem sys;
  sys.particles.push_back(sphere(1, mass, x, v));
  sys.gravity = gravity;
  return sys;
}

Vec3 total_momentum(const Vector& p) {
  Vec3 s = Vec3::Zero();
  for (Eigen::Index i = 0; i < p.size() / 6; ++i) s += p.segment<3>(6 * i);
  return s;
}

}  // namespace

TEST_SUITE("vi_integrator") {
  TEST_CASE("config validation") {
    CHECK_NOTHROW(validate(config(0, 1e-3)));
    CHECK_NOTHROW(validate(config(0.5, 1e-3)));
    CHECK_THROWS(validate(config(0.3, 1e-3)));
    CHECK_THROWS(validate(config(0.5, 0)));
    VIConfig c = config(0.5, 1e-3);
    c.newton_max = 0;
    CHECK_THROWS(validate(c));
  }

  TEST_CASE("discrete Lagrangian examples") {
    ContactDetector det;
    const ParticleSystem lone = single(1, Vec3::Zero(), Vec3::Zero());
    const Vector q = pack_positions(lone);
    CHECK(discrete_lagrangian(lone, {}, config(0.5, 0.01), q, q, det) == 0);

    const real h = 0.01;
    Vector q1 = q;
    q1(0) = h;
    CHECK(discrete_lagrangian(lone, {}, config(0.5, h), q, q1, det) == doctest::Approx(h / 2).epsilon(1e-14));

    // V depends on z only and the motion is along x, so the quadrature point does not matter.
    const ParticleSystem falling = single(1, Vec3(0, 0, 3), Vec3::Zero(), 1);
    const Vector q0 = pack_positions(falling);
    Vector q2 = q0;
    q2(0) = 0.02;
    CHECK(discrete_lagrangian(falling, {}, config(0, h), q0, q2, det) ==
          discrete_lagrangian(falling, {}, config(0.5, h), q0, q2, det));
  }

  TEST_CASE("residual vanishes for free flight at the momentum guess") {
    ContactDetector det;
    const ParticleSystem sys = single(2, Vec3::Zero(), Vec3(1, -0.5, 0.25));
    const GeneralizedState s = pack_state(sys);
    const real h = 0.25;
    const Vector guess = s.q + h * assemble_mass_matrix(sys).solve(s.p);
    for (real alpha : {0.0, 0.5})
      CHECK(residual(sys, {}, config(alpha, h), s.q, guess, s.p, Vector(), det) == Vector::Zero(6));
  }

  TEST_CASE("residual under gravity keeps only the gravity term for alpha 0") {
    ContactDetector det;
    const ParticleSystem sys = single(2, Vec3(0, 0, 4), Vec3(1, 0, 0), 1);
    const GeneralizedState s = pack_state(sys);
    const real h = 0.25;
    const Vector guess = s.q + h * assemble_mass_matrix(sys).solve(s.p);
    Vector expected = Vector::Zero(6);
    expected(2) = -h * 2 * 1;
    CHECK(residual(sys, {}, config(0, h), s.q, guess, s.p, Vector(), det) == expected);
  }

  TEST_CASE("residual equals the q_k derivative of L_d plus forcing") {
    const ParticleSystem sys = mid_contact_pair();
    const ContactParams params = impact_params(30);
    const real h = contact_time() / 160;
    for (real alpha : {0.0, 0.5}) {
      CAPTURE(alpha);
      const VIConfig cfg = config(alpha, h);
      ContactDetector det;
      const GeneralizedState s = pack_state(sys);
      // A trial q_{k+1} off the solution, so every term is non-trivial.
      Vector q1 = s.q + h * assemble_mass_matrix(sys).solve(s.p);
      q1(0) -= 0.3 * h;
      q1(7) += 0.1 * h;
      const Vector forcing = momentum_forcing(sys, params, cfg, s.q, s.p, det);
      const Vector r = residual(sys, params, cfg, s.q, q1, s.p, forcing, det);

      auto lagrangian = [&](const Vector& qk) {
        Vector out(1);
        out(0) = discrete_lagrangian(sys, params, cfg, qk, q1, det);
        return out;
      };
      const Vector d1 = testing::fd_jacobian(lagrangian, s.q, 1e-7).transpose();
      const Vector q_a = s.q + alpha * (q1 - s.q);
      const Vector v = (q1 - s.q) / h;
      const ContactSet c = detect_contacts_brute_force(sys, q_a, v);
      const Vector damping = (h / 2) * nonconservative_force(sys, q_a, v, c, params);
      CHECK(testing::relative_error(r - s.p - damping - forcing, d1) < 1e-6);
    }
  }

  TEST_CASE("stiffness without contacts is minus M over h") {
    ContactDetector det;
    const ParticleSystem sys = single(2, Vec3::Zero(), Vec3(1, 0, 0));
    const Vector q = pack_positions(sys);
    const BlockMatrix k = stiffness(sys, {}, config(0.5, 0.1), q, q, det);
    const Vector expected = -assemble_mass_matrix(sys).diagonal / 0.1;
    CHECK(k.to_dense() == Eigen::MatrixXd(expected.asDiagonal()));
  }

  TEST_CASE("normal-damped contact adds half the dashpot to the off-diagonal block") {
    ContactDetector det;
    ContactParams params = impact_params(30);
    params.tangential_ratio = 0;
    ParticleSystem sys;
    sys.particles.push_back(sphere(1, 1, Vec3(0.45, 0, 0)));
    sys.particles.push_back(sphere(1, 1, Vec3(-0.45, 0, 0)));
    const Vector q = pack_positions(sys);
    const BlockMatrix k = stiffness(sys, params, config(0.5, 1e-4), q, q, det);
    const Mat3 nn = Vec3::UnitX() * Vec3::UnitX().transpose();
    CHECK((k.block(0, 1).topLeftCorner<3, 3>() - 0.5 * 30 * 0.25 * nn).norm() < 1e-12);
    const Eigen::MatrixXd dense = k.to_dense();
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0);
  }

  TEST_CASE("exact-Hessian stiffness is the derivative of the residual for undamped contacts") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      CAPTURE(seed);
      const ParticleSystem sys = testing::random_system(seed, {.walls = true, .bonds = true});
      ContactParams params = testing::random_params(seed);
      params.gamma = 0;
      VIConfig cfg = config(0.5, 1e-3);
      cfg.exact_hessian = true;
      ContactDetector det;
      const GeneralizedState s = pack_state(sys);
      const Vector q1 = s.q + cfg.h * assemble_mass_matrix(sys).solve(s.p);
      const Eigen::MatrixXd k = stiffness(sys, params, cfg, s.q, q1, det).to_dense();
      auto r = [&](const Vector& x) { return residual(sys, params, cfg, s.q, x, s.p, Vector(), det); };
      CHECK(testing::relative_error(k, testing::fd_jacobian(r, q1, 1e-7)) < 1e-6);
    }
  }

  TEST_CASE("faithful and exact-Hessian Newton reach the same step") {
    const ParticleSystem sys = mid_contact_pair();
    const ContactParams params = impact_params(30);
    const GeneralizedState s = pack_state(sys);
    VIConfig faithful = config(0.5, contact_time() / 160);
    VIConfig exact = faithful;
    exact.exact_hessian = true;
    ContactDetector d1, d2;
    const PositionSolve a = implicit_position_solve(sys, params, faithful, s.q, s.p, Vector(), d1);
    const PositionSolve b = implicit_position_solve(sys, params, exact, s.q, s.p, Vector(), d2);
    CHECK((a.q_next - b.q_next).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.report.residual <= a.report.residual_limit);
    CHECK(b.report.residual <= b.report.residual_limit);
    CHECK(b.report.newton_iterations <= a.report.newton_iterations);
  }

  TEST_CASE("free flight converges in one iteration") {
    ContactDetector det;
    const ParticleSystem sys = single(2, Vec3(1, 2, 3), Vec3(1, -0.5, 0.25));
    const GeneralizedState s = pack_state(sys);
    const real h = 0.25;
    const PositionSolve r = implicit_position_solve(sys, {}, config(0.5, h), s.q, s.p, Vector(), det);
    CHECK(r.report.newton_iterations == 1);
    CHECK(r.q_next == s.q + h * assemble_mass_matrix(sys).solve(s.p));
  }

  TEST_CASE("gravity-only step for alpha 0 matches the hand solution") {
    ContactDetector det;
    const real g = 9.81, h = 0.01, m = 3;
    const Vec3 x0(0.5, -1, 2), v0(0.3, 0.1, 2);
    const ParticleSystem sys = single(m, x0, v0, g);
    const GeneralizedState s = pack_state(sys);
    const PositionSolve r = implicit_position_solve(sys, {}, config(0, h), s.q, s.p, Vector(), det);
    // m (x1 - x0) / h = p0 - h m g z  =>  x1 = x0 + h v0 - h^2 g z
    const Vec3 x1 = x0 + h * v0 - h * h * g * Vec3::UnitZ();
    CHECK((r.q_next.head<3>() - x1).norm() < 1e-14);
    CHECK(r.q_next.tail<3>() == Vec3::Zero());
  }

  TEST_CASE("momentum update examples") {
    ContactDetector det;
    const real h = 0.01;
    const ParticleSystem free = single(2, Vec3::Zero(), Vec3(1, 0, 0));
    const GeneralizedState s = pack_state(free);
    const Vector q1 = s.q + h * assemble_mass_matrix(free).solve(s.p);
    CHECK(momentum_update(free, {}, config(0, h), s.q, q1, det) == s.p);

    const ParticleSystem falling = single(2, Vec3(0, 0, 1), Vec3::Zero(), 1);
    const Vector q0 = pack_positions(falling);
    Vector q2 = q0;
    q2(2) -= 3e-4;
    const Vector p = momentum_update(falling, {}, config(0.5, h), q0, q2, det);
    CHECK(p(2) == doctest::Approx(2 * (q2(2) - q0(2)) / h - h / 2 * 2 * 1).epsilon(1e-14));
    const Vector p0 = momentum_update(falling, {}, config(0, h), q0, q2, det);
    CHECK(p0(2) == 2 * (q2(2) - q0(2)) / h);
  }

  TEST_CASE("one hundred free-flight steps stay on a straight line") {
    ContactDetector det;
    const ParticleSystem sys = single(1.5, Vec3(0.1, 0.2, 0.3), Vec3(0.7, -1.1, 0.4));
    GeneralizedState s = pack_state(sys);
    const VIConfig cfg = config(0.5, 0.01);
    for (int k = 0; k < 100; ++k) s = vi_step(s, sys, {}, cfg, det).state;
    const Vec3 exact = Vec3(0.1, 0.2, 0.3) + 100 * 0.01 * Vec3(0.7, -1.1, 0.4);
    CHECK((s.q.head<3>() - exact).norm() < 1e-12);
    CHECK(s.k == 100);
    CHECK(s.t == doctest::Approx(1).epsilon(1e-13));
  }

  TEST_CASE("projectile under gravity follows the parabola with alpha 1/2") {
    const real g = 1, t_end = 1;
    std::vector<real> errors;
    for (real h : {0.02, 0.01}) {
      ContactDetector det;
      const ParticleSystem sys = single(1, Vec3::Zero(), Vec3(1, 0, 2), g);
      GeneralizedState s = pack_state(sys);
      const VIConfig cfg = config(0.5, h);
      const int n = static_cast<int>(std::lround(t_end / h));
      for (int k = 0; k < n; ++k) s = vi_step(s, sys, {}, cfg, det).state;
      const Vec3 exact(t_end, 0, 2 * t_end - 0.5 * g * t_end * t_end);
      errors.push_back((s.q.head<3>() - exact).norm());
      CHECK(errors.back() <= g * h * h);
    }
  }

  TEST_CASE("undamped collision conserves linear momentum every step") {
    const ParticleSystem sys = mid_contact_pair(1);
    const ContactParams params = impact_params(0);
    const VIConfig cfg = config(0.5, contact_time() / 160);
    ContactDetector det;
    GeneralizedState s = pack_state(sys);
    const Vec3 p0 = total_momentum(s.p);
    const real bound = 10 * cfg.newton_tol * 1 / cfg.h;
    real worst = 0;
    for (int k = 0; k < 200; ++k) {
      const Vec3 before = total_momentum(s.p);
      s = vi_step(s, sys, params, cfg, det).state;
      worst = std::max(worst, (total_momentum(s.p) - before).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= bound);
    CHECK(worst < 1e-12);
    CHECK((total_momentum(s.p) - p0).cwiseAbs().maxCoeff() < 1e-11);
  }

  TEST_CASE("too few Newton iterations raise StepFailure") {
    const ParticleSystem sys = mid_contact_pair();
    VIConfig cfg = config(0.5, contact_time() / 20);
    cfg.newton_max = 1;
    ContactDetector det;
    CHECK_THROWS_AS(vi_step(pack_state(sys), sys, impact_params(30), cfg, det), StepFailure);
  }

  TEST_CASE("random systems: momentum identity, momentum conservation and residual bound") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      CAPTURE(seed);
      const ParticleSystem sys = testing::random_system(seed, {.bonds = true});
      ContactParams params = testing::random_params(seed);
      for (real alpha : {0.0, 0.5}) {
        CAPTURE(alpha);
        const VIConfig cfg = config(alpha, 1e-3);
        const MassMatrix mass = assemble_mass_matrix(sys);
        ContactDetector det;
        GeneralizedState s = pack_state(sys);
        for (int k = 0; k < 5; ++k) {
          const VIStep next = vi_step(s, sys, params, cfg, det);
          CHECK(next.report.residual <= next.report.residual_limit);
          CHECK(next.report.newton_iterations <= cfg.newton_max);
          const real p_scale = std::max(s.p.cwiseAbs().maxCoeff(), next.state.p.cwiseAbs().maxCoeff());
          const Vec3 drift = total_momentum(next.state.p) - total_momentum(s.p);
          CHECK(drift.cwiseAbs().maxCoeff() <= 10 * cfg.newton_tol * mass.diagonal.maxCoeff() / cfg.h);
          CHECK(drift.cwiseAbs().maxCoeff() <= 1e-12 * std::max(p_scale, 1.0) * sys.size());
          if (alpha == 0) {
            const Vector identity = mass.apply(next.state.q - s.q) / cfg.h;
            const real q_scale = std::max(s.q.cwiseAbs().maxCoeff(), next.state.q.cwiseAbs().maxCoeff());
            const real eps = std::numeric_limits<real>::epsilon();
            CHECK((next.state.p - identity).cwiseAbs().maxCoeff() <=
                  4 * eps * (q_scale * mass.diagonal.maxCoeff() / cfg.h + p_scale));
          }
          s = next.state;
        }
      }
    }
  }

  TEST_CASE("quasi-static: particle resting on the floor") {
    ParticleSystem sys = single(1, Vec3(0, 0, 0.6), Vec3::Zero(), 1);
    sys.walls.push_back(make_wall(Vec3::Zero(), Vec3::UnitZ()));
    const ContactParams params = impact_params(0);
    ContactDetector det;
    const QuasiStaticResult r = quasi_static_solve(sys, params, pack_positions(sys), {}, det);
    const real overlap = 0.5 - r.q(2);
    CHECK(overlap == doctest::Approx(1 / kStiffness).epsilon(1e-10));
    for (std::size_t i = 1; i < r.energies.size(); ++i) CHECK(r.energies[i] <= r.energies[i - 1]);
  }

  TEST_CASE("quasi-static: stretched bond relaxes to contact") {
    ParticleSystem sys;
    sys.particles.push_back(sphere(1, 1, Vec3(0.6, 0, 0)));
    sys.particles.push_back(sphere(1, 1, Vec3(-0.6, 0, 0)));
    sys.bonds.push_back(Bond{0, 1, 1000});
    ContactDetector det;
    const QuasiStaticResult r = quasi_static_solve(sys, impact_params(0), pack_positions(sys), {}, det);
    CHECK((r.q.segment<3>(0) - r.q.segment<3>(6)).norm() == doctest::Approx(1).epsilon(1e-10));
    for (std::size_t i = 1; i < r.energies.size(); ++i) CHECK(r.energies[i] <= r.energies[i - 1]);
  }

  TEST_CASE("quasi-static leaves a dynamically settled cluster in place") {
    // Two spheres wedged between side walls with a third resting in their groove.
    ParticleSystem sys;
    sys.gravity = 1;
    sys.particles.push_back(sphere(1, 1, Vec3(0.5, 0, 0.55)));
    sys.particles.push_back(sphere(1, 1, Vec3(1.5, 0, 0.55)));
    sys.particles.push_back(sphere(1, 1, Vec3(1, 0, 1.55 + std::sqrt(0.75))));
    sys.walls = {make_wall(Vec3::Zero(), Vec3::UnitZ()), make_wall(Vec3::Zero(), Vec3::UnitX()),
                 make_wall(Vec3(2, 0, 0), -Vec3::UnitX())};
    ContactParams params;
    params.k_n = 2000;
    params.gamma = 100;
    const VIConfig cfg = config(0.5, 0.005);
    ContactDetector det;
    GeneralizedState s = pack_state(sys);
    for (int k = 0; k < 4000; ++k) s = vi_step(s, sys, params, cfg, det).state;
    CHECK(s.p.cwiseAbs().maxCoeff() < 1e-9);

    const QuasiStaticResult r = quasi_static_solve(sys, params, s.q, {}, det);
    CHECK(r.gradient_norm < 1e-8 * params.k_n);
    CHECK((r.q - s.q).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(r.iterations <= 2);
  }
}
