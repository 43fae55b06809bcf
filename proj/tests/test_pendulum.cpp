#include "memrl/pendulum.hpp"

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

using namespace memrl;

namespace {

constexpr double kDeg = kPi / 180.0;

PendulumConfig free_plant() {
  PendulumConfig cfg;
  cfg.push_torque = 0.0;
  cfg.arm_viscous_damping = 0.0;
  cfg.pendulum_viscous_damping = 0.0;
  return cfg;
}

// ---------------------------------------------------------------------------
// Independent oracle: accelerations re-derived from rod geometry alone.
//
// Both rods are described only by a point-position function; kinetic and
// potential energy are integrated numerically along the rods (Simpson rule,
// exact for the quadratic-in-arclength speed profile), and the equations of
// motion are extracted from the Lagrangian by finite differences. No part of
// the production mass-matrix algebra is reused.
// ---------------------------------------------------------------------------

struct Vec3 {
  double x, y, z;
};

// Point at arclength u along the arm rod (horizontal, rotating about z).
Vec3 arm_point(double theta, double /*alpha*/, double u) {
  return {u * std::cos(theta), u * std::sin(theta), 0.0};
}

// Point at arclength u along the pendulum rod. The pendulum pivots at the arm
// tip about the arm's axis; alpha = 0 is straight up.
Vec3 pend_point(double theta, double alpha, double u, const PendulumConfig& c) {
  const double er_x = std::cos(theta), er_y = std::sin(theta);
  const double et_x = -std::sin(theta), et_y = std::cos(theta);
  return {c.arm_length * er_x + u * std::sin(alpha) * et_x,
          c.arm_length * er_y + u * std::sin(alpha) * et_y, u * std::cos(alpha)};
}

template <typename PointFn>
Vec3 point_velocity(PointFn&& pt, double theta, double alpha, double theta_dot, double alpha_dot,
                    double u) {
  const double h = 1e-6;
  const Vec3 pt_th_p = pt(theta + h, alpha, u);
  const Vec3 pt_th_m = pt(theta - h, alpha, u);
  const Vec3 pt_al_p = pt(theta, alpha + h, u);
  const Vec3 pt_al_m = pt(theta, alpha - h, u);
  const double inv = 1.0 / (2.0 * h);
  return {(pt_th_p.x - pt_th_m.x) * inv * theta_dot + (pt_al_p.x - pt_al_m.x) * inv * alpha_dot,
          (pt_th_p.y - pt_th_m.y) * inv * theta_dot + (pt_al_p.y - pt_al_m.y) * inv * alpha_dot,
          (pt_th_p.z - pt_th_m.z) * inv * theta_dot + (pt_al_p.z - pt_al_m.z) * inv * alpha_dot};
}

// Simpson integration of f over [0, len] with n (even) intervals.
template <typename F>
double simpson(F&& f, double len, int n) {
  const double h = len / n;
  double s = f(0.0) + f(len);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double lagrangian(const PendulumConfig& c, double theta, double theta_dot, double alpha,
                  double alpha_dot) {
  const double rho_arm = c.arm_mass / c.arm_length;
  const double rho_pend = c.pendulum_mass / c.pendulum_length;

  auto arm_speed2 = [&](double u) {
    const Vec3 v = point_velocity([&](double th, double al, double uu) { return arm_point(th, al, uu); },
                                  theta, alpha, theta_dot, alpha_dot, u);
    return v.x * v.x + v.y * v.y + v.z * v.z;
  };
  auto pend_speed2 = [&](double u) {
    const Vec3 v = point_velocity(
        [&](double th, double al, double uu) { return pend_point(th, al, uu, c); }, theta, alpha,
        theta_dot, alpha_dot, u);
    return v.x * v.x + v.y * v.y + v.z * v.z;
  };
  auto pend_height = [&](double u) { return pend_point(theta, alpha, u, c).z; };

  const double kinetic = 0.5 * rho_arm * simpson(arm_speed2, c.arm_length, 8) +
                         0.5 * rho_pend * simpson(pend_speed2, c.pendulum_length, 8);
  const double potential = rho_pend * c.gravity * simpson(pend_height, c.pendulum_length, 8);
  return kinetic - potential;
}

// Solves d/dt(dL/dq_dot) - dL/dq = Q for the accelerations, all derivatives
// taken numerically.
std::array<double, 2> oracle_accelerations(const PendulumConfig& c, const PendulumState& s,
                                           double tau) {
  const double h = 1e-4;
  const std::array<double, 4> base = {s.theta, s.theta_dot, s.alpha, s.alpha_dot};
  auto L = [&](const std::array<double, 4>& q) { return lagrangian(c, q[0], q[1], q[2], q[3]); };
  auto bumped = [&](int idx, double d) {
    std::array<double, 4> q = base;
    q[idx] += d;
    return q;
  };
  // Velocity indices: theta_dot = 1, alpha_dot = 3; positions 0 and 2.
  const int vel[2] = {1, 3};
  const int pos[2] = {0, 2};

  double mass[2][2];
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (i == j) {
        mass[i][j] = (L(bumped(vel[i], h)) - 2.0 * L(base) + L(bumped(vel[i], -h))) / (h * h);
      } else {
        std::array<double, 4> pp = base, pm = base, mp = base, mm = base;
        pp[vel[i]] += h;
        pp[vel[j]] += h;
        pm[vel[i]] += h;
        pm[vel[j]] -= h;
        mp[vel[i]] -= h;
        mp[vel[j]] += h;
        mm[vel[i]] -= h;
        mm[vel[j]] -= h;
        mass[i][j] = (L(pp) - L(pm) - L(mp) + L(mm)) / (4.0 * h * h);
      }
    }
  }

  // d/dt(dL/dq_dot_i) also picks up d2L/(dq_dot_i dq_j) * q_dot_j.
  double drift[2] = {0.0, 0.0};
  const double qdot[2] = {s.theta_dot, s.alpha_dot};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      std::array<double, 4> pp = base, pm = base, mp = base, mm = base;
      pp[vel[i]] += h;
      pp[pos[j]] += h;
      pm[vel[i]] += h;
      pm[pos[j]] -= h;
      mp[vel[i]] -= h;
      mp[pos[j]] += h;
      mm[vel[i]] -= h;
      mm[pos[j]] -= h;
      const double cross = (L(pp) - L(pm) - L(mp) + L(mm)) / (4.0 * h * h);
      drift[i] += cross * qdot[j];
    }
  }

  double dl_dq[2];
  for (int i = 0; i < 2; ++i) {
    dl_dq[i] = (L(bumped(pos[i], h)) - L(bumped(pos[i], -h))) / (2.0 * h);
  }

  const double rhs[2] = {tau - c.arm_viscous_damping * s.theta_dot + dl_dq[0] - drift[0],
                         -c.pendulum_viscous_damping * s.alpha_dot + dl_dq[1] - drift[1]};

  const double det = mass[0][0] * mass[1][1] - mass[0][1] * mass[1][0];
  return {(rhs[0] * mass[1][1] - rhs[1] * mass[0][1]) / det,
          (rhs[1] * mass[0][0] - rhs[0] * mass[1][0]) / det};
}

// Recovers the production accelerations from two short integrations
// (Richardson-extrapolated forward differences of the velocities).
std::array<double, 2> production_accelerations(const PendulumConfig& cfg, const PendulumState& s,
                                               Action a) {
  auto rate = [&](double dt) {
    PendulumConfig c = cfg;
    c.dt = dt;
    const StepResult r = step(s, a, c);
    return std::array<double, 2>{(r.state.theta_dot - s.theta_dot) / dt,
                                 (r.state.alpha_dot - s.alpha_dot) / dt};
  };
  const std::array<double, 2> fine = rate(1e-5);
  const std::array<double, 2> coarse = rate(2e-5);
  return {2.0 * fine[0] - coarse[0], 2.0 * fine[1] - coarse[1]};
}

}  // namespace

TEST_CASE("angles wrap into the half-open interval ending at pi") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(2.0 * kPi) == doctest::Approx(0.0));
  CHECK(wrap_angle(0.1 - 4.0 * kPi) == doctest::Approx(0.1));
  CHECK(wrap_angle(-0.3) == doctest::Approx(-0.3));
}

TEST_CASE("reward is zero strictly inside the ten-degree upright band") {
  auto r = [](double alpha) {
    PendulumState s;
    s.alpha = alpha;
    return reward(s);
  };
  CHECK(r(0.0) == 0);
  CHECK(r(0.05) == 0);   // ~2.9 degrees
  CHECK(r(0.25) == -1);  // ~14.3 degrees
  CHECK(r(10.0 * kDeg) == -1);  // boundary itself fails (strict inequality)
  CHECK(r(std::nextafter(10.0 * kDeg, 0.0)) == 0);
  CHECK(r(kPi) == -1);
  CHECK(r(2.0 * kPi - 0.05) == 0);  // wrapped equivalent of -0.05

  for (int i = -400; i <= 400; ++i) {
    const double alpha = i * 0.01;
    const bool inside = std::fabs(wrap_angle(alpha)) < kUprightBandRad;
    CHECK(r(alpha) == (inside ? 0 : -1));
  }
}

TEST_CASE("trial constants match the published protocol") {
  CHECK(kUprightBandRad == doctest::Approx(10.0 * kDeg).epsilon(1e-15));
  CHECK(kTrialStepLimit == 5000);
}

TEST_CASE("exact upright is a fixed point when no torque is applied") {
  PendulumConfig cfg = free_plant();
  const StepResult r = step(PendulumState{}, Action::CW, cfg);
  CHECK(r.state.theta == 0.0);
  CHECK(r.state.theta_dot == 0.0);
  CHECK(r.state.alpha == 0.0);
  CHECK(r.state.alpha_dot == 0.0);
  CHECK(r.reward == 0);
  CHECK(!r.failed);
}

TEST_CASE("upright equilibrium is unstable for the free pendulum") {
  PendulumConfig cfg = free_plant();
  PendulumState s;
  s.alpha = 5.0 * kDeg;
  double prev = std::fabs(s.alpha);
  for (int i = 0; i < 10; ++i) {
    s = step(s, Action::CW, cfg).state;
    CHECK(std::fabs(s.alpha) > prev);
    prev = std::fabs(s.alpha);
  }
}

TEST_CASE("one step conserves energy within 0.1 percent of a hundredfold-finer integration") {
  PendulumConfig coarse = free_plant();
  PendulumConfig fine = free_plant();
  fine.dt = coarse.dt / 100.0;

  PendulumState s0;
  s0.theta = 0.3;
  s0.theta_dot = 0.5;
  s0.alpha = 0.4;
  s0.alpha_dot = -0.2;

  const PendulumState coarse_out = step(s0, Action::CCW, coarse).state;
  PendulumState fine_out = s0;
  for (int i = 0; i < 100; ++i) fine_out = step(fine_out, Action::CCW, fine).state;

  const double e_coarse = mechanical_energy(coarse_out, coarse);
  const double e_fine = mechanical_energy(fine_out, fine);
  CHECK(std::fabs(e_coarse - e_fine) / std::fabs(e_fine) < 1e-3);

  // The fine integration itself must hold the invariant it is used to check.
  const double e0 = mechanical_energy(s0, fine);
  CHECK(std::fabs(e_fine - e0) / std::fabs(e0) < 1e-6);
}

TEST_CASE("accelerations match a Lagrangian oracle built from rod geometry") {
  PendulumConfig cfg;  // standard plant, damping and push active
  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> angle(-2.5, 2.5);
  std::uniform_real_distribution<double> speed(-3.0, 3.0);

  for (int trial = 0; trial < 50; ++trial) {
    PendulumState s;
    s.theta = angle(rng);
    s.theta_dot = speed(rng);
    s.alpha = angle(rng);
    s.alpha_dot = speed(rng);
    const Action a = (trial % 2 == 0) ? Action::CCW : Action::CW;
    const double tau = (a == Action::CCW ? cfg.push_torque : -cfg.push_torque);

    const std::array<double, 2> want = oracle_accelerations(cfg, s, tau);
    const std::array<double, 2> got = production_accelerations(cfg, s, a);
    for (int i = 0; i < 2; ++i) {
      const double scale = std::max(1.0, std::fabs(want[i]));
      CHECK(std::fabs(got[i] - want[i]) / scale < 1e-4);
    }
  }
}

TEST_CASE("dynamics are equivariant under mirroring the plant") {
  PendulumConfig cfg;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  for (int trial = 0; trial < 200; ++trial) {
    PendulumState s;
    s.theta = 2.0 * u(rng);
    s.theta_dot = 3.0 * u(rng);
    s.alpha = 2.0 * u(rng);
    s.alpha_dot = 3.0 * u(rng);
    const Action a = u(rng) > 0.0 ? Action::CCW : Action::CW;

    PendulumState neg;
    neg.theta = -s.theta;
    neg.theta_dot = -s.theta_dot;
    neg.alpha = -s.alpha;
    neg.alpha_dot = -s.alpha_dot;

    const PendulumState fwd = step(s, a, cfg).state;
    const PendulumState mir = step(neg, flip(a), cfg).state;

    CHECK(mir.theta == doctest::Approx(-fwd.theta).epsilon(1e-12));
    CHECK(mir.theta_dot == doctest::Approx(-fwd.theta_dot).epsilon(1e-12));
    CHECK(mir.alpha == doctest::Approx(-fwd.alpha).epsilon(1e-12));
    CHECK(mir.alpha_dot == doctest::Approx(-fwd.alpha_dot).epsilon(1e-12));
  }
}

TEST_CASE("state normalization scales per component and appends the bias input") {
  NormalizationBounds b;
  PendulumState s;
  std::array<double, 5> v = normalize_state(s, b);
  CHECK(v == std::array<double, 5>{0.0, 0.0, 0.0, 0.0, 1.0});

  s.alpha = b.alpha_max;
  CHECK(normalize_state(s, b)[2] == doctest::Approx(1.0));
  s.alpha = -0.5 * b.alpha_max;
  CHECK(normalize_state(s, b)[2] == doctest::Approx(-0.5));

  s = PendulumState{};
  s.theta = 2.0 * kPi;  // wraps to zero before scaling
  CHECK(normalize_state(s, b)[0] == doctest::Approx(0.0));
  s.theta_dot = b.theta_dot_max;
  CHECK(normalize_state(s, b)[1] == doctest::Approx(1.0));
}

TEST_CASE("state pools are deterministic, upright, and inside the declared ranges") {
  InitialStateRanges ranges;
  const std::vector<PendulumState> pool = make_state_pool(500, ranges, 42);
  const std::vector<PendulumState> again = make_state_pool(500, ranges, 42);

  REQUIRE(pool.size() == 500);
  REQUIRE(again.size() == 500);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CHECK(pool[i].theta == again[i].theta);
    CHECK(pool[i].theta_dot == again[i].theta_dot);
    CHECK(pool[i].alpha == again[i].alpha);
    CHECK(pool[i].alpha_dot == again[i].alpha_dot);

    CHECK(reward(pool[i]) == 0);
    CHECK(std::fabs(pool[i].theta) <= ranges.theta);
    CHECK(std::fabs(pool[i].theta_dot) <= ranges.theta_dot);
    CHECK(std::fabs(pool[i].alpha) < ranges.alpha_frac * kUprightBandRad);
    CHECK(std::fabs(pool[i].alpha_dot) <= ranges.alpha_dot);
  }

  const std::vector<PendulumState> other = make_state_pool(500, ranges, 43);
  bool any_diff = false;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].alpha != other[i].alpha) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("initial-state sampling draws uniformly from the pool") {
  InitialStateRanges ranges;
  std::mt19937_64 rng(11);

  const std::vector<PendulumState> single = make_state_pool(1, ranges, 5);
  for (int i = 0; i < 10; ++i) {
    CHECK(&sample_initial_state(rng, single) == &single[0]);
  }

  const std::vector<PendulumState> pool = make_state_pool(10, ranges, 5);
  std::array<int, 10> hits{};
  for (int i = 0; i < 10000; ++i) {
    const PendulumState& s = sample_initial_state(rng, pool);
    hits[static_cast<std::size_t>(&s - pool.data())]++;
  }
  for (int count : hits) {
    CHECK(count > 800);
    CHECK(count < 1200);
  }

  const std::vector<PendulumState> empty;
  CHECK_THROWS_AS((void)sample_initial_state(rng, empty), std::invalid_argument);
}

TEST_CASE("a non-finite trajectory raises the divergence fault") {
  PendulumConfig cfg;
  PendulumState s;
  s.theta_dot = 1e308;
  s.alpha_dot = 1e308;
  CHECK_THROWS_AS((void)step(s, Action::CW, cfg), IntegrationDiverged);
}

TEST_CASE("config validation rejects non-physical parameters") {
  PendulumConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  PendulumConfig bad = cfg;
  bad.pendulum_mass = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.dt = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.push_torque = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  NormalizationBounds nb;
  nb.alpha_max = 0.0;
  CHECK_THROWS_AS(nb.validate(), std::invalid_argument);
}
