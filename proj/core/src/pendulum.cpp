#include "memrl/pendulum.hpp"

#include <cmath>

namespace memrl {
namespace {

// Lumped inertia constants of the two-rod plant.
//   j0: arm + pendulum-mass inertia about the vertical axis at alpha = 0
//   j1: arm/pendulum coupling term
//   j2: pendulum inertia about its pivot
//   mgl: pendulum weight moment
struct Inertias {
  double j0, j1, j2, mgl;
};

Inertias inertias(const PendulumConfig& c) {
  const double lp = 0.5 * c.pendulum_length;  // pendulum center of mass
  Inertias k{};
  k.j0 = c.arm_mass * c.arm_length * c.arm_length / 3.0 +
         c.pendulum_mass * c.arm_length * c.arm_length;
  k.j1 = c.pendulum_mass * c.arm_length * lp;
  k.j2 = c.pendulum_mass * c.pendulum_length * c.pendulum_length / 3.0;
  k.mgl = c.pendulum_mass * c.gravity * lp;
  return k;
}

struct Derivatives {
  double theta_dot, theta_ddot, alpha_dot, alpha_ddot;
};

// Equations of motion in mass-matrix form:
//   [j0 + j2*sin^2(al)   j1*cos(al)] [th_dd]   [tau - b_th*th_d - 2*j2*sin(al)*cos(al)*th_d*al_d + j1*sin(al)*al_d^2]
//   [j1*cos(al)          j2       ] [al_dd] = [-b_al*al_d + j2*sin(al)*cos(al)*th_d^2 + mgl*sin(al)               ]
Derivatives derivatives(const PendulumState& s, double tau, const PendulumConfig& c,
                        const Inertias& k) {
  const double sa = std::sin(s.alpha);
  const double ca = std::cos(s.alpha);

  const double m00 = k.j0 + k.j2 * sa * sa;
  const double m01 = k.j1 * ca;
  const double m11 = k.j2;

  const double b_th = tau - c.arm_viscous_damping * s.theta_dot -
                      2.0 * k.j2 * sa * ca * s.theta_dot * s.alpha_dot +
                      k.j1 * sa * s.alpha_dot * s.alpha_dot;
  const double b_al = -c.pendulum_viscous_damping * s.alpha_dot +
                      k.j2 * sa * ca * s.theta_dot * s.theta_dot + k.mgl * sa;

  // The mass matrix is positive definite for physical parameters
  // (j0*j2 > j1^2 whenever both rods have mass), so det > 0.
  const double det = m00 * m11 - m01 * m01;

  Derivatives d{};
  d.theta_dot = s.theta_dot;
  d.alpha_dot = s.alpha_dot;
  d.theta_ddot = (b_th * m11 - b_al * m01) / det;
  d.alpha_ddot = (b_al * m00 - b_th * m01) / det;
  return d;
}

PendulumState advance(const PendulumState& s, const Derivatives& d, double h) {
  PendulumState r;
  r.theta = s.theta + h * d.theta_dot;
  r.theta_dot = s.theta_dot + h * d.theta_ddot;
  r.alpha = s.alpha + h * d.alpha_dot;
  r.alpha_dot = s.alpha_dot + h * d.alpha_ddot;
  return r;
}

PendulumState rk4_step(const PendulumState& s, double tau, double h, const PendulumConfig& c,
                       const Inertias& k) {
  const Derivatives d1 = derivatives(s, tau, c, k);
  const Derivatives d2 = derivatives(advance(s, d1, 0.5 * h), tau, c, k);
  const Derivatives d3 = derivatives(advance(s, d2, 0.5 * h), tau, c, k);
  const Derivatives d4 = derivatives(advance(s, d3, h), tau, c, k);

  PendulumState r;
  r.theta = s.theta + h / 6.0 * (d1.theta_dot + 2.0 * d2.theta_dot + 2.0 * d3.theta_dot + d4.theta_dot);
  r.theta_dot =
      s.theta_dot + h / 6.0 * (d1.theta_ddot + 2.0 * d2.theta_ddot + 2.0 * d3.theta_ddot + d4.theta_ddot);
  r.alpha = s.alpha + h / 6.0 * (d1.alpha_dot + 2.0 * d2.alpha_dot + 2.0 * d3.alpha_dot + d4.alpha_dot);
  r.alpha_dot =
      s.alpha_dot + h / 6.0 * (d1.alpha_ddot + 2.0 * d2.alpha_ddot + 2.0 * d3.alpha_ddot + d4.alpha_ddot);
  return r;
}

bool finite(const PendulumState& s) {
  return std::isfinite(s.theta) && std::isfinite(s.theta_dot) && std::isfinite(s.alpha) &&
         std::isfinite(s.alpha_dot);
}

}  // namespace

void PendulumConfig::validate() const {
  if (!(pendulum_mass > 0.0) || !(pendulum_length > 0.0) || !(arm_mass > 0.0) ||
      !(arm_length > 0.0) || !(gravity > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("pendulum config: masses, lengths, gravity and dt must be positive");
  }
  if (arm_viscous_damping < 0.0 || pendulum_viscous_damping < 0.0 || push_torque < 0.0) {
    throw std::invalid_argument("pendulum config: damping and push torque must be non-negative");
  }
}

void NormalizationBounds::validate() const {
  if (!(theta_max > 0.0) || !(theta_dot_max > 0.0) || !(alpha_max > 0.0) || !(alpha_dot_max > 0.0)) {
    throw std::invalid_argument("normalization bounds must be positive");
  }
}

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a > kPi) a -= 2.0 * kPi;
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

int reward(const PendulumState& s) {
  return std::fabs(wrap_angle(s.alpha)) < kUprightBandRad ? 0 : -1;
}

StepResult step(const PendulumState& s, Action a, const PendulumConfig& cfg) {
  const Inertias k = inertias(cfg);
  const double tau = (a == Action::CCW ? cfg.push_torque : -cfg.push_torque);

  StepResult r;
  r.state = rk4_step(s, tau, cfg.dt, cfg, k);
  if (!finite(r.state)) {
    throw IntegrationDiverged("pendulum integration produced a non-finite state");
  }
  r.reward = reward(r.state);
  r.failed = r.reward == -1;
  return r;
}

double mechanical_energy(const PendulumState& s, const PendulumConfig& c) {
  const Inertias k = inertias(c);
  const double sa = std::sin(s.alpha);
  const double ca = std::cos(s.alpha);
  const double kinetic = 0.5 * (k.j0 + k.j2 * sa * sa) * s.theta_dot * s.theta_dot +
                         0.5 * k.j2 * s.alpha_dot * s.alpha_dot +
                         k.j1 * ca * s.theta_dot * s.alpha_dot;
  const double potential = k.mgl * ca;
  return kinetic + potential;
}

std::array<double, 5> normalize_state(const PendulumState& s, const NormalizationBounds& b) {
  return {wrap_angle(s.theta) / b.theta_max, s.theta_dot / b.theta_dot_max,
          wrap_angle(s.alpha) / b.alpha_max, s.alpha_dot / b.alpha_dot_max, 1.0};
}

std::vector<PendulumState> make_state_pool(std::size_t n, const InitialStateRanges& r,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double alpha_bound = r.alpha_frac * kUprightBandRad;

  std::vector<PendulumState> pool;
  pool.reserve(n);
  while (pool.size() < n) {
    PendulumState s;
    s.theta = r.theta * unit(rng);
    s.theta_dot = r.theta_dot * unit(rng);
    s.alpha = alpha_bound * unit(rng);
    s.alpha_dot = r.alpha_dot * unit(rng);
    if (reward(s) != 0) continue;  // guard: every pool state starts upright
    pool.push_back(s);
  }
  return pool;
}

const PendulumState& sample_initial_state(std::mt19937_64& rng,
                                          const std::vector<PendulumState>& pool) {
  if (pool.empty()) throw std::invalid_argument("initial state pool is empty");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

}  // namespace memrl
