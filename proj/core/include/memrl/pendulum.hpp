#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace memrl {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kUprightBandRad = 10.0 * kPi / 180.0;  // reward band half-width
inline constexpr int kTrialStepLimit = 5000;                   // forced-success horizon

// Push applied to the rotary arm. There are exactly two actions; "no push"
// does not exist in this action space.
enum class Action : int { CW = 0, CCW = 1 };

inline int action_bit(Action a) { return static_cast<int>(a); }
inline Action flip(Action a) { return a == Action::CCW ? Action::CW : Action::CCW; }

struct PendulumState {
  double theta = 0.0;      // arm angle [rad], CCW positive; stored unwrapped
  double theta_dot = 0.0;  // arm angular velocity [rad/s]
  double alpha = 0.0;      // pendulum angle [rad], 0 = upright; stored unwrapped
  double alpha_dot = 0.0;  // pendulum angular velocity [rad/s]
};

// Rotary (arm + pendulum) plant. Both links are modeled as uniform rods:
// the arm rotates about a vertical axis at one end, the pendulum hangs from
// the arm tip and rotates about the arm's longitudinal axis. Viscous damping
// acts on both joints. The push torque has fixed magnitude; its sign is the
// action.
struct PendulumConfig {
  double pendulum_mass = 0.127;              // kg
  double pendulum_length = 0.3365;           // m
  double arm_mass = 0.257;                   // kg
  double arm_length = 0.216;                 // m
  double gravity = 9.81;                     // m/s^2
  double arm_viscous_damping = 0.0024;       // N*m*s/rad
  double pendulum_viscous_damping = 0.0024;  // N*m*s/rad
  double push_torque = 0.5;                  // N*m
  double dt = 0.02;                          // s, control/integration step

  // Throws std::invalid_argument when masses/lengths/dt are not positive or
  // damping/push are negative.
  void validate() const;
};

struct StepResult {
  PendulumState state;
  int reward = 0;       // 0 (inside upright band) or -1 (outside)
  bool failed = false;  // reward == -1
};

// Raised when the integrator produces a non-finite state.
struct IntegrationDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

// 0 while the wrapped pendulum angle is strictly inside the +/-10 deg band,
// else -1.
int reward(const PendulumState& s);

// One fixed-step RK4 integration of the plant over cfg.dt under a constant
// push of the given direction, followed by the reward evaluated on the new
// state. Pure: same inputs give bitwise-identical outputs.
StepResult step(const PendulumState& s, Action a, const PendulumConfig& cfg);

// Kinetic + potential energy of the plant (potential zero at the horizontal
// pendulum position). Conserved by the ideal dynamics when damping and push
// are zero; used as an integration-accuracy probe.
double mechanical_energy(const PendulumState& s, const PendulumConfig& cfg);

struct NormalizationBounds {
  double theta_max = kPi;
  double theta_dot_max = 4.0 * kPi;
  double alpha_max = kUprightBandRad;
  double alpha_dot_max = 4.0 * kPi;

  void validate() const;  // throws std::invalid_argument on zero/negative bound
};

// Network input vector: [theta, theta_dot, alpha, alpha_dot] divided by their
// bounds, plus a trailing constant bias of 1. Angles are wrapped before
// scaling (theta and theta + 2*pi are the same plant configuration).
std::array<double, 5> normalize_state(const PendulumState& s, const NormalizationBounds& b);

// Ranges used when drawing initial states for trial pools and replay
// transitions. All draws are uniform and centered on the upright equilibrium.
struct InitialStateRanges {
  double theta = 10.0 * kPi / 180.0;  // |theta| bound [rad]
  double theta_dot = 0.5;             // |theta_dot| bound [rad/s]
  double alpha_frac = 1.0;            // |alpha| bound as fraction of the 10 deg band
  double alpha_dot = 4.0;             // |alpha_dot| bound [rad/s]
};

// Draws n initial states, every one strictly inside the upright band.
// Identical (n, ranges, seed) triples produce identical pools.
std::vector<PendulumState> make_state_pool(std::size_t n, const InitialStateRanges& ranges,
                                           std::uint64_t seed);

// Uniform draw from a non-empty pool.
const PendulumState& sample_initial_state(std::mt19937_64& rng,
                                          const std::vector<PendulumState>& pool);

}  // namespace memrl
