#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "memrl/device.hpp"
#include "memrl/networks.hpp"
#include "memrl/pendulum.hpp"

namespace memrl {

// Weight-update flavors. Baseline trains from random weights; every other
// flavor starts from pre-trained weights. The PQ variants update only on
// surprising actions. Manhattan flavors pulse crossbar devices by delta
// sign; ScaledAmplitude programs per-element magnitudes via line voltages.
enum class Approach {
  Baseline,
  BaselinePQ,
  Exact,
  ExactPQ,
  Manhattan,
  ManhattanPQ,
  VariableAmplitude,
};

std::string_view approach_name(Approach a);
Approach parse_approach(std::string_view name);  // throws std::invalid_argument
bool approach_uses_pretraining(Approach a);
bool approach_uses_gate(Approach a);
bool approach_on_hardware(Approach a);

struct TrainingConfig {
  Approach approach = Approach::Exact;
  double gamma = 0.9;
  LearningRates rates{};
  double pq_threshold = 0.0;  // meaningful when approach_uses_gate
  int stop_c = 50;            // successful trials that end the sequence
  int max_trials = 2000;      // hard trial cap
  int max_steps = kTrialStepLimit;

  // Discount-rate adaptation (off by default; Table-style runs switch it on
  // for the pulsed flavors).
  bool variable_dr = false;
  int dr_window = 50;
  double dr_success_threshold = 0.35;
  double dr_gamma_step = 0.02;
  double dr_gamma_min = 0.5;
  double dr_gamma_max = 0.99;

  // Flavor defaults: gamma 0.85 / 0.9 / 0.75 for Baseline* / Exact* /
  // Manhattan* (0.9 for ScaledAmplitude), surprise thresholds 0.9 for the
  // exact-write PQ flavors and 0.95 for the pulsed one.
  static TrainingConfig for_approach(Approach a);
};

// True when the taken action disagrees enough with the policy for an update
// to be worth its cost: |q - p| > threshold.
bool pq_gate(double p, int q, double threshold);

struct TrialRecord {
  int steps_survived = 0;  // in [1, max_steps]
  long long updates = 0;   // steps whose weight update fired
  bool success = false;    // survived the full horizon without failure
  bool diverged = false;   // integration fault; counted as a failure
  double gamma = 0.0;      // discount rate in force during this trial
};

struct DiscountDirection {
  int sign = +1;  // first adjustment raises gamma
  double last_mean_t2f = 0.0;
  bool has_prior = false;
};

// One adaptation step, applied after each non-overlapping window of trials:
// when the window's success rate is below the threshold, gamma moves by one
// step; the direction is kept if the window's mean time-to-failure improved
// since the previous adjustment and reversed otherwise. The result is
// clamped to [dr_gamma_min, dr_gamma_max].
double adjust_discount_rate(std::span<const TrialRecord> window, double gamma,
                            DiscountDirection& dir, const TrainingConfig& cfg);

// ---------- weight storage ----------

// The four weight blocks of the separate networks, stored on four crossbars
// (the readout vectors as single-column crossbars). The exact path
// reprograms pairs to prescribed values (program-and-verify, ideal devices);
// the pulsed path fires one fixed-amplitude pulse per nonzero delta sign and
// reads through the quantizer.
class SeparateBackend {
 public:
  enum class WritePath { Exact, ManhattanPulse };

  SeparateBackend(const SeparateNetWeights& init, const DeviceConfig& dc, WritePath path,
                  std::uint64_t fabrication_seed = 0);

  WritePath path() const { return path_; }
  bool hardware() const { return path_ == WritePath::ManhattanPulse; }
  const DeviceConfig& device() const { return dc_; }

  SeparateNetWeights weights() const;
  void program(const SeparateNetWeights& w);       // exact write, both paths
  void apply(const SeparateNetDeltas& d);          // path-dependent update
  const WriteStats& stats() const { return stats_; }

  const Crossbar& crossbar_a() const { return a_; }
  const Crossbar& crossbar_c() const { return c_; }
  const Crossbar& crossbar_d() const { return d_; }
  const Crossbar& crossbar_f() const { return f_; }

 private:
  DeviceConfig dc_;
  WritePath path_;
  Crossbar a_, c_, d_, f_;
  WriteStats stats_;
};

// The three weight blocks of the shared network on three crossbars. The
// scaled-amplitude path programs magnitude-scaled line voltages row by row.
class SharedBackend {
 public:
  enum class WritePath { Exact, ScaledAmplitude };

  SharedBackend(const SharedNetWeights& init, const DeviceConfig& dc, WritePath path,
                std::uint64_t fabrication_seed = 0);

  WritePath path() const { return path_; }
  bool hardware() const { return path_ == WritePath::ScaledAmplitude; }
  const DeviceConfig& device() const { return dc_; }

  SharedNetWeights weights() const;
  void program(const SharedNetWeights& w);
  // Applies per-layer step sizes to the (possibly learner-summed) gradients:
  // w_in gets both readouts' hidden-layer parts.
  void apply(const SharedNetGradients& g, const SharedNetRates& rates);
  const WriteStats& stats() const { return stats_; }

  const Crossbar& crossbar_in() const { return in_; }
  const Crossbar& crossbar_v() const { return v_; }
  const Crossbar& crossbar_p() const { return p_; }

 private:
  DeviceConfig dc_;
  WritePath path_;
  Crossbar in_, v_, p_;
  WriteStats stats_;
};

// ---------- action sampling ----------

// Stochastic policy draw. The software flavor compares a real uniform draw
// against p; the hardware flavor compares one register byte against the
// 8-bit quantized p.
struct ActionSampler {
  bool hardware = false;
  std::mt19937_64 soft{0};
  HardwareRng hard{};

  static ActionSampler software(std::uint64_t seed);
  static ActionSampler on_chip(std::uint64_t seed);
  Action draw(double p);
};

// ---------- complete-information scenario ----------

struct TrialEnv {
  PendulumConfig plant;
  NormalizationBounds norm;
};

enum class TrialMode { Train, Test };

// Runs one trial from the given start state: at every step the action net
// picks a push, the plant advances, the one-step TD error is formed (r = -1
// ends the trial without bootstrapping) and, in Train mode, the
// weight-change rule fires (always, or on gate for the PQ flavors).
// Hardware backends read the value through the quantizer and the
// probability through the 8-bit comparator grid. An integration fault ends
// the trial as a failure with the diverged flag set.
TrialRecord run_trial(SeparateBackend& agent, const TrialEnv& env, const TrainingConfig& cfg,
                      double gamma, TrialMode mode, const PendulumState& start,
                      ActionSampler& sampler);

struct TrainOutcome {
  std::vector<TrialRecord> trials;
  long long updates = 0;  // fired update steps over the whole sequence
  long long steps = 0;
  int successes = 0;
  double final_gamma = 0.0;
};

// Trains until stop_c successes or max_trials, drawing starts from the
// pool; with variable_dr, the discount rate adapts after every dr_window
// trials.
TrainOutcome train_sequence(SeparateBackend& agent, const TrialEnv& env,
                            const std::vector<PendulumState>& pool, const TrainingConfig& cfg,
                            ActionSampler& sampler, std::mt19937_64& pool_rng);

// Frozen-weight trials over the first n_states pool entries, in pool order.
std::vector<TrialRecord> evaluate_agent(SeparateBackend& agent, const TrialEnv& env,
                                        const std::vector<PendulumState>& pool,
                                        std::size_t n_states, ActionSampler& sampler);

// ---------- limited-information scenario ----------

struct Experience {
  PendulumState s;
  Action a = Action::CW;
  int r = 0;
  PendulumState s_next;
};

struct ReplayDrawRanges {
  double theta = kPi;
  double theta_dot = 4.0;
  double alpha = 0.35;
  double alpha_dot = 4.0;
};

// size transitions whose pre-action states are uniform within the given
// ranges, actions are fair coin flips, and next states come from the plant.
std::vector<Experience> build_replay_buffer(const PendulumConfig& plant,
                                            const ReplayDrawRanges& ranges, std::size_t size,
                                            std::uint64_t seed);

struct OffPolicyConfig {
  double gamma = 0.9;
  double behavior_prob = 0.5;  // probability either action had when recorded
  long long draws = 200000;
  SharedNetRates rates{};
  NormalizationBounds norm{};
};

// Stored-experience pre-training: uniform draws from the buffer, TD error
// with terminal cutoff, gradients weighted by the likelihood ratio
// pi(a|s)/behavior_prob.
void pretrain_offpolicy(SharedBackend& agent, std::span<const Experience> buffer,
                        const OffPolicyConfig& cfg, std::mt19937_64& rng);

struct CheckpointRecord {
  long long samples = 0;  // plant transitions consumed so far (all learners)
  long long steps = 0;    // global synchronous updates so far
  double mean_t2f = 0.0;  // frozen-weight evaluation on the test pool prefix
};

struct RetrainConfig {
  int learners = 1;  // K
  long long total_samples = 500000;
  long long checkpoint_samples = 25000;
  double gamma = 0.9;
  SharedNetRates rates{};
  int max_steps = kTrialStepLimit;
  std::size_t eval_states = 100;
};

struct RetrainOutcome {
  SharedNetWeights weights;  // learner-0 readout after the last step
  std::vector<CheckpointRecord> checkpoints;
  long long updates = 0;  // global synchronous updates (one per step)
  WriteStats stats;       // accumulated over all learners
  // True when every learner's crossbar read back bitwise-identical weights
  // after every global update. Guaranteed on ideal devices; fabrication
  // spread can break it on the pulsed write path.
  bool weights_synchronized = true;
};

// Synchronous K-learner re-training: every learner holds an identical
// weight copy, steps its own plant instance once, and the K gradients are
// summed in learner order and applied to every copy in the same global
// update. Episodes reset on failure or after max_steps; only failure ends
// an episode terminally in the TD sense. Stops once total_samples plant
// transitions are consumed; evaluates the frozen learner-0 weights every
// checkpoint_samples.
RetrainOutcome retrain_synchronous(const SharedNetWeights& init, const TrialEnv& env,
                                   const std::vector<PendulumState>& train_pool,
                                   const std::vector<PendulumState>& test_pool,
                                   const RetrainConfig& cfg, const DeviceConfig& dc,
                                   SharedBackend::WritePath path, std::uint64_t agent_seed);

// Frozen-weight trials of a shared-network agent over the pool prefix.
std::vector<TrialRecord> evaluate_shared_agent(SharedBackend& agent, const TrialEnv& env,
                                               const std::vector<PendulumState>& pool,
                                               std::size_t n_states, ActionSampler& sampler);

}  // namespace memrl
