#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "memrl/device.hpp"
#include "memrl/pendulum.hpp"

namespace memrl {

// Initial-state pool sizes and draw ranges.
struct PoolSettings {
  std::size_t pretrain_size = 7000;
  std::size_t retrain_size = 2000;
  std::size_t test_size = 500;
  InitialStateRanges ranges;
};

// Random-transition store used for training from stored experience.
struct ReplaySettings {
  std::size_t size = 150000;   // stored transitions
  long long draws = 200000;    // uniform draws consumed by pre-training
  // Uniform bounds for the pre-action state of each stored transition.
  double theta = kPi;          // rad
  double theta_dot = 4.0;      // rad/s
  double alpha = 0.35;         // rad (covers the upright band and its rim)
  double alpha_dot = 4.0;      // rad/s
};

struct TrainingSettings {
  int pretrain_c = 50;              // successful trials ending pre-training
  int pretrain_max_trials = 7000;
  int retrain_max_trials = 2000;
  long long retrain_samples = 500000;   // plant samples consumed, all learners
  long long checkpoint_samples = 25000; // evaluation cadence in samples
};

struct HarnessSettings {
  int desk_seeds = 5;    // weight seeds per variation pair at desk scale
  int full_seeds = 100;
  std::size_t desk_eval_states = 100;  // test-pool prefix used at desk scale
  int desk_curve_agents = 20;  // agents per learning curve at desk scale
  int full_curve_agents = 100;
};

struct SimulationConfig {
  PendulumConfig pendulum;
  NormalizationBounds normalization;
  PoolSettings pools;
  ReplaySettings replay;
  DeviceConfig device;
  TrainingSettings training;
  HarnessSettings harness;

  void validate() const;  // throws std::invalid_argument
};

SimulationConfig default_config();

// Parses "[section]" / "key = value" text ('#' and ';' start comments) on
// top of the given config. Unknown sections or keys and malformed values
// throw std::invalid_argument naming the offending line.
void apply_config_text(SimulationConfig& cfg, std::string_view text);

// Defaults overridden by the given file. Throws std::invalid_argument /
// std::runtime_error on unreadable or malformed input.
SimulationConfig load_config(const std::string& path);

// Canonical text form: every key in a fixed order, full-precision numbers.
// Parsing the output reproduces the config exactly.
std::string serialize_config(const SimulationConfig& cfg);

// FNV-1a over the canonical text; recorded in run manifests.
std::uint64_t config_hash(const SimulationConfig& cfg);

std::string_view variation_name(VariationMode m);
VariationMode parse_variation(std::string_view name);  // throws std::invalid_argument

}  // namespace memrl
