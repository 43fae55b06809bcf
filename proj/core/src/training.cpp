#include "memrl/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "memrl/seeds.hpp"

namespace memrl {
namespace {

int sgn(double v) { return (v > 0.0) - (v < 0.0); }

// 8-bit comparator grid used by the on-chip action draw; the same grid is
// what a hardware agent "sees" as its own policy output.
double quantize_prob(double p) {
  const double code = static_cast<double>(std::llround(std::clamp(p, 0.0, 1.0) * 255.0));
  return code / 255.0;
}

std::vector<int> sign_image(const InputHiddenMatrix& m) {
  std::vector<int> s;
  s.reserve(static_cast<std::size_t>(kHiddenCount) * kInputCount);
  for (int i = 0; i < kHiddenCount; ++i)
    for (int j = 0; j < kInputCount; ++j) s.push_back(sgn(m[i][j]));
  return s;
}

std::vector<int> sign_image(const HiddenVector& v) {
  std::vector<int> s;
  s.reserve(kHiddenCount);
  for (int i = 0; i < kHiddenCount; ++i) s.push_back(sgn(v[i]));
  return s;
}

void program_matrix(Crossbar& xb, const InputHiddenMatrix& w, const DeviceConfig& dc,
                    WriteStats* stats) {
  for (int i = 0; i < kHiddenCount; ++i)
    for (int j = 0; j < kInputCount; ++j) write_exact(xb.at(i, j), w[i][j], dc, stats);
}

void program_vector(Crossbar& xb, const HiddenVector& w, const DeviceConfig& dc,
                    WriteStats* stats) {
  for (int i = 0; i < kHiddenCount; ++i) write_exact(xb.at(i, 0), w[i], dc, stats);
}

InputHiddenMatrix read_matrix(const Crossbar& xb, const DeviceConfig& dc) {
  InputHiddenMatrix w{};
  for (int i = 0; i < kHiddenCount; ++i)
    for (int j = 0; j < kInputCount; ++j) w[i][j] = read_weight(xb.at(i, j), dc);
  return w;
}

HiddenVector read_vector(const Crossbar& xb, const DeviceConfig& dc) {
  HiddenVector w{};
  for (int i = 0; i < kHiddenCount; ++i) w[i] = read_weight(xb.at(i, 0), dc);
  return w;
}

std::vector<double> flatten(const InputHiddenMatrix& m) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(kHiddenCount) * kInputCount);
  for (int i = 0; i < kHiddenCount; ++i)
    for (int j = 0; j < kInputCount; ++j) v.push_back(m[i][j]);
  return v;
}

std::vector<double> flatten(const HiddenVector& h) {
  return std::vector<double>(h.begin(), h.end());
}

}  // namespace

std::string_view approach_name(Approach a) {
  switch (a) {
    case Approach::Baseline: return "baseline";
    case Approach::BaselinePQ: return "baseline-pq";
    case Approach::Exact: return "exact";
    case Approach::ExactPQ: return "exact-pq";
    case Approach::Manhattan: return "manhattan";
    case Approach::ManhattanPQ: return "manhattan-pq";
    case Approach::VariableAmplitude: return "variable-amplitude";
  }
  return "unknown";
}

Approach parse_approach(std::string_view name) {
  for (Approach a : {Approach::Baseline, Approach::BaselinePQ, Approach::Exact, Approach::ExactPQ,
                     Approach::Manhattan, Approach::ManhattanPQ, Approach::VariableAmplitude}) {
    if (name == approach_name(a)) return a;
  }
  throw std::invalid_argument("unknown approach: " + std::string(name));
}

bool approach_uses_pretraining(Approach a) {
  return a != Approach::Baseline && a != Approach::BaselinePQ;
}

bool approach_uses_gate(Approach a) {
  return a == Approach::BaselinePQ || a == Approach::ExactPQ || a == Approach::ManhattanPQ;
}

bool approach_on_hardware(Approach a) {
  return a == Approach::Manhattan || a == Approach::ManhattanPQ ||
         a == Approach::VariableAmplitude;
}

TrainingConfig TrainingConfig::for_approach(Approach a) {
  TrainingConfig cfg;
  cfg.approach = a;
  switch (a) {
    case Approach::Baseline:
      cfg.gamma = 0.85;
      break;
    case Approach::BaselinePQ:
      cfg.gamma = 0.85;
      cfg.pq_threshold = 0.9;
      break;
    case Approach::Exact:
      cfg.gamma = 0.9;
      break;
    case Approach::ExactPQ:
      cfg.gamma = 0.9;
      cfg.pq_threshold = 0.9;
      break;
    case Approach::Manhattan:
      cfg.gamma = 0.75;
      break;
    case Approach::ManhattanPQ:
      cfg.gamma = 0.75;
      cfg.pq_threshold = 0.95;
      break;
    case Approach::VariableAmplitude:
      cfg.gamma = 0.9;
      break;
  }
  return cfg;
}

bool pq_gate(double p, int q, double threshold) {
  return std::abs(static_cast<double>(q) - p) > threshold;
}

double adjust_discount_rate(std::span<const TrialRecord> window, double gamma,
                            DiscountDirection& dir, const TrainingConfig& cfg) {
  if (window.empty()) return gamma;
  double successes = 0.0;
  double total_steps = 0.0;
  for (const TrialRecord& t : window) {
    successes += t.success ? 1.0 : 0.0;
    total_steps += static_cast<double>(t.steps_survived);
  }
  const double success_rate = successes / static_cast<double>(window.size());
  if (success_rate >= cfg.dr_success_threshold) return gamma;

  const double mean_t2f = total_steps / static_cast<double>(window.size());
  if (dir.has_prior && mean_t2f <= dir.last_mean_t2f) dir.sign = -dir.sign;
  dir.last_mean_t2f = mean_t2f;
  dir.has_prior = true;
  const double next = gamma + static_cast<double>(dir.sign) * cfg.dr_gamma_step;
  return std::clamp(next, cfg.dr_gamma_min, cfg.dr_gamma_max);
}

// ---------- SeparateBackend ----------

SeparateBackend::SeparateBackend(const SeparateNetWeights& init, const DeviceConfig& dc,
                                 WritePath path, std::uint64_t fabrication_seed)
    : dc_(dc), path_(path) {
  std::mt19937_64 rng = make_rng(derive_seed(fabrication_seed, "fabrication"));
  a_ = make_crossbar(kHiddenCount, kInputCount, dc_, rng);
  c_ = make_crossbar(kHiddenCount, 1, dc_, rng);
  d_ = make_crossbar(kHiddenCount, kInputCount, dc_, rng);
  f_ = make_crossbar(kHiddenCount, 1, dc_, rng);
  program(init);
}

SeparateNetWeights SeparateBackend::weights() const {
  SeparateNetWeights w;
  w.a = read_matrix(a_, dc_);
  w.c = read_vector(c_, dc_);
  w.d = read_matrix(d_, dc_);
  w.f = read_vector(f_, dc_);
  return w;
}

void SeparateBackend::program(const SeparateNetWeights& w) {
  program_matrix(a_, w.a, dc_, &stats_);
  program_vector(c_, w.c, dc_, &stats_);
  program_matrix(d_, w.d, dc_, &stats_);
  program_vector(f_, w.f, dc_, &stats_);
}

void SeparateBackend::apply(const SeparateNetDeltas& d) {
  if (path_ == WritePath::Exact) {
    SeparateNetWeights w = weights();
    for (int i = 0; i < kHiddenCount; ++i) {
      w.c[i] += d.c[i];
      w.f[i] += d.f[i];
      for (int j = 0; j < kInputCount; ++j) {
        w.a[i][j] += d.a[i][j];
        w.d[i][j] += d.d[i][j];
      }
    }
    program(w);
    return;
  }
  manhattan_update(a_, sign_image(d.a), dc_);
  manhattan_update(c_, sign_image(d.c), dc_);
  manhattan_update(d_, sign_image(d.d), dc_);
  manhattan_update(f_, sign_image(d.f), dc_);
}

// ---------- SharedBackend ----------

SharedBackend::SharedBackend(const SharedNetWeights& init, const DeviceConfig& dc, WritePath path,
                             std::uint64_t fabrication_seed)
    : dc_(dc), path_(path) {
  std::mt19937_64 rng = make_rng(derive_seed(fabrication_seed, "fabrication"));
  in_ = make_crossbar(kHiddenCount, kInputCount, dc_, rng);
  v_ = make_crossbar(kHiddenCount, 1, dc_, rng);
  p_ = make_crossbar(kHiddenCount, 1, dc_, rng);
  program(init);
}

SharedNetWeights SharedBackend::weights() const {
  SharedNetWeights w;
  w.w_in = read_matrix(in_, dc_);
  w.w_v = read_vector(v_, dc_);
  w.w_p = read_vector(p_, dc_);
  return w;
}

void SharedBackend::program(const SharedNetWeights& w) {
  program_matrix(in_, w.w_in, dc_, &stats_);
  program_vector(v_, w.w_v, dc_, &stats_);
  program_vector(p_, w.w_p, dc_, &stats_);
}

void SharedBackend::apply(const SharedNetGradients& g, const SharedNetRates& rates) {
  // The hidden layer serves both readouts, so its change combines the two
  // backpropagated parts, each under its own step size.
  InputHiddenMatrix din{};
  HiddenVector dv{}, dp{};
  for (int i = 0; i < kHiddenCount; ++i) {
    dv[i] = rates.value_out * g.value.head[i];
    dp[i] = rates.policy_out * g.policy.head[i];
    for (int j = 0; j < kInputCount; ++j) {
      din[i][j] = rates.value_hidden * g.value.w_in[i][j] + rates.policy_hidden * g.policy.w_in[i][j];
    }
  }
  if (path_ == WritePath::Exact) {
    SharedNetWeights w = weights();
    for (int i = 0; i < kHiddenCount; ++i) {
      w.w_v[i] += dv[i];
      w.w_p[i] += dp[i];
      for (int j = 0; j < kInputCount; ++j) w.w_in[i][j] += din[i][j];
    }
    program(w);
    return;
  }
  variable_amplitude_update(in_, flatten(din), 1.0, dc_, &stats_);
  variable_amplitude_update(v_, flatten(dv), 1.0, dc_, &stats_);
  variable_amplitude_update(p_, flatten(dp), 1.0, dc_, &stats_);
}

// ---------- action sampling ----------

ActionSampler ActionSampler::software(std::uint64_t seed) {
  ActionSampler s;
  s.hardware = false;
  s.soft = make_rng(seed);
  return s;
}

ActionSampler ActionSampler::on_chip(std::uint64_t seed) {
  ActionSampler s;
  s.hardware = true;
  s.hard = make_hardware_rng(seed);
  return s;
}

Action ActionSampler::draw(double p) {
  if (hardware) return sample_action(p, hard);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(soft) < p ? Action::CCW : Action::CW;
}

// ---------- complete-information scenario ----------

TrialRecord run_trial(SeparateBackend& agent, const TrialEnv& env, const TrainingConfig& cfg,
                      double gamma, TrialMode mode, const PendulumState& start,
                      ActionSampler& sampler) {
  TrialRecord rec;
  rec.gamma = gamma;
  const bool hw = agent.hardware();
  PendulumState state = start;
  for (int step_i = 1; step_i <= cfg.max_steps; ++step_i) {
    const SeparateNetWeights w = agent.weights();
    const InputVector x = normalize_state(state, env.norm);
    const ForwardTrace eval = eval_forward(w, x);
    const ForwardTrace act = action_forward(w, x);
    const double v = hw ? adc_quantize(eval.value, agent.device().adc_full_scale,
                                       agent.device().adc_bits)
                        : eval.value;
    const double p = hw ? quantize_prob(act.prob) : act.prob;
    const Action a = sampler.draw(p);
    const int q = action_bit(a);

    StepResult sr;
    try {
      sr = step(state, a, env.plant);
    } catch (const IntegrationDiverged&) {
      rec.steps_survived = step_i;
      rec.diverged = true;
      return rec;
    }

    const InputVector x2 = normalize_state(sr.state, env.norm);
    const ForwardTrace eval2 = eval_forward(w, x2);
    const double v2 = hw ? adc_quantize(eval2.value, agent.device().adc_full_scale,
                                        agent.device().adc_bits)
                         : eval2.value;
    const bool terminal = sr.failed;
    // The hardware path sees values and probabilities that already carry the
    // converter grid (v, v2, p above); the error signal itself stays analog.
    const double delta = td_error(sr.reward, v2, v, gamma, terminal);

    if (mode == TrialMode::Train &&
        (!approach_uses_gate(cfg.approach) || pq_gate(p, q, cfg.pq_threshold))) {
      // The gated probability is the one the comparator grid actually used.
      ForwardTrace act_used = act;
      act_used.prob = p;
      agent.apply(separate_net_gradients(w, eval, act_used, delta, q, cfg.rates));
      ++rec.updates;
    }

    rec.steps_survived = step_i;
    state = sr.state;
    if (terminal) return rec;
  }
  rec.success = true;
  return rec;
}

TrainOutcome train_sequence(SeparateBackend& agent, const TrialEnv& env,
                            const std::vector<PendulumState>& pool, const TrainingConfig& cfg,
                            ActionSampler& sampler, std::mt19937_64& pool_rng) {
  TrainOutcome out;
  double gamma = cfg.gamma;
  DiscountDirection dir;
  for (int trial = 0; trial < cfg.max_trials; ++trial) {
    const PendulumState& start = sample_initial_state(pool_rng, pool);
    TrialRecord rec = run_trial(agent, env, cfg, gamma, TrialMode::Train, start, sampler);
    out.updates += rec.updates;
    out.steps += rec.steps_survived;
    if (rec.success) ++out.successes;
    out.trials.push_back(rec);
    if (out.successes >= cfg.stop_c) break;
    if (cfg.variable_dr && (trial + 1) % cfg.dr_window == 0) {
      const std::size_t n = static_cast<std::size_t>(cfg.dr_window);
      std::span<const TrialRecord> window(out.trials.data() + out.trials.size() - n, n);
      gamma = adjust_discount_rate(window, gamma, dir, cfg);
    }
  }
  out.final_gamma = gamma;
  return out;
}

std::vector<TrialRecord> evaluate_agent(SeparateBackend& agent, const TrialEnv& env,
                                        const std::vector<PendulumState>& pool,
                                        std::size_t n_states, ActionSampler& sampler) {
  TrainingConfig cfg;  // only max_steps and the (unused) gate fields matter in Test mode
  std::vector<TrialRecord> records;
  const std::size_t n = std::min(n_states, pool.size());
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    records.push_back(run_trial(agent, env, cfg, cfg.gamma, TrialMode::Test, pool[i], sampler));
  }
  return records;
}

// ---------- limited-information scenario ----------

std::vector<Experience> build_replay_buffer(const PendulumConfig& plant,
                                            const ReplayDrawRanges& ranges, std::size_t size,
                                            std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<Experience> buffer;
  buffer.reserve(size);
  while (buffer.size() < size) {
    Experience e;
    e.s.theta = ranges.theta * u(rng);
    e.s.theta_dot = ranges.theta_dot * u(rng);
    e.s.alpha = ranges.alpha * u(rng);
    e.s.alpha_dot = ranges.alpha_dot * u(rng);
    e.a = coin(rng) ? Action::CCW : Action::CW;
    try {
      const StepResult sr = step(e.s, e.a, plant);
      e.r = sr.reward;
      e.s_next = sr.state;
    } catch (const IntegrationDiverged&) {
      continue;  // replace the rare divergent draw
    }
    buffer.push_back(e);
  }
  return buffer;
}

void pretrain_offpolicy(SharedBackend& agent, std::span<const Experience> buffer,
                        const OffPolicyConfig& cfg, std::mt19937_64& rng) {
  if (buffer.empty()) throw std::invalid_argument("pretrain_offpolicy: empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, buffer.size() - 1);
  for (long long i = 0; i < cfg.draws; ++i) {
    const Experience& e = buffer[pick(rng)];
    const SharedNetWeights w = agent.weights();
    const ForwardTrace t = shared_forward(w, normalize_state(e.s, cfg.norm));
    const ForwardTrace t2 = shared_forward(w, normalize_state(e.s_next, cfg.norm));
    const bool terminal = e.r == -1;
    const double delta = td_error(e.r, t2.value, t.value, cfg.gamma, terminal);
    const int q = action_bit(e.a);
    const double pi_a = q ? t.prob : 1.0 - t.prob;
    const double rho = pi_a / cfg.behavior_prob;
    agent.apply(shared_net_gradients(w, t, delta, q, rho), cfg.rates);
  }
}

namespace {

TrialRecord run_shared_test_trial(SharedBackend& agent, const TrialEnv& env, int max_steps,
                                  const PendulumState& start, ActionSampler& sampler) {
  TrialRecord rec;
  const bool hw = agent.hardware();
  const SharedNetWeights w = agent.weights();  // frozen: read once
  PendulumState state = start;
  for (int step_i = 1; step_i <= max_steps; ++step_i) {
    const ForwardTrace t = shared_forward(w, normalize_state(state, env.norm));
    const double p = hw ? quantize_prob(t.prob) : t.prob;
    const Action a = sampler.draw(p);
    StepResult sr;
    try {
      sr = step(state, a, env.plant);
    } catch (const IntegrationDiverged&) {
      rec.steps_survived = step_i;
      rec.diverged = true;
      return rec;
    }
    rec.steps_survived = step_i;
    state = sr.state;
    if (sr.failed) return rec;
  }
  rec.success = true;
  return rec;
}

}  // namespace

std::vector<TrialRecord> evaluate_shared_agent(SharedBackend& agent, const TrialEnv& env,
                                               const std::vector<PendulumState>& pool,
                                               std::size_t n_states, ActionSampler& sampler) {
  std::vector<TrialRecord> records;
  const std::size_t n = std::min(n_states, pool.size());
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    records.push_back(run_shared_test_trial(agent, env, kTrialStepLimit, pool[i], sampler));
  }
  return records;
}

RetrainOutcome retrain_synchronous(const SharedNetWeights& init, const TrialEnv& env,
                                   const std::vector<PendulumState>& train_pool,
                                   const std::vector<PendulumState>& test_pool,
                                   const RetrainConfig& cfg, const DeviceConfig& dc,
                                   SharedBackend::WritePath path, std::uint64_t agent_seed) {
  if (cfg.learners < 1) throw std::invalid_argument("retrain_synchronous: learners < 1");
  if (cfg.checkpoint_samples % cfg.learners != 0) {
    throw std::invalid_argument(
        "retrain_synchronous: checkpoint interval must be divisible by the learner count");
  }
  const int k_count = cfg.learners;
  const bool hw = path == SharedBackend::WritePath::ScaledAmplitude;

  struct Learner {
    SharedBackend backend;
    ActionSampler sampler;
    std::mt19937_64 pool_rng;
    PendulumState state;
    int episode_steps = 0;
  };

  std::vector<Learner> learners;
  learners.reserve(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    const std::uint64_t idx = static_cast<std::uint64_t>(k);
    Learner l{
        SharedBackend(init, dc, path, derive_seed(agent_seed, "retrain-fab", idx)),
        hw ? ActionSampler::on_chip(derive_seed(agent_seed, "retrain-sampler", idx))
           : ActionSampler::software(derive_seed(agent_seed, "retrain-sampler", idx)),
        make_rng(derive_seed(agent_seed, "retrain-pool", idx)),
        PendulumState{},
        0,
    };
    l.state = sample_initial_state(l.pool_rng, train_pool);
    learners.push_back(std::move(l));
  }

  RetrainOutcome out;
  long long checkpoint_index = 0;
  auto take_checkpoint = [&](long long samples, long long steps) {
    // Checkpoints score the learned weights on the common software yardstick
    // (exact reads, software draws), whatever path trains them.
    ActionSampler eval_sampler = ActionSampler::software(
        derive_seed(agent_seed, "retrain-eval", static_cast<std::uint64_t>(checkpoint_index)));
    ++checkpoint_index;
    SharedBackend eval_backend(learners[0].backend.weights(), dc, SharedBackend::WritePath::Exact);
    const std::vector<TrialRecord> evals =
        evaluate_shared_agent(eval_backend, env, test_pool, cfg.eval_states, eval_sampler);
    double total = 0.0;
    for (const TrialRecord& r : evals) total += static_cast<double>(r.steps_survived);
    CheckpointRecord c;
    c.samples = samples;
    c.steps = steps;
    c.mean_t2f = evals.empty() ? 0.0 : total / static_cast<double>(evals.size());
    out.checkpoints.push_back(c);
  };

  take_checkpoint(0, 0);  // starting point: the programmed weights as-is

  const long long max_steps_global = cfg.total_samples / k_count;
  for (long long gstep = 1; gstep <= max_steps_global; ++gstep) {
    SharedNetGradients sum{};
    for (Learner& l : learners) {
      const SharedNetWeights w = l.backend.weights();
      const ForwardTrace t = shared_forward(w, normalize_state(l.state, env.norm));
      const double v = hw ? adc_quantize(t.value, dc.adc_full_scale, dc.adc_bits) : t.value;
      const double p = hw ? quantize_prob(t.prob) : t.prob;
      const Action a = l.sampler.draw(p);
      const int q = action_bit(a);

      bool reset = false;
      bool terminal = false;
      double delta = 0.0;
      try {
        const StepResult sr = step(l.state, a, env.plant);
        const ForwardTrace t2 = shared_forward(w, normalize_state(sr.state, env.norm));
        const double v2 = hw ? adc_quantize(t2.value, dc.adc_full_scale, dc.adc_bits) : t2.value;
        terminal = sr.failed;
        delta = td_error(sr.reward, v2, v, cfg.gamma, terminal);
        ++l.episode_steps;
        reset = terminal || l.episode_steps >= cfg.max_steps;
        if (!reset) l.state = sr.state;
      } catch (const IntegrationDiverged&) {
        // faulted transition contributes nothing; restart the episode
        reset = true;
        delta = 0.0;
      }

      ForwardTrace t_used = t;
      t_used.value = v;
      t_used.prob = p;
      const SharedNetGradients g = shared_net_gradients(w, t_used, delta, q, 1.0);
      for (int i = 0; i < kHiddenCount; ++i) {
        sum.value.head[i] += g.value.head[i];
        sum.policy.head[i] += g.policy.head[i];
        for (int j = 0; j < kInputCount; ++j) {
          sum.value.w_in[i][j] += g.value.w_in[i][j];
          sum.policy.w_in[i][j] += g.policy.w_in[i][j];
        }
      }

      if (reset) {
        l.state = sample_initial_state(l.pool_rng, train_pool);
        l.episode_steps = 0;
      }
    }

    for (Learner& l : learners) l.backend.apply(sum, cfg.rates);
    ++out.updates;

    if (out.weights_synchronized && k_count > 1) {
      const SharedNetWeights w0 = learners[0].backend.weights();
      for (int k = 1; k < k_count && out.weights_synchronized; ++k) {
        const SharedNetWeights wk = learners[static_cast<std::size_t>(k)].backend.weights();
        for (int i = 0; i < kHiddenCount; ++i) {
          if (wk.w_v[i] != w0.w_v[i] || wk.w_p[i] != w0.w_p[i]) out.weights_synchronized = false;
          for (int j = 0; j < kInputCount; ++j) {
            if (wk.w_in[i][j] != w0.w_in[i][j]) out.weights_synchronized = false;
          }
        }
      }
    }

    const long long consumed = gstep * k_count;
    if (consumed % cfg.checkpoint_samples == 0) take_checkpoint(consumed, gstep);
  }

  for (const Learner& l : learners) {
    const WriteStats& s = l.backend.stats();
    out.stats.saturated += s.saturated;
    out.stats.below_floor += s.below_floor;
    out.stats.clipped += s.clipped;
  }
  out.weights = learners[0].backend.weights();
  return out;
}

}  // namespace memrl
