#include "memrl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "memrl/seeds.hpp"
#include "memrl/textio.hpp"
#include "memrl/version.hpp"

namespace memrl {
namespace {

namespace fs = std::filesystem;

constexpr int kVariationLevels[] = {-10, -5, 0, 5, 10};

int variation_level_index(int pct) {
  for (int i = 0; i < 5; ++i) {
    if (kVariationLevels[i] == pct) return i;
  }
  throw std::invalid_argument("plant variation percent must be one of -10,-5,0,+5,+10");
}

// Position of a variation pair in the full 5x5 grid; used for device-seed
// derivation so desk and full populations agree on shared agents.
int full_grid_index(PlantVariation v) {
  return variation_level_index(v.mass_pct) * 5 + variation_level_index(v.length_pct);
}

AgentSpec make_agent_spec(std::uint64_t master, PlantVariation v, int seed_index) {
  AgentSpec s;
  s.variation = v;
  s.seed_index = seed_index;
  s.weight_seed = derive_seed(master, "weights", static_cast<std::uint64_t>(seed_index));
  s.device_seed = derive_seed(
      master, "devices",
      static_cast<std::uint64_t>(full_grid_index(v)) * 1000u + static_cast<std::uint64_t>(seed_index));
  return s;
}

double mean_steps(std::span<const TrialRecord> trials) {
  if (trials.empty()) return 0.0;
  double total = 0.0;
  for (const TrialRecord& t : trials) total += static_cast<double>(t.steps_survived);
  return total / static_cast<double>(trials.size());
}

std::ofstream open_out(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

void log_line(std::ostream* log, const std::string& line) {
  if (log) *log << line << "\n" << std::flush;
}

std::string metric_str(const MetricsRecord& m) {
  std::string s = "t2f=" + fmt_double(m.mean_t2f) + " updates=" + fmt_double(m.updates_per_weight);
  s += " efficiency=";
  s += m.efficiency_na ? "na" : fmt_double(m.efficiency);
  return s;
}

}  // namespace

std::string_view scale_name(Scale s) { return s == Scale::Desk ? "desk" : "full"; }

Scale parse_scale(std::string_view name) {
  if (name == "desk") return Scale::Desk;
  if (name == "full") return Scale::Full;
  throw std::invalid_argument("unknown scale: " + std::string(name));
}

std::string_view scenario_name(Scenario s) {
  return s == Scenario::Complete ? "complete" : "limited";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "complete") return Scenario::Complete;
  if (name == "limited") return Scenario::Limited;
  throw std::invalid_argument("unknown scenario: " + std::string(name));
}

std::string_view discount_mode_name(DiscountMode m) {
  return m == DiscountMode::Fixed ? "fixed" : "variable";
}

DiscountMode parse_discount_mode(std::string_view name) {
  if (name == "fixed") return DiscountMode::Fixed;
  if (name == "variable") return DiscountMode::Variable;
  throw std::invalid_argument("unknown discount mode: " + std::string(name));
}

std::string plant_variation_label(PlantVariation v) {
  auto part = [](int pct) {
    std::string s = pct > 0 ? "+" : "";
    return s + std::to_string(pct);
  };
  return part(v.mass_pct) + "," + part(v.length_pct);
}

PlantVariation parse_plant_variation(std::string_view label) {
  const std::size_t comma = label.find(',');
  if (comma == std::string_view::npos) {
    throw std::invalid_argument("plant variation must be \"<mass%>,<length%>\"");
  }
  auto to_int = [](std::string_view s) {
    const std::string t(trim(s));
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(t, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad plant variation value: " + t);
    }
    if (used != t.size()) throw std::invalid_argument("bad plant variation value: " + t);
    return v;
  };
  PlantVariation v;
  v.mass_pct = to_int(label.substr(0, comma));
  v.length_pct = to_int(label.substr(comma + 1));
  variation_level_index(v.mass_pct);
  variation_level_index(v.length_pct);
  return v;
}

PendulumConfig apply_variation(const PendulumConfig& base, PlantVariation v) {
  variation_level_index(v.mass_pct);
  variation_level_index(v.length_pct);
  PendulumConfig c = base;
  c.pendulum_mass *= 1.0 + static_cast<double>(v.mass_pct) / 100.0;
  c.pendulum_length *= 1.0 + static_cast<double>(v.length_pct) / 100.0;
  return c;
}

std::vector<PlantVariation> variation_grid(Scale scale) {
  std::vector<PlantVariation> grid;
  if (scale == Scale::Full) {
    for (int m : kVariationLevels)
      for (int l : kVariationLevels) grid.push_back({m, l});
    return grid;
  }
  // Desk subset: the standard plant plus the four extreme corners.
  grid.push_back({0, 0});
  grid.push_back({-10, -10});
  grid.push_back({-10, 10});
  grid.push_back({10, -10});
  grid.push_back({10, 10});
  return grid;
}

std::vector<AgentSpec> build_population(Scale scale, const SimulationConfig& cfg,
                                        std::uint64_t master_seed) {
  const int seeds =
      scale == Scale::Desk ? cfg.harness.desk_seeds : cfg.harness.full_seeds;
  std::vector<AgentSpec> population;
  for (PlantVariation v : variation_grid(scale)) {
    for (int i = 0; i < seeds; ++i) population.push_back(make_agent_spec(master_seed, v, i));
  }
  return population;
}

MetricsRecord compute_metrics(std::span<const TrialRecord> test_trials, double pretrained_t2f,
                              double updates_per_weight) {
  if (test_trials.empty()) throw std::invalid_argument("compute_metrics: empty test set");
  MetricsRecord m;
  m.mean_t2f = mean_steps(test_trials);
  m.updates_per_weight = updates_per_weight;
  const double improvement = m.mean_t2f - pretrained_t2f;
  if (updates_per_weight == 0.0) {
    if (improvement == 0.0) {
      m.efficiency = 0.0;
    } else {
      m.efficiency_na = true;
    }
  } else {
    m.efficiency = improvement / updates_per_weight;
  }
  return m;
}

ExperimentContext make_context(const SimulationConfig& cfg, Scale scale,
                               std::uint64_t master_seed) {
  cfg.validate();
  ExperimentContext ctx;
  ctx.cfg = cfg;
  ctx.master = master_seed;
  ctx.scale = scale;
  ctx.pretrain_pool =
      make_state_pool(cfg.pools.pretrain_size, cfg.pools.ranges, derive_seed(master_seed, "pool-pretrain"));
  ctx.retrain_pool =
      make_state_pool(cfg.pools.retrain_size, cfg.pools.ranges, derive_seed(master_seed, "pool-retrain"));
  ctx.test_pool =
      make_state_pool(cfg.pools.test_size, cfg.pools.ranges, derive_seed(master_seed, "pool-test"));
  ctx.eval_states =
      scale == Scale::Desk ? std::min(cfg.harness.desk_eval_states, cfg.pools.test_size)
                           : cfg.pools.test_size;
  ctx.curve_agents =
      scale == Scale::Desk ? cfg.harness.desk_curve_agents : cfg.harness.full_curve_agents;
  return ctx;
}

// ---------- ex-situ phase ----------

SeparateNetWeights pretrain_complete(const ExperimentContext& ctx, int seed_index,
                                     std::vector<TrialRecord>* trials) {
  const std::uint64_t idx = static_cast<std::uint64_t>(seed_index);
  std::mt19937_64 weight_rng = make_rng(derive_seed(ctx.master, "weights", idx));
  SeparateBackend backend(random_separate_weights(weight_rng), ctx.cfg.device,
                          SeparateBackend::WritePath::Exact,
                          derive_seed(ctx.master, "pretrain-fab", idx));
  TrainingConfig tc = TrainingConfig::for_approach(Approach::Exact);
  tc.stop_c = ctx.cfg.training.pretrain_c;
  tc.max_trials = ctx.cfg.training.pretrain_max_trials;
  const TrialEnv env{ctx.cfg.pendulum, ctx.cfg.normalization};
  ActionSampler sampler = ActionSampler::software(derive_seed(ctx.master, "pretrain-sampler", idx));
  std::mt19937_64 pool_rng = make_rng(derive_seed(ctx.master, "pretrain-poolrng", idx));
  TrainOutcome out = train_sequence(backend, env, ctx.pretrain_pool, tc, sampler, pool_rng);
  if (trials) trials->insert(trials->end(), out.trials.begin(), out.trials.end());
  return backend.weights();
}

SharedNetWeights pretrain_limited(const ExperimentContext& ctx, int seed_index) {
  const std::uint64_t idx = static_cast<std::uint64_t>(seed_index);
  const ReplayDrawRanges ranges{ctx.cfg.replay.theta, ctx.cfg.replay.theta_dot,
                                ctx.cfg.replay.alpha, ctx.cfg.replay.alpha_dot};
  const std::vector<Experience> buffer = build_replay_buffer(
      ctx.cfg.pendulum, ranges, ctx.cfg.replay.size, derive_seed(ctx.master, "replay"));
  std::mt19937_64 weight_rng = make_rng(derive_seed(ctx.master, "shared-weights", idx));
  SharedBackend backend(random_shared_weights(weight_rng), ctx.cfg.device,
                        SharedBackend::WritePath::Exact,
                        derive_seed(ctx.master, "limited-pretrain-fab", idx));
  OffPolicyConfig oc;
  oc.draws = ctx.cfg.replay.draws;
  oc.norm = ctx.cfg.normalization;
  std::mt19937_64 draw_rng = make_rng(derive_seed(ctx.master, "pretrain-draws", idx));
  pretrain_offpolicy(backend, buffer, oc, draw_rng);
  return backend.weights();
}

const SeparateNetWeights& PretrainedBank::separate(int seed_index) {
  const std::size_t i = static_cast<std::size_t>(seed_index);
  if (i >= separate_.size()) {
    separate_.resize(i + 1);
    separate_ready_.resize(i + 1, 0);
  }
  if (!separate_ready_[i]) {
    separate_[i] = pretrain_complete(*ctx_, seed_index);
    separate_ready_[i] = 1;
  }
  return separate_[i];
}

const SharedNetWeights& PretrainedBank::shared(int seed_index) {
  const std::size_t i = static_cast<std::size_t>(seed_index);
  if (i >= shared_.size()) {
    shared_.resize(i + 1);
    shared_ready_.resize(i + 1, 0);
  }
  if (!shared_ready_[i]) {
    shared_[i] = pretrain_limited(*ctx_, seed_index);
    shared_ready_[i] = 1;
  }
  return shared_[i];
}

// ---------- in-situ phase, complete information ----------

CompleteRunResult run_complete_agent(const ExperimentContext& ctx, const AgentSpec& agent,
                                     std::string_view run_tag, const CompleteRunSpec& spec,
                                     const SeparateNetWeights* pretrained) {
  if (approach_uses_pretraining(spec.approach) != (pretrained != nullptr)) {
    throw std::invalid_argument("run_complete_agent: starting weights do not match the approach");
  }
  const std::uint64_t base = derive_seed(ctx.master, std::string(run_tag));
  const TrialEnv env{apply_variation(ctx.cfg.pendulum, agent.variation), ctx.cfg.normalization};

  TrainingConfig tc = TrainingConfig::for_approach(spec.approach);
  tc.stop_c = spec.stop_c;
  tc.max_trials = ctx.cfg.training.retrain_max_trials;
  tc.variable_dr = spec.dr == DiscountMode::Variable;

  DeviceConfig dc = ctx.cfg.device;
  dc.variation = spec.devices;
  const bool pulsed =
      spec.approach == Approach::Manhattan || spec.approach == Approach::ManhattanPQ;
  const auto path =
      pulsed ? SeparateBackend::WritePath::ManhattanPulse : SeparateBackend::WritePath::Exact;

  SeparateNetWeights init;
  if (pretrained) {
    init = *pretrained;
  } else {
    std::mt19937_64 weight_rng = make_rng(agent.weight_seed);
    init = random_separate_weights(weight_rng);
  }

  SeparateBackend backend(init, dc, path, agent.device_seed);
  ActionSampler sampler =
      backend.hardware() ? ActionSampler::on_chip(derive_seed(base, "sampler", agent.device_seed))
                         : ActionSampler::software(derive_seed(base, "sampler", agent.device_seed));
  std::mt19937_64 pool_rng = make_rng(derive_seed(base, "poolrng", agent.device_seed));

  CompleteRunResult res;
  res.outcome = train_sequence(backend, env, ctx.retrain_pool, tc, sampler, pool_rng);
  res.final_weights = backend.weights();
  res.stats = backend.stats();
  // Frozen-weight tests score the learned weights on the common software
  // yardstick (exact reads, software draws), whatever path trained them;
  // the on-chip comparator's 1/256 floor stays a training-time effect.
  SeparateBackend eval_backend(res.final_weights, ctx.cfg.device, SeparateBackend::WritePath::Exact,
                               agent.device_seed);
  ActionSampler eval_sampler = ActionSampler::software(derive_seed(base, "eval", agent.device_seed));
  res.eval = evaluate_agent(eval_backend, env, ctx.test_pool, ctx.eval_states, eval_sampler);
  return res;
}

std::vector<TrialRecord> evaluate_complete_weights(const ExperimentContext& ctx,
                                                   const SeparateNetWeights& w,
                                                   const AgentSpec& agent,
                                                   std::string_view run_tag) {
  const std::uint64_t base = derive_seed(ctx.master, std::string(run_tag));
  const TrialEnv env{apply_variation(ctx.cfg.pendulum, agent.variation), ctx.cfg.normalization};
  SeparateBackend backend(w, ctx.cfg.device, SeparateBackend::WritePath::Exact, agent.device_seed);
  ActionSampler sampler =
      ActionSampler::software(derive_seed(base, "inference", agent.device_seed));
  return evaluate_agent(backend, env, ctx.test_pool, ctx.eval_states, sampler);
}

// ---------- experiment grids ----------

PopulationRunResult run_population_cell(const ExperimentContext& ctx,
                                        std::span<const AgentSpec> population,
                                        PretrainedBank& bank, const CompleteRunSpec& spec,
                                        double pretrained_t2f, std::ostream* log) {
  const std::string tag = std::string(approach_name(spec.approach)) + "-" +
                          std::string(discount_mode_name(spec.dr)) + "-" +
                          std::string(variation_name(spec.devices)) + "-c" +
                          std::to_string(spec.stop_c);
  PopulationRunResult res;
  std::vector<TrialRecord> all_evals;
  double total_updates = 0.0;
  int agent_index = 0;
  for (const AgentSpec& agent : population) {
    const SeparateNetWeights* start =
        approach_uses_pretraining(spec.approach) ? &bank.separate(agent.seed_index) : nullptr;
    CompleteRunResult r = run_complete_agent(ctx, agent, tag, spec, start);
    total_updates += static_cast<double>(r.outcome.updates);
    all_evals.insert(all_evals.end(), r.eval.begin(), r.eval.end());
    log_line(log, "[" + tag + "] agent " + std::to_string(agent_index + 1) + "/" +
                      std::to_string(population.size()) + " variation=" +
                      plant_variation_label(agent.variation) +
                      " trials=" + std::to_string(r.outcome.trials.size()) +
                      " updates=" + std::to_string(r.outcome.updates) +
                      " eval_t2f=" + fmt_double(mean_steps(r.eval), 6));
    res.outcomes.push_back(std::move(r.outcome));
    res.evals.push_back(std::move(r.eval));
    ++agent_index;
  }
  const double mean_updates =
      population.empty() ? 0.0 : total_updates / static_cast<double>(population.size());
  res.row.approach = approach_name(spec.approach);
  res.row.stop_c = spec.stop_c;
  res.row.metrics = compute_metrics(all_evals, pretrained_t2f, mean_updates);
  log_line(log, "[" + tag + "] " + metric_str(res.row.metrics));
  return res;
}

double population_inference_t2f(const ExperimentContext& ctx,
                                std::span<const AgentSpec> population, PretrainedBank& bank,
                                std::vector<std::vector<TrialRecord>>* evals) {
  double total = 0.0;
  std::size_t count = 0;
  for (const AgentSpec& agent : population) {
    std::vector<TrialRecord> ev =
        evaluate_complete_weights(ctx, bank.separate(agent.seed_index), agent, "inference");
    for (const TrialRecord& t : ev) {
      total += static_cast<double>(t.steps_survived);
      ++count;
    }
    if (evals) evals->push_back(std::move(ev));
  }
  if (count == 0) throw std::invalid_argument("population_inference_t2f: empty population");
  return total / static_cast<double>(count);
}

namespace {

void write_population_eval_csv(const std::string& path,
                               std::span<const std::vector<TrialRecord>> per_agent) {
  std::ofstream out = open_out(path);
  out << "agent,state,steps_survived,success,diverged\n";
  for (std::size_t a = 0; a < per_agent.size(); ++a) {
    for (std::size_t i = 0; i < per_agent[a].size(); ++i) {
      const TrialRecord& t = per_agent[a][i];
      out << a << "," << i << "," << t.steps_survived << "," << (t.success ? 1 : 0) << ","
          << (t.diverged ? 1 : 0) << "\n";
    }
  }
}

struct Table1Cell {
  Approach approach;
  int stop_c;
};

}  // namespace

std::vector<Table1Row> run_table1(const ExperimentContext& ctx, const std::string& out_dir,
                                  std::ostream* log) {
  const std::vector<AgentSpec> population = build_population(ctx.scale, ctx.cfg, ctx.master);
  PretrainedBank bank(ctx);

  std::vector<std::vector<TrialRecord>> inference_evals;
  const double pretrained_t2f = population_inference_t2f(ctx, population, bank, &inference_evals);
  write_population_eval_csv(out_dir + "/table1/inference/eval.csv", inference_evals);
  log_line(log, "[inference] t2f=" + fmt_double(pretrained_t2f));

  // The published comparison rows: from-scratch and pre-trained software
  // rules, then the pulsed gated rule on ideal devices.
  const Table1Cell cells[] = {
      {Approach::Baseline, 50},   {Approach::BaselinePQ, 50}, {Approach::Exact, 50},
      {Approach::Exact, 100},     {Approach::ExactPQ, 100},   {Approach::ExactPQ, 400},
      {Approach::ManhattanPQ, 50}, {Approach::ManhattanPQ, 100},
  };

  std::vector<Table1Row> rows;
  {
    Table1Row inference_row;
    inference_row.approach = "inference";
    inference_row.stop_c = 0;
    std::vector<TrialRecord> flat;
    for (const auto& ev : inference_evals) flat.insert(flat.end(), ev.begin(), ev.end());
    inference_row.metrics = compute_metrics(flat, pretrained_t2f, 0.0);
    rows.push_back(inference_row);
  }

  for (const Table1Cell& cell : cells) {
    CompleteRunSpec spec;
    spec.approach = cell.approach;
    spec.stop_c = cell.stop_c;
    PopulationRunResult r = run_population_cell(ctx, population, bank, spec, pretrained_t2f, log);
    const std::string label =
        std::string(approach_name(cell.approach)) + "-c" + std::to_string(cell.stop_c);
    write_population_trials_csv(out_dir + "/table1/" + label + "/trials.csv",
                                [&] {
                                  std::vector<std::vector<TrialRecord>> per_agent;
                                  per_agent.reserve(r.outcomes.size());
                                  for (const TrainOutcome& o : r.outcomes)
                                    per_agent.push_back(o.trials);
                                  return per_agent;
                                }());
    write_population_eval_csv(out_dir + "/table1/" + label + "/eval.csv", r.evals);
    rows.push_back(r.row);
  }
  write_table1_csv(out_dir + "/table1.csv", rows);
  return rows;
}

std::vector<Table2Row> run_table2(const ExperimentContext& ctx, std::span<const int> c_values,
                                  const std::string& out_dir, std::ostream* log) {
  const std::vector<AgentSpec> population = build_population(ctx.scale, ctx.cfg, ctx.master);
  PretrainedBank bank(ctx);
  const double pretrained_t2f = population_inference_t2f(ctx, population, bank, nullptr);
  log_line(log, "[inference] t2f=" + fmt_double(pretrained_t2f));

  std::vector<Table2Row> rows;
  for (DiscountMode dr : {DiscountMode::Variable, DiscountMode::Fixed}) {
    for (VariationMode devices :
         {VariationMode::Ideal, VariationMode::Pct30, VariationMode::FullRange}) {
      for (int c : c_values) {
        CompleteRunSpec spec;
        spec.approach = Approach::ManhattanPQ;
        spec.dr = dr;
        spec.devices = devices;
        spec.stop_c = c;
        PopulationRunResult r =
            run_population_cell(ctx, population, bank, spec, pretrained_t2f, log);
        const std::string label = std::string(discount_mode_name(dr)) + "-" +
                                  std::string(variation_name(devices)) + "-c" + std::to_string(c);
        write_population_eval_csv(out_dir + "/table2/" + label + "/eval.csv", r.evals);
        Table2Row row;
        row.dr = dr;
        row.devices = devices;
        row.stop_c = c;
        row.metrics = r.row.metrics;
        rows.push_back(row);
      }
    }
  }
  write_table2_csv(out_dir + "/table2.csv", rows);
  return rows;
}

// ---------- experiment grids, limited information ----------

double LearningCurve::mean_updates_to(double target_t2f) const {
  for (const LearningCurvePoint& p : points) {
    if (p.mean_t2f >= target_t2f) return static_cast<double>(p.steps);
  }
  return -1.0;
}

LearningCurve run_learning_curve(const ExperimentContext& ctx, PretrainedBank& bank,
                                 bool pretrained, int learners, int agents,
                                 SharedBackend::WritePath path, VariationMode devices,
                                 std::ostream* log) {
  const bool hw = path == SharedBackend::WritePath::ScaledAmplitude;
  LearningCurve curve;
  curve.pretrained = pretrained;
  curve.learners = learners;
  curve.label = std::string(pretrained ? "pre-" : "zero-") + std::to_string(learners);
  const std::string tag = "curve-" + curve.label + (hw ? "-hw" : "");

  const TrialEnv env{ctx.cfg.pendulum, ctx.cfg.normalization};
  DeviceConfig dc = ctx.cfg.device;
  dc.variation = devices;

  RetrainConfig rc;
  rc.learners = learners;
  rc.total_samples = ctx.cfg.training.retrain_samples;
  rc.checkpoint_samples = ctx.cfg.training.checkpoint_samples;
  rc.eval_states = ctx.eval_states;

  std::vector<double> sums;
  std::vector<LearningCurvePoint> grid;
  for (int a = 0; a < agents; ++a) {
    SharedNetWeights init;
    if (pretrained) {
      init = bank.shared(a);
    } else {
      std::mt19937_64 rng = make_rng(derive_seed(ctx.master, "shared-weights",
                                                 static_cast<std::uint64_t>(a)));
      init = random_shared_weights(rng);
    }
    RetrainOutcome ro =
        retrain_synchronous(init, env, ctx.retrain_pool, ctx.test_pool, rc, dc, path,
                            derive_seed(ctx.master, tag, static_cast<std::uint64_t>(a)));
    if (sums.empty()) {
      sums.assign(ro.checkpoints.size(), 0.0);
      grid.resize(ro.checkpoints.size());
      for (std::size_t i = 0; i < ro.checkpoints.size(); ++i) {
        grid[i].samples = ro.checkpoints[i].samples;
        grid[i].steps = ro.checkpoints[i].steps;
      }
    }
    if (sums.size() != ro.checkpoints.size()) {
      throw std::runtime_error("learning curve: checkpoint grids differ between agents");
    }
    for (std::size_t i = 0; i < ro.checkpoints.size(); ++i) sums[i] += ro.checkpoints[i].mean_t2f;
    log_line(log, "[" + tag + "] agent " + std::to_string(a + 1) + "/" + std::to_string(agents) +
                      " final_t2f=" +
                      fmt_double(ro.checkpoints.empty() ? 0.0 : ro.checkpoints.back().mean_t2f, 6));
  }
  curve.points = std::move(grid);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    curve.points[i].mean_t2f = agents > 0 ? sums[i] / static_cast<double>(agents) : 0.0;
  }
  return curve;
}

std::vector<LearningCurve> run_fig9(const ExperimentContext& ctx, std::span<const int> ks,
                                    const std::string& out_dir, std::ostream* log) {
  PretrainedBank bank(ctx);
  std::vector<LearningCurve> curves;
  for (bool pretrained : {false, true}) {
    for (int k : ks) {
      curves.push_back(run_learning_curve(ctx, bank, pretrained, k, ctx.curve_agents,
                                          SharedBackend::WritePath::Exact, VariationMode::Ideal,
                                          log));
    }
  }
  write_curves_csv(out_dir + "/fig9.csv", curves);
  return curves;
}

// ---------- persistence ----------

void write_trials_csv(const std::string& path, std::span<const TrialRecord> trials) {
  std::ofstream out = open_out(path);
  out << "trial,steps_survived,updates,gamma\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const TrialRecord& t = trials[i];
    out << i << "," << t.steps_survived << "," << t.updates << "," << fmt_double(t.gamma) << "\n";
  }
}

void write_population_trials_csv(const std::string& path,
                                 std::span<const std::vector<TrialRecord>> per_agent) {
  std::ofstream out = open_out(path);
  out << "agent,trial,steps_survived,updates,gamma\n";
  for (std::size_t a = 0; a < per_agent.size(); ++a) {
    for (std::size_t i = 0; i < per_agent[a].size(); ++i) {
      const TrialRecord& t = per_agent[a][i];
      out << a << "," << i << "," << t.steps_survived << "," << t.updates << ","
          << fmt_double(t.gamma) << "\n";
    }
  }
}

void write_eval_csv(const std::string& path, std::span<const TrialRecord> trials) {
  std::ofstream out = open_out(path);
  out << "state,steps_survived,success,diverged\n";
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const TrialRecord& t = trials[i];
    out << i << "," << t.steps_survived << "," << (t.success ? 1 : 0) << ","
        << (t.diverged ? 1 : 0) << "\n";
  }
}

void write_checkpoints_csv(const std::string& path,
                           std::span<const CheckpointRecord> checkpoints) {
  std::ofstream out = open_out(path);
  out << "samples,steps,mean_t2f\n";
  for (const CheckpointRecord& c : checkpoints) {
    out << c.samples << "," << c.steps << "," << fmt_double(c.mean_t2f) << "\n";
  }
}

void write_table1_csv(const std::string& path, std::span<const Table1Row> rows) {
  std::ofstream out = open_out(path);
  out << "approach,c,updates_per_weight,mean_t2f,efficiency\n";
  for (const Table1Row& r : rows) {
    out << r.approach << ",";
    if (r.stop_c > 0) {
      out << r.stop_c;
    } else {
      out << "none";
    }
    out << ",";
    if (r.approach == "inference") {
      out << "none";
    } else {
      out << fmt_double(r.metrics.updates_per_weight);
    }
    out << "," << fmt_double(r.metrics.mean_t2f) << ",";
    if (r.approach == "inference") {
      out << "none";
    } else if (r.metrics.efficiency_na) {
      out << "na";
    } else {
      out << fmt_double(r.metrics.efficiency);
    }
    out << "\n";
  }
}

void write_table2_csv(const std::string& path, std::span<const Table2Row> rows) {
  std::ofstream out = open_out(path);
  out << "dr,devices,c,updates_per_weight,mean_t2f,efficiency\n";
  for (const Table2Row& r : rows) {
    out << discount_mode_name(r.dr) << "," << variation_name(r.devices) << "," << r.stop_c << ","
        << fmt_double(r.metrics.updates_per_weight) << "," << fmt_double(r.metrics.mean_t2f)
        << ",";
    if (r.metrics.efficiency_na) {
      out << "na";
    } else {
      out << fmt_double(r.metrics.efficiency);
    }
    out << "\n";
  }
}

void write_curves_csv(const std::string& path, std::span<const LearningCurve> curves) {
  std::ofstream out = open_out(path);
  out << "curve,pretrained,learners,samples,steps,mean_t2f\n";
  for (const LearningCurve& c : curves) {
    for (const LearningCurvePoint& p : c.points) {
      out << c.label << "," << (c.pretrained ? 1 : 0) << "," << c.learners << "," << p.samples
          << "," << p.steps << "," << fmt_double(p.mean_t2f) << "\n";
    }
  }
}

void write_metrics_csv(const std::string& path, const MetricsRecord& m, double pretrained_t2f) {
  std::ofstream out = open_out(path);
  out << "mean_t2f,updates_per_weight,pretrained_t2f,efficiency\n";
  out << fmt_double(m.mean_t2f) << "," << fmt_double(m.updates_per_weight) << ","
      << fmt_double(pretrained_t2f) << ",";
  if (m.efficiency_na) {
    out << "na";
  } else {
    out << fmt_double(m.efficiency);
  }
  out << "\n";
}

void write_manifest(const std::string& path,
                    std::span<const std::pair<std::string, std::string>> entries) {
  std::ofstream out = open_out(path);
  for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
}

// ---------- command verbs ----------

namespace {

SimulationConfig load_verb_config(const VerbOptions& opt) {
  SimulationConfig cfg = default_config();
  if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
  cfg.validate();
  return cfg;
}

void require_out_dir(const VerbOptions& opt) {
  if (opt.out_dir.empty()) throw std::invalid_argument("an output directory is required (--out)");
  fs::create_directories(opt.out_dir);
}

std::string hex_hash(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::pair<std::string, std::string>> base_manifest(const VerbOptions& opt,
                                                               const SimulationConfig& cfg,
                                                               std::string_view verb) {
  std::vector<std::pair<std::string, std::string>> m;
  m.emplace_back("schema", std::to_string(kSchemaVersion));
  m.emplace_back("version", std::string(kVersion));
  m.emplace_back("verb", std::string(verb));
  m.emplace_back("scenario", std::string(scenario_name(opt.scenario)));
  m.emplace_back("scale", std::string(scale_name(opt.scale)));
  m.emplace_back("seed", std::to_string(opt.seed));
  m.emplace_back("config_hash", hex_hash(config_hash(cfg)));
  return m;
}

void write_resolved_config(const VerbOptions& opt, const SimulationConfig& cfg) {
  std::ofstream out = open_out(opt.out_dir + "/config.ini");
  out << serialize_config(cfg);
}

std::string weights_file(const std::string& dir, int seed_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seed_%03d.txt", seed_index);
  return dir + "/weights/" + buf;
}

}  // namespace

void run_pretrain(const VerbOptions& opt, std::ostream* log) {
  require_out_dir(opt);
  const SimulationConfig cfg = load_verb_config(opt);
  const ExperimentContext ctx = make_context(cfg, opt.scale, opt.seed);
  const int count = opt.agents > 0 ? opt.agents : 1;

  auto manifest = base_manifest(opt, cfg, "pretrain");
  manifest.emplace_back("weight_sets", std::to_string(count));

  for (int i = 0; i < count; ++i) {
    if (opt.scenario == Scenario::Complete) {
      std::vector<TrialRecord> trials;
      const SeparateNetWeights w = pretrain_complete(ctx, i, &trials);
      save_checkpoint(w, weights_file(opt.out_dir, i));
      char buf[32];
      std::snprintf(buf, sizeof buf, "trials_seed_%03d.csv", i);
      write_trials_csv(opt.out_dir + "/" + buf, trials);
      log_line(log, "[pretrain] seed " + std::to_string(i) + ": trials=" +
                        std::to_string(trials.size()));
    } else {
      const SharedNetWeights w = pretrain_limited(ctx, i);
      save_checkpoint(w, weights_file(opt.out_dir, i));
      log_line(log, "[pretrain] seed " + std::to_string(i) + ": draws=" +
                        std::to_string(cfg.replay.draws));
    }
  }
  write_resolved_config(opt, cfg);
  write_manifest(opt.out_dir + "/manifest.txt", manifest);
}

void run_retrain(const VerbOptions& opt, std::ostream* log) {
  require_out_dir(opt);
  const SimulationConfig cfg = load_verb_config(opt);
  const ExperimentContext ctx = make_context(cfg, opt.scale, opt.seed);
  auto manifest = base_manifest(opt, cfg, "retrain");
  manifest.emplace_back("approach", std::string(approach_name(opt.approach)));
  manifest.emplace_back("variation", plant_variation_label(opt.variation));
  manifest.emplace_back("devices", std::string(variation_name(opt.devices)));

  if (opt.scenario == Scenario::Complete) {
    const AgentSpec agent = make_agent_spec(opt.seed, opt.variation, 0);
    SeparateNetWeights start;
    const SeparateNetWeights* start_ptr = nullptr;
    if (approach_uses_pretraining(opt.approach)) {
      start = opt.weights_path.empty() ? pretrain_complete(ctx, 0)
                                       : load_separate_checkpoint(opt.weights_path);
      start_ptr = &start;
    }
    CompleteRunSpec spec;
    spec.approach = opt.approach;
    spec.dr = opt.dr;
    spec.devices = opt.devices;
    spec.stop_c = opt.stop_c;
    const CompleteRunResult res = run_complete_agent(ctx, agent, "retrain", spec, start_ptr);

    double pretrained_t2f = 0.0;
    MetricsRecord metrics;
    if (start_ptr) {
      pretrained_t2f = mean_steps(evaluate_complete_weights(ctx, start, agent, "retrain-ref"));
      metrics = compute_metrics(res.eval, pretrained_t2f,
                                static_cast<double>(res.outcome.updates));
    } else {
      metrics = compute_metrics(res.eval, 0.0, static_cast<double>(res.outcome.updates));
      metrics.efficiency_na = true;  // no pre-trained reference to improve on
    }
    write_trials_csv(opt.out_dir + "/trials.csv", res.outcome.trials);
    write_eval_csv(opt.out_dir + "/eval.csv", res.eval);
    write_metrics_csv(opt.out_dir + "/metrics.csv", metrics, pretrained_t2f);
    save_checkpoint(res.final_weights, opt.out_dir + "/weights_final.txt");
    manifest.emplace_back("c", std::to_string(opt.stop_c));
    manifest.emplace_back("dr", std::string(discount_mode_name(opt.dr)));
    manifest.emplace_back("trials", std::to_string(res.outcome.trials.size()));
    manifest.emplace_back("updates_per_weight", fmt_double(metrics.updates_per_weight));
    manifest.emplace_back("mean_t2f", fmt_double(metrics.mean_t2f));
    log_line(log, "[retrain] " + metric_str(metrics));
  } else {
    if (opt.approach != Approach::Baseline && opt.approach != Approach::Exact &&
        opt.approach != Approach::VariableAmplitude) {
      throw std::invalid_argument(
          "limited scenario supports approaches baseline, exact, variable-amplitude");
    }
    const int k = opt.agents > 0 ? opt.agents : 4;
    SharedNetWeights init;
    if (opt.approach == Approach::Baseline) {
      std::mt19937_64 rng = make_rng(derive_seed(opt.seed, "shared-weights", 0));
      init = random_shared_weights(rng);
    } else {
      init = opt.weights_path.empty() ? pretrain_limited(ctx, 0)
                                      : load_shared_checkpoint(opt.weights_path);
    }
    const auto path = opt.approach == Approach::VariableAmplitude
                          ? SharedBackend::WritePath::ScaledAmplitude
                          : SharedBackend::WritePath::Exact;
    DeviceConfig dc = cfg.device;
    dc.variation = opt.devices;
    RetrainConfig rc;
    rc.learners = k;
    rc.total_samples = cfg.training.retrain_samples;
    rc.checkpoint_samples = cfg.training.checkpoint_samples;
    rc.eval_states = ctx.eval_states;
    const TrialEnv env{apply_variation(cfg.pendulum, opt.variation), cfg.normalization};
    const RetrainOutcome res =
        retrain_synchronous(init, env, ctx.retrain_pool, ctx.test_pool, rc, dc, path,
                            derive_seed(opt.seed, "retrain-limited"));
    write_checkpoints_csv(opt.out_dir + "/checkpoints.csv", res.checkpoints);
    save_checkpoint(res.weights, opt.out_dir + "/weights_final.txt");
    manifest.emplace_back("learners", std::to_string(k));
    manifest.emplace_back("updates", std::to_string(res.updates));
    manifest.emplace_back("final_t2f",
                          fmt_double(res.checkpoints.empty() ? 0.0
                                                             : res.checkpoints.back().mean_t2f));
    log_line(log, "[retrain] learners=" + std::to_string(k) +
                      " updates=" + std::to_string(res.updates));
  }
  write_resolved_config(opt, cfg);
  write_manifest(opt.out_dir + "/manifest.txt", manifest);
}

void run_test(const VerbOptions& opt, std::ostream* log) {
  require_out_dir(opt);
  if (opt.weights_path.empty()) {
    throw std::invalid_argument("test requires a weight checkpoint (--weights)");
  }
  const SimulationConfig cfg = load_verb_config(opt);
  const ExperimentContext ctx = make_context(cfg, opt.scale, opt.seed);
  auto manifest = base_manifest(opt, cfg, "test");
  manifest.emplace_back("variation", plant_variation_label(opt.variation));
  manifest.emplace_back("weights", opt.weights_path);

  const std::string layout = checkpoint_layout(opt.weights_path);
  std::vector<TrialRecord> eval;
  if (layout == "separate") {
    const SeparateNetWeights w = load_separate_checkpoint(opt.weights_path);
    const AgentSpec agent = make_agent_spec(opt.seed, opt.variation, 0);
    eval = evaluate_complete_weights(ctx, w, agent, "test");
  } else {
    const SharedNetWeights w = load_shared_checkpoint(opt.weights_path);
    const TrialEnv env{apply_variation(cfg.pendulum, opt.variation), cfg.normalization};
    SharedBackend backend(w, cfg.device, SharedBackend::WritePath::Exact,
                          derive_seed(opt.seed, "test-fab"));
    ActionSampler sampler = ActionSampler::software(derive_seed(opt.seed, "test-sampler"));
    eval = evaluate_shared_agent(backend, env, ctx.test_pool, ctx.eval_states, sampler);
  }
  write_eval_csv(opt.out_dir + "/eval.csv", eval);
  manifest.emplace_back("layout", layout);
  manifest.emplace_back("states", std::to_string(eval.size()));
  manifest.emplace_back("mean_t2f", fmt_double(mean_steps(eval)));
  write_resolved_config(opt, cfg);
  write_manifest(opt.out_dir + "/manifest.txt", manifest);
  log_line(log, "[test] mean_t2f=" + fmt_double(mean_steps(eval)));
}

void run_sweep(const VerbOptions& opt, std::ostream* log) {
  require_out_dir(opt);
  SimulationConfig cfg = load_verb_config(opt);
  if (opt.agents > 0) {
    if (opt.grid == "fig9") {
      (opt.scale == Scale::Desk ? cfg.harness.desk_curve_agents : cfg.harness.full_curve_agents) =
          opt.agents;
    } else {
      (opt.scale == Scale::Desk ? cfg.harness.desk_seeds : cfg.harness.full_seeds) = opt.agents;
    }
  }
  const ExperimentContext ctx = make_context(cfg, opt.scale, opt.seed);
  auto manifest = base_manifest(opt, cfg, "sweep");
  manifest.emplace_back("grid", opt.grid);

  if (opt.grid == "table1") {
    const std::vector<Table1Row> rows = run_table1(ctx, opt.out_dir, log);
    manifest.emplace_back("rows", std::to_string(rows.size()));
    manifest.emplace_back(
        "note", "pre-trained weight sets are shared across plant variations; rows average "
                "weight-seed x variation agents");
  } else if (opt.grid == "table2") {
    const std::vector<int> desk_c = {50};
    const std::vector<int> full_c = {50, 100, 150};
    const std::vector<int>& c_values = opt.scale == Scale::Desk ? desk_c : full_c;
    const std::vector<Table2Row> rows = run_table2(ctx, c_values, opt.out_dir, log);
    manifest.emplace_back("rows", std::to_string(rows.size()));
    manifest.emplace_back(
        "note", "pre-trained weight sets are shared across plant variations; rows average "
                "weight-seed x variation agents");
  } else if (opt.grid == "fig9") {
    const std::vector<int> ks = {1, 2, 4, 8};
    const std::vector<LearningCurve> curves = run_fig9(ctx, ks, opt.out_dir, log);
    manifest.emplace_back("curves", std::to_string(curves.size()));
  } else {
    throw std::invalid_argument("unknown sweep grid: " + opt.grid +
                                " (expected table1, table2 or fig9)");
  }
  write_resolved_config(opt, cfg);
  write_manifest(opt.out_dir + "/manifest.txt", manifest);
}

}  // namespace memrl
