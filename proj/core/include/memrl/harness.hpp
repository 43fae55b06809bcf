#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memrl/config.hpp"
#include "memrl/training.hpp"

namespace memrl {

// Desk scale runs the same experiments as full scale with a small population
// and a shorter test-pool prefix, so they finish in minutes instead of days.
enum class Scale { Desk, Full };
std::string_view scale_name(Scale s);
Scale parse_scale(std::string_view name);  // throws std::invalid_argument

enum class Scenario { Complete, Limited };
std::string_view scenario_name(Scenario s);
Scenario parse_scenario(std::string_view name);

enum class DiscountMode { Fixed, Variable };
std::string_view discount_mode_name(DiscountMode m);
DiscountMode parse_discount_mode(std::string_view name);

// Percent changes of pendulum mass and length relative to the standard
// plant; both drawn from {-10, -5, 0, +5, +10}.
struct PlantVariation {
  int mass_pct = 0;
  int length_pct = 0;
};

std::string plant_variation_label(PlantVariation v);           // e.g. "+10,-5"
PlantVariation parse_plant_variation(std::string_view label);  // throws
PendulumConfig apply_variation(const PendulumConfig& base, PlantVariation v);

// The full 5x5 percent grid, or the desk subset (center plus the four
// corners, the plants a desk run can actually tell apart).
std::vector<PlantVariation> variation_grid(Scale scale);

struct AgentSpec {
  PlantVariation variation;
  int seed_index = 0;            // selects the (shared) weight set
  std::uint64_t weight_seed = 0;
  std::uint64_t device_seed = 0;
};

// Population for the complete-information experiments: every variation of
// the grid paired with seeds_per_variation weight seeds. Weight seeds are
// shared across variations (one bank of starting weights serves the whole
// grid); device seeds are unique per agent. The desk population uses the
// same generation logic on the smaller grid.
std::vector<AgentSpec> build_population(Scale scale, const SimulationConfig& cfg,
                                        std::uint64_t master_seed);

struct MetricsRecord {
  double mean_t2f = 0.0;
  double updates_per_weight = 0.0;
  double efficiency = 0.0;
  bool efficiency_na = false;  // zero updates with a nonzero improvement
};

// Aggregates frozen-weight test trials against the pre-trained reference:
// mean_t2f is the plain mean of steps survived; efficiency is the t2f
// improvement over the reference divided by updates_per_weight.
MetricsRecord compute_metrics(std::span<const TrialRecord> test_trials, double pretrained_t2f,
                              double updates_per_weight);

// Shared experiment state: resolved config, master seed, and the three
// initial-state pools (training pools are drawn once and shared by every
// agent).
struct ExperimentContext {
  SimulationConfig cfg;
  std::uint64_t master = 0;
  Scale scale = Scale::Desk;
  std::vector<PendulumState> pretrain_pool;
  std::vector<PendulumState> retrain_pool;
  std::vector<PendulumState> test_pool;
  std::size_t eval_states = 0;  // test-pool prefix length at this scale
  int curve_agents = 0;         // agents per learning curve at this scale
};

ExperimentContext make_context(const SimulationConfig& cfg, Scale scale,
                               std::uint64_t master_seed);

// ---------- ex-situ phase ----------

// Trains one set of starting weights on the standard plant with exact
// writes (the software phase that precedes any on-chip run). Appends the
// per-trial records when trials is non-null.
SeparateNetWeights pretrain_complete(const ExperimentContext& ctx, int seed_index,
                                     std::vector<TrialRecord>* trials = nullptr);

// Off-policy counterpart for the limited-information scenario: stored
// random transitions, importance-weighted one-step updates.
SharedNetWeights pretrain_limited(const ExperimentContext& ctx, int seed_index);

// Lazily built bank of pre-trained weight sets indexed by seed.
class PretrainedBank {
 public:
  explicit PretrainedBank(const ExperimentContext& ctx) : ctx_(&ctx) {}
  const SeparateNetWeights& separate(int seed_index);
  const SharedNetWeights& shared(int seed_index);

 private:
  const ExperimentContext* ctx_;
  std::vector<SeparateNetWeights> separate_;
  std::vector<char> separate_ready_;
  std::vector<SharedNetWeights> shared_;
  std::vector<char> shared_ready_;
};

// ---------- in-situ phase, complete information ----------

struct CompleteRunSpec {
  Approach approach = Approach::Exact;
  DiscountMode dr = DiscountMode::Fixed;
  VariationMode devices = VariationMode::Ideal;
  int stop_c = 50;
};

struct CompleteRunResult {
  TrainOutcome outcome;           // per-trial training records
  std::vector<TrialRecord> eval;  // frozen-weight test trials after training
  SeparateNetWeights final_weights;
  WriteStats stats;
};

// One agent's training sequence on its varied plant followed by the frozen
// evaluation on the test-pool prefix. pretrained is the starting weight set
// for the approaches that use one (null for the from-scratch approaches).
// run_tag separates the random streams of different experiment cells.
CompleteRunResult run_complete_agent(const ExperimentContext& ctx, const AgentSpec& agent,
                                     std::string_view run_tag, const CompleteRunSpec& spec,
                                     const SeparateNetWeights* pretrained);

// Frozen inference of a weight set on an agent's plant (exact readout, no
// updates): the pre-trained reference row.
std::vector<TrialRecord> evaluate_complete_weights(const ExperimentContext& ctx,
                                                   const SeparateNetWeights& w,
                                                   const AgentSpec& agent,
                                                   std::string_view run_tag);

// ---------- experiment grids ----------

struct Table1Row {
  std::string approach;  // approach name, or "inference" for the reference row
  int stop_c = 0;        // 0 for the reference row
  MetricsRecord metrics;
};

struct PopulationRunResult {
  Table1Row row;
  // Per-agent artifacts, index-aligned with the population.
  std::vector<TrainOutcome> outcomes;
  std::vector<std::vector<TrialRecord>> evals;
};

// Runs one (approach, C) cell over the whole population and aggregates.
// pretrained_t2f is the population-mean frozen reference used for the
// efficiency column.
PopulationRunResult run_population_cell(const ExperimentContext& ctx,
                                        std::span<const AgentSpec> population,
                                        PretrainedBank& bank, const CompleteRunSpec& spec,
                                        double pretrained_t2f, std::ostream* log);

// Population-mean frozen inference of the pre-trained bank.
double population_inference_t2f(const ExperimentContext& ctx,
                                std::span<const AgentSpec> population, PretrainedBank& bank,
                                std::vector<std::vector<TrialRecord>>* evals = nullptr);

// The headline comparison grid: from-scratch and pre-trained approaches at
// their published stop values, plus the frozen-inference reference row.
std::vector<Table1Row> run_table1(const ExperimentContext& ctx, const std::string& out_dir,
                                  std::ostream* log);

struct Table2Row {
  DiscountMode dr = DiscountMode::Fixed;
  VariationMode devices = VariationMode::Ideal;
  int stop_c = 0;
  MetricsRecord metrics;
};

// Update-efficiency grid of the pulsed gated approach: discount-rate mode x
// device assumption x stop value.
std::vector<Table2Row> run_table2(const ExperimentContext& ctx, std::span<const int> c_values,
                                  const std::string& out_dir, std::ostream* log);

// ---------- experiment grids, limited information ----------

struct LearningCurvePoint {
  long long samples = 0;
  long long steps = 0;
  double mean_t2f = 0.0;  // averaged over agents at this checkpoint
};

struct LearningCurve {
  std::string label;  // "zero-1" ... "pre-8"
  bool pretrained = false;
  int learners = 1;
  std::vector<LearningCurvePoint> points;
  double mean_updates_to(double target_t2f) const;  // -1 when never reached
};

// One averaged learning curve: agents re-trained synchronously with K
// learners from zero-knowledge or pre-trained weights, evaluated at every
// checkpoint.
LearningCurve run_learning_curve(const ExperimentContext& ctx, PretrainedBank& bank,
                                 bool pretrained, int learners, int agents,
                                 SharedBackend::WritePath path, VariationMode devices,
                                 std::ostream* log);

// The learner-count comparison: zero- and pre-initialized curves for the
// requested learner counts, all on the software-exact path.
std::vector<LearningCurve> run_fig9(const ExperimentContext& ctx, std::span<const int> ks,
                                    const std::string& out_dir, std::ostream* log);

// ---------- persistence ----------

void write_trials_csv(const std::string& path, std::span<const TrialRecord> trials);
// One block per agent, with a leading agent column.
void write_population_trials_csv(const std::string& path,
                                 std::span<const std::vector<TrialRecord>> per_agent);
void write_eval_csv(const std::string& path, std::span<const TrialRecord> trials);
void write_checkpoints_csv(const std::string& path, std::span<const CheckpointRecord> checkpoints);
void write_table1_csv(const std::string& path, std::span<const Table1Row> rows);
void write_table2_csv(const std::string& path, std::span<const Table2Row> rows);
void write_curves_csv(const std::string& path, std::span<const LearningCurve> curves);
void write_metrics_csv(const std::string& path, const MetricsRecord& m, double pretrained_t2f);

// Key-value manifest recording what produced a results directory.
void write_manifest(const std::string& path,
                    std::span<const std::pair<std::string, std::string>> entries);

// ---------- command verbs ----------

struct VerbOptions {
  Scenario scenario = Scenario::Complete;
  Approach approach = Approach::Exact;
  PlantVariation variation{};
  VariationMode devices = VariationMode::Ideal;
  DiscountMode dr = DiscountMode::Fixed;
  int agents = 0;  // pretrain: weight sets; limited retrain: learner count
  int stop_c = 50;
  std::uint64_t seed = 1;
  Scale scale = Scale::Desk;
  std::string grid = "table1";  // sweep: table1 | table2 | fig9
  std::string config_path;      // optional config file
  std::string weights_path;     // retrain/test: starting checkpoint
  std::string out_dir;
};

// Verb entry points shared by the command-line tool and the acceptance
// suite. They create out_dir, write CSVs, weight checkpoints, the resolved
// config and a manifest, and log one line per major step. Errors propagate
// as exceptions.
void run_pretrain(const VerbOptions& opt, std::ostream* log);
void run_retrain(const VerbOptions& opt, std::ostream* log);
void run_test(const VerbOptions& opt, std::ostream* log);
void run_sweep(const VerbOptions& opt, std::ostream* log);

}  // namespace memrl
