#include "memrl/harness.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <doctest.h>

#include "memrl/config.hpp"
#include "memrl/textio.hpp"

using namespace memrl;
namespace fs = std::filesystem;

namespace {

// A configuration small enough that whole verbs finish in seconds.
SimulationConfig tiny_config() {
  SimulationConfig cfg = default_config();
  cfg.pools.pretrain_size = 50;
  cfg.pools.retrain_size = 50;
  cfg.pools.test_size = 20;
  cfg.replay.size = 500;
  cfg.replay.draws = 300;
  cfg.training.pretrain_c = 2;
  cfg.training.pretrain_max_trials = 15;
  cfg.training.retrain_max_trials = 10;
  cfg.training.retrain_samples = 2000;
  cfg.training.checkpoint_samples = 1000;
  cfg.harness.desk_seeds = 2;
  cfg.harness.desk_eval_states = 5;
  cfg.harness.desk_curve_agents = 2;
  return cfg;
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "memrl_harness_tests" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(bool(in), "missing file: " << path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

TrialRecord steps_record(int steps) {
  TrialRecord t;
  t.steps_survived = steps;
  t.success = steps >= kTrialStepLimit;
  return t;
}

}  // namespace

TEST_CASE("mode names round-trip") {
  CHECK(parse_scale(scale_name(Scale::Desk)) == Scale::Desk);
  CHECK(parse_scale(scale_name(Scale::Full)) == Scale::Full);
  CHECK(scale_name(Scale::Desk) == "desk");
  CHECK_THROWS_AS(parse_scale("tiny"), std::invalid_argument);

  CHECK(parse_scenario(scenario_name(Scenario::Complete)) == Scenario::Complete);
  CHECK(parse_scenario(scenario_name(Scenario::Limited)) == Scenario::Limited);
  CHECK_THROWS_AS(parse_scenario("partial"), std::invalid_argument);

  CHECK(parse_discount_mode(discount_mode_name(DiscountMode::Fixed)) == DiscountMode::Fixed);
  CHECK(parse_discount_mode(discount_mode_name(DiscountMode::Variable)) == DiscountMode::Variable);
  CHECK_THROWS_AS(parse_discount_mode("adaptive"), std::invalid_argument);

  CHECK(parse_variation(variation_name(VariationMode::Ideal)) == VariationMode::Ideal);
  CHECK(parse_variation(variation_name(VariationMode::Pct30)) == VariationMode::Pct30);
  CHECK(parse_variation(variation_name(VariationMode::FullRange)) == VariationMode::FullRange);
  CHECK_THROWS_AS(parse_variation("perfect"), std::invalid_argument);
}

TEST_CASE("plant variations label, parse and scale the plant") {
  CHECK(plant_variation_label({10, -5}) == "+10,-5");
  CHECK(plant_variation_label({0, 0}) == "0,0");
  CHECK(plant_variation_label({-10, 10}) == "-10,+10");

  const PlantVariation v = parse_plant_variation("+10,-5");
  CHECK(v.mass_pct == 10);
  CHECK(v.length_pct == -5);
  const PlantVariation w = parse_plant_variation(" -5 , 0 ");
  CHECK(w.mass_pct == -5);
  CHECK(w.length_pct == 0);

  CHECK_THROWS_AS(parse_plant_variation("10"), std::invalid_argument);
  CHECK_THROWS_AS(parse_plant_variation("7,0"), std::invalid_argument);  // off-grid level
  CHECK_THROWS_AS(parse_plant_variation("ten,0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_plant_variation("10,0x"), std::invalid_argument);

  const PendulumConfig base;
  const PendulumConfig varied = apply_variation(base, {10, -10});
  CHECK(varied.pendulum_mass == doctest::Approx(base.pendulum_mass * 1.10));
  CHECK(varied.pendulum_length == doctest::Approx(base.pendulum_length * 0.90));
  CHECK(varied.arm_mass == base.arm_mass);
  CHECK(varied.arm_length == base.arm_length);
  CHECK(varied.push_torque == base.push_torque);
  CHECK(varied.dt == base.dt);
  CHECK_THROWS_AS(apply_variation(base, {3, 0}), std::invalid_argument);
}

TEST_CASE("variation grids cover the intended plants") {
  const std::vector<PlantVariation> full = variation_grid(Scale::Full);
  REQUIRE(full.size() == 25);
  std::set<std::pair<int, int>> seen;
  for (const PlantVariation& v : full) seen.insert({v.mass_pct, v.length_pct});
  CHECK(seen.size() == 25);
  for (int m : {-10, -5, 0, 5, 10})
    for (int l : {-10, -5, 0, 5, 10}) CHECK(seen.count({m, l}) == 1);

  const std::vector<PlantVariation> desk = variation_grid(Scale::Desk);
  REQUIRE(desk.size() == 5);
  std::set<std::pair<int, int>> desk_seen;
  for (const PlantVariation& v : desk) desk_seen.insert({v.mass_pct, v.length_pct});
  CHECK(desk_seen == std::set<std::pair<int, int>>{
                         {0, 0}, {-10, -10}, {-10, 10}, {10, -10}, {10, 10}});
}

TEST_CASE("population shares weight seeds across plants but not device seeds") {
  const SimulationConfig cfg = tiny_config();
  const std::vector<AgentSpec> pop = build_population(Scale::Desk, cfg, 7);
  REQUIRE(pop.size() == 5u * 2u);  // 5 desk variations x desk_seeds

  // Same seed index means the same starting-weight stream on every plant.
  for (const AgentSpec& a : pop) {
    for (const AgentSpec& b : pop) {
      if (a.seed_index == b.seed_index) {
        CHECK(a.weight_seed == b.weight_seed);
      } else {
        CHECK(a.weight_seed != b.weight_seed);
      }
    }
  }

  // Device fabrication streams are unique per agent.
  std::set<std::uint64_t> device_seeds;
  for (const AgentSpec& a : pop) device_seeds.insert(a.device_seed);
  CHECK(device_seeds.size() == pop.size());

  // The same master seed reproduces the population; a different one does not.
  const std::vector<AgentSpec> again = build_population(Scale::Desk, cfg, 7);
  REQUIRE(again.size() == pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    CHECK(pop[i].weight_seed == again[i].weight_seed);
    CHECK(pop[i].device_seed == again[i].device_seed);
    CHECK(pop[i].variation.mass_pct == again[i].variation.mass_pct);
    CHECK(pop[i].variation.length_pct == again[i].variation.length_pct);
  }
  const std::vector<AgentSpec> other = build_population(Scale::Desk, cfg, 8);
  CHECK(other[0].weight_seed != pop[0].weight_seed);

  // Desk agents are a subset of the full population: a desk agent and its
  // full-scale counterpart on the same plant share both streams.
  const std::vector<AgentSpec> full = build_population(Scale::Full, cfg, 7);
  REQUIRE(full.size() == 25u * cfg.harness.full_seeds);
  for (const AgentSpec& d : pop) {
    bool found = false;
    for (const AgentSpec& f : full) {
      if (f.variation.mass_pct == d.variation.mass_pct &&
          f.variation.length_pct == d.variation.length_pct && f.seed_index == d.seed_index) {
        CHECK(f.weight_seed == d.weight_seed);
        CHECK(f.device_seed == d.device_seed);
        found = true;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("efficiency metrics") {
  SUBCASE("improvement divided by update cost") {
    std::vector<TrialRecord> trials{steps_record(4200), steps_record(4200)};
    const MetricsRecord m = compute_metrics(trials, 4100.0, 1825.6);
    CHECK(m.mean_t2f == doctest::Approx(4200.0));
    CHECK(m.updates_per_weight == doctest::Approx(1825.6));
    CHECK_FALSE(m.efficiency_na);
    CHECK(m.efficiency == doctest::Approx(100.0 / 1825.6));
  }

  SUBCASE("zero updates with an improvement has no defined efficiency") {
    std::vector<TrialRecord> trials{steps_record(4200)};
    const MetricsRecord m = compute_metrics(trials, 4100.0, 0.0);
    CHECK(m.efficiency_na);
  }

  SUBCASE("zero updates and zero improvement is zero efficiency") {
    std::vector<TrialRecord> trials{steps_record(4100)};
    const MetricsRecord m = compute_metrics(trials, 4100.0, 0.0);
    CHECK_FALSE(m.efficiency_na);
    CHECK(m.efficiency == 0.0);
  }

  SUBCASE("regressions produce negative efficiency") {
    std::vector<TrialRecord> trials{steps_record(3000)};
    const MetricsRecord m = compute_metrics(trials, 4100.0, 100.0);
    CHECK(m.efficiency == doctest::Approx(-1100.0 / 100.0));
  }

  SUBCASE("an empty test set is rejected") {
    CHECK_THROWS_AS(compute_metrics({}, 0.0, 1.0), std::invalid_argument);
  }
}

TEST_CASE("experiment context draws its pools deterministically") {
  const SimulationConfig cfg = tiny_config();
  const ExperimentContext ctx = make_context(cfg, Scale::Desk, 99);
  CHECK(ctx.pretrain_pool.size() == cfg.pools.pretrain_size);
  CHECK(ctx.retrain_pool.size() == cfg.pools.retrain_size);
  CHECK(ctx.test_pool.size() == cfg.pools.test_size);
  CHECK(ctx.eval_states == std::min(cfg.harness.desk_eval_states, cfg.pools.test_size));
  CHECK(ctx.curve_agents == cfg.harness.desk_curve_agents);

  // Every pool start is inside the reward band.
  for (const PendulumState& s : ctx.test_pool) CHECK(reward(s) == 0);

  const ExperimentContext again = make_context(cfg, Scale::Desk, 99);
  for (std::size_t i = 0; i < ctx.test_pool.size(); ++i) {
    CHECK(ctx.test_pool[i].theta == again.test_pool[i].theta);
    CHECK(ctx.test_pool[i].alpha_dot == again.test_pool[i].alpha_dot);
  }

  // The three pools come from unrelated streams.
  CHECK(ctx.pretrain_pool[0].theta != ctx.retrain_pool[0].theta);
  CHECK(ctx.pretrain_pool[0].theta != ctx.test_pool[0].theta);

  const ExperimentContext full = make_context(cfg, Scale::Full, 99);
  CHECK(full.eval_states == cfg.pools.test_size);
  CHECK(full.curve_agents == cfg.harness.full_curve_agents);
}

TEST_CASE("config text round-trips and hashes stably") {
  const SimulationConfig cfg = tiny_config();
  const std::string text = serialize_config(cfg);

  SimulationConfig parsed = default_config();
  apply_config_text(parsed, text);
  CHECK(serialize_config(parsed) == text);
  CHECK(config_hash(parsed) == config_hash(cfg));

  // Overrides change the value and therefore the hash.
  SimulationConfig tweaked = cfg;
  apply_config_text(tweaked, "[pendulum]\npush_torque = 0.05\n");
  CHECK(tweaked.pendulum.push_torque == doctest::Approx(0.05));
  CHECK(config_hash(tweaked) != config_hash(cfg));

  // Comments and blank lines are tolerated.
  SimulationConfig commented = cfg;
  apply_config_text(commented,
                    "# leading comment\n\n[device]\nadc_bits = 10 ; trailing comment\n");
  CHECK(commented.device.adc_bits == 10);

  // Malformed input names the problem.
  SimulationConfig scratch = cfg;
  CHECK_THROWS_AS(apply_config_text(scratch, "[nosuch]\nkey = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_text(scratch, "[pendulum]\nnosuch_key = 1\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_config_text(scratch, "[pendulum]\npush_torque = fast\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_config_text(scratch, "key_without_section = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_text(scratch, "[pendulum\npush_torque = 1\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_config_text(scratch, "[meta]\nschema = 999\n"), std::invalid_argument);

  CHECK_THROWS_AS(load_config("/nonexistent/memrl.ini"), std::runtime_error);
}

TEST_CASE("command verbs write byte-identical outputs on identical inputs") {
  const fs::path root = fresh_dir("verbs");
  const fs::path cfg_file = root / "tiny.ini";
  {
    std::ofstream out(cfg_file);
    out << serialize_config(tiny_config());
  }

  VerbOptions pre;
  pre.scenario = Scenario::Complete;
  pre.agents = 1;
  pre.seed = 5;
  pre.scale = Scale::Desk;
  pre.config_path = cfg_file.string();

  // --- pretrain, twice ---
  pre.out_dir = (root / "pre1").string();
  run_pretrain(pre, nullptr);
  pre.out_dir = (root / "pre2").string();
  run_pretrain(pre, nullptr);
  for (const char* rel :
       {"manifest.txt", "config.ini", "weights/seed_000.txt", "trials_seed_000.csv"}) {
    CHECK_MESSAGE(read_file(root / "pre1" / rel) == read_file(root / "pre2" / rel),
                  "pretrain output differs: " << rel);
  }

  // The manifest records the hash of the resolved config it sits next to.
  const SimulationConfig resolved = load_config((root / "pre1" / "config.ini").string());
  char expected_hash[19];
  std::snprintf(expected_hash, sizeof expected_hash, "0x%016llx",
                static_cast<unsigned long long>(config_hash(resolved)));
  bool hash_line_found = false;
  bool seed_line_found = false;
  for (const std::string& line : read_lines(root / "pre1" / "manifest.txt")) {
    if (line == std::string("config_hash = ") + expected_hash) hash_line_found = true;
    if (line == "seed = 5") seed_line_found = true;
  }
  CHECK(hash_line_found);
  CHECK(seed_line_found);

  // --- retrain from the saved checkpoint, twice ---
  VerbOptions re;
  re.scenario = Scenario::Complete;
  re.approach = Approach::Exact;
  re.stop_c = 2;
  re.seed = 5;
  re.scale = Scale::Desk;
  re.config_path = cfg_file.string();
  re.weights_path = (root / "pre1" / "weights" / "seed_000.txt").string();
  re.out_dir = (root / "re1").string();
  run_retrain(re, nullptr);
  re.out_dir = (root / "re2").string();
  run_retrain(re, nullptr);
  for (const char* rel :
       {"manifest.txt", "config.ini", "trials.csv", "eval.csv", "metrics.csv",
        "weights_final.txt"}) {
    CHECK_MESSAGE(read_file(root / "re1" / rel) == read_file(root / "re2" / rel),
                  "retrain output differs: " << rel);
  }

  // The persisted metrics agree with the persisted per-state evaluations.
  {
    const std::vector<std::string> eval_lines = read_lines(root / "re1" / "eval.csv");
    REQUIRE(eval_lines.size() >= 2);
    CHECK(eval_lines[0] == "state,steps_survived,success,diverged");
    double total = 0.0;
    for (std::size_t i = 1; i < eval_lines.size(); ++i) {
      const std::vector<std::string> f = split_csv(eval_lines[i]);
      REQUIRE(f.size() == 4);
      CHECK(std::stoull(f[0]) == i - 1);  // state index column, in pool order
      total += std::stod(f[1]);
    }
    const double mean_from_eval = total / static_cast<double>(eval_lines.size() - 1);

    const std::vector<std::string> metric_lines = read_lines(root / "re1" / "metrics.csv");
    REQUIRE(metric_lines.size() == 2);
    CHECK(metric_lines[0] == "mean_t2f,updates_per_weight,pretrained_t2f,efficiency");
    const std::vector<std::string> m = split_csv(metric_lines[1]);
    REQUIRE(m.size() == 4);
    CHECK(std::stod(m[0]) == doctest::Approx(mean_from_eval).epsilon(1e-9));
  }

  // --- limited-information retrain (synchronous learners), twice ---
  VerbOptions lim;
  lim.scenario = Scenario::Limited;
  lim.approach = Approach::Exact;
  lim.agents = 2;  // learner count
  lim.seed = 5;
  lim.scale = Scale::Desk;
  lim.config_path = cfg_file.string();
  lim.out_dir = (root / "lim1").string();
  run_retrain(lim, nullptr);
  lim.out_dir = (root / "lim2").string();
  run_retrain(lim, nullptr);
  for (const char* rel : {"manifest.txt", "checkpoints.csv", "weights_final.txt"}) {
    CHECK_MESSAGE(read_file(root / "lim1" / rel) == read_file(root / "lim2" / rel),
                  "limited retrain output differs: " << rel);
  }
  {
    const std::vector<std::string> lines = read_lines(root / "lim1" / "checkpoints.csv");
    REQUIRE(lines.size() >= 2);
    CHECK(lines[0] == "samples,steps,mean_t2f");
    // 2000 samples at a 1000-sample cadence: checkpoints at 0, 1000, 2000.
    CHECK(lines.size() == 4);
    CHECK(split_csv(lines[1])[0] == "0");
    CHECK(split_csv(lines[2])[0] == "1000");
    CHECK(split_csv(lines[3])[0] == "2000");
  }

  // --- frozen test of a checkpoint, twice ---
  VerbOptions tst;
  tst.scenario = Scenario::Complete;
  tst.seed = 6;
  tst.scale = Scale::Desk;
  tst.config_path = cfg_file.string();
  tst.weights_path = (root / "re1" / "weights_final.txt").string();
  tst.out_dir = (root / "t1").string();
  run_test(tst, nullptr);
  tst.out_dir = (root / "t2").string();
  run_test(tst, nullptr);
  for (const char* rel : {"manifest.txt", "eval.csv", "config.ini"}) {
    CHECK_MESSAGE(read_file(root / "t1" / rel) == read_file(root / "t2" / rel),
                  "test output differs: " << rel);
  }

  // The test verb also reads shared-layout checkpoints.
  VerbOptions tst_shared = tst;
  tst_shared.weights_path = (root / "lim1" / "weights_final.txt").string();
  tst_shared.out_dir = (root / "ts1").string();
  run_test(tst_shared, nullptr);
  bool layout_line = false;
  for (const std::string& line : read_lines(root / "ts1" / "manifest.txt")) {
    if (line == "layout = shared") layout_line = true;
  }
  CHECK(layout_line);

  // Usage errors surface as exceptions, not silent defaults.
  VerbOptions bad = tst;
  bad.weights_path.clear();
  bad.out_dir = (root / "bad").string();
  CHECK_THROWS_AS(run_test(bad, nullptr), std::invalid_argument);
  VerbOptions no_out = pre;
  no_out.out_dir.clear();
  CHECK_THROWS_AS(run_pretrain(no_out, nullptr), std::invalid_argument);

  fs::remove_all(root);
}

TEST_CASE("a sweep over the comparison grid is reproducible") {
  const fs::path root = fresh_dir("sweep");
  const fs::path cfg_file = root / "tiny.ini";
  {
    SimulationConfig cfg = tiny_config();
    cfg.harness.desk_eval_states = 3;  // keep the evaluation volume small
    std::ofstream out(cfg_file);
    out << serialize_config(cfg);
  }

  VerbOptions sweep;
  sweep.scenario = Scenario::Complete;
  sweep.seed = 9;
  sweep.scale = Scale::Desk;
  sweep.grid = "table1";
  sweep.config_path = cfg_file.string();
  sweep.out_dir = (root / "s1").string();
  run_sweep(sweep, nullptr);
  sweep.out_dir = (root / "s2").string();
  run_sweep(sweep, nullptr);

  for (const char* rel : {"manifest.txt", "table1.csv", "table1/inference/eval.csv",
                          "table1/exact-c50/eval.csv", "table1/exact-c50/trials.csv"}) {
    CHECK_MESSAGE(read_file(root / "s1" / rel) == read_file(root / "s2" / rel),
                  "sweep output differs: " << rel);
  }

  // The grid file carries the reference row plus the eight comparison cells.
  const std::vector<std::string> lines = read_lines(root / "s1" / "table1.csv");
  REQUIRE(lines.size() == 10);
  CHECK(lines[0] == "approach,c,updates_per_weight,mean_t2f,efficiency");
  CHECK(split_csv(lines[1])[0] == "inference");
  CHECK(split_csv(lines[1])[1] == "none");
  std::set<std::string> cells;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const std::vector<std::string> f = split_csv(lines[i]);
    cells.insert(f[0] + "-c" + f[1]);
  }
  CHECK(cells == std::set<std::string>{"baseline-c50", "baseline-pq-c50", "exact-c50",
                                       "exact-c100", "exact-pq-c100", "exact-pq-c400",
                                       "manhattan-pq-c50", "manhattan-pq-c100"});

  CHECK_THROWS_AS(
      [&] {
        VerbOptions bad = sweep;
        bad.grid = "table7";
        bad.out_dir = (root / "bad").string();
        run_sweep(bad, nullptr);
      }(),
      std::invalid_argument);

  fs::remove_all(root);
}
