// Command-line driver for the pendulum-on-crossbar training simulator.
//
// Verbs:
//   pretrain  train starting weight sets (software, standard plant)
//   retrain   train one agent in-situ from a weight checkpoint
//   test      frozen-weight evaluation of a checkpoint
//   sweep     full experiment grids (table1, table2, fig9)

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "memrl/harness.hpp"
#include "memrl/version.hpp"

namespace {

struct RawOptions {
  std::string scenario = "complete";
  std::string approach = "exact";
  std::string variation = "0,0";
  std::string devices = "ideal";
  std::string dr = "fixed";
  std::string scale = "desk";
  std::string grid = "table1";
  std::string config_path;
  std::string weights_path;
  std::string out_dir;
  int agents = 0;
  int stop_c = 50;
  std::uint64_t seed = 1;
};

memrl::VerbOptions resolve(const RawOptions& raw) {
  memrl::VerbOptions opt;
  opt.scenario = memrl::parse_scenario(raw.scenario);
  opt.approach = memrl::parse_approach(raw.approach);
  opt.variation = memrl::parse_plant_variation(raw.variation);
  opt.devices = memrl::parse_variation(raw.devices);
  opt.dr = memrl::parse_discount_mode(raw.dr);
  opt.scale = memrl::parse_scale(raw.scale);
  opt.grid = raw.grid;
  opt.config_path = raw.config_path;
  opt.weights_path = raw.weights_path;
  opt.out_dir = raw.out_dir;
  opt.agents = raw.agents;
  opt.stop_c = raw.stop_c;
  opt.seed = raw.seed;
  return opt;
}

void add_common_flags(CLI::App* cmd, RawOptions& raw) {
  cmd->add_option("--scenario", raw.scenario,
                  "Training scenario: complete (plant state observable) or limited "
                  "(stored-experience pre-training, synchronous learners)")
      ->capture_default_str();
  cmd->add_option("--seed", raw.seed, "Master seed; all random streams derive from it")
      ->capture_default_str();
  cmd->add_option("--config", raw.config_path, "Config file (sectioned key = value text)");
  cmd->add_option("--out", raw.out_dir, "Output directory for CSVs, checkpoints and manifest")
      ->required();
  cmd->add_option("--scale", raw.scale, "Experiment scale: desk or full")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Actor-critic pendulum training on simulated analog crossbars"};
  app.set_version_flag("--version", std::string(memrl::kVersion));
  app.require_subcommand(1);

  RawOptions raw;

  CLI::App* pre = app.add_subcommand("pretrain", "Train starting weight sets ex-situ");
  add_common_flags(pre, raw);
  pre->add_option("--agents", raw.agents, "Number of weight sets to train (default 1)");

  CLI::App* re = app.add_subcommand("retrain", "Train one agent in-situ");
  add_common_flags(re, raw);
  re->add_option("--approach", raw.approach,
                 "baseline, baseline-pq, exact, exact-pq, manhattan, manhattan-pq, "
                 "variable-amplitude")
      ->capture_default_str();
  re->add_option("--variation", raw.variation, "Plant variation \"<mass%>,<length%>\"")
      ->capture_default_str();
  re->add_option("--devices", raw.devices, "Device threshold spread: ideal, pct30, full-range")
      ->capture_default_str();
  re->add_option("--dr", raw.dr, "Discount-rate mode: fixed or variable")->capture_default_str();
  re->add_option("--c", raw.stop_c, "Successful trials that end training")->capture_default_str();
  re->add_option("--agents", raw.agents,
                 "Limited scenario: synchronous learner count (default 4)");
  re->add_option("--weights", raw.weights_path,
                 "Starting weight checkpoint (trained in place when omitted)");

  CLI::App* te = app.add_subcommand("test", "Frozen-weight evaluation of a checkpoint");
  add_common_flags(te, raw);
  te->add_option("--variation", raw.variation, "Plant variation \"<mass%>,<length%>\"")
      ->capture_default_str();
  te->add_option("--weights", raw.weights_path, "Weight checkpoint to evaluate")->required();

  CLI::App* sw = app.add_subcommand("sweep", "Run an experiment grid");
  add_common_flags(sw, raw);
  sw->add_option("--grid", raw.grid, "table1, table2 or fig9")->capture_default_str();
  sw->add_option("--agents", raw.agents,
                 "Override population seeds per variation (table1/table2) or agents per "
                 "curve (fig9)");

  CLI11_PARSE(app, argc, argv);

  try {
    const memrl::VerbOptions opt = resolve(raw);
    if (pre->parsed()) memrl::run_pretrain(opt, &std::cout);
    if (re->parsed()) memrl::run_retrain(opt, &std::cout);
    if (te->parsed()) memrl::run_test(opt, &std::cout);
    if (sw->parsed()) memrl::run_sweep(opt, &std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error (usage): " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error (runtime): " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error (internal): " << e.what() << "\n";
    return 4;
  }
  return 0;
}
