#include "memrl/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "memrl/seeds.hpp"
#include "memrl/textio.hpp"
#include "memrl/version.hpp"

namespace memrl {
namespace {

double parse_double(std::string_view v, std::string_view where) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) {
    throw std::invalid_argument("config: bad number for " + std::string(where));
  }
  return out;
}

long long parse_int(std::string_view v, std::string_view where) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) {
    throw std::invalid_argument("config: bad integer for " + std::string(where));
  }
  return out;
}

void apply_kv(SimulationConfig& cfg, std::string_view section, std::string_view key,
              std::string_view value) {
  const std::string where = std::string(section) + "." + std::string(key);
  auto num = [&] { return parse_double(value, where); };
  auto integer = [&] { return parse_int(value, where); };

  if (section == "meta") {
    if (key == "schema") {
      if (integer() != kSchemaVersion) {
        throw std::invalid_argument("config: unsupported schema version");
      }
      return;
    }
  } else if (section == "pendulum") {
    auto& p = cfg.pendulum;
    if (key == "pendulum_mass") { p.pendulum_mass = num(); return; }
    if (key == "pendulum_length") { p.pendulum_length = num(); return; }
    if (key == "arm_mass") { p.arm_mass = num(); return; }
    if (key == "arm_length") { p.arm_length = num(); return; }
    if (key == "gravity") { p.gravity = num(); return; }
    if (key == "arm_viscous_damping") { p.arm_viscous_damping = num(); return; }
    if (key == "pendulum_viscous_damping") { p.pendulum_viscous_damping = num(); return; }
    if (key == "push_torque") { p.push_torque = num(); return; }
    if (key == "dt") { p.dt = num(); return; }
  } else if (section == "normalization") {
    auto& n = cfg.normalization;
    if (key == "theta_max") { n.theta_max = num(); return; }
    if (key == "theta_dot_max") { n.theta_dot_max = num(); return; }
    if (key == "alpha_max") { n.alpha_max = num(); return; }
    if (key == "alpha_dot_max") { n.alpha_dot_max = num(); return; }
  } else if (section == "pools") {
    auto& p = cfg.pools;
    if (key == "pretrain_size") { p.pretrain_size = static_cast<std::size_t>(integer()); return; }
    if (key == "retrain_size") { p.retrain_size = static_cast<std::size_t>(integer()); return; }
    if (key == "test_size") { p.test_size = static_cast<std::size_t>(integer()); return; }
    if (key == "theta") { p.ranges.theta = num(); return; }
    if (key == "theta_dot") { p.ranges.theta_dot = num(); return; }
    if (key == "alpha_frac") { p.ranges.alpha_frac = num(); return; }
    if (key == "alpha_dot") { p.ranges.alpha_dot = num(); return; }
  } else if (section == "replay") {
    auto& r = cfg.replay;
    if (key == "size") { r.size = static_cast<std::size_t>(integer()); return; }
    if (key == "draws") { r.draws = integer(); return; }
    if (key == "theta") { r.theta = num(); return; }
    if (key == "theta_dot") { r.theta_dot = num(); return; }
    if (key == "alpha") { r.alpha = num(); return; }
    if (key == "alpha_dot") { r.alpha_dot = num(); return; }
  } else if (section == "device") {
    auto& d = cfg.device;
    if (key == "variation") { d.variation = parse_variation(value); return; }
    if (key == "nominal_vth") { d.nominal_vth = num(); return; }
    if (key == "vth_spread") { d.vth_spread = num(); return; }
    if (key == "vth_lo") { d.vth_lo = num(); return; }
    if (key == "vth_hi") { d.vth_hi = num(); return; }
    if (key == "g_min") { d.g_min = num(); return; }
    if (key == "g_max") { d.g_max = num(); return; }
    if (key == "rate_v0") { d.rate_v0 = num(); return; }
    if (key == "pulse_amplitude") { d.pulse_amplitude = num(); return; }
    if (key == "pulse_duration") { d.pulse_duration = num(); return; }
    if (key == "sign_pulse_duration") { d.sign_pulse_duration = num(); return; }
    if (key == "nominal_step_fraction") { d.nominal_step_fraction = num(); return; }
    if (key == "rate_a") { d.rate_a = num(); return; }
    if (key == "k_w") { d.k_w = num(); return; }
    if (key == "adc_bits") { d.adc_bits = static_cast<int>(integer()); return; }
    if (key == "adc_full_scale") { d.adc_full_scale = num(); return; }
  } else if (section == "training") {
    auto& t = cfg.training;
    if (key == "pretrain_c") { t.pretrain_c = static_cast<int>(integer()); return; }
    if (key == "pretrain_max_trials") { t.pretrain_max_trials = static_cast<int>(integer()); return; }
    if (key == "retrain_max_trials") { t.retrain_max_trials = static_cast<int>(integer()); return; }
    if (key == "retrain_samples") { t.retrain_samples = integer(); return; }
    if (key == "checkpoint_samples") { t.checkpoint_samples = integer(); return; }
  } else if (section == "harness") {
    auto& h = cfg.harness;
    if (key == "desk_seeds") { h.desk_seeds = static_cast<int>(integer()); return; }
    if (key == "full_seeds") { h.full_seeds = static_cast<int>(integer()); return; }
    if (key == "desk_eval_states") { h.desk_eval_states = static_cast<std::size_t>(integer()); return; }
    if (key == "desk_curve_agents") { h.desk_curve_agents = static_cast<int>(integer()); return; }
    if (key == "full_curve_agents") { h.full_curve_agents = static_cast<int>(integer()); return; }
  } else {
    throw std::invalid_argument("config: unknown section [" + std::string(section) + "]");
  }
  throw std::invalid_argument("config: unknown key " + where);
}

}  // namespace

void SimulationConfig::validate() const {
  pendulum.validate();
  normalization.validate();
  device.validate();
  if (pools.pretrain_size == 0 || pools.retrain_size == 0 || pools.test_size == 0) {
    throw std::invalid_argument("config: pool sizes must be positive");
  }
  if (!(pools.ranges.alpha_frac > 0.0 && pools.ranges.alpha_frac <= 1.0)) {
    throw std::invalid_argument("config: pools.alpha_frac must be in (0, 1]");
  }
  if (replay.size == 0 || replay.draws <= 0) {
    throw std::invalid_argument("config: replay size and draws must be positive");
  }
  if (training.pretrain_c <= 0 || training.pretrain_max_trials <= 0 ||
      training.retrain_max_trials <= 0 || training.retrain_samples <= 0 ||
      training.checkpoint_samples <= 0) {
    throw std::invalid_argument("config: training budgets must be positive");
  }
  if (harness.desk_seeds <= 0 || harness.full_seeds <= 0 || harness.desk_eval_states == 0 ||
      harness.desk_curve_agents <= 0 || harness.full_curve_agents <= 0) {
    throw std::invalid_argument("config: harness sizes must be positive");
  }
}

SimulationConfig default_config() { return SimulationConfig{}; }

void apply_config_text(SimulationConfig& cfg, std::string_view text) {
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string_view::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw std::invalid_argument("config: malformed section header at line " + std::to_string(line_no));
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos || section.empty()) {
      throw std::invalid_argument("config: expected 'key = value' at line " + std::to_string(line_no));
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config: empty key or value at line " + std::to_string(line_no));
    }
    apply_kv(cfg, section, key, value);
  }
}

SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  SimulationConfig cfg = default_config();
  apply_config_text(cfg, buf.str());
  cfg.validate();
  return cfg;
}

std::string serialize_config(const SimulationConfig& cfg) {
  std::ostringstream out;
  auto d = [](double v) { return fmt_double(v); };
  out << "[meta]\n";
  out << "schema = " << kSchemaVersion << "\n";
  out << "\n[pendulum]\n";
  out << "pendulum_mass = " << d(cfg.pendulum.pendulum_mass) << "\n";
  out << "pendulum_length = " << d(cfg.pendulum.pendulum_length) << "\n";
  out << "arm_mass = " << d(cfg.pendulum.arm_mass) << "\n";
  out << "arm_length = " << d(cfg.pendulum.arm_length) << "\n";
  out << "gravity = " << d(cfg.pendulum.gravity) << "\n";
  out << "arm_viscous_damping = " << d(cfg.pendulum.arm_viscous_damping) << "\n";
  out << "pendulum_viscous_damping = " << d(cfg.pendulum.pendulum_viscous_damping) << "\n";
  out << "push_torque = " << d(cfg.pendulum.push_torque) << "\n";
  out << "dt = " << d(cfg.pendulum.dt) << "\n";
  out << "\n[normalization]\n";
  out << "theta_max = " << d(cfg.normalization.theta_max) << "\n";
  out << "theta_dot_max = " << d(cfg.normalization.theta_dot_max) << "\n";
  out << "alpha_max = " << d(cfg.normalization.alpha_max) << "\n";
  out << "alpha_dot_max = " << d(cfg.normalization.alpha_dot_max) << "\n";
  out << "\n[pools]\n";
  out << "pretrain_size = " << cfg.pools.pretrain_size << "\n";
  out << "retrain_size = " << cfg.pools.retrain_size << "\n";
  out << "test_size = " << cfg.pools.test_size << "\n";
  out << "theta = " << d(cfg.pools.ranges.theta) << "\n";
  out << "theta_dot = " << d(cfg.pools.ranges.theta_dot) << "\n";
  out << "alpha_frac = " << d(cfg.pools.ranges.alpha_frac) << "\n";
  out << "alpha_dot = " << d(cfg.pools.ranges.alpha_dot) << "\n";
  out << "\n[replay]\n";
  out << "size = " << cfg.replay.size << "\n";
  out << "draws = " << cfg.replay.draws << "\n";
  out << "theta = " << d(cfg.replay.theta) << "\n";
  out << "theta_dot = " << d(cfg.replay.theta_dot) << "\n";
  out << "alpha = " << d(cfg.replay.alpha) << "\n";
  out << "alpha_dot = " << d(cfg.replay.alpha_dot) << "\n";
  out << "\n[device]\n";
  out << "variation = " << variation_name(cfg.device.variation) << "\n";
  out << "nominal_vth = " << d(cfg.device.nominal_vth) << "\n";
  out << "vth_spread = " << d(cfg.device.vth_spread) << "\n";
  out << "vth_lo = " << d(cfg.device.vth_lo) << "\n";
  out << "vth_hi = " << d(cfg.device.vth_hi) << "\n";
  out << "g_min = " << d(cfg.device.g_min) << "\n";
  out << "g_max = " << d(cfg.device.g_max) << "\n";
  out << "rate_v0 = " << d(cfg.device.rate_v0) << "\n";
  out << "pulse_amplitude = " << d(cfg.device.pulse_amplitude) << "\n";
  out << "pulse_duration = " << d(cfg.device.pulse_duration) << "\n";
  out << "sign_pulse_duration = " << d(cfg.device.sign_pulse_duration) << "\n";
  out << "nominal_step_fraction = " << d(cfg.device.nominal_step_fraction) << "\n";
  out << "rate_a = " << d(cfg.device.rate_a) << "\n";
  out << "k_w = " << d(cfg.device.k_w) << "\n";
  out << "adc_bits = " << cfg.device.adc_bits << "\n";
  out << "adc_full_scale = " << d(cfg.device.adc_full_scale) << "\n";
  out << "\n[training]\n";
  out << "pretrain_c = " << cfg.training.pretrain_c << "\n";
  out << "pretrain_max_trials = " << cfg.training.pretrain_max_trials << "\n";
  out << "retrain_max_trials = " << cfg.training.retrain_max_trials << "\n";
  out << "retrain_samples = " << cfg.training.retrain_samples << "\n";
  out << "checkpoint_samples = " << cfg.training.checkpoint_samples << "\n";
  out << "\n[harness]\n";
  out << "desk_seeds = " << cfg.harness.desk_seeds << "\n";
  out << "full_seeds = " << cfg.harness.full_seeds << "\n";
  out << "desk_eval_states = " << cfg.harness.desk_eval_states << "\n";
  out << "desk_curve_agents = " << cfg.harness.desk_curve_agents << "\n";
  out << "full_curve_agents = " << cfg.harness.full_curve_agents << "\n";
  return out.str();
}

std::uint64_t config_hash(const SimulationConfig& cfg) { return fnv1a64(serialize_config(cfg)); }

std::string_view variation_name(VariationMode m) {
  switch (m) {
    case VariationMode::Ideal: return "ideal";
    case VariationMode::Pct30: return "pct30";
    case VariationMode::FullRange: return "full_range";
  }
  return "ideal";
}

VariationMode parse_variation(std::string_view name) {
  if (name == "ideal") return VariationMode::Ideal;
  if (name == "pct30") return VariationMode::Pct30;
  if (name == "full_range") return VariationMode::FullRange;
  throw std::invalid_argument("unknown variation mode: " + std::string(name));
}

}  // namespace memrl
