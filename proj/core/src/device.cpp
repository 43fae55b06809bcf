#include "memrl/device.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "memrl/seeds.hpp"
#include "memrl/textio.hpp"

namespace memrl {

double calibrated_rate_a(double nominal_step_fraction, double pulse_amplitude, double nominal_vth,
                         double rate_v0, double pulse_duration) {
  // One full-amplitude pulse on an ideal mid-range cell (window = 1/2) moves
  // it by nominal_step_fraction of the conductance range.
  const double accel = std::exp((pulse_amplitude - nominal_vth) / rate_v0);
  return nominal_step_fraction / (pulse_duration * accel * 0.5);
}

DeviceConfig::DeviceConfig()
    : rate_a(calibrated_rate_a(0.01, 2.75, 2.25, 0.45, 1e-3)) {}

void DeviceConfig::validate() const {
  if (!(nominal_vth > 0.0) || !(rate_v0 > 0.0) || !(pulse_amplitude > 0.0) ||
      !(pulse_duration > 0.0) || !(sign_pulse_duration > 0.0) || !(rate_a > 0.0) ||
      !(nominal_step_fraction > 0.0)) {
    throw std::invalid_argument("device config: pulse/rate parameters must be positive");
  }
  if (!(g_max > g_min) || !(k_w > 0.0)) {
    throw std::invalid_argument("device config: need g_max > g_min and k_w > 0");
  }
  if (variation == VariationMode::Pct30 && !(vth_spread > 0.0 && vth_spread < 1.0)) {
    throw std::invalid_argument("device config: vth_spread must be in (0, 1)");
  }
  if (variation == VariationMode::FullRange && !(vth_lo > 0.0 && vth_hi > vth_lo)) {
    throw std::invalid_argument("device config: need 0 < vth_lo < vth_hi");
  }
  if (adc_bits < 2 || adc_bits > 24 || !(adc_full_scale > 0.0)) {
    throw std::invalid_argument("device config: adc_bits in [2,24], positive full scale");
  }
}

DeviceCell apply_pulse(DeviceCell cell, double v, double duration, const DeviceConfig& dc) {
  if (v == 0.0) return cell;
  const double range = dc.g_max - dc.g_min;
  if (v > 0.0) {
    if (v <= cell.vth_set) return cell;  // strictly sub-threshold: immune
    const double window = (dc.g_max - cell.g) / range;
    const double dg = dc.rate_a * duration * std::exp((v - cell.vth_set) / dc.rate_v0) * window * range;
    cell.g = std::min(dc.g_max, cell.g + dg);
  } else {
    const double mag = -v;
    if (mag <= cell.vth_reset) return cell;
    const double window = (cell.g - dc.g_min) / range;
    const double dg = dc.rate_a * duration * std::exp((mag - cell.vth_reset) / dc.rate_v0) * window * range;
    cell.g = std::max(dc.g_min, cell.g - dg);
  }
  return cell;
}

namespace {

DeviceCell make_cell(const DeviceConfig& dc, std::mt19937_64& rng) {
  DeviceCell cell;
  cell.g = dc.g_mid();
  switch (dc.variation) {
    case VariationMode::Ideal:
      cell.vth_set = dc.nominal_vth;
      cell.vth_reset = dc.nominal_vth;
      break;
    case VariationMode::Pct30: {
      std::uniform_real_distribution<double> u(dc.nominal_vth * (1.0 - dc.vth_spread),
                                               dc.nominal_vth * (1.0 + dc.vth_spread));
      cell.vth_set = u(rng);
      cell.vth_reset = u(rng);
      break;
    }
    case VariationMode::FullRange: {
      std::uniform_real_distribution<double> u(dc.vth_lo, dc.vth_hi);
      cell.vth_set = u(rng);
      cell.vth_reset = u(rng);
      break;
    }
  }
  return cell;
}

}  // namespace

Crossbar make_crossbar(int rows, int cols, const DeviceConfig& dc, std::mt19937_64& rng) {
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("crossbar shape must be positive");
  Crossbar xb;
  xb.rows = rows;
  xb.cols = cols;
  xb.pairs.resize(static_cast<std::size_t>(rows) * cols);
  for (auto& p : xb.pairs) {
    p.pos = make_cell(dc, rng);
    p.neg = make_cell(dc, rng);
  }
  return xb;
}

double read_weight(const DifferentialPair& p, const DeviceConfig& dc) {
  return dc.k_w * (p.pos.g - p.neg.g);
}

void write_exact(DifferentialPair& p, double target_w, const DeviceConfig& dc, WriteStats* stats) {
  const double w_max = dc.weight_max();
  double w = target_w;
  if (w > w_max) {
    w = w_max;
    if (stats) ++stats->saturated;
  } else if (w < -w_max) {
    w = -w_max;
    if (stats) ++stats->saturated;
  }
  const double half = w / (2.0 * dc.k_w);
  p.pos.g = dc.g_mid() + half;
  p.neg.g = dc.g_mid() - half;
}

void manhattan_update(Crossbar& xb, const std::vector<int>& signs, const DeviceConfig& dc) {
  if (signs.size() != xb.pairs.size()) {
    throw std::invalid_argument("manhattan_update: sign matrix shape mismatch");
  }
  const double amp = dc.pulse_amplitude;
  const double dur = dc.sign_pulse_duration;
  // Four crossbar-wide phases; each selected cell sees exactly one pulse.
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] > 0) xb.pairs[i].pos = apply_pulse(xb.pairs[i].pos, amp, dur, dc);
  }
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] > 0) xb.pairs[i].neg = apply_pulse(xb.pairs[i].neg, -amp, dur, dc);
  }
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] < 0) xb.pairs[i].neg = apply_pulse(xb.pairs[i].neg, amp, dur, dc);
  }
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] < 0) xb.pairs[i].pos = apply_pulse(xb.pairs[i].pos, -amp, dur, dc);
  }
}

void variable_amplitude_update(Crossbar& xb, const std::vector<double>& dw, double eta,
                               const DeviceConfig& dc, WriteStats* stats) {
  if (dw.size() != xb.pairs.size()) {
    throw std::invalid_argument("variable_amplitude_update: dw shape mismatch");
  }
  const double gain = dc.amplitude_gain();
  const double floor = dc.amplitude_floor();
  const double v_cap = 2.0 * dc.nominal_vth;  // keeps every half-line at or below nominal
  const double dur = dc.pulse_duration;

  for (int r = 0; r < xb.rows; ++r) {
    // First pass over the row: program selected pairs, track the largest
    // half-line voltage used.
    double max_half = 0.0;
    for (int c = 0; c < xb.cols; ++c) {
      const double target = eta * dw[static_cast<std::size_t>(r) * xb.cols + c];
      if (target == 0.0) continue;
      const double mag = std::fabs(target);
      if (mag <= floor) {
        if (stats) ++stats->below_floor;
        continue;
      }
      double v_total = dc.nominal_vth + dc.rate_v0 * std::log(gain * mag);
      if (v_total > v_cap) {
        v_total = v_cap;
        if (stats) ++stats->clipped;
      }
      max_half = std::max(max_half, 0.5 * v_total);
      DifferentialPair& p = xb.at(r, c);
      if (target > 0.0) {
        p.pos = apply_pulse(p.pos, v_total, dur, dc);
        p.neg = apply_pulse(p.neg, -v_total, dur, dc);
      } else {
        p.neg = apply_pulse(p.neg, v_total, dur, dc);
        p.pos = apply_pulse(p.pos, -v_total, dur, dc);
      }
    }
    if (max_half == 0.0) continue;  // nothing programmed in this row
    // Second pass: half-selected pairs of the active row see the worst-case
    // half-line voltage in both polarities. At or below nominal threshold
    // this is a no-op; only low-threshold fabrication draws react.
    for (int c = 0; c < xb.cols; ++c) {
      const double target = eta * dw[static_cast<std::size_t>(r) * xb.cols + c];
      if (target != 0.0 && std::fabs(target) > floor) continue;  // was programmed
      DifferentialPair& p = xb.at(r, c);
      p.pos = apply_pulse(p.pos, max_half, dur, dc);
      p.pos = apply_pulse(p.pos, -max_half, dur, dc);
      p.neg = apply_pulse(p.neg, max_half, dur, dc);
      p.neg = apply_pulse(p.neg, -max_half, dur, dc);
    }
  }
}

void dump_crossbar(const Crossbar& xb, std::ostream& out) {
  out << "# crossbar rows=" << xb.rows << " cols=" << xb.cols << "\n";
  out << "# row col g_pos g_neg vth_set_pos vth_reset_pos vth_set_neg vth_reset_neg\n";
  for (int r = 0; r < xb.rows; ++r) {
    for (int c = 0; c < xb.cols; ++c) {
      const DifferentialPair& p = xb.at(r, c);
      out << r << ' ' << c << ' ' << fmt_double(p.pos.g) << ' ' << fmt_double(p.neg.g) << ' '
          << fmt_double(p.pos.vth_set) << ' ' << fmt_double(p.pos.vth_reset) << ' '
          << fmt_double(p.neg.vth_set) << ' ' << fmt_double(p.neg.vth_reset) << '\n';
    }
  }
}

double adc_quantize(double v, double full_scale, int bits) {
  const long long top_code = (1LL << (bits - 1)) - 1;
  const double step = 2.0 * full_scale / static_cast<double>((1LL << bits) - 1);
  long long code = std::llround(v / step);
  if (code > top_code) code = top_code;
  if (code < -top_code) code = -top_code;
  return static_cast<double>(code) * step;
}

namespace {

// 15-cell hybrid cellular-automaton shift register, null boundaries. Cells
// with a set mask bit apply rule 150 (self XOR both neighbours), the rest
// rule 90. This placement is maximal: period 2^15 - 1 from any nonzero state.
constexpr unsigned kCasrTop = 0x7FFFu;
constexpr unsigned kCasrRule150Mask = 0x0053u;

}  // namespace

HardwareRng make_hardware_rng(std::uint64_t seed) {
  std::uint64_t s = seed;
  const std::uint64_t mixed = splitmix64(s);
  HardwareRng rng;
  rng.lfsr = static_cast<std::uint16_t>(mixed & 0xFFFFu);
  rng.casr = static_cast<std::uint16_t>((mixed >> 16) & kCasrTop);
  if (rng.lfsr == 0) rng.lfsr = 0xACE1u;  // all-zero locks the LFSR
  if (rng.casr == 0) rng.casr = 0x24B1u;  // all-zero is the CASR's only fixed point
  return rng;
}

std::uint8_t rng8(HardwareRng& rng) {
  // Fibonacci LFSR, polynomial x^16 + x^14 + x^13 + x^11 + 1 (maximal length).
  const unsigned l = rng.lfsr;
  const unsigned fb = ((l >> 0) ^ (l >> 2) ^ (l >> 3) ^ (l >> 5)) & 1u;
  rng.lfsr = static_cast<std::uint16_t>((l >> 1) | (fb << 15));
  const unsigned c = rng.casr;
  rng.casr = static_cast<std::uint16_t>(((c << 1) & kCasrTop) ^ (c >> 1) ^ (c & kCasrRule150Mask));
  return static_cast<std::uint8_t>((rng.lfsr ^ rng.casr) & 0xFFu);
}

Action sample_action(double p, HardwareRng& rng) {
  if (p < 0.0) p = 0.0;
  if (p > 1.0) p = 1.0;
  const int threshold = static_cast<int>(std::llround(p * 255.0));
  return rng8(rng) < threshold ? Action::CCW : Action::CW;
}

}  // namespace memrl
