#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "memrl/pendulum.hpp"  // Action

namespace memrl {

// How per-device switching thresholds are drawn at fabrication time.
enum class VariationMode {
  Ideal,      // every threshold at the nominal value
  Pct30,      // uniform within +/-30% of nominal
  FullRange,  // uniform in [1.0 V, 5.5 V]
};

// One analog conductive cell. g is the conductance normalized to [g_min,
// g_max]; vth_set / vth_reset are the per-device switching thresholds in
// volts (set raises g, reset lowers it). Voltages at or below threshold do
// not move the cell at all.
struct DeviceCell {
  double g = 0.5;
  double vth_set = 2.25;
  double vth_reset = 2.25;
};

struct DeviceConfig {
  VariationMode variation = VariationMode::Ideal;
  double nominal_vth = 2.25;   // V
  double vth_spread = 0.30;    // Pct30 half-width as a fraction of nominal
  double vth_lo = 1.0;         // V, FullRange lower bound
  double vth_hi = 5.5;         // V, FullRange upper bound

  double g_min = 0.0;
  double g_max = 1.0;

  // Switching-rate law: dG = rate_a * duration * exp((|v| - vth)/rate_v0) *
  // window(g). rate_a is calibrated (see calibrated_rate_a) so that one
  // nominal programming pulse moves an ideal mid-range cell by
  // nominal_step_fraction of the conductance range.
  double rate_v0 = 0.45;              // V
  double pulse_amplitude = 2.75;      // V, fixed-amplitude programming pulse
  double pulse_duration = 1e-3;       // s, programming / scaled-amplitude writes
  double nominal_step_fraction = 0.01;
  double rate_a;                      // 1/s; filled by the constructor

  // Sign-extracted in-situ updates use a much shorter pulse of the same
  // amplitude: learning arrives as thousands of single-sign nudges, and each
  // nudge must move a cell by a small fraction of the range or the
  // accumulated random walk erases the very weights being refined. With the
  // default calibration one sign pulse moves an ideal mid-range cell by
  // 2e-5 of the conductance range (pulse_duration moves it by 1e-2).
  double sign_pulse_duration = 2e-6;  // s, fixed-sign (Manhattan) updates

  double k_w = 3.0;  // weight = k_w * (g_pos - g_neg)

  int adc_bits = 8;
  double adc_full_scale = 5.0;  // V-equivalent full scale of the value readout

  DeviceConfig();

  double weight_max() const { return k_w * (g_max - g_min); }
  double g_mid() const { return 0.5 * (g_min + g_max); }

  // Scale factor between a requested weight change and the switching-rate
  // argument of a scaled-amplitude write: chosen so that a balanced
  // mid-range pair realizes the requested change exactly on ideal devices.
  double amplitude_gain() const { return 1.0 / (k_w * rate_a * pulse_duration * (g_max - g_min)); }
  // Smallest representable |dw| of a scaled-amplitude write: below it the
  // required line-voltage sum does not exceed the nominal threshold.
  double amplitude_floor() const { return amplitude_gain() > 0 ? 1.0 / amplitude_gain() : 0.0; }

  void validate() const;  // throws std::invalid_argument
};

double calibrated_rate_a(double nominal_step_fraction, double pulse_amplitude, double nominal_vth,
                         double rate_v0, double pulse_duration);

// -------- single-cell operations --------

// Applies one voltage pulse. v > 0 attempts a set (g up), v < 0 a reset
// (g down); |v| <= the relevant threshold leaves the cell untouched. The
// realized change follows the exponential rate law above with a linear
// soft-bound window: window = (g_max - g)/range for set, (g - g_min)/range
// for reset. The result is clipped to [g_min, g_max].
DeviceCell apply_pulse(DeviceCell cell, double v, double duration, const DeviceConfig& dc);

// -------- differential pairs and crossbars --------

struct DifferentialPair {
  DeviceCell pos, neg;
};

// A fixed-shape grid of differential pairs. Shape never changes after
// construction.
struct Crossbar {
  int rows = 0, cols = 0;
  std::vector<DifferentialPair> pairs;  // row-major

  DifferentialPair& at(int r, int c) { return pairs[static_cast<std::size_t>(r) * cols + c]; }
  const DifferentialPair& at(int r, int c) const {
    return pairs[static_cast<std::size_t>(r) * cols + c];
  }
};

// Builds a crossbar with every cell at mid-range conductance and thresholds
// drawn per dc.variation from the given stream (two independent thresholds
// per cell, pos and neg cells independent). A fixed seed reproduces the
// identical threshold matrix.
Crossbar make_crossbar(int rows, int cols, const DeviceConfig& dc, std::mt19937_64& rng);

// Signed weight represented by one pair.
double read_weight(const DifferentialPair& p, const DeviceConfig& dc);

struct WriteStats {
  long long saturated = 0;    // exact writes clipped at the weight range
  long long below_floor = 0;  // scaled-amplitude writes too small to program
  long long clipped = 0;      // scaled-amplitude writes clipped at the voltage cap
};

// Exact programming path (program-and-verify): places the pair symmetrically
// around mid-range so that read_weight returns target_w. Targets beyond the
// weight range are clipped and counted.
void write_exact(DifferentialPair& p, double target_w, const DeviceConfig& dc,
                 WriteStats* stats = nullptr);

// Fixed-amplitude rule: one full programming pulse per selected cell, four
// crossbar-wide phases (set pos / reset neg for +1 entries, then set neg /
// reset pos for -1 entries). signs is row-major with values in {-1, 0, +1};
// 0 entries are untouched.
void manhattan_update(Crossbar& xb, const std::vector<int>& signs, const DeviceConfig& dc);

// Scaled-amplitude rule: programs eta*dw per pair in one pass, row by row.
// The two line voltages of a selected pair each carry half of
//   v_total = nominal_vth + rate_v0 * ln(gain * |eta*dw|),
// so the voltage seen across a half-selected (unwritten) pair in the active
// row stays at or below the nominal threshold for the whole representable
// range; those cells still receive the worst-case half-amplitude pulses of
// both polarities (a real disturbance only for far-below-nominal threshold
// draws). Entries whose |eta*dw| is below amplitude_floor() are skipped and
// counted; v_total is capped at twice the nominal threshold (counted as
// clipped).
void variable_amplitude_update(Crossbar& xb, const std::vector<double>& dw, double eta,
                               const DeviceConfig& dc, WriteStats* stats = nullptr);

// Writes one header line and one row per pair (row-major):
// row col g_pos g_neg vth_set_pos vth_reset_pos vth_set_neg vth_reset_neg
void dump_crossbar(const Crossbar& xb, std::ostream& out);

// -------- readout quantization --------

// Rounds v to the nearest of the symmetric midtread code grid with spacing
// 2*full_scale/(2^bits - 1) (code range [-(2^(bits-1)-1), 2^(bits-1)-1],
// zero is an exact level), saturating at the end codes. Inputs beyond
// full scale land on the end levels, within one spacing of +/-full_scale;
// the quantization error never exceeds full_scale/(2^(bits-1) - 0.5)/2.
double adc_quantize(double v, double full_scale, int bits = 8);

// -------- hardware random stream --------

// 16-bit maximal-length Fibonacci LFSR (taps 16,14,13,11) XOR-combined with
// a 15-cell maximal-length null-boundary 90/150 hybrid cellular-automaton
// shift register; one byte per draw. The register lengths give coprime
// periods (2^16-1 and 2^15-1), so the combined stream repeats only after
// ~2.1e9 draws. (A pure rule-90 ring is unusable at these widths: width 16
// is nilpotent because x^16 + 1 = (x+1)^16 over GF(2), and equal lockstep
// periods would make the XOR no more uniform than either register alone.)
struct HardwareRng {
  std::uint16_t lfsr = 0xACE1u;
  std::uint16_t casr = 0x24B1u;  // 15-bit state
};

// Seeds both registers away from their lock-up states (all-zero in either
// register).
HardwareRng make_hardware_rng(std::uint64_t seed);

// Advances both registers once and returns the XOR of their low bytes.
std::uint8_t rng8(HardwareRng& rng);

// Draws Action::CCW with probability round(p*255)/256 by comparing one rng
// byte against the 8-bit quantized probability.
Action sample_action(double p, HardwareRng& rng);

}  // namespace memrl
