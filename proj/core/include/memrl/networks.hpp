#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>

namespace memrl {

inline constexpr int kInputCount = 5;   // 4 normalized plant signals + bias
inline constexpr int kHiddenCount = 6;
inline constexpr double kOutputSlope = 8.0;  // sigmoid slope of the policy output neuron
inline constexpr double kProbEps = 1e-6;     // action probability clamp
inline constexpr double kInitWeightRange = 0.3;

using InputVector = std::array<double, kInputCount>;
using HiddenVector = std::array<double, kHiddenCount>;
using InputHiddenMatrix = std::array<std::array<double, kInputCount>, kHiddenCount>;

// Two independent 5-6-1 networks: an evaluation net (state value, linear
// output) with weights a/c and an action net (push probability, steep
// sigmoid output) with weights d/f.
struct SeparateNetWeights {
  InputHiddenMatrix a{};  // input -> hidden, evaluation net
  HiddenVector c{};       // hidden -> value readout
  InputHiddenMatrix d{};  // input -> hidden, action net
  HiddenVector f{};       // hidden -> probability readout
};

// One 5-6-2 network: a shared hidden layer feeding both the value readout
// w_v and the probability readout w_p.
struct SharedNetWeights {
  InputHiddenMatrix w_in{};
  HiddenVector w_v{};
  HiddenVector w_p{};
};

// Everything a forward pass produced, kept for the weight-change rules.
// value is meaningful for the evaluation branch, prob for the action branch;
// the shared network fills both.
struct ForwardTrace {
  InputVector x{};
  HiddenVector hidden{};
  double value = 0.0;
  double prob = 0.5;  // probability of Action::CCW, clamped to [eps, 1-eps]
};

// Per-layer step sizes of the two-network weight-change rule.
struct LearningRates {
  double beta = 0.2;    // evaluation readout c
  double beta_h = 0.1;  // evaluation hidden a
  double rho = 0.25;    // action readout f
  double rho_h = 0.2;   // action hidden d
};

// Per-layer step sizes of the shared-network rule.
struct SharedNetRates {
  double value_out = 0.25;
  double value_hidden = 0.2;
  double policy_out = 0.2;
  double policy_hidden = 0.1;
};

double sigmoid(double u, double slope = 1.0);

// Evaluation branch: hidden = sigmoid(a*x), value = c . hidden (linear).
ForwardTrace eval_forward(const SeparateNetWeights& w, const InputVector& x);

// Action branch: hidden = sigmoid(d*x), prob = sigmoid(f . hidden, slope 8),
// clamped away from 0 and 1.
ForwardTrace action_forward(const SeparateNetWeights& w, const InputVector& x);

// Shared network: hidden = sigmoid(w_in*x); value = w_v . hidden;
// prob = sigmoid(w_p . hidden, slope 8), clamped.
ForwardTrace shared_forward(const SharedNetWeights& w, const InputVector& x);

// One-step temporal-difference error. Terminal transitions do not bootstrap:
//   delta = r + gamma * v_next - v        (non-terminal)
//   delta = r - v                          (terminal)
double td_error(int r, double v_next, double v, double gamma, bool terminal);

struct SeparateNetDeltas {
  InputHiddenMatrix a{};
  HiddenVector c{};
  InputHiddenMatrix d{};
  HiddenVector f{};
};

// Hardware-oriented weight-change rule for the two separate networks. With
// y = eval.hidden, z = action.hidden, x the (common) input, q the action bit
// and p = action.prob:
//   dc_i  = beta   * delta * y_i
//   da_ij = beta_h * delta * y_i*(1-y_i) * sgn(c_i) * x_j
//   df_i  = rho    * delta * (q - p) * z_i
//   dd_ij = rho_h  * delta * (q - p) * z_i*(1-z_i) * sgn(f_i) * x_j
// The rule is used verbatim: the steep output slope is absorbed by the step
// sizes (no extra factor), the hidden-layer terms use the sign of the
// readout weight instead of its value, and sgn(0) = 0.
SeparateNetDeltas separate_net_gradients(const SeparateNetWeights& w, const ForwardTrace& eval,
                                         const ForwardTrace& action, double delta, int q,
                                         const LearningRates& rates);

// True gradients of the shared network, split by readout. Each part holds
// the gradient with respect to w_in plus its own readout vector; an update
// applies both w_in parts (the hidden layer serves both readouts).
struct SharedGradientPart {
  InputHiddenMatrix w_in{};
  HiddenVector head{};
};

struct SharedNetGradients {
  SharedGradientPart value;   // importance * delta * d(value)/d(theta)
  SharedGradientPart policy;  // importance * delta * d(log pi(q|s))/d(theta)
};

// Backpropagated directions for the shared network, scaled by the TD error
// and an importance weight (likelihood ratio; 1 on-policy). For the Bernoulli
// readout, d(log pi(q|s))/d(pre-activation) = slope * (q - p).
SharedNetGradients shared_net_gradients(const SharedNetWeights& w, const ForwardTrace& t,
                                        double delta, int q, double importance);

// Independent uniform draws in [-range, range] for every weight.
SeparateNetWeights random_separate_weights(std::mt19937_64& rng, double range = kInitWeightRange);
SharedNetWeights random_shared_weights(std::mt19937_64& rng, double range = kInitWeightRange);

// Text checkpoints: a one-line header naming the layout, then the weights in
// row-major order at full precision. Loaders throw std::runtime_error on a
// missing file, malformed header or wrong layout.
void save_checkpoint(const SeparateNetWeights& w, const std::string& path);
void save_checkpoint(const SharedNetWeights& w, const std::string& path);
SeparateNetWeights load_separate_checkpoint(const std::string& path);
SharedNetWeights load_shared_checkpoint(const std::string& path);
// "separate" or "shared".
std::string checkpoint_layout(const std::string& path);

}  // namespace memrl
