#include "memrl/networks.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "memrl/textio.hpp"

namespace memrl {
namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double clamp_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

HiddenVector hidden_layer(const InputHiddenMatrix& w, const InputVector& x) {
  HiddenVector h{};
  for (int i = 0; i < kHiddenCount; ++i) {
    double u = 0.0;
    for (int j = 0; j < kInputCount; ++j) u += w[i][j] * x[j];
    h[i] = sigmoid(u);
  }
  return h;
}

double dot(const HiddenVector& a, const HiddenVector& b) {
  double s = 0.0;
  for (int i = 0; i < kHiddenCount; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double sigmoid(double u, double slope) { return 1.0 / (1.0 + std::exp(-slope * u)); }

ForwardTrace eval_forward(const SeparateNetWeights& w, const InputVector& x) {
  ForwardTrace t;
  t.x = x;
  t.hidden = hidden_layer(w.a, x);
  t.value = dot(w.c, t.hidden);  // linear readout
  return t;
}

ForwardTrace action_forward(const SeparateNetWeights& w, const InputVector& x) {
  ForwardTrace t;
  t.x = x;
  t.hidden = hidden_layer(w.d, x);
  t.prob = clamp_prob(sigmoid(dot(w.f, t.hidden), kOutputSlope));
  return t;
}

ForwardTrace shared_forward(const SharedNetWeights& w, const InputVector& x) {
  ForwardTrace t;
  t.x = x;
  t.hidden = hidden_layer(w.w_in, x);
  t.value = dot(w.w_v, t.hidden);
  t.prob = clamp_prob(sigmoid(dot(w.w_p, t.hidden), kOutputSlope));
  return t;
}

double td_error(int r, double v_next, double v, double gamma, bool terminal) {
  return terminal ? r - v : r + gamma * v_next - v;
}

SeparateNetDeltas separate_net_gradients(const SeparateNetWeights& w, const ForwardTrace& eval,
                                         const ForwardTrace& action, double delta, int q,
                                         const LearningRates& rates) {
  SeparateNetDeltas d;
  const double qp = static_cast<double>(q) - action.prob;
  for (int i = 0; i < kHiddenCount; ++i) {
    const double y = eval.hidden[i];
    const double z = action.hidden[i];
    d.c[i] = rates.beta * delta * y;
    d.f[i] = rates.rho * delta * qp * z;
    // Hidden layers steer by the sign of the downstream readout weight.
    const double eval_row = rates.beta_h * delta * y * (1.0 - y) * sgn(w.c[i]);
    const double act_row = rates.rho_h * delta * qp * z * (1.0 - z) * sgn(w.f[i]);
    for (int j = 0; j < kInputCount; ++j) {
      d.a[i][j] = eval_row * eval.x[j];
      d.d[i][j] = act_row * action.x[j];
    }
  }
  return d;
}

SharedNetGradients shared_net_gradients(const SharedNetWeights& w, const ForwardTrace& t,
                                        double delta, int q, double importance) {
  SharedNetGradients g;
  const double scale = importance * delta;
  const double dlogpi_du = kOutputSlope * (static_cast<double>(q) - t.prob);
  for (int i = 0; i < kHiddenCount; ++i) {
    const double h = t.hidden[i];
    const double dh = h * (1.0 - h);
    g.value.head[i] = scale * h;
    g.policy.head[i] = scale * dlogpi_du * h;
    for (int j = 0; j < kInputCount; ++j) {
      g.value.w_in[i][j] = scale * w.w_v[i] * dh * t.x[j];
      g.policy.w_in[i][j] = scale * dlogpi_du * w.w_p[i] * dh * t.x[j];
    }
  }
  return g;
}

SeparateNetWeights random_separate_weights(std::mt19937_64& rng, double range) {
  std::uniform_real_distribution<double> u(-range, range);
  SeparateNetWeights w;
  for (int i = 0; i < kHiddenCount; ++i) {
    for (int j = 0; j < kInputCount; ++j) w.a[i][j] = u(rng);
  }
  for (int i = 0; i < kHiddenCount; ++i) w.c[i] = u(rng);
  for (int i = 0; i < kHiddenCount; ++i) {
    for (int j = 0; j < kInputCount; ++j) w.d[i][j] = u(rng);
  }
  for (int i = 0; i < kHiddenCount; ++i) w.f[i] = u(rng);
  return w;
}

SharedNetWeights random_shared_weights(std::mt19937_64& rng, double range) {
  std::uniform_real_distribution<double> u(-range, range);
  SharedNetWeights w;
  for (int i = 0; i < kHiddenCount; ++i) {
    for (int j = 0; j < kInputCount; ++j) w.w_in[i][j] = u(rng);
  }
  for (int i = 0; i < kHiddenCount; ++i) w.w_v[i] = u(rng);
  for (int i = 0; i < kHiddenCount; ++i) w.w_p[i] = u(rng);
  return w;
}

namespace {

constexpr const char* kCheckpointMagic = "memrl-weights";

void write_matrix(std::ostream& out, const InputHiddenMatrix& m) {
  for (int i = 0; i < kHiddenCount; ++i) {
    for (int j = 0; j < kInputCount; ++j) out << fmt_double(m[i][j]) << (j + 1 < kInputCount ? ' ' : '\n');
  }
}

void write_vector(std::ostream& out, const HiddenVector& v) {
  for (int i = 0; i < kHiddenCount; ++i) out << fmt_double(v[i]) << (i + 1 < kHiddenCount ? ' ' : '\n');
}

std::ofstream open_checkpoint_out(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write weight checkpoint: " + path);
  return out;
}

std::ifstream open_checkpoint(const std::string& path, const std::string& want_layout) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open weight checkpoint: " + path);
  std::string magic, layout;
  int version = 0;
  in >> magic >> version >> layout;
  if (magic != kCheckpointMagic || version != 1) {
    throw std::runtime_error("not a weight checkpoint: " + path);
  }
  if (!want_layout.empty() && layout != want_layout) {
    throw std::runtime_error("weight checkpoint " + path + " has layout '" + layout +
                             "', expected '" + want_layout + "'");
  }
  return in;
}

void read_matrix(std::istream& in, InputHiddenMatrix& m) {
  for (int i = 0; i < kHiddenCount; ++i) {
    for (int j = 0; j < kInputCount; ++j) in >> m[i][j];
  }
}

void read_vector(std::istream& in, HiddenVector& v) {
  for (int i = 0; i < kHiddenCount; ++i) in >> v[i];
}

}  // namespace

void save_checkpoint(const SeparateNetWeights& w, const std::string& path) {
  std::ofstream out = open_checkpoint_out(path);
  out << kCheckpointMagic << " 1 separate\n";  // a[6x5] c[6] d[6x5] f[6], row-major
  write_matrix(out, w.a);
  write_vector(out, w.c);
  write_matrix(out, w.d);
  write_vector(out, w.f);
}

void save_checkpoint(const SharedNetWeights& w, const std::string& path) {
  std::ofstream out = open_checkpoint_out(path);
  out << kCheckpointMagic << " 1 shared\n";  // w_in[6x5] w_v[6] w_p[6], row-major
  write_matrix(out, w.w_in);
  write_vector(out, w.w_v);
  write_vector(out, w.w_p);
}

SeparateNetWeights load_separate_checkpoint(const std::string& path) {
  std::ifstream in = open_checkpoint(path, "separate");
  SeparateNetWeights w;
  read_matrix(in, w.a);
  read_vector(in, w.c);
  read_matrix(in, w.d);
  read_vector(in, w.f);
  if (!in) throw std::runtime_error("truncated weight checkpoint: " + path);
  return w;
}

SharedNetWeights load_shared_checkpoint(const std::string& path) {
  std::ifstream in = open_checkpoint(path, "shared");
  SharedNetWeights w;
  read_matrix(in, w.w_in);
  read_vector(in, w.w_v);
  read_vector(in, w.w_p);
  if (!in) throw std::runtime_error("truncated weight checkpoint: " + path);
  return w;
}

std::string checkpoint_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open weight checkpoint: " + path);
  std::string magic, layout;
  int version = 0;
  in >> magic >> version >> layout;
  if (!in || magic != kCheckpointMagic || version != 1) {
    throw std::runtime_error("not a weight checkpoint: " + path);
  }
  return layout;
}

}  // namespace memrl
