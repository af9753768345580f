#include "rlsched/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rlsched/errors.hpp"

namespace rlsched {

namespace {

constexpr std::array<int, 3> kPolicyHidden{32, 16, 8};
constexpr std::array<int, 3> kValueHidden{64, 32, 16};

}  // namespace

Mlp::Mlp(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    if (s.in < 1 || s.out < 1) throw ModelError("layer dimensions must be positive");
    if (l > 0 && layers_[l - 1].out != s.in) throw ModelError("layer dimensions do not chain");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(s.in) * s.out + s.out;
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::chain(int inputs, std::span<const int> hidden, int outputs, Activation hidden_activation) {
  std::vector<LayerShape> layers;
  int prev = inputs;
  for (int h : hidden) {
    layers.push_back({prev, h, hidden_activation});
    prev = h;
  }
  layers.push_back({prev, outputs, Activation::Linear});
  return Mlp(std::move(layers));
}

void Mlp::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    double* w = params_.data() + weight_offset(l);
    for (std::size_t i = 0; i < static_cast<std::size_t>(s.in) * s.out; ++i) w[i] = dist(rng);
    std::fill_n(params_.data() + bias_offset(l), s.out, 0.0);
  }
}

std::span<const double> Mlp::forward(std::span<const double> input, int rows, Cache& cache,
                                     int active_inputs) const {
  const int active = active_inputs < 0 ? input_size() : std::min(active_inputs, input_size());
  cache.rows = rows;
  cache.active_inputs = active;
  cache.input.assign(input.begin(), input.begin() + static_cast<std::ptrdiff_t>(rows) * active);
  cache.outputs.resize(layers_.size());

  const double* x = cache.input.data();
  int width = active;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    auto& y = cache.outputs[l];
    y.resize(static_cast<std::size_t>(rows) * s.out);
    for (int r = 0; r < rows; ++r) {
      const double* xr = x + static_cast<std::ptrdiff_t>(r) * width;
      double* yr = y.data() + static_cast<std::ptrdiff_t>(r) * s.out;
      for (int o = 0; o < s.out; ++o) {
        const double* wrow = w + static_cast<std::ptrdiff_t>(o) * s.in;
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (int i = 0; i < width; ++i) acc += wrow[i] * xr[i];
        acc += b[o];
        yr[o] = s.activation == Activation::Tanh ? std::tanh(acc) : acc;
      }
    }
    x = y.data();
    width = s.out;
  }
  return cache.outputs.back();
}

void Mlp::backward(Cache& cache, std::span<const double> d_output, std::span<double> grad,
                   std::span<double> d_input) const {
  const int rows = cache.rows;
  const std::size_t depth = layers_.size();
  cache.deltas.resize(depth);
  cache.deltas[depth - 1].assign(d_output.begin(), d_output.end());

  for (std::size_t l = depth; l-- > 0;) {
    const auto& s = layers_[l];
    auto& delta = cache.deltas[l];
    const auto& y = cache.outputs[l];
    if (s.activation == Activation::Tanh) {
      for (std::size_t k = 0; k < delta.size(); ++k) delta[k] *= 1.0 - y[k] * y[k];
    }
    const double* x = l == 0 ? cache.input.data() : cache.outputs[l - 1].data();
    const int width = l == 0 ? cache.active_inputs : s.in;
    const double* w = params_.data() + weight_offset(l);
    double* gw = grad.data() + weight_offset(l);
    double* gb = grad.data() + bias_offset(l);

    for (int r = 0; r < rows; ++r) {
      const double* xr = x + static_cast<std::ptrdiff_t>(r) * width;
      const double* dr = delta.data() + static_cast<std::ptrdiff_t>(r) * s.out;
      for (int o = 0; o < s.out; ++o) {
        const double dv = dr[o];
        if (dv == 0.0) continue;
        gb[o] += dv;
        double* grow = gw + static_cast<std::ptrdiff_t>(o) * s.in;
#pragma omp simd
        for (int i = 0; i < width; ++i) grow[i] += dv * xr[i];
      }
    }

    const bool want_input = l > 0 || !d_input.empty();
    if (!want_input) continue;
    double* dx = nullptr;
    if (l > 0) {
      cache.deltas[l - 1].assign(static_cast<std::size_t>(rows) * width, 0.0);
      dx = cache.deltas[l - 1].data();
    } else {
      std::fill(d_input.begin(), d_input.end(), 0.0);
      dx = d_input.data();
    }
    for (int r = 0; r < rows; ++r) {
      const double* dr = delta.data() + static_cast<std::ptrdiff_t>(r) * s.out;
      double* dxr = dx + static_cast<std::ptrdiff_t>(r) * width;
      for (int o = 0; o < s.out; ++o) {
        const double dv = dr[o];
        if (dv == 0.0) continue;
        const double* wrow = w + static_cast<std::ptrdiff_t>(o) * s.in;
#pragma omp simd
        for (int i = 0; i < width; ++i) dxr[i] += dv * wrow[i];
      }
    }
  }
}

std::span<const int> PolicyNet::default_hidden() { return kPolicyHidden; }
std::span<const int> ValueNet::default_hidden() { return kValueHidden; }

PolicyNet PolicyNet::make(std::uint64_t seed, int max_obsv_size, std::span<const int> hidden) {
  PolicyNet net;
  net.kernel = Mlp::chain(kJobFeatures, hidden, 1);
  net.max_obsv_size = max_obsv_size;
  if (net.parameter_count() >= kPolicyParameterBudget) {
    throw ModelError("policy kernel has " + std::to_string(net.parameter_count()) +
                     " parameters; budget is " + std::to_string(kPolicyParameterBudget));
  }
  net.kernel.init(seed);
  return net;
}

ValueNet ValueNet::make(std::uint64_t seed, int max_obsv_size, std::span<const int> hidden) {
  ValueNet net;
  net.mlp = Mlp::chain(max_obsv_size * kJobFeatures, hidden, 1);
  net.max_obsv_size = max_obsv_size;
  net.mlp.init(seed);
  return net;
}

namespace {

// Gathers the legal rows of `obs` into ws.rows and runs the kernel on them.
void score_legal_rows(const PolicyNet& net, const ObservationMatrix& obs, PolicyWorkspace& ws) {
  ws.slots.clear();
  ws.rows.clear();
  for (int slot = 0; slot < obs.occupied(); ++slot) {
    if (!obs.legal(slot)) continue;
    ws.slots.push_back(slot);
    const auto row = obs.row(slot);
    ws.rows.insert(ws.rows.end(), row.begin(), row.end());
  }
  if (ws.slots.empty()) throw NoLegalAction("observation has no legal slot");
  net.kernel.forward(ws.rows, static_cast<int>(ws.slots.size()), ws.cache);
}

// Softmax over the kernel outputs of the legal rows into ws.probs.
void softmax_legal(PolicyWorkspace& ws) {
  const auto& scores = ws.cache.outputs.back();
  const std::size_t k = ws.slots.size();
  ws.probs.resize(k);
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) m = std::max(m, scores[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    ws.probs[i] = std::exp(scores[i] - m);
    sum += ws.probs[i];
  }
  for (auto& p : ws.probs) p /= sum;
}

}  // namespace

std::vector<double> policy_scores(const PolicyNet& net, const ObservationMatrix& obs) {
  std::vector<double> scores(static_cast<std::size_t>(obs.capacity()), kMaskedScore);
  PolicyWorkspace ws;
  score_legal_rows(net, obs, ws);
  const auto& out = ws.cache.outputs.back();
  for (std::size_t i = 0; i < ws.slots.size(); ++i) scores[ws.slots[i]] = out[i];
  return scores;
}

std::vector<double> masked_softmax(std::span<const double> scores) {
  std::vector<double> probs(scores.size(), 0.0);
  if (scores.empty()) return probs;
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp(scores[i] - m);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
  return probs;
}

std::vector<double> policy_forward(const PolicyNet& net, const ObservationMatrix& obs) {
  return masked_softmax(policy_scores(net, obs));
}

int policy_sample(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = static_cast<int>(i);
    acc += probs[i];
    if (u < acc) return last;
  }
  if (last < 0) throw NoLegalAction("distribution has no positive entry");
  return last;
}

int policy_argmax(std::span<const double> probs) {
  if (probs.empty()) throw NoLegalAction("empty distribution");
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double value_forward(const ValueNet& net, const ObservationMatrix& obs, ValueWorkspace& ws) {
  const auto values = obs.occupied_values();
  return net.mlp.forward(values, 1, ws.cache, static_cast<int>(values.size()))[0];
}

double value_forward(const ValueNet& net, const ObservationMatrix& obs) {
  ValueWorkspace ws;
  return value_forward(net, obs, ws);
}

void value_backward(const ValueNet& net, ValueWorkspace& ws, double coef, std::span<double> grad) {
  const double d[1] = {coef};
  net.mlp.backward(ws.cache, d, grad);
}

Gradient value_backward(const ValueNet& net, const ObservationMatrix& obs, double d_value) {
  Gradient grad(net.parameter_count(), 0.0);
  ValueWorkspace ws;
  value_forward(net, obs, ws);
  value_backward(net, ws, d_value, grad);
  return grad;
}

Gradient policy_backward(const PolicyNet& net, const ObservationMatrix& obs,
                         std::span<const double> d_probs) {
  Gradient grad(net.parameter_count(), 0.0);
  PolicyWorkspace ws;
  score_legal_rows(net, obs, ws);
  softmax_legal(ws);
  // d score_i = p_i * (g_i - sum_j g_j p_j) over legal slots.
  double dot = 0.0;
  for (std::size_t i = 0; i < ws.slots.size(); ++i) dot += d_probs[ws.slots[i]] * ws.probs[i];
  ws.d_scores.resize(ws.slots.size());
  for (std::size_t i = 0; i < ws.slots.size(); ++i) {
    ws.d_scores[i] = ws.probs[i] * (d_probs[ws.slots[i]] - dot);
  }
  net.kernel.backward(ws.cache, ws.d_scores, grad);
  return grad;
}

double policy_log_prob(const PolicyNet& net, const ObservationMatrix& obs, int action,
                       PolicyWorkspace& ws) {
  score_legal_rows(net, obs, ws);
  softmax_legal(ws);
  const auto it = std::lower_bound(ws.slots.begin(), ws.slots.end(), action);
  if (it == ws.slots.end() || *it != action) {
    throw IllegalAction("action slot " + std::to_string(action) + " is not legal");
  }
  ws.action_pos = static_cast<int>(it - ws.slots.begin());
  // log softmax computed from the scores directly for accuracy on small probabilities.
  const auto& scores = ws.cache.outputs.back();
  const double m = *std::max_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(ws.slots.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < ws.slots.size(); ++i) sum += std::exp(scores[i] - m);
  return scores[ws.action_pos] - m - std::log(sum);
}

void policy_log_prob_backward(const PolicyNet& net, PolicyWorkspace& ws, double coef,
                              std::span<double> grad) {
  const std::size_t k = ws.slots.size();
  ws.d_scores.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double onehot = static_cast<int>(i) == ws.action_pos ? 1.0 : 0.0;
    ws.d_scores[i] = coef * (onehot - ws.probs[i]);
  }
  net.kernel.backward(ws.cache, ws.d_scores, grad);
}

}  // namespace rlsched
