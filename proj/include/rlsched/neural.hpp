#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rlsched/simulator.hpp"

namespace rlsched {

enum class Activation : std::uint32_t { Linear = 0, Tanh = 1 };

struct LayerShape {
  int in = 0;
  int out = 0;
  Activation activation = Activation::Linear;
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

// Same layout as the parameter vector of the network it differentiates.
using Gradient = std::vector<double>;

// Fully connected feed-forward network over a flat parameter store. Per
// layer the store holds the weights (out x in, row-major) followed by the
// biases.
class Mlp {
 public:
  // Layer outputs for a batch of rows, kept for the backward pass.
  struct Cache {
    int rows = 0;
    int active_inputs = 0;
    std::vector<double> input;                 // rows x active_inputs
    std::vector<std::vector<double>> outputs;  // per layer, rows x out
    std::vector<std::vector<double>> deltas;   // scratch for backward
  };

  Mlp() = default;
  explicit Mlp(std::vector<LayerShape> layers);
  static Mlp chain(int inputs, std::span<const int> hidden, int outputs,
                   Activation hidden_activation = Activation::Tanh);

  const std::vector<LayerShape>& layers() const { return layers_; }
  int input_size() const { return layers_.empty() ? 0 : layers_.front().in; }
  int output_size() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(layers_[layer].in) * layers_[layer].out;
  }

  // Glorot-uniform weights, zero biases.
  void init(std::uint64_t seed);

  // Forward pass over `rows` inputs of width input_size(). Only the first
  // `active_inputs` columns of each row are read; the rest are taken as 0.
  // Returns the rows x output_size() result, which lives in `cache`.
  std::span<const double> forward(std::span<const double> input, int rows, Cache& cache,
                                  int active_inputs = -1) const;
  // Adds the gradient of sum(d_output . output) to `grad`. If `d_input` is
  // non-empty it receives the gradient w.r.t. the active inputs.
  void backward(Cache& cache, std::span<const double> d_output, std::span<double> grad,
                std::span<double> d_input = {}) const;

 private:
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

inline constexpr int kPolicyParameterBudget = 1000;
inline constexpr double kMaskedScore = -1e9;

// Kernel policy: one small MLP scores each job row independently; a masked
// softmax over the scores gives the action distribution.
struct PolicyNet {
  Mlp kernel;
  int max_obsv_size = kDefaultMaxObsvSize;

  static PolicyNet make(std::uint64_t seed, int max_obsv_size = kDefaultMaxObsvSize,
                        std::span<const int> hidden = default_hidden());
  static std::span<const int> default_hidden();
  std::size_t parameter_count() const { return kernel.parameter_count(); }
};

// Plain MLP over the flattened observation matrix.
struct ValueNet {
  Mlp mlp;
  int max_obsv_size = kDefaultMaxObsvSize;

  static ValueNet make(std::uint64_t seed, int max_obsv_size = kDefaultMaxObsvSize,
                       std::span<const int> hidden = default_hidden());
  static std::span<const int> default_hidden();
  std::size_t parameter_count() const { return mlp.parameter_count(); }
};

// Per-slot scores; illegal slots hold kMaskedScore.
std::vector<double> policy_scores(const PolicyNet& net, const ObservationMatrix& obs);
// Softmax over `scores` with max subtraction.
std::vector<double> masked_softmax(std::span<const double> scores);
// Probability per slot (length obs.capacity()); throws NoLegalAction.
std::vector<double> policy_forward(const PolicyNet& net, const ObservationMatrix& obs);

int policy_sample(std::span<const double> probs, std::mt19937_64& rng);
int policy_argmax(std::span<const double> probs);

double value_forward(const ValueNet& net, const ObservationMatrix& obs);

// Gradient of sum(d_probs . policy_forward(net, obs)).
Gradient policy_backward(const PolicyNet& net, const ObservationMatrix& obs,
                         std::span<const double> d_probs);
// Gradient of d_value * value_forward(net, obs).
Gradient value_backward(const ValueNet& net, const ObservationMatrix& obs, double d_value);

// Reusable buffers for evaluating log pi(action | obs) and its gradient
// during training. Only legal rows go through the kernel.
struct PolicyWorkspace {
  Mlp::Cache cache;
  std::vector<int> slots;      // legal slots, in slot order
  std::vector<double> rows;    // gathered feature rows
  std::vector<double> probs;   // probability per legal slot
  std::vector<double> d_scores;
  int action_pos = -1;
};

double policy_log_prob(const PolicyNet& net, const ObservationMatrix& obs, int action,
                       PolicyWorkspace& ws);
// Adds coef * d log pi(action) / d params, using the state left by policy_log_prob.
void policy_log_prob_backward(const PolicyNet& net, PolicyWorkspace& ws, double coef,
                              std::span<double> grad);

struct ValueWorkspace {
  Mlp::Cache cache;
};

double value_forward(const ValueNet& net, const ObservationMatrix& obs, ValueWorkspace& ws);
// Adds coef * d value / d params, using the state left by value_forward.
void value_backward(const ValueNet& net, ValueWorkspace& ws, double coef, std::span<double> grad);

}  // namespace rlsched
