#pragma once

#include <span>
#include <vector>

#include "rlsched/neural.hpp"

namespace rlsched {

// One training sample for the loss kernels.
struct SampleRef {
  const ObservationMatrix* observation = nullptr;
  int action = 0;
  double log_prob_old = 0.0;
  double advantage = 0.0;
  double target_return = 0.0;
};

struct PolicyLoss {
  double loss = 0.0;  // -mean(min(ratio * A, clip(ratio) * A))
  double kl = 0.0;    // mean(log_prob_old - log_prob_new)
  double clip_fraction = 0.0;
  Gradient grad;
};

struct ValueLoss {
  double loss = 0.0;  // mean((v - R)^2)
  Gradient grad;
};

// Batch losses and gradients. Samples are split into a fixed number of
// blocks that are reduced in block order, so the result does not depend on
// the OpenMP thread count.
PolicyLoss policy_loss_and_grad(const PolicyNet& net, std::span<const SampleRef> samples,
                                double clip_ratio, int threads = 0);
ValueLoss value_loss_and_grad(const ValueNet& net, std::span<const SampleRef> samples,
                              int threads = 0);

// Straight-line references: one pass, one accumulator.
namespace serial {
PolicyLoss policy_loss_and_grad(const PolicyNet& net, std::span<const SampleRef> samples,
                                double clip_ratio);
ValueLoss value_loss_and_grad(const ValueNet& net, std::span<const SampleRef> samples);
}  // namespace serial

}  // namespace rlsched
