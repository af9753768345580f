#include "rlsched/parallel.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace rlsched {

namespace {

constexpr std::size_t kBlocks = 32;

void accumulate_policy(const PolicyNet& net, std::span<const SampleRef> samples, double clip_ratio,
                       double inv_n, PolicyLoss& out, PolicyWorkspace& ws) {
  for (const auto& s : samples) {
    const double log_prob = policy_log_prob(net, *s.observation, s.action, ws);
    const double ratio = std::exp(log_prob - s.log_prob_old);
    const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio);
    const double surr = ratio * s.advantage;
    const double surr_clipped = clipped * s.advantage;
    if (ratio != clipped) out.clip_fraction += inv_n;
    out.kl += (s.log_prob_old - log_prob) * inv_n;
    if (surr <= surr_clipped) {
      out.loss -= surr * inv_n;
      const double coef = -s.advantage * ratio * inv_n;
      if (coef != 0.0) policy_log_prob_backward(net, ws, coef, out.grad);
    } else {
      out.loss -= surr_clipped * inv_n;
    }
  }
}

void accumulate_value(const ValueNet& net, std::span<const SampleRef> samples, double inv_n,
                      ValueLoss& out, ValueWorkspace& ws) {
  for (const auto& s : samples) {
    const double diff = value_forward(net, *s.observation, ws) - s.target_return;
    out.loss += diff * diff * inv_n;
    value_backward(net, ws, 2.0 * diff * inv_n, out.grad);
  }
}

int thread_count(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

std::span<const SampleRef> block(std::span<const SampleRef> samples, std::size_t b,
                                 std::size_t blocks) {
  const std::size_t n = samples.size();
  const std::size_t begin = n * b / blocks;
  const std::size_t end = n * (b + 1) / blocks;
  return samples.subspan(begin, end - begin);
}

}  // namespace

PolicyLoss policy_loss_and_grad(const PolicyNet& net, std::span<const SampleRef> samples,
                                double clip_ratio, int threads) {
  const std::size_t blocks = std::min(kBlocks, samples.size());
  const double inv_n = samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size());
  std::vector<PolicyLoss> partial(blocks);

#pragma omp parallel for schedule(dynamic) num_threads(thread_count(threads))
  for (std::size_t b = 0; b < blocks; ++b) {
    PolicyWorkspace ws;
    partial[b].grad.assign(net.parameter_count(), 0.0);
    accumulate_policy(net, block(samples, b, blocks), clip_ratio, inv_n, partial[b], ws);
  }

  PolicyLoss total;
  total.grad.assign(net.parameter_count(), 0.0);
  for (const auto& p : partial) {
    total.loss += p.loss;
    total.kl += p.kl;
    total.clip_fraction += p.clip_fraction;
    for (std::size_t i = 0; i < total.grad.size(); ++i) total.grad[i] += p.grad[i];
  }
  return total;
}

ValueLoss value_loss_and_grad(const ValueNet& net, std::span<const SampleRef> samples,
                              int threads) {
  const std::size_t blocks = std::min(kBlocks, samples.size());
  const double inv_n = samples.empty() ? 0.0 : 1.0 / static_cast<double>(samples.size());
  std::vector<ValueLoss> partial(blocks);

#pragma omp parallel for schedule(dynamic) num_threads(thread_count(threads))
  for (std::size_t b = 0; b < blocks; ++b) {
    ValueWorkspace ws;
    partial[b].grad.assign(net.parameter_count(), 0.0);
    accumulate_value(net, block(samples, b, blocks), inv_n, partial[b], ws);
  }

  ValueLoss total;
  total.grad.assign(net.parameter_count(), 0.0);
  for (const auto& p : partial) {
    total.loss += p.loss;
    for (std::size_t i = 0; i < total.grad.size(); ++i) total.grad[i] += p.grad[i];
  }
  return total;
}

namespace serial {

PolicyLoss policy_loss_and_grad(const PolicyNet& net, std::span<const SampleRef> samples,
                                double clip_ratio) {
  PolicyLoss out;
  out.grad.assign(net.parameter_count(), 0.0);
  if (samples.empty()) return out;
  PolicyWorkspace ws;
  accumulate_policy(net, samples, clip_ratio, 1.0 / static_cast<double>(samples.size()), out, ws);
  return out;
}

ValueLoss value_loss_and_grad(const ValueNet& net, std::span<const SampleRef> samples) {
  ValueLoss out;
  out.grad.assign(net.parameter_count(), 0.0);
  if (samples.empty()) return out;
  ValueWorkspace ws;
  accumulate_value(net, samples, 1.0 / static_cast<double>(samples.size()), out, ws);
  return out;
}

}  // namespace serial

}  // namespace rlsched
