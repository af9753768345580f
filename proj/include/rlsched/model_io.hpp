#pragma once

#include <iosfwd>
#include <string>

#include "rlsched/neural.hpp"

namespace rlsched {

// Binary checkpoint layout (all integers little-endian uint32):
//   magic "RLSM", version, job_features, max_obsv_size, net_count,
//   per net: layer_count, then per layer (in, out, activation);
//   then every parameter as a little-endian float32, net by net, layer by
//   layer, weights row-major followed by biases.
inline constexpr std::uint32_t kModelVersion = 1;

struct Checkpoint {
  PolicyNet policy;
  ValueNet value;
};

void write_checkpoint(std::ostream& out, const PolicyNet& policy, const ValueNet& value);
void save_checkpoint(const std::string& path, const PolicyNet& policy, const ValueNet& value);

// Throws ModelError on a bad header or when the stored layer shapes differ
// from the default networks for `max_obsv_size`.
Checkpoint read_checkpoint(std::istream& in, int max_obsv_size = kDefaultMaxObsvSize);
Checkpoint load_checkpoint(const std::string& path, int max_obsv_size = kDefaultMaxObsvSize);

}  // namespace rlsched
