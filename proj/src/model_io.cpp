#include "rlsched/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "rlsched/errors.hpp"

namespace rlsched {

namespace {

constexpr std::array<char, 4> kMagic{'R', 'L', 'S', 'M'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ModelError("truncated model file");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void put_layers(std::ostream& out, const Mlp& mlp) {
  put_u32(out, static_cast<std::uint32_t>(mlp.layers().size()));
  for (const auto& l : mlp.layers()) {
    put_u32(out, static_cast<std::uint32_t>(l.in));
    put_u32(out, static_cast<std::uint32_t>(l.out));
    put_u32(out, static_cast<std::uint32_t>(l.activation));
  }
}

std::vector<LayerShape> get_layers(std::istream& in) {
  const std::uint32_t count = get_u32(in);
  if (count == 0 || count > 64) throw ModelError("implausible layer count");
  std::vector<LayerShape> layers(count);
  for (auto& l : layers) {
    l.in = static_cast<int>(get_u32(in));
    l.out = static_cast<int>(get_u32(in));
    const std::uint32_t act = get_u32(in);
    if (act > 1) throw ModelError("unknown activation tag");
    l.activation = static_cast<Activation>(act);
  }
  return layers;
}

void put_params(std::ostream& out, std::span<const double> params) {
  for (double p : params) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p)));
}

void get_params(std::istream& in, std::span<double> params) {
  for (double& p : params) p = static_cast<double>(std::bit_cast<float>(get_u32(in)));
}

}  // namespace

void write_checkpoint(std::ostream& out, const PolicyNet& policy, const ValueNet& value) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kModelVersion);
  put_u32(out, kJobFeatures);
  put_u32(out, static_cast<std::uint32_t>(policy.max_obsv_size));
  put_u32(out, 2);
  put_layers(out, policy.kernel);
  put_layers(out, value.mlp);
  put_params(out, policy.kernel.params());
  put_params(out, value.mlp.params());
}

void save_checkpoint(const std::string& path, const PolicyNet& policy, const ValueNet& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write model file " + path);
  write_checkpoint(out, policy, value);
  if (!out) throw ModelError("failed writing model file " + path);
}

Checkpoint read_checkpoint(std::istream& in, int max_obsv_size) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ModelError("not a model file (bad magic)");
  }
  if (const auto v = get_u32(in); v != kModelVersion) {
    throw ModelError("unsupported model version " + std::to_string(v));
  }
  if (const auto f = get_u32(in); f != static_cast<std::uint32_t>(kJobFeatures)) {
    throw ModelError("model has " + std::to_string(f) + " job features, expected " +
                     std::to_string(kJobFeatures));
  }
  if (const auto m = get_u32(in); m != static_cast<std::uint32_t>(max_obsv_size)) {
    throw ModelError("model observation size " + std::to_string(m) + " does not match " +
                     std::to_string(max_obsv_size));
  }
  if (get_u32(in) != 2) throw ModelError("model must hold a policy and a value network");

  const auto policy_layers = get_layers(in);
  const auto value_layers = get_layers(in);
  Checkpoint ck{PolicyNet::make(0, max_obsv_size), ValueNet::make(0, max_obsv_size)};
  if (policy_layers != ck.policy.kernel.layers()) throw ModelError("policy layer shapes mismatch");
  if (value_layers != ck.value.mlp.layers()) throw ModelError("value layer shapes mismatch");
  get_params(in, ck.policy.kernel.params());
  get_params(in, ck.value.mlp.params());
  return ck;
}

Checkpoint load_checkpoint(const std::string& path, int max_obsv_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("model file not found: " + path);
  return read_checkpoint(in, max_obsv_size);
}

}  // namespace rlsched
