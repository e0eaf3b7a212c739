#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ddcnet/tensor.hpp"

namespace ddcnet {

enum class ContentBlock { Crm, RdbOnly };

// Architecture of the three-scale encoder/decoder network.
struct NetConfig {
  int base_channels = 16;
  int scales = 3;
  int rdb_depth = 4;
  int reduction = 4;
  bool global_residual = true;
  // Ablation switches. Clearing amplitude_guidance fixes every DRM gate at 1;
  // clearing subtract_mean_amplitude feeds the raw per-channel amplitude to
  // the gate; RdbOnly swaps every CRM for a residual dense block.
  bool amplitude_guidance = true;
  bool subtract_mean_amplitude = true;
  ContentBlock content_block = ContentBlock::Crm;

  // Channel width at scale s = 0..scales (the last entry is the bottleneck).
  int channels(int scale) const { return base_channels << scale; }
  int divisor() const { return 1 << scales; }

  void validate() const;
  std::string serialize() const;
  static NetConfig parse(const std::string& text);

  bool operator==(const NetConfig&) const = default;
};

// Calibrated so count_params lands near 11.2M.
NetConfig full_scale_config();

// Initial values are a pure function of (store seed, parameter name).
enum class Init { KaimingNormal, Zero };

// Named trainable tensors plus architecture and run metadata; the unit of
// checkpointing. Gradients live alongside each value with the same shape.
template <typename Scalar>
class ParameterStore {
 public:
  struct Entry {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
  };

  static constexpr const char* kFormatVersion = "ddcnet-ckpt-1";

  ParameterStore() = default;
  ParameterStore(NetConfig cfg, std::uint64_t init_seed) : config(cfg), seed(init_seed) {}

  // Returns the entry called `name`, creating it when creation is allowed.
  // Binding to an existing entry checks the shape.
  Entry& bind(const std::string& name, const std::vector<Index>& dims, Init init,
              Index fan_in);

  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  // Inserts (or replaces) a value; used by checkpoint loading.
  void insert(const std::string& name, Tensor<Scalar> value);

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  // Non-trainable named tensors (optimizer moments). Not counted as parameters.
  std::map<std::string, Tensor<Scalar>>& optimizer_state() { return optimizer_state_; }
  const std::map<std::string, Tensor<Scalar>>& optimizer_state() const { return optimizer_state_; }

  void zero_grad();
  void allow_create(bool allow) { allow_create_ = allow; }

  NetConfig config;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  double wall_time = 0.0;

 private:
  std::map<std::string, Entry> entries_;
  std::map<std::string, Tensor<Scalar>> optimizer_state_;
  bool allow_create_ = false;
};

template <typename Scalar>
Index count_params(const ParameterStore<Scalar>& store) {
  Index total = 0;
  for (const auto& [name, entry] : store.entries()) total += entry.value.size();
  return total;
}

// FNV-1a over names, shapes and raw bytes of every value tensor.
template <typename Scalar>
std::uint64_t parameter_hash(const ParameterStore<Scalar>& store);

}  // namespace ddcnet
