#include "ddcnet/parameters.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "ddcnet/rng.hpp"

namespace ddcnet {

void NetConfig::validate() const {
  if (scales != 3) throw ConfigError("NetConfig: scales must be 3");
  if (base_channels < 1) throw ConfigError("NetConfig: base_channels must be positive");
  if (rdb_depth < 1) throw ConfigError("NetConfig: rdb_depth must be positive");
  if (reduction < 1) throw ConfigError("NetConfig: reduction must be positive");
}

std::string NetConfig::serialize() const {
  std::ostringstream os;
  os << "base_channels=" << base_channels << '\n'
     << "scales=" << scales << '\n'
     << "rdb_depth=" << rdb_depth << '\n'
     << "reduction=" << reduction << '\n'
     << "global_residual=" << (global_residual ? 1 : 0) << '\n'
     << "amplitude_guidance=" << (amplitude_guidance ? 1 : 0) << '\n'
     << "subtract_mean_amplitude=" << (subtract_mean_amplitude ? 1 : 0) << '\n'
     << "content_block=" << (content_block == ContentBlock::Crm ? "crm" : "rdb") << '\n';
  return os.str();
}

NetConfig NetConfig::parse(const std::string& text) {
  NetConfig cfg;
  std::istringstream is(text);
  std::string line;
  auto as_int = [](const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      int x = std::stoi(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("NetConfig: bad integer for " + key + ": '" + v + "'");
    }
  };
  auto as_bool = [](const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("NetConfig: bad boolean for " + key + ": '" + v + "'");
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("NetConfig: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "base_channels") cfg.base_channels = as_int(key, value);
    else if (key == "scales") cfg.scales = as_int(key, value);
    else if (key == "rdb_depth") cfg.rdb_depth = as_int(key, value);
    else if (key == "reduction") cfg.reduction = as_int(key, value);
    else if (key == "global_residual") cfg.global_residual = as_bool(key, value);
    else if (key == "amplitude_guidance") cfg.amplitude_guidance = as_bool(key, value);
    else if (key == "subtract_mean_amplitude") cfg.subtract_mean_amplitude = as_bool(key, value);
    else if (key == "content_block") {
      if (value == "crm") cfg.content_block = ContentBlock::Crm;
      else if (value == "rdb") cfg.content_block = ContentBlock::RdbOnly;
      else throw ConfigError("NetConfig: content_block must be crm or rdb");
    } else {
      throw ConfigError("NetConfig: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

NetConfig full_scale_config() {
  NetConfig cfg;
  cfg.base_channels = 30;
  return cfg;
}

template <typename Scalar>
typename ParameterStore<Scalar>::Entry& ParameterStore<Scalar>::bind(
    const std::string& name, const std::vector<Index>& dims, Init init, Index fan_in) {
  auto it = entries_.find(name);
  if (it != entries_.end()) {
    if (it->second.value.dims() != dims) {
      throw CheckpointError(CheckpointError::Reason::ConfigMismatch,
                            "parameter '" + name + "' has shape " +
                                it->second.value.shape_string() + ", architecture expects " +
                                Tensor<Scalar>(dims).shape_string());
    }
    if (!it->second.grad.same_shape(it->second.value)) it->second.grad = Tensor<Scalar>(dims);
    return it->second;
  }
  if (!allow_create_) {
    throw CheckpointError(CheckpointError::Reason::MissingTensor,
                          "parameter '" + name + "' is missing");
  }
  Entry entry{Tensor<Scalar>(dims), Tensor<Scalar>(dims)};
  if (init == Init::KaimingNormal) {
    Rng rng(derive_seed({seed, hash_string(name)}));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    auto& v = entry.value.values();
    for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(stddev * rng.normal());
  }
  return entries_.emplace(name, std::move(entry)).first->second;
}

template <typename Scalar>
typename ParameterStore<Scalar>::Entry& ParameterStore<Scalar>::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw CheckpointError(CheckpointError::Reason::MissingTensor,
                          "parameter '" + name + "' is missing");
  }
  return it->second;
}

template <typename Scalar>
const typename ParameterStore<Scalar>::Entry& ParameterStore<Scalar>::at(
    const std::string& name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

template <typename Scalar>
void ParameterStore<Scalar>::insert(const std::string& name, Tensor<Scalar> value) {
  Tensor<Scalar> grad(value.dims());
  entries_[name] = Entry{std::move(value), std::move(grad)};
}

template <typename Scalar>
void ParameterStore<Scalar>::zero_grad() {
  for (auto& [name, entry] : entries_) entry.grad.set_zero();
}

template <typename Scalar>
std::uint64_t parameter_hash(const ParameterStore<Scalar>& store) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, entry] : store.entries()) {
    feed(name.data(), name.size());
    for (Index d : entry.value.dims()) feed(&d, sizeof d);
    feed(entry.value.data(), sizeof(Scalar) * static_cast<std::size_t>(entry.value.size()));
  }
  return h;
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template std::uint64_t parameter_hash<float>(const ParameterStore<float>&);
template std::uint64_t parameter_hash<double>(const ParameterStore<double>&);

}  // namespace ddcnet
