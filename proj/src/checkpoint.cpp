#include "ddcnet/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ddcnet/network.hpp"

namespace ddcnet {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'D', 'D', 'C', 'N', 'E', 'T', 'C', 'K'};

template <typename Scalar>
constexpr std::uint8_t dtype_tag() {
  return sizeof(Scalar) == 4 ? 1 : 2;
}

std::uint64_t fnv1a(const std::string& bytes, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.append(raw, sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void put_bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }

  template <typename Scalar>
  void put_tensor(const std::string& name, const Tensor<Scalar>& t) {
    put_string(name);
    put(dtype_tag<Scalar>());
    put(static_cast<std::uint8_t>(t.rank()));
    for (Index d : t.dims()) put(static_cast<std::uint64_t>(d));
    put_bytes(t.data(), sizeof(Scalar) * static_cast<std::size_t>(t.size()));
  }

  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::size_t end) : buf_(buf), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  template <typename Scalar>
  std::pair<std::string, Tensor<Scalar>> get_tensor() {
    std::string name = get_string();
    const auto tag = get<std::uint8_t>();
    if (tag != 1 && tag != 2) corrupt("unknown dtype tag for '" + name + "'");
    const auto rank = get<std::uint8_t>();
    std::vector<Index> dims;
    std::uint64_t count = 1;
    for (int i = 0; i < rank; ++i) {
      const auto d = get<std::uint64_t>();
      if (d == 0 || d > (std::uint64_t(1) << 40)) corrupt("bad dimension for '" + name + "'");
      count *= d;
      if (count > (std::uint64_t(1) << 40)) corrupt("tensor '" + name + "' too large");
      dims.push_back(static_cast<Index>(d));
    }
    const std::size_t width = tag == 1 ? 4 : 8;
    need(count * width);
    Tensor<Scalar> t(dims);
    const char* src = buf_.data() + pos_;
    for (std::uint64_t i = 0; i < count; ++i) {
      if (tag == 1) {
        float v;
        std::memcpy(&v, src + i * 4, 4);
        t.values()[static_cast<Index>(i)] = static_cast<Scalar>(v);
      } else {
        double v;
        std::memcpy(&v, src + i * 8, 8);
        t.values()[static_cast<Index>(i)] = static_cast<Scalar>(v);
      }
    }
    pos_ += count * width;
    return {std::move(name), std::move(t)};
  }

  std::size_t position() const { return pos_; }

  [[noreturn]] static void corrupt(const std::string& why) {
    throw CheckpointError(CheckpointError::Reason::Corrupt, "corrupt checkpoint: " + why);
  }

 private:
  void need(std::uint64_t n) {
    if (n > end_ - pos_) corrupt("unexpected end of data");
  }

  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename Scalar>
void save_checkpoint(const ParameterStore<Scalar>& store, const std::string& path) {
  Writer w;
  w.put_bytes(kMagic, sizeof kMagic);
  w.put_string(ParameterStore<Scalar>::kFormatVersion);
  w.put_string(store.config.serialize());
  w.put(static_cast<std::uint64_t>(store.step));
  w.put(static_cast<std::uint64_t>(store.seed));
  w.put(store.wall_time);
  w.put(static_cast<std::uint64_t>(store.entries().size()));
  for (const auto& [name, entry] : store.entries()) w.put_tensor(name, entry.value);
  w.put(static_cast<std::uint64_t>(store.optimizer_state().size()));
  for (const auto& [name, t] : store.optimizer_state()) w.put_tensor(name, t);
  w.put(fnv1a(w.buffer(), w.buffer().size()));

  // Write to a sibling file and rename so a crash never leaves a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Reason::Io, "cannot write " + tmp);
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw CheckpointError(CheckpointError::Reason::Io, "write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw CheckpointError(CheckpointError::Reason::Io, "cannot rename " + tmp + " to " + path);
  }
}

template <typename Scalar>
ParameterStore<Scalar> load_checkpoint(const std::string& path, const NetConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Reason::Io, "cannot open " + path);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < sizeof kMagic || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    Reader::corrupt("bad magic in " + path);
  }
  if (buf.size() < sizeof kMagic + 8) Reader::corrupt("file too short");
  const std::size_t body = buf.size() - 8;
  Reader r(buf, body);
  r.get<std::array<char, 8>>();

  // The version is checked before the checksum so an old file reports a
  // version mismatch rather than corruption.
  const std::string version = r.get_string();
  if (version != ParameterStore<Scalar>::kFormatVersion) {
    throw CheckpointError(CheckpointError::Reason::VersionMismatch,
                          "checkpoint version '" + version + "', expected '" +
                              ParameterStore<Scalar>::kFormatVersion + "'");
  }
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, buf.data() + body, 8);
  if (stored_sum != fnv1a(buf, body)) Reader::corrupt("checksum mismatch");

  NetConfig cfg;
  try {
    cfg = NetConfig::parse(r.get_string());
  } catch (const ConfigError& e) {
    Reader::corrupt(std::string("unreadable config: ") + e.what());
  }
  if (expected != nullptr && !(cfg == *expected)) {
    throw CheckpointError(CheckpointError::Reason::ConfigMismatch,
                          "checkpoint config differs from the requested one:\n" +
                              cfg.serialize() + "vs\n" + expected->serialize());
  }

  ParameterStore<Scalar> store(cfg, 0);
  store.step = r.get<std::uint64_t>();
  store.seed = r.get<std::uint64_t>();
  store.wall_time = r.get<double>();
  const auto n_params = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_params; ++i) {
    auto [name, t] = r.template get_tensor<Scalar>();
    if (store.contains(name)) Reader::corrupt("duplicate tensor '" + name + "'");
    store.insert(name, std::move(t));
  }
  const auto n_state = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_state; ++i) {
    auto [name, t] = r.template get_tensor<Scalar>();
    store.optimizer_state()[name] = std::move(t);
  }
  if (r.position() != body) Reader::corrupt("trailing bytes");

  // Binding the architecture reports missing or misshapen tensors.
  store.allow_create(false);
  Network<Scalar> bind(store);
  const std::size_t expected_count = [&] {
    ParameterStore<Scalar> ref = build_model<Scalar>(cfg, 0);
    return ref.entries().size();
  }();
  if (store.entries().size() != expected_count) {
    throw CheckpointError(CheckpointError::Reason::ConfigMismatch,
                          "checkpoint holds tensors the architecture does not use");
  }
  return store;
}

template void save_checkpoint<float>(const ParameterStore<float>&, const std::string&);
template void save_checkpoint<double>(const ParameterStore<double>&, const std::string&);
template ParameterStore<float> load_checkpoint<float>(const std::string&, const NetConfig*);
template ParameterStore<double> load_checkpoint<double>(const std::string&, const NetConfig*);

}  // namespace ddcnet
