#include "mergan/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace mergan {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'R', 'G', 'N'};
constexpr std::uint32_t kMaxRank = 8;

std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, std::numeric_limits<uInt>::max()));
    c = crc32(c, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end, const std::string& source)
      : bytes_(bytes), end_(end), source_(source) {}

  template <typename T>
  T get(const char* what) {
    T v;
    std::memcpy(&v, take(sizeof(T), what), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n, const char* what) {
    if (n > end_ - pos_) fail(std::string("truncated ") + what);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw CheckpointError(source_ + " at offset " + std::to_string(pos_) + ": " + msg);
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  const std::string& source_;
};

Tensor scalar(double v) { return Tensor::scalar(v); }

Tensor vector_of(const std::vector<std::size_t>& v) {
  std::vector<double> d(v.begin(), v.end());
  return Tensor(Shape{v.size()}, std::move(d));
}

const Tensor& need(const Checkpoint& c, const std::string& name) {
  const auto it = c.tensors.find(name);
  if (it == c.tensors.end()) throw CheckpointError("checkpoint lacks '" + name + "'");
  return it->second;
}

double meta(const Checkpoint& c, const std::string& field) {
  const Tensor& t = need(c, "meta/" + field);
  if (t.size() != 1) throw CheckpointError("meta/" + field + " must hold one value");
  return t[0];
}

std::size_t meta_size(const Checkpoint& c, const std::string& field) {
  const double v = meta(c, field);
  if (!(v >= 0.0) || v != std::floor(v) || v > 9007199254740992.0) {
    throw CheckpointError("meta/" + field + " is not a count");
  }
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> meta_list(const Checkpoint& c, const std::string& field) {
  const Tensor& t = need(c, "meta/" + field);
  std::vector<std::size_t> out;
  for (double v : t.values()) {
    if (!(v >= 1.0) || v != std::floor(v)) throw CheckpointError("meta/" + field + " holds a bad width");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void put_adam(Checkpoint& c, const std::string& group, const AdamState& s) {
  c.tensors["meta/adam." + group + ".step"] = scalar(static_cast<double>(s.step));
  for (const auto& [name, t] : s.first) c.tensors["adam." + group + ".m/" + name] = t;
  for (const auto& [name, t] : s.second) c.tensors["adam." + group + ".v/" + name] = t;
}

AdamState get_adam(const Checkpoint& c, const std::string& group) {
  AdamState s;
  s.step = meta_size(c, "adam." + group + ".step");
  const std::string m = "adam." + group + ".m/", v = "adam." + group + ".v/";
  for (const auto& [name, t] : c.tensors) {
    if (name.starts_with(m)) s.first.emplace(name.substr(m.size()), t);
    if (name.starts_with(v)) s.second.emplace(name.substr(v.size()), t);
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(ckpt.task);
  w.put<std::uint64_t>(ckpt.global_iter);
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.size() > std::numeric_limits<std::uint32_t>::max()) throw CheckpointError("tensor name too long");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) throw CheckpointError("dimension too large: " + name);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    }
    w.put_bytes(t.data(), t.size() * sizeof(double));
  }
  w.put<std::uint32_t>(crc(w.bytes.data(), w.bytes.size()));
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  if (bytes.size() < 24) {
    throw CheckpointError(source + ": " + std::to_string(bytes.size()) + " bytes is shorter than a checkpoint header");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError(source + " at offset 0: bad magic, not a checkpoint");
  if (crc(bytes.data(), body) != stored) {
    throw CheckpointError(source + " at offset " + std::to_string(body) + ": CRC mismatch (file truncated or corrupted)");
  }
  Reader r(bytes, body, source);
  r.take(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    r.fail("format version " + std::to_string(version) + " is not the supported " + std::to_string(kCheckpointVersion));
  }
  Checkpoint out;
  out.task = r.get<std::uint32_t>("task");
  out.global_iter = r.get<std::uint64_t>("global_iter");
  while (!r.done()) {
    const auto len = r.get<std::uint32_t>("name length");
    const auto* name_bytes = r.take(len, "name");
    std::string name(reinterpret_cast<const char*>(name_bytes), len);
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > kMaxRank) r.fail("rank " + std::to_string(rank) + " of '" + name + "' exceeds " + std::to_string(kMaxRank));
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = r.get<std::uint32_t>("dimension");
      shape.push_back(d);
      if (d != 0 && numel > std::numeric_limits<std::size_t>::max() / sizeof(double) / d) r.fail("tensor too large");
      numel *= d;
    }
    std::vector<double> values(numel);
    std::memcpy(values.data(), r.take(numel * sizeof(double), "payload"), numel * sizeof(double));
    if (!out.tensors.emplace(std::move(name), Tensor(shape, std::move(values))).second) r.fail("duplicate tensor name");
  }
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw CheckpointError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

Checkpoint make_checkpoint(const TrainConfig& config, const TrainingState& state,
                           const std::map<std::string, Tensor>& probe_references) {
  Checkpoint c;
  c.task = static_cast<std::uint32_t>(state.task);
  c.global_iter = state.global_iter;
  for (const auto& [name, t] : state.params.tensors()) c.tensors["param/" + name] = t;
  put_adam(c, "generator", state.generator_opt);
  put_adam(c, "critic", state.critic_opt);
  for (const auto& [key, t] : probe_references) c.tensors["probe/" + key] = t;
  const Architecture& a = state.params.architecture();
  c.tensors["meta/strategy"] = scalar(static_cast<double>(config.strategy));
  c.tensors["meta/critic_updates"] = scalar(static_cast<double>(state.critic_updates));
  c.tensors["meta/generator_updates"] = scalar(static_cast<double>(state.generator_updates));
  c.tensors["meta/arch.mode"] = scalar(static_cast<double>(a.mode));
  c.tensors["meta/arch.categories"] = scalar(static_cast<double>(a.categories));
  c.tensors["meta/arch.latent_dim"] = scalar(static_cast<double>(a.latent_dim));
  c.tensors["meta/arch.height"] = scalar(static_cast<double>(a.height));
  c.tensors["meta/arch.width"] = scalar(static_cast<double>(a.width));
  c.tensors["meta/arch.generator_hidden"] = vector_of(a.generator_hidden);
  c.tensors["meta/arch.trunk_hidden"] = vector_of(a.trunk_hidden);
  c.tensors["meta/arch.leaky_slope"] = scalar(a.leaky_slope);
  c.tensors["meta/arch.bn_momentum"] = scalar(a.bn_momentum);
  c.tensors["meta/arch.bn_eps"] = scalar(a.bn_eps);
  c.tensors["meta/arch.init_std"] = scalar(a.init_std);
  return c;
}

RestoredRun restore_run(const Checkpoint& ckpt) {
  RestoredRun run;
  Architecture& a = run.architecture;
  const std::size_t mode = meta_size(ckpt, "arch.mode");
  if (mode > 1) throw CheckpointError("unknown output mode in checkpoint");
  a.mode = static_cast<OutputMode>(mode);
  a.categories = meta_size(ckpt, "arch.categories");
  a.latent_dim = meta_size(ckpt, "arch.latent_dim");
  a.height = meta_size(ckpt, "arch.height");
  a.width = meta_size(ckpt, "arch.width");
  a.generator_hidden = meta_list(ckpt, "arch.generator_hidden");
  a.trunk_hidden = meta_list(ckpt, "arch.trunk_hidden");
  a.leaky_slope = meta(ckpt, "arch.leaky_slope");
  a.bn_momentum = meta(ckpt, "arch.bn_momentum");
  a.bn_eps = meta(ckpt, "arch.bn_eps");
  a.init_std = meta(ckpt, "arch.init_std");
  const std::size_t strategy = meta_size(ckpt, "strategy");
  if (strategy > static_cast<std::size_t>(Strategy::MERGAN_RA)) throw CheckpointError("unknown strategy in checkpoint");
  run.strategy = static_cast<Strategy>(strategy);

  std::map<std::string, Tensor, std::less<>> params;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.starts_with("param/")) params.emplace(name.substr(6), t);
    if (name.starts_with("probe/")) run.probe_references.emplace(name.substr(6), t);
  }
  try {
    run.state.params = ModelParams::from_tensors(a, std::move(params));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint parameters do not match its architecture: ") + e.what());
  }
  run.state.generator_opt = get_adam(ckpt, "generator");
  run.state.critic_opt = get_adam(ckpt, "critic");
  run.state.task = static_cast<int>(ckpt.task);
  run.state.global_iter = ckpt.global_iter;
  run.state.critic_updates = meta_size(ckpt, "critic_updates");
  run.state.generator_updates = meta_size(ckpt, "generator_updates");
  return run;
}

Checkpoint make_proxy_checkpoint(const ProxyClassifier& proxy) {
  Checkpoint c;
  const Classifier& k = proxy.classifier;
  for (const auto& [name, t] : k.params()) c.tensors["proxy/" + name] = t;
  c.tensors["meta/proxy.input_dim"] = scalar(static_cast<double>(k.input_dim()));
  c.tensors["meta/proxy.categories"] = scalar(static_cast<double>(k.categories()));
  c.tensors["meta/proxy.hidden"] = vector_of(k.config().hidden);
  c.tensors["meta/proxy.learning_rate"] = scalar(k.config().learning_rate);
  c.tensors["meta/proxy.batch_size"] = scalar(static_cast<double>(k.config().batch_size));
  c.tensors["meta/proxy.iterations"] = scalar(static_cast<double>(k.config().iterations));
  c.tensors["meta/proxy.init_std"] = scalar(k.config().init_std);
  c.tensors["meta/proxy.identity_embedding"] = scalar(proxy.identity_embedding ? 1.0 : 0.0);
  c.tensors["meta/proxy.test_accuracy"] = scalar(proxy.test_accuracy);
  return c;
}

ProxyClassifier restore_proxy(const Checkpoint& ckpt) {
  ClassifierConfig cfg;
  cfg.hidden = meta_list(ckpt, "proxy.hidden");
  cfg.learning_rate = meta(ckpt, "proxy.learning_rate");
  cfg.batch_size = meta_size(ckpt, "proxy.batch_size");
  cfg.iterations = meta_size(ckpt, "proxy.iterations");
  cfg.init_std = meta(ckpt, "proxy.init_std");
  TensorMap params;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.starts_with("proxy/")) params.emplace(name.substr(6), t);
  }
  ProxyClassifier proxy;
  try {
    proxy.classifier = Classifier::from_params(meta_size(ckpt, "proxy.input_dim"), meta_size(ckpt, "proxy.categories"),
                                               cfg, std::move(params));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("proxy checkpoint is inconsistent: ") + e.what());
  }
  proxy.identity_embedding = meta(ckpt, "proxy.identity_embedding") != 0.0;
  proxy.test_accuracy = meta(ckpt, "proxy.test_accuracy");
  return proxy;
}

}  // namespace mergan
