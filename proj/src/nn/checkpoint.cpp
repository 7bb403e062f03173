#include "i2c/nn/checkpoint.hpp"

#include "i2c/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace i2c::nn {
namespace {

constexpr char kMagic[8] = {'I', '2', 'C', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(byte()) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(byte()) << (8 * k);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_magic() {
    need(sizeof(kMagic));
    if (std::memcmp(in_.data() + pos_, kMagic, sizeof(kMagic)) != 0) {
      throw ConfigError("not a checkpoint file (bad magic)");
    }
    pos_ += sizeof(kMagic);
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw ConfigError("checkpoint is truncated");
  }
  unsigned char byte() { return static_cast<unsigned char>(in_[pos_++]); }

  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kCheckpointFormatVersion);
  w.u32(static_cast<std::uint32_t>(checkpoint.metadata.size()));
  for (const auto& [k, v] : checkpoint.metadata) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(checkpoint.stores.size()));
  for (const auto& [name, store] : checkpoint.stores) {
    w.str(name);
    w.u64(store.version());
    w.u64(store.optimizer_steps());
    w.u32(static_cast<std::uint32_t>(store.entry_count()));
    for (const auto& e : store.entries()) {
      w.str(e.name);
      w.u32(static_cast<std::uint32_t>(e.shape.size()));
      for (auto d : e.shape) w.u64(d);
      for (double v : e.values) w.f64(v);
      for (double v : e.first_moment) w.f64(v);
      for (double v : e.second_moment) w.f64(v);
    }
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.expect_magic();
  const std::uint32_t format = r.u32();
  if (format != kCheckpointFormatVersion) {
    throw ConfigError("unsupported checkpoint format version " + std::to_string(format));
  }
  Checkpoint cp;
  const std::uint32_t meta = r.u32();
  for (std::uint32_t i = 0; i < meta; ++i) {
    std::string k = r.str();
    cp.metadata[k] = r.str();
  }
  const std::uint32_t stores = r.u32();
  for (std::uint32_t s = 0; s < stores; ++s) {
    std::string name = r.str();
    ParameterStore store;
    const std::uint64_t version = r.u64();
    const std::uint64_t steps = r.u64();
    const std::uint32_t entries = r.u32();
    for (std::uint32_t k = 0; k < entries; ++k) {
      std::string ename = r.str();
      const std::uint32_t ndim = r.u32();
      if (ndim == 0 || ndim > 2) throw ConfigError("checkpoint entry has bad rank");
      std::vector<std::size_t> shape(ndim);
      std::size_t n = 1;
      for (auto& d : shape) {
        d = static_cast<std::size_t>(r.u64());
        n *= d;
      }
      if (n > bytes.size()) throw ConfigError("checkpoint entry size exceeds file size");
      std::vector<double> values(n);
      for (auto& v : values) v = r.f64();
      const std::size_t idx = store.add(ename, shape, std::move(values));
      auto& e = store.entry(idx);
      for (auto& v : e.first_moment) v = r.f64();
      for (auto& v : e.second_moment) v = r.f64();
    }
    store.set_version(version);
    store.set_optimizer_steps(steps);
    cp.stores.emplace(std::move(name), std::move(store));
  }
  if (!r.at_end()) throw ConfigError("trailing bytes after checkpoint");
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace i2c::nn
