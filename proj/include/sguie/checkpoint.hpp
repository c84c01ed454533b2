#pragma once

// Checkpoint container, all integers little-endian:
//
//   "SGUIE\0"                       6-byte magic
//   u32 version                     kCheckpointVersion
//   u32 field count, u32 fields...  HyperConfig in declaration order
//   u32 entry count
//   per entry: u32 name length, name bytes, u32 rank, u32 dims[rank],
//              f32 payload (product of dims values)
//   u32 CRC-32 of every preceding byte
//
// Entries are the learnable tensors in visit order plus the batch-norm
// running statistics ("<bn>.running.mean", "<bn>.running.var").

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include <zlib.h>

#include "sguie/errors.hpp"
#include "sguie/model.hpp"

namespace sguie {

inline constexpr char kCheckpointMagic[6] = {'S', 'G', 'U', 'I', 'E', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

/// Decoded file contents, independent of any model instance.
struct CheckpointData {
  HyperConfig config;
  std::vector<std::string> order;
  std::map<std::string, CheckpointEntry> entries;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
static_assert(sizeof(float) == 4);

inline std::vector<std::uint32_t*> config_fields(HyperConfig& c) {
  return {&c.base_channels, &c.reduction,        &c.rg_count,     &c.fab_per_rg,
          &c.unet_depth,    &c.srm_stem_channels, &c.unet_channels};
}

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}
  void raw(void* p, std::size_t n, const char* what) {
    if (n > end_ - pos_) throw FormatError(std::string("checkpoint truncated while reading ") + what);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v = 0;
    raw(&v, 4, what);
    return v;
  }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  const std::vector<char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc(const char* data, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

template <typename T>
void collect_entries(SguieParams<T>& params, const std::function<void(const std::string&, std::vector<std::uint32_t>,
                                                                       std::vector<T*>)>& sink) {
  params.visit([&](const std::string& name, auto& obj) {
    using Obj = std::decay_t<decltype(obj)>;
    if constexpr (std::is_same_v<Obj, RunningStats<T>>) {
      for (auto* vec : {&obj.mean, &obj.var}) {
        std::vector<T*> ptrs;
        for (auto& v : *vec) ptrs.push_back(&v);
        const std::uint32_t c = static_cast<std::uint32_t>(vec->size());
        sink(name + (vec == &obj.mean ? ".mean" : ".var"), {1, c, 1, 1}, std::move(ptrs));
      }
    } else {
      const Shape& s = obj.shape();
      std::vector<T*> ptrs;
      for (auto& v : obj.value.mutable_data()) ptrs.push_back(&v);
      sink(name,
           {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c), static_cast<std::uint32_t>(s.h),
            static_cast<std::uint32_t>(s.w)},
           std::move(ptrs));
    }
  });
}

}  // namespace detail

template <typename T>
std::vector<char> encode_checkpoint(SguieParams<T>& params) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  HyperConfig cfg = params.config;
  const auto fields = detail::config_fields(cfg);
  w.u32(static_cast<std::uint32_t>(fields.size()));
  for (auto* f : fields) w.u32(*f);

  std::vector<std::pair<std::string, std::pair<std::vector<std::uint32_t>, std::vector<T*>>>> entries;
  detail::collect_entries<T>(params, [&](const std::string& n, std::vector<std::uint32_t> d, std::vector<T*> p) {
    entries.push_back({n, {std::move(d), std::move(p)}});
  });
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, body] : entries) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name.data(), name.size());
    w.u32(static_cast<std::uint32_t>(body.first.size()));
    for (auto d : body.first) w.u32(d);
    for (const T* v : body.second) w.f32(static_cast<float>(*v));
  }
  const std::uint32_t sum = detail::crc(w.bytes().data(), w.bytes().size());
  w.u32(sum);
  return std::move(w.bytes());
}

inline CheckpointData decode_checkpoint(const std::vector<char>& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic + 4 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  detail::ByteReader head(bytes, bytes.size());
  char magic[sizeof kCheckpointMagic];
  head.raw(magic, sizeof magic, "magic");
  const std::uint32_t version = head.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < sizeof kCheckpointMagic + 8) throw FormatError("checkpoint truncated");
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (detail::crc(bytes.data(), bytes.size() - 4) != stored) {
    throw FormatError("checkpoint checksum mismatch (file truncated or corrupted)");
  }

  detail::ByteReader r(bytes, bytes.size() - 4);
  r.raw(magic, sizeof magic, "magic");
  r.u32("version");
  CheckpointData out;
  const auto fields = detail::config_fields(out.config);
  const std::uint32_t nfields = r.u32("hyperconfig");
  if (nfields != fields.size()) throw FormatError("checkpoint hyperconfig has " + std::to_string(nfields) + " fields");
  for (auto* f : fields) *f = r.u32("hyperconfig");
  const std::uint32_t count = r.u32("entry count");
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t len = r.u32("name length");
    if (len > r.remaining()) throw FormatError("checkpoint truncated while reading entry name");
    std::string name(len, '\0');
    r.raw(name.data(), len, "entry name");
    CheckpointEntry entry;
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw FormatError("checkpoint entry " + name + " has rank " + std::to_string(rank));
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      entry.dims.push_back(r.u32("dims"));
      numel *= entry.dims.back();
    }
    if (numel * 4 > r.remaining()) throw FormatError("checkpoint truncated in payload of " + name);
    entry.values.resize(numel);
    r.raw(entry.values.data(), numel * 4, "payload");
    if (!out.entries.emplace(name, std::move(entry)).second) throw FormatError("checkpoint repeats entry " + name);
    out.order.push_back(name);
  }
  if (r.remaining() != 0) throw FormatError("checkpoint has trailing bytes");
  return out;
}

/// Copies decoded values into `params`. Everything is validated before the
/// first write, so on error `params` is untouched.
template <typename T>
void apply_checkpoint(const CheckpointData& data, SguieParams<T>& params) {
  if (!(data.config == params.config)) {
    throw UsageError("checkpoint hyperconfig (C=" + std::to_string(data.config.base_channels) +
                     ") does not match the requested model (C=" + std::to_string(params.config.base_channels) + ")");
  }
  std::vector<std::pair<const CheckpointEntry*, std::vector<T*>>> plan;
  std::size_t expected = 0;
  detail::collect_entries<T>(params, [&](const std::string& n, std::vector<std::uint32_t> d, std::vector<T*> p) {
    ++expected;
    auto it = data.entries.find(n);
    if (it == data.entries.end()) throw FormatError("checkpoint lacks entry " + n);
    if (it->second.dims != d) throw ShapeError("checkpoint entry " + n + " has mismatched dimensions");
    plan.emplace_back(&it->second, std::move(p));
  });
  if (expected != data.entries.size()) throw FormatError("checkpoint has entries the model does not know");
  for (auto& [entry, ptrs] : plan) {
    for (std::size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = static_cast<T>(entry->values[i]);
  }
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, SguieParams<T>& params) {
  const auto bytes = encode_checkpoint(params);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, SguieParams<T>& params) {
  apply_checkpoint(read_checkpoint(path), params);
}

/// Builds a model with the hyperconfig stored in the file.
template <typename T>
SguieParams<T> load_model(const std::filesystem::path& path) {
  const CheckpointData data = read_checkpoint(path);
  data.config.validate();
  auto params = SguieParams<T>::make(data.config);
  apply_checkpoint(data, params);
  return params;
}

}  // namespace sguie
