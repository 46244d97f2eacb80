#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "lrl/autodiff.hpp"

namespace lrl {

inline constexpr char kCheckpointMagic[8] = {'L', 'R', 'L', 'C', 'K', 'P', 'T', '1'};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline bool get_u64(std::istream& is, std::uint64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}

}  // namespace detail

/// Record layout, all integers u64 little-endian:
///   name_len, name bytes, rank, dims[rank], data as f64 bit patterns.
inline void write_checkpoint(const std::string& path, const std::vector<const ParamBlock*>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open " + path + " for writing");
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  for (const ParamBlock* p : params) {
    detail::put_u64(os, p->name.size());
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::put_u64(os, p->tensor.rank());
    for (auto d : p->tensor.shape) detail::put_u64(os, d);
    for (double v : p->tensor.data) detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw CheckpointError("write failed for " + path);
}

inline std::vector<NamedTensor> read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError(path + ": bad magic");
  }
  std::vector<NamedTensor> out;
  for (;;) {
    const auto offset = static_cast<std::uint64_t>(is.tellg());
    std::uint64_t name_len;
    if (!detail::get_u64(is, name_len)) {
      if (is.gcount() == 0) break;
      throw CheckpointError(path + ": truncated record at offset " + std::to_string(offset));
    }
    auto fail = [&] { throw CheckpointError(path + ": truncated record at offset " + std::to_string(offset)); };
    if (name_len > (1u << 16)) fail();
    NamedTensor nt;
    nt.name.resize(name_len);
    if (!is.read(nt.name.data(), static_cast<std::streamsize>(name_len))) fail();
    std::uint64_t rank;
    if (!detail::get_u64(is, rank) || rank > 8) fail();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) {
      std::uint64_t v;
      if (!detail::get_u64(is, v) || v > (1u << 28)) fail();
      d = v;
    }
    nt.tensor = Tensor(shape);
    for (auto& v : nt.tensor.data) {
      std::uint64_t bits;
      if (!detail::get_u64(is, bits)) fail();
      v = std::bit_cast<double>(bits);
    }
    out.push_back(std::move(nt));
  }
  return out;
}

/// Copies checkpoint tensors into same-named blocks; names and shapes must match exactly.
inline void load_into(ParamStore& store, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != store.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                          std::to_string(store.size()));
  }
  for (const auto& nt : tensors) {
    ParamBlock* p = store.find(nt.name);
    if (p == nullptr) throw CheckpointError("checkpoint tensor '" + nt.name + "' has no matching parameter");
    if (!p->tensor.same_shape(nt.tensor)) {
      throw CheckpointError("shape mismatch for '" + nt.name + "': checkpoint " + nt.tensor.shape_str() + ", model " +
                            p->tensor.shape_str());
    }
    p->tensor = nt.tensor;
  }
}

}  // namespace lrl
