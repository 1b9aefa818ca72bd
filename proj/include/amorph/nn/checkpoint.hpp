#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "amorph/error.hpp"
#include "amorph/nn/policy.hpp"

namespace amorph {

inline constexpr char kCheckpointMagic[8] = {'A', 'M', 'R', 'P', 'H', 'N', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  std::uint64_t uint(int bytes) {
    require(pos_ + bytes <= s_.size(), ErrorKind::io, "truncated checkpoint");
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + b])) << (8 * b);
    pos_ += bytes;
    return v;
  }
  std::string bytes(std::size_t n) {
    require(pos_ + n <= s_.size(), ErrorKind::io, "truncated checkpoint");
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace ckpt_detail

inline std::string shape_string(const NetShape& s) {
  return "N=" + std::to_string(s.n) + " M=" + std::to_string(s.channels) + " action_dim=" +
         std::to_string(s.action_dim) + " tool_dim=" + std::to_string(s.tool_dim) +
         " extra_dim=" + std::to_string(s.extra_dim);
}

inline std::string encode_checkpoint(const PolicyParams& p) {
  using namespace ckpt_detail;
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  const auto& s = p.shape();
  for (int v : {s.n, s.channels, s.action_dim, s.tool_dim, s.extra_dim}) put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(p.blocks().size()));
  for (const auto& b : p.blocks()) {
    put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out += b.name;
    put_u64(out, b.size);
    for (std::size_t k = 0; k < b.size; ++k) put_u64(out, std::bit_cast<std::uint64_t>(p.data()[b.offset + k]));
  }
  return out;
}

inline PolicyParams decode_checkpoint(const std::string& bytes) {
  ckpt_detail::Reader r(bytes);
  require(r.bytes(sizeof kCheckpointMagic) == std::string(kCheckpointMagic, sizeof kCheckpointMagic),
          ErrorKind::io, "not a policy checkpoint (bad magic)");
  const auto version = r.uint(4);
  require(version == kCheckpointVersion, ErrorKind::io,
          "unsupported checkpoint version " + std::to_string(version));
  NetShape s;
  s.n = static_cast<int>(r.uint(4));
  s.channels = static_cast<int>(r.uint(4));
  s.action_dim = static_cast<int>(r.uint(4));
  s.tool_dim = static_cast<int>(r.uint(4));
  s.extra_dim = static_cast<int>(r.uint(4));
  PolicyParams p(s);
  const auto count = r.uint(4);
  require(count == p.blocks().size(), ErrorKind::shape, "checkpoint has " + std::to_string(count) +
                                                            " arrays, expected " + std::to_string(p.blocks().size()));
  for (const auto& b : p.blocks()) {
    const auto name = r.bytes(r.uint(4));
    require(name == b.name, ErrorKind::shape, "checkpoint array '" + name + "' where '" + b.name + "' expected");
    const auto size = r.uint(8);
    require(size == b.size, ErrorKind::shape,
            "checkpoint array '" + name + "' has " + std::to_string(size) + " values, expected " +
                std::to_string(b.size));
    for (std::size_t k = 0; k < b.size; ++k) p.data()[b.offset + k] = std::bit_cast<double>(r.uint(8));
  }
  require(r.done(), ErrorKind::io, "trailing bytes in checkpoint");
  return p;
}

inline void save_checkpoint(const std::string& path, const PolicyParams& p) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::io, "cannot write " + path);
  const auto bytes = encode_checkpoint(p);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(f), ErrorKind::io, "write failed for " + path);
}

inline PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::io, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

// Loads and checks the network dimensions against what the task needs.
inline PolicyParams load_checkpoint(const std::string& path, const NetShape& expected) {
  PolicyParams p = load_checkpoint(path);
  if (!(p.shape() == expected))
    fail(ErrorKind::shape, "checkpoint dims (" + shape_string(p.shape()) + ") do not match task dims (" +
                               shape_string(expected) + ")");
  return p;
}

}  // namespace amorph
