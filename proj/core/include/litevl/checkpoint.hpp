#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "litevl/tensor.hpp"

namespace litevl {

inline constexpr char kCheckpointMagic[4] = {'L', 'V', 'L', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

// All multi-byte fields are written little-endian byte by byte, so files are
// portable across hosts.
template <class UInt>
void write_uint(std::ostream& os, UInt v) {
  static_assert(std::is_unsigned_v<UInt>);
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    os.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

template <class UInt>
UInt read_uint(std::istream& is) {
  static_assert(std::is_unsigned_v<UInt>);
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    const int c = is.get();
    if (c == EOF) throw std::runtime_error("checkpoint truncated");
    v |= static_cast<UInt>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

template <class Real>
constexpr std::uint8_t dtype_code() {
  static_assert(std::is_same_v<Real, float> || std::is_same_v<Real, double>);
  return std::is_same_v<Real, float> ? 0 : 1;
}

template <class Real>
void write_value(std::ostream& os, Real v) {
  if constexpr (std::is_same_v<Real, float>) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_uint(os, bits);
  } else {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    write_uint(os, bits);
  }
}

template <class Real>
Real read_value(std::istream& is) {
  Real v;
  if constexpr (std::is_same_v<Real, float>) {
    const std::uint32_t bits = read_uint<std::uint32_t>(is);
    std::memcpy(&v, &bits, sizeof(v));
  } else {
    const std::uint64_t bits = read_uint<std::uint64_t>(is);
    std::memcpy(&v, &bits, sizeof(v));
  }
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto len = read_uint<std::uint32_t>(is);
  std::string s(len, '\0');
  is.read(s.data(), static_cast<std::streamsize>(len));
  if (is.gcount() != static_cast<std::streamsize>(len)) {
    throw std::runtime_error("checkpoint truncated");
  }
  return s;
}

}  // namespace ckpt_detail

template <class Real>
void save_checkpoint(const std::string& path, const std::map<std::string, Tensor<Real>>& tensors,
                     const std::string& config_echo) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  os.write(kCheckpointMagic, 4);
  ckpt_detail::write_uint<std::uint32_t>(os, kCheckpointVersion);
  ckpt_detail::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    ckpt_detail::write_string(os, name);
    os.put(static_cast<char>(ckpt_detail::dtype_code<Real>()));
    ckpt_detail::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d = 0; d < t.rank(); ++d) {
      ckpt_detail::write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(t.dim(d)));
    }
    for (std::size_t i = 0; i < t.numel(); ++i) ckpt_detail::write_value(os, t[i]);
  }
  ckpt_detail::write_string(os, config_echo);
  if (!os) throw std::runtime_error("write failure on checkpoint '" + path + "'");
}

template <class Real>
struct LoadedCheckpoint {
  std::map<std::string, Tensor<Real>> tensors;
  std::string config_echo;
};

template <class Real>
LoadedCheckpoint<Real> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw std::runtime_error("'" + path + "' is not a checkpoint file (bad magic)");
  }
  const auto version = ckpt_detail::read_uint<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = ckpt_detail::read_uint<std::uint32_t>(is);
  LoadedCheckpoint<Real> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = ckpt_detail::read_string(is);
    const int dtype = is.get();
    if (dtype == EOF) throw std::runtime_error("checkpoint truncated");
    if (dtype != ckpt_detail::dtype_code<Real>()) {
      throw std::runtime_error("tensor '" + name + "' has dtype code " + std::to_string(dtype) +
                               ", expected " + std::to_string(ckpt_detail::dtype_code<Real>()));
    }
    const auto rank = ckpt_detail::read_uint<std::uint32_t>(is);
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(ckpt_detail::read_uint<std::uint64_t>(is));
    }
    Tensor<Real> t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = ckpt_detail::read_value<Real>(is);
    if (!out.tensors.emplace(name, std::move(t)).second) {
      throw std::runtime_error("duplicate tensor '" + name + "' in checkpoint");
    }
  }
  out.config_echo = ckpt_detail::read_string(is);
  return out;
}

}  // namespace litevl
