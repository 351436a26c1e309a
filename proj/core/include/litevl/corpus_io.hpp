#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "litevl/checkpoint.hpp"
#include "litevl/corpus.hpp"

namespace litevl {

inline constexpr char kCorpusMagic[4] = {'L', 'V', 'C', 'D'};
inline constexpr std::uint32_t kCorpusVersion = 1;

/// Same little-endian field encoding as checkpoints; the trailing meta string
/// is a JSON echo of the generation parameters.
template <class Real>
void save_corpus(const std::string& path, const std::vector<SyntheticPair<Real>>& corpus,
                 const std::string& meta_json) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write corpus '" + path + "'");
  os.write(kCorpusMagic, 4);
  ckpt_detail::write_uint<std::uint32_t>(os, kCorpusVersion);
  ckpt_detail::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(corpus.size()));
  os.put(static_cast<char>(ckpt_detail::dtype_code<Real>()));
  for (const auto& pair : corpus) {
    ckpt_detail::write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(pair.pair_id));
    ckpt_detail::write_uint<std::uint32_t>(os,
                                           static_cast<std::uint32_t>(pair.caption.content.size()));
    for (std::size_t id : pair.caption.content) {
      ckpt_detail::write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(id));
    }
    ckpt_detail::write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(pair.signal_frame));
    ckpt_detail::write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(pair.qa_answer));
    ckpt_detail::write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(pair.frames.rank()));
    for (std::size_t d = 0; d < pair.frames.rank(); ++d) {
      ckpt_detail::write_uint<std::uint64_t>(os, static_cast<std::uint64_t>(pair.frames.dim(d)));
    }
    for (std::size_t i = 0; i < pair.frames.numel(); ++i) {
      ckpt_detail::write_value(os, pair.frames[i]);
    }
  }
  ckpt_detail::write_string(os, meta_json);
  if (!os) throw std::runtime_error("write failure on corpus '" + path + "'");
}

template <class Real>
struct LoadedCorpus {
  std::vector<SyntheticPair<Real>> pairs;
  std::string meta_json;
};

template <class Real>
LoadedCorpus<Real> load_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open corpus '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kCorpusMagic, 4) != 0) {
    throw std::runtime_error("'" + path + "' is not a corpus file (bad magic)");
  }
  const auto version = ckpt_detail::read_uint<std::uint32_t>(is);
  if (version != kCorpusVersion) {
    throw std::runtime_error("unsupported corpus version " + std::to_string(version));
  }
  const auto count = ckpt_detail::read_uint<std::uint32_t>(is);
  const int dtype = is.get();
  if (dtype == EOF) throw std::runtime_error("corpus truncated");
  if (dtype != ckpt_detail::dtype_code<Real>()) {
    throw std::runtime_error("corpus has dtype code " + std::to_string(dtype) + ", expected " +
                             std::to_string(ckpt_detail::dtype_code<Real>()));
  }

  LoadedCorpus<Real> out;
  out.pairs.reserve(count);
  for (std::uint32_t p = 0; p < count; ++p) {
    SyntheticPair<Real> pair;
    pair.pair_id = static_cast<std::size_t>(ckpt_detail::read_uint<std::uint64_t>(is));
    const auto cap_len = ckpt_detail::read_uint<std::uint32_t>(is);
    pair.caption.content.resize(cap_len);
    for (std::uint32_t i = 0; i < cap_len; ++i) {
      pair.caption.content[i] =
          static_cast<std::size_t>(ckpt_detail::read_uint<std::uint64_t>(is));
    }
    pair.signal_frame = static_cast<std::size_t>(ckpt_detail::read_uint<std::uint64_t>(is));
    pair.qa_answer = static_cast<std::size_t>(ckpt_detail::read_uint<std::uint64_t>(is));
    const auto rank = ckpt_detail::read_uint<std::uint32_t>(is);
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(ckpt_detail::read_uint<std::uint64_t>(is));
    }
    pair.frames = Tensor<Real>(shape);
    for (std::size_t i = 0; i < pair.frames.numel(); ++i) {
      pair.frames[i] = ckpt_detail::read_value<Real>(is);
    }
    out.pairs.push_back(std::move(pair));
  }
  out.meta_json = ckpt_detail::read_string(is);
  return out;
}

}  // namespace litevl
