#include "litevl/vocab.hpp"

#include <sstream>
#include <stdexcept>

namespace litevl {

void validate_sequence(const TokenSequence& seq, std::size_t vocab_size,
                       std::size_t max_text_len) {
  if (seq.content.empty()) throw std::invalid_argument("token sequence must be non-empty");
  if (seq.content.size() > max_text_len - 1) {
    throw std::invalid_argument("token sequence length " + std::to_string(seq.content.size()) +
                                " exceeds max content length " + std::to_string(max_text_len - 1));
  }
  for (std::size_t id : seq.content) {
    if (id >= vocab_size) {
      throw std::invalid_argument("token id " + std::to_string(id) + " out of vocabulary range " +
                                  std::to_string(vocab_size));
    }
    if (id == kClsTokenId || id == kEncodeTokenId) {
      throw std::invalid_argument("reserved token id " + std::to_string(id) +
                                  " may not appear in content");
    }
  }
}

Vocab::Vocab(std::size_t vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 4) {
    throw std::invalid_argument("vocab needs at least 4 entries (2 reserved + content)");
  }
  const std::size_t content = vocab_size - 2;
  n_objects_ = (content + 1) / 2;
  n_motions_ = content / 2;
}

std::size_t Vocab::object_id(std::size_t k) const {
  if (k >= n_objects_) throw std::invalid_argument("object index out of range");
  return 2 + k;
}

std::size_t Vocab::motion_id(std::size_t k) const {
  if (k >= n_motions_) throw std::invalid_argument("motion index out of range");
  return 2 + n_objects_ + k;
}

bool Vocab::is_object(std::size_t id) const { return id >= 2 && id < 2 + n_objects_; }

std::size_t Vocab::object_index(std::size_t id) const {
  if (!is_object(id)) throw std::invalid_argument("id is not an object token");
  return id - 2;
}

std::string Vocab::word(std::size_t id) const {
  if (id == kClsTokenId) return "[CLS]";
  if (id == kEncodeTokenId) return "[ENC]";
  if (id >= vocab_size_) throw std::invalid_argument("token id out of range");
  if (is_object(id)) return "obj" + std::to_string(id - 2);
  return "mot" + std::to_string(id - 2 - n_objects_);
}

std::size_t Vocab::token_id(const std::string& w) const {
  auto parse_num = [&](std::size_t prefix_len) -> std::size_t {
    const std::string digits = w.substr(prefix_len);
    if (digits.empty()) throw std::invalid_argument("unknown word '" + w + "'");
    for (char c : digits) {
      if (c < '0' || c > '9') throw std::invalid_argument("unknown word '" + w + "'");
    }
    return static_cast<std::size_t>(std::stoull(digits));
  };
  if (w.rfind("obj", 0) == 0) {
    const std::size_t k = parse_num(3);
    if (k >= n_objects_) throw std::invalid_argument("unknown word '" + w + "'");
    return object_id(k);
  }
  if (w.rfind("mot", 0) == 0) {
    const std::size_t k = parse_num(3);
    if (k >= n_motions_) throw std::invalid_argument("unknown word '" + w + "'");
    return motion_id(k);
  }
  throw std::invalid_argument("unknown word '" + w + "'");
}

TokenSequence Vocab::tokenize(const std::string& text, std::size_t max_text_len) const {
  TokenSequence seq;
  std::istringstream is(text);
  std::string w;
  while (is >> w) seq.content.push_back(token_id(w));
  validate_sequence(seq, vocab_size_, max_text_len);
  return seq;
}

}  // namespace litevl
