#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace litevl {

inline constexpr std::size_t kClsTokenId = 0;     // unimodal mode token
inline constexpr std::size_t kEncodeTokenId = 1;  // grounded mode token

/// Content token ids only; the encoder prepends its own mode token at
/// position 0, so content length is capped at max_text_len - 1.
struct TokenSequence {
  std::vector<std::size_t> content;
};

void validate_sequence(const TokenSequence& seq, std::size_t vocab_size,
                       std::size_t max_text_len);

/// Fixed synthetic vocabulary: two reserved ids, then object words, then
/// motion words. Words are "objN" / "motN".
class Vocab {
 public:
  explicit Vocab(std::size_t vocab_size);

  std::size_t size() const { return vocab_size_; }
  std::size_t n_objects() const { return n_objects_; }
  std::size_t n_motions() const { return n_motions_; }

  std::size_t object_id(std::size_t k) const;
  std::size_t motion_id(std::size_t k) const;
  bool is_object(std::size_t id) const;
  std::size_t object_index(std::size_t id) const;  // inverse of object_id

  std::string word(std::size_t id) const;
  std::size_t token_id(const std::string& word) const;  // OOV raises

  /// Whitespace tokenizer over this vocabulary.
  TokenSequence tokenize(const std::string& text, std::size_t max_text_len) const;

 private:
  std::size_t vocab_size_;
  std::size_t n_objects_;
  std::size_t n_motions_;
};

}  // namespace litevl
