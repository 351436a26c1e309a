#include <stdexcept>

#include "doctest.h"
#include "litevl/vocab.hpp"

using litevl::TokenSequence;
using litevl::Vocab;

TEST_CASE("vocab splits content into objects and motions") {
  Vocab v(64);
  CHECK(v.n_objects() == 31);
  CHECK(v.n_motions() == 31);
  CHECK(v.object_id(0) == 2);
  CHECK(v.object_id(30) == 32);
  CHECK(v.motion_id(0) == 33);
  CHECK(v.motion_id(30) == 63);
  CHECK(v.is_object(2));
  CHECK(!v.is_object(33));
  CHECK(v.object_index(v.object_id(7)) == 7);
  CHECK_THROWS_AS(Vocab(3), std::invalid_argument);
}

TEST_CASE("words round-trip through the tokenizer") {
  Vocab v(16);
  for (std::size_t k = 0; k < v.n_objects(); ++k) {
    CHECK(v.token_id(v.word(v.object_id(k))) == v.object_id(k));
  }
  for (std::size_t k = 0; k < v.n_motions(); ++k) {
    CHECK(v.token_id(v.word(v.motion_id(k))) == v.motion_id(k));
  }
  CHECK(v.word(0) == "[CLS]");
  CHECK(v.word(1) == "[ENC]");
}

TEST_CASE("tokenize splits on whitespace") {
  Vocab v(16);
  auto seq = v.tokenize("obj0 mot1", 12);
  REQUIRE(seq.content.size() == 2);
  CHECK(seq.content[0] == v.object_id(0));
  CHECK(seq.content[1] == v.motion_id(1));
}

TEST_CASE("tokenizer rejects out-of-vocabulary words") {
  Vocab v(16);
  CHECK_THROWS_AS(v.tokenize("cat", 12), std::invalid_argument);
  CHECK_THROWS_AS(v.tokenize("obj999", 12), std::invalid_argument);
  CHECK_THROWS_AS(v.tokenize("objx", 12), std::invalid_argument);
  CHECK_THROWS_AS(v.tokenize("", 12), std::invalid_argument);
}

TEST_CASE("sequence validation") {
  TokenSequence ok{{2, 3}};
  CHECK_NOTHROW(litevl::validate_sequence(ok, 16, 12));

  TokenSequence empty{};
  CHECK_THROWS_AS(litevl::validate_sequence(empty, 16, 12), std::invalid_argument);

  TokenSequence reserved{{0}};
  CHECK_THROWS_AS(litevl::validate_sequence(reserved, 16, 12), std::invalid_argument);

  TokenSequence out_of_range{{99}};
  CHECK_THROWS_AS(litevl::validate_sequence(out_of_range, 16, 12), std::invalid_argument);

  TokenSequence too_long{{2, 3, 4, 5}};
  CHECK_THROWS_AS(litevl::validate_sequence(too_long, 16, 4), std::invalid_argument);
}
