#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "lmnav/embedding.hpp"

using namespace lmnav;

TEST_CASE("tokenizer keeps content words only") {
  CHECK(tokenize("go to the red ball") == std::vector<std::string>{"red", "ball"});
  CHECK(tokenize("GO to THE Red-Ball!") == std::vector<std::string>{"red", "ball"});
  CHECK(tokenize("box 2, shelf") == std::vector<std::string>{"box", "2", "shelf"});
  CHECK(tokenize("the one next to a mug") == std::vector<std::string>{"mug"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("go to the").empty());
}

TEST_CASE("encoding is a pure function of the content words") {
  const InstructionEmbedding a = encode_instruction("go to the red ball");
  const InstructionEmbedding b = encode_instruction("red ball");
  const InstructionEmbedding c = encode_instruction("ball red");  // token-order blind
  REQUIRE(a.vec.size() == kDefaultEmbeddingDim);
  CHECK(a.vec == b.vec);
  CHECK(a.vec == c.vec);
  CHECK(a.vec.norm() == Catch::Approx(1.0).epsilon(1e-12));

  const InstructionEmbedding again = encode_instruction("go to the red ball");
  CHECK(a.vec == again.vec);

  const InstructionEmbedding other = encode_instruction("blue mug");
  CHECK(a.vec != other.vec);
  CHECK(encode_instruction("tall lamp", 16).vec.size() == 16);

  CHECK_THROWS_AS(encode_instruction(""), std::invalid_argument);
  CHECK_THROWS_AS(encode_instruction("go to the"), std::invalid_argument);
  CHECK_THROWS_AS(encode_instruction("ball", 0), std::invalid_argument);
}

TEST_CASE("shared tokens raise cosine similarity") {
  const Eigen::VectorXd red_ball = encode_instruction("red ball").vec;
  const Eigen::VectorXd red_box = encode_instruction("red box").vec;
  const Eigen::VectorXd green_mug = encode_instruction("green mug").vec;
  CHECK(cosine(red_ball, red_ball) == Catch::Approx(1.0));
  CHECK(cosine(red_ball, red_box) > cosine(red_ball, green_mug));
  CHECK(cosine(red_ball, red_box) > 0.2);
  CHECK(std::abs(cosine(red_ball, green_mug)) < 0.5);  // unrelated stays low

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(kDefaultEmbeddingDim);
  CHECK(cosine(red_ball, zero) == 0.0);
}

TEST_CASE("embedding cache memoizes by exact text") {
  EmbeddingCache cache(32);
  CHECK(cache.dim() == 32);
  const Eigen::VectorXd& first = cache.get("red ball");
  CHECK(first.size() == 32);
  const Eigen::VectorXd& second = cache.get("red ball");
  CHECK(&first == &second);  // same stored entry, not a re-encode
  CHECK(cache.get("red ball") == encode_instruction("red ball", 32).vec);
  CHECK(cache.get("blue mug") != first);
}
