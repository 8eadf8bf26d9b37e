#pragma once

// Deterministic text embedding: a frozen bag-of-tokens random projection.
// Stands in for a pretrained language encoder; shared tokens give related
// phrases high cosine similarity, and there is nothing to train.

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmnav/core.hpp"

namespace lmnav {

inline constexpr int kDefaultEmbeddingDim = 64;

// Lowercased alphanumeric runs, minus function words that carry no object
// information (every prompt starts with "go to the ...").
inline std::vector<std::string> tokenize(const std::string& text) {
  static const std::vector<std::string> stopwords = {"go", "to",  "the",  "a",  "an",
                                                     "next", "one", "near", "of"};
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() &&
        std::find(stopwords.begin(), stopwords.end(), cur) == stopwords.end())
      tokens.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch)))
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    else
      flush();
  }
  flush();
  return tokens;
}

struct InstructionEmbedding {
  Eigen::VectorXd vec;  // unit norm
};

// Each token hashes to a fixed pseudo-random direction; the phrase embedding
// is the normalized token sum. Pure function of the text.
inline InstructionEmbedding encode_instruction(const std::string& prompt,
                                               int dim = kDefaultEmbeddingDim) {
  if (dim < 1) throw std::invalid_argument("embedding dim must be positive");
  const std::vector<std::string> tokens = tokenize(prompt);
  if (tokens.empty()) throw std::invalid_argument("empty prompt");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
  for (const std::string& tok : tokens) {
    DeterministicRng rng(fnv1a(tok));
    for (int i = 0; i < dim; ++i) acc(i) += rng.uniform(-1.0, 1.0);
  }
  const double n = acc.norm();
  if (n < 1e-12) acc(0) = 1.0;  // unreachable in practice, keeps the invariant
  else acc /= n;
  return {acc};
}

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return a.dot(b) / (na * nb);
}

// Memoizes encode_instruction; prompts repeat heavily during training.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(int dim = kDefaultEmbeddingDim) : dim_(dim) {}
  const Eigen::VectorXd& get(const std::string& text) {
    auto it = map_.find(text);
    if (it == map_.end())
      it = map_.emplace(text, encode_instruction(text, dim_).vec).first;
    return it->second;
  }
  int dim() const { return dim_; }

 private:
  int dim_;
  std::unordered_map<std::string, Eigen::VectorXd> map_;
};

}  // namespace lmnav
