#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slu/numerics.hpp"

namespace slu {

// Lowercases, splits on whitespace and detaches punctuation as separate
// tokens. Apostrophes between letters stay inside the word ("let's").
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kBou = 2;
  static constexpr std::size_t kEou = 3;
  static constexpr std::string_view kPadToken = "<PAD>";
  static constexpr std::string_view kUnkToken = "<UNK>";
  static constexpr std::string_view kBouToken = "<BOU>";
  static constexpr std::string_view kEouToken = "<EOU>";

  Vocabulary();

  // Rebuilds a vocabulary from its token list; the reserved tokens must lead.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t add(std::string_view token);
  bool contains(std::string_view token) const;
  // Unknown tokens map to kUnk.
  std::size_t index_of(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingMatrix {
  RealMatrix table;  // vocabulary size x dim
  bool trainable = true;

  std::size_t dim() const { return table.cols(); }
  std::size_t rows() const { return table.rows(); }
};

inline constexpr std::size_t kDefaultEmbeddingDim = 100;
inline constexpr double kEmbeddingInitRange = 0.05;

// Every non-PAD row uniform(-0.05, 0.05), PAD row zero.
EmbeddingMatrix random_embeddings(const Vocabulary& vocab, std::size_t dim, SeededRng& rng);

// Reads "token v1 ... vD" lines. Rows for tokens found in the file are copied
// verbatim; everything else falls back to random_embeddings. The file's
// dimension must equal `dim`.
EmbeddingMatrix load_pretrained(const std::string& path, const Vocabulary& vocab,
                                SeededRng& rng, std::size_t dim = kDefaultEmbeddingDim);

std::vector<std::size_t> token_indices(std::span<const std::string> tokens,
                                       const Vocabulary& vocab);

std::vector<RealVector> lookup(const EmbeddingMatrix& matrix,
                               std::span<const std::string> tokens, const Vocabulary& vocab);
std::vector<RealVector> lookup_indices(const EmbeddingMatrix& matrix,
                                       std::span<const std::size_t> indices);

// Scatter-add of per-position input gradients into the rows they came from.
void accumulate_embedding_grad(RealMatrix& grad, std::span<const std::size_t> indices,
                               std::span<const RealVector> dxs);

}  // namespace slu
