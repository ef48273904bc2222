#include "slu/embeddings.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "slu/error.hpp"

namespace slu {
namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
    } else if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'' && !current.empty() && i + 1 < text.size() &&
               is_word_char(static_cast<unsigned char>(text[i + 1]))) {
      current.push_back('\'');
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  for (std::string_view t : {kPadToken, kUnkToken, kBouToken, kEouToken}) add(t);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary vocab;
  require(tokens.size() >= 4 && tokens[kPad] == kPadToken && tokens[kUnk] == kUnkToken &&
              tokens[kBou] == kBouToken && tokens[kEou] == kEouToken,
          "vocabulary must start with the reserved tokens");
  for (std::size_t i = 4; i < tokens.size(); ++i) {
    if (vocab.contains(tokens[i])) {
      fail(ErrorKind::kFormat, "duplicate vocabulary token '" + tokens[i] + "'");
    }
    vocab.add(tokens[i]);
  }
  return vocab;
}

std::size_t Vocabulary::add(std::string_view token) {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  const std::size_t index = tokens_.size();
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), index);
  return index;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

std::size_t Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, std::size_t dim, SeededRng& rng) {
  require(dim > 0, "embedding dimension must be positive");
  EmbeddingMatrix m{RealMatrix(vocab.size(), dim), true};
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    if (r == Vocabulary::kPad) continue;
    fill_uniform(m.table.row(r), -kEmbeddingInitRange, kEmbeddingInitRange, rng);
  }
  return m;
}

EmbeddingMatrix load_pretrained(const std::string& path, const Vocabulary& vocab,
                                SeededRng& rng, std::size_t dim) {
  require(vocab.size() > 0, "load_pretrained: empty vocabulary");
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open embedding file: " + path);
  EmbeddingMatrix m = random_embeddings(vocab, dim, rng);
  std::string line;
  std::size_t line_number = 0;
  std::size_t file_dim = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    values.clear();
    std::string number;
    while (fields >> number) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), v);
      if (ec != std::errc() || ptr != number.data() + number.size() || !std::isfinite(v)) {
        fail(ErrorKind::kFormat, path + ":" + std::to_string(line_number) +
                                     ": invalid number '" + number + "'");
      }
      values.push_back(v);
    }
    if (file_dim == 0) file_dim = values.size();
    if (values.empty() || values.size() != file_dim) {
      fail(ErrorKind::kFormat, path + ":" + std::to_string(line_number) + ": expected " +
                                   std::to_string(file_dim) + " values, found " +
                                   std::to_string(values.size()));
    }
    if (file_dim != dim) {
      fail(ErrorKind::kFormat, path + ":" + std::to_string(line_number) +
                                   ": embedding dimension " + std::to_string(file_dim) +
                                   " does not match the configured " + std::to_string(dim));
    }
    if (!vocab.contains(token)) continue;
    const std::size_t row = vocab.index_of(token);
    if (row == Vocabulary::kPad) continue;
    std::copy(values.begin(), values.end(), m.table.row(row).begin());
  }
  return m;
}

std::vector<std::size_t> token_indices(std::span<const std::string> tokens,
                                       const Vocabulary& vocab) {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab.index_of(t));
  return out;
}

std::vector<RealVector> lookup_indices(const EmbeddingMatrix& matrix,
                                       std::span<const std::size_t> indices) {
  std::vector<RealVector> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    auto row = matrix.table.row(i);
    out.emplace_back(std::vector<double>(row.begin(), row.end()));
  }
  return out;
}

std::vector<RealVector> lookup(const EmbeddingMatrix& matrix,
                               std::span<const std::string> tokens, const Vocabulary& vocab) {
  const auto indices = token_indices(tokens, vocab);
  return lookup_indices(matrix, indices);
}

void accumulate_embedding_grad(RealMatrix& grad, std::span<const std::size_t> indices,
                               std::span<const RealVector> dxs) {
  for (std::size_t t = 0; t < indices.size(); ++t) add_to(grad.row(indices[t]), dxs[t]);
}

}  // namespace slu
