#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/text.hpp"

namespace dlf {

/// Dense token -> index map. Index 0 is reserved for unseen tokens, so a
/// vocabulary with n known tokens has size K = n + 1.
class FeatureVocabulary {
 public:
  static constexpr std::size_t kUnknown = 0;

  std::size_t size() const noexcept { return tokens_.size() + 1; }
  std::size_t known_tokens() const noexcept { return tokens_.size(); }

  std::size_t index_of(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnknown : it->second;
  }

  bool contains(std::string_view token) const { return index_of(token) != kUnknown; }

  /// Token for a known index in [1, K).
  const std::string& token_at(std::size_t index) const {
    if (index == kUnknown || index > tokens_.size())
      throw ValidationError(ValidationCode::out_of_range,
                            "vocabulary index " + std::to_string(index));
    return tokens_[index - 1];
  }

  /// Appends `token` if absent; returns its index.
  std::size_t add(std::string token) {
    if (token.empty())
      throw ValidationError(ValidationCode::invalid_argument, "empty feature token");
    const auto [it, inserted] = index_.emplace(token, tokens_.size() + 1);
    if (inserted) tokens_.push_back(std::move(token));
    return it->second;
  }

  /// One `token<TAB>index` line per known token, sorted by index.
  void write(std::ostream& out) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << (i + 1) << '\n';
  }

  /// Reads `count` lines (or until EOF when count is negative).
  /// Indices must be 1, 2, 3, ... in order.
  static FeatureVocabulary read(std::istream& in, long count = -1, std::size_t first_line = 1) {
    FeatureVocabulary vocab;
    std::string line;
    std::size_t line_no = first_line - 1;
    while ((count < 0 || static_cast<long>(vocab.known_tokens()) < count) &&
           std::getline(in, line)) {
      ++line_no;
      if (count < 0 && text::trim(line).empty()) continue;
      const auto fields = text::split(line, '\t');
      if (fields.size() != 2) throw ParseError(line_no, "expected token<TAB>index");
      const auto index = text::parse_int(fields[1]);
      if (!index || *index != static_cast<long>(vocab.size()))
        throw ParseError(line_no, "vocabulary indices must be dense and sorted");
      if (vocab.add(std::string(fields[0])) != static_cast<std::size_t>(*index))
        throw ParseError(line_no, "duplicate token '" + std::string(fields[0]) + "'");
    }
    if (count >= 0 && static_cast<long>(vocab.known_tokens()) != count)
      throw ParseError(line_no, "truncated vocabulary");
    return vocab;
  }

  bool operator==(const FeatureVocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Builds a vocabulary from token lists. Tokens seen at least `min_count`
/// times get indices 1..K-1 in first-appearance order.
inline FeatureVocabulary build_vocabulary(std::span<const std::vector<std::string>> token_lists,
                                          std::size_t min_count = 1) {
  if (token_lists.empty())
    throw ValidationError(ValidationCode::invalid_argument, "cannot build vocabulary from no records");
  std::unordered_map<std::string_view, std::size_t> counts;
  std::vector<std::string_view> order;
  for (const auto& tokens : token_lists) {
    for (const auto& token : tokens) {
      auto [it, inserted] = counts.emplace(token, 0);
      if (inserted) order.push_back(token);
      ++it->second;
    }
  }
  FeatureVocabulary vocab;
  for (const auto token : order)
    if (counts[token] >= min_count) vocab.add(std::string(token));
  return vocab;
}

/// One index per token, order preserved; unseen tokens map to 0.
inline std::vector<std::size_t> encode(std::span<const std::string> tokens,
                                       const FeatureVocabulary& vocab) {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& token : tokens) out.push_back(vocab.index_of(token));
  return out;
}

}  // namespace dlf
