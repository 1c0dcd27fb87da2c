#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clauseforge::tokenizer {

using TokenId = std::uint32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumSpecials = 4;
inline constexpr std::size_t kDefaultVocabSize = 8192;
inline constexpr std::string_view kContinuation = "##";

/// Lowercases and splits on whitespace; every ASCII punctuation mark becomes
/// its own pre-token.
std::vector<std::string> pre_tokenize(std::string_view text);

/// Pre-tokens joined by single spaces; what decode(encode(x)) reproduces.
std::string normalize(std::string_view text);

/// Splits a UTF-8 string into code point substrings (invalid bytes stand
/// alone).
std::vector<std::string> utf8_chars(std::string_view text);

class Vocab {
 public:
  Vocab();  // specials only
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const;
  bool contains(const std::string& token) const { return ids_.contains(token); }
  TokenId id(const std::string& token) const;  // kUnk when absent

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  /// vocab.txt (one token per line, line number = id) plus vocab.json.
  void save(const std::filesystem::path& dir) const;
  static Vocab load(const std::filesystem::path& dir);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// WordPiece induction: start from the character alphabet and repeatedly
/// add the merge with the highest count(pair) / (count(left) * count(right)),
/// ties broken by the lexicographically smaller (left, right). Stops at
/// `target_size` or when no pair remains.
Vocab train_vocab(const std::vector<std::string>& texts,
                  std::size_t target_size = kDefaultVocabSize);

}  // namespace clauseforge::tokenizer
