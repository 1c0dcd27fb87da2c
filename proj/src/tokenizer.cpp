#include "clauseforge/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include <json.hpp>

#include "clauseforge/errors.hpp"

namespace clauseforge::tokenizer {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> s{"[PAD]", "[BOS]", "[EOS]", "[UNK]"};
  return s;
}

constexpr std::size_t kMaxWordChars = 100;

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::string strip_continuation(const std::string& token) {
  return token.starts_with(kContinuation) ? token.substr(kContinuation.size()) : token;
}

// Exact comparison of count(p)/(count(l)*count(r)) scores.
struct Score {
  std::int64_t pair;
  std::int64_t left;
  std::int64_t right;

  bool greater_than(const Score& o) const {
    const __int128 lhs = static_cast<__int128>(pair) * o.left * o.right;
    const __int128 rhs = static_cast<__int128>(o.pair) * left * right;
    return lhs > rhs;
  }
  bool equals(const Score& o) const { return !greater_than(o) && !o.greater_than(*this); }
};

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    auto len = utf8_length(static_cast<unsigned char>(text[i]));
    if (i + len > text.size()) len = 1;
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

std::string normalize(std::string_view text) {
  std::string out;
  for (const auto& t : pre_tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

Vocab::Vocab() : Vocab(special_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumSpecials ||
      !std::equal(special_tokens().begin(), special_tokens().end(), tokens_.begin())) {
    throw FormatError("vocab must start with [PAD] [BOS] [EOS] [UNK]");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw FormatError("duplicate vocab token \"" + tokens_[i] + "\"");
    }
  }
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw Error("token id " + std::to_string(id) + " out of range for vocab of " +
                std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

TokenId Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& word : pre_tokenize(text)) {
    const auto chars = utf8_chars(word);
    if (chars.size() > kMaxWordChars) {
      out.push_back(kUnk);
      continue;
    }
    std::vector<TokenId> pieces;
    std::size_t start = 0;
    bool ok = true;
    while (start < chars.size()) {
      std::size_t end = chars.size();
      std::optional<TokenId> found;
      for (; end > start; --end) {
        std::string piece = start > 0 ? std::string(kContinuation) : std::string();
        for (std::size_t i = start; i < end; ++i) piece += chars[i];
        if (auto it = ids_.find(piece); it != ids_.end()) {
          found = it->second;
          break;
        }
      }
      if (!found) {
        ok = false;
        break;
      }
      pieces.push_back(*found);
      start = end;
    }
    if (ok) {
      out.insert(out.end(), pieces.begin(), pieces.end());
    } else {
      out.push_back(kUnk);
    }
  }
  return out;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    const auto& tok = token(id);
    if (id == kPad || id == kBos || id == kEos) continue;
    if (tok.starts_with(kContinuation) && !out.empty()) {
      out += tok.substr(kContinuation.size());
    } else {
      if (!out.empty()) out.push_back(' ');
      out += tok;
    }
  }
  return out;
}

void Vocab::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "vocab.txt", std::ios::binary);
  for (const auto& t : tokens_) out << t << '\n';
  const nlohmann::json meta = {
      {"size", tokens_.size()},
      {"specials", {{"[PAD]", kPad}, {"[BOS]", kBos}, {"[EOS]", kEos}, {"[UNK]", kUnk}}},
      {"lowercase", true},
      {"continuation_prefix", std::string(kContinuation)},
      {"punctuation_split", true}};
  std::ofstream(dir / "vocab.json") << meta.dump(2) << '\n';
}

Vocab Vocab::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "vocab.txt", std::ios::binary);
  if (!in) throw Error("cannot open " + (dir / "vocab.txt").string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocab(std::move(tokens));
}

Vocab train_vocab(const std::vector<std::string>& texts, std::size_t target_size) {
  if (texts.empty()) throw ConfigError("train_vocab: empty corpus");

  std::map<std::string, std::int64_t> word_freq;
  for (const auto& t : texts) {
    for (auto& w : pre_tokenize(t)) ++word_freq[w];
  }

  // Symbol table; ids are assigned to the alphabet in sorted order first.
  std::vector<std::string> symbols;
  std::unordered_map<std::string, std::uint32_t> symbol_id;
  auto intern = [&](const std::string& s) {
    auto [it, inserted] = symbol_id.emplace(s, static_cast<std::uint32_t>(symbols.size()));
    if (inserted) symbols.push_back(s);
    return it->second;
  };

  std::set<std::string> alphabet;
  std::vector<std::vector<std::string>> split_words;
  std::vector<std::int64_t> freq;
  for (const auto& [w, f] : word_freq) {
    auto chars = utf8_chars(w);
    if (chars.size() > kMaxWordChars) continue;
    for (std::size_t i = 1; i < chars.size(); ++i) chars[i] = std::string(kContinuation) + chars[i];
    alphabet.insert(chars.begin(), chars.end());
    split_words.push_back(std::move(chars));
    freq.push_back(f);
  }
  if (target_size < alphabet.size() + kNumSpecials) {
    throw ConfigError("train_vocab: target size " + std::to_string(target_size) +
                      " is below alphabet size " + std::to_string(alphabet.size()) +
                      " plus " + std::to_string(kNumSpecials) + " specials");
  }

  std::vector<std::string> vocab = special_tokens();
  for (const auto& a : alphabet) {
    intern(a);
    vocab.push_back(a);
  }
  std::set<std::string> in_vocab(vocab.begin(), vocab.end());

  std::vector<std::vector<std::uint32_t>> words;
  words.reserve(split_words.size());
  for (const auto& sw : split_words) {
    std::vector<std::uint32_t> ids;
    for (const auto& s : sw) ids.push_back(symbol_id.at(s));
    words.push_back(std::move(ids));
  }

  std::vector<std::int64_t> sym_count(symbols.size(), 0);
  std::unordered_map<std::uint64_t, std::int64_t> pair_count;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words;

  auto apply = [&](std::uint32_t w, std::int64_t sign) {
    const auto& ws = words[w];
    const auto f = freq[w] * sign;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      if (ws[i] >= sym_count.size()) sym_count.resize(ws[i] + 1, 0);
      sym_count[ws[i]] += f;
      if (i + 1 < ws.size()) {
        const auto key = pair_key(ws[i], ws[i + 1]);
        pair_count[key] += f;
        if (sign > 0) pair_words[key].push_back(w);
      }
    }
  };
  for (std::uint32_t w = 0; w < words.size(); ++w) apply(w, +1);

  while (vocab.size() < target_size) {
    std::optional<std::uint64_t> best;
    Score best_score{};
    for (const auto& [key, count] : pair_count) {
      if (count <= 0) continue;
      const auto l = static_cast<std::uint32_t>(key >> 32);
      const auto r = static_cast<std::uint32_t>(key & 0xFFFFFFFFU);
      const Score s{count, sym_count[l], sym_count[r]};
      bool take = !best || s.greater_than(best_score);
      if (!take && best && s.equals(best_score)) {
        const auto bl = static_cast<std::uint32_t>(*best >> 32);
        const auto br = static_cast<std::uint32_t>(*best & 0xFFFFFFFFU);
        take = std::tie(symbols[l], symbols[r]) < std::tie(symbols[bl], symbols[br]);
      }
      if (take) {
        best = key;
        best_score = s;
      }
    }
    if (!best) break;

    const auto left = static_cast<std::uint32_t>(*best >> 32);
    const auto right = static_cast<std::uint32_t>(*best & 0xFFFFFFFFU);
    const std::string merged = symbols[left] + strip_continuation(symbols[right]);
    const auto merged_id = intern(merged);
    if (in_vocab.insert(merged).second) vocab.push_back(merged);

    auto affected = std::move(pair_words[*best]);
    pair_words.erase(*best);
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
    for (std::uint32_t w : affected) {
      apply(w, -1);
      auto& ws = words[w];
      std::vector<std::uint32_t> next;
      next.reserve(ws.size());
      for (std::size_t i = 0; i < ws.size(); ++i) {
        if (i + 1 < ws.size() && ws[i] == left && ws[i + 1] == right) {
          next.push_back(merged_id);
          ++i;
        } else {
          next.push_back(ws[i]);
        }
      }
      ws = std::move(next);
      apply(w, +1);
    }
    std::erase_if(pair_count, [](const auto& kv) { return kv.second <= 0; });
  }
  return Vocab(std::move(vocab));
}

}  // namespace clauseforge::tokenizer
