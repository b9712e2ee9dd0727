#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zrl {

using Token = std::int32_t;

/// The four structural tag literals. Policies emit each tag as one reserved
/// symbol; encode() recognizes the literal spellings and maps them to the
/// same symbols, so text and token representations are interchangeable.
inline constexpr std::string_view kThinkOpen = "<thinking>";
inline constexpr std::string_view kThinkClose = "</thinking>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

/// Closed per-character vocabulary plus five reserved symbols
/// (end-of-sequence and the four tags).
class Vocab {
 public:
  static constexpr Token kEos = 0;
  static constexpr Token kThinkOpenTok = 1;
  static constexpr Token kThinkCloseTok = 2;
  static constexpr Token kAnswerOpenTok = 3;
  static constexpr Token kAnswerCloseTok = 4;
  static constexpr Token kFirstChar = 5;

  /// Builds a vocabulary over the given character set. Duplicate characters
  /// collapse; order of first appearance fixes token ids.
  explicit Vocab(std::string_view alphabet);

  /// Compact alphabet for desk-scale runs: digits, lowercase letters,
  /// arithmetic operators, and minimal punctuation. 49 symbols total
  /// including the five reserved ids.
  static Vocab desk();

  /// Printable ASCII plus newline/tab; large enough to tokenize the
  /// standard training template.
  static Vocab ascii_full();

  int size() const { return static_cast<int>(chars_.size()) + kFirstChar; }

  bool contains_char(char c) const;
  Token encode_char(char c) const;  ///< throws UnknownSymbol

  /// Tokenizes text. Tag literals take precedence over per-character
  /// encoding (longest match at each position).
  std::vector<Token> encode(std::string_view text) const;

  /// Inverse of encode; tag symbols render as their literals, end-of-sequence
  /// renders as nothing.
  std::string decode(std::span<const Token> tokens) const;

  bool is_special(Token t) const { return t >= 0 && t < kFirstChar; }
  bool is_tag(Token t) const { return t >= kThinkOpenTok && t <= kAnswerCloseTok; }
  bool is_char(Token t) const { return t >= kFirstChar && t < size(); }
  bool is_whitespace(Token t) const;

  char char_of(Token t) const;  ///< throws UnknownToken for non-char tokens

 private:
  std::string chars_;            // char for token id (kFirstChar + index)
  std::array<Token, 256> map_;   // char -> token id, -1 when absent
};

}  // namespace zrl
