#include "zrl/vocab.hpp"

#include <array>

#include "zrl/errors.hpp"

namespace zrl {

Vocab::Vocab(std::string_view alphabet) {
  map_.fill(-1);
  for (char c : alphabet) {
    const auto idx = static_cast<unsigned char>(c);
    if (map_[idx] >= 0) continue;
    map_[idx] = kFirstChar + static_cast<Token>(chars_.size());
    chars_.push_back(c);
  }
}

Vocab Vocab::desk() {
  return Vocab("0123456789abcdefghijklmnopqrstuvwxyz+*=?:% \n");
}

Vocab Vocab::ascii_full() {
  std::string alphabet;
  for (char c = ' '; c <= '~'; ++c) alphabet.push_back(c);
  alphabet.push_back('\n');
  alphabet.push_back('\t');
  return Vocab(alphabet);
}

bool Vocab::contains_char(char c) const {
  return map_[static_cast<unsigned char>(c)] >= 0;
}

Token Vocab::encode_char(char c) const {
  const Token t = map_[static_cast<unsigned char>(c)];
  if (t < 0) {
    throw UnknownSymbol("character not in vocabulary: '" + std::string(1, c) + "'");
  }
  return t;
}

std::vector<Token> Vocab::encode(std::string_view text) const {
  static constexpr std::array<std::pair<std::string_view, Token>, 4> kTags{{
      {kThinkOpen, kThinkOpenTok},
      {kThinkClose, kThinkCloseTok},
      {kAnswerOpen, kAnswerOpenTok},
      {kAnswerClose, kAnswerCloseTok},
  }};
  std::vector<Token> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (const auto& [literal, tok] : kTags) {
      if (text.compare(i, literal.size(), literal) == 0) {
        out.push_back(tok);
        i += literal.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.push_back(encode_char(text[i]));
      ++i;
    }
  }
  return out;
}

std::string Vocab::decode(std::span<const Token> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (Token t : tokens) {
    switch (t) {
      case kEos: break;
      case kThinkOpenTok: out += kThinkOpen; break;
      case kThinkCloseTok: out += kThinkClose; break;
      case kAnswerOpenTok: out += kAnswerOpen; break;
      case kAnswerCloseTok: out += kAnswerClose; break;
      default: out.push_back(char_of(t));
    }
  }
  return out;
}

bool Vocab::is_whitespace(Token t) const {
  if (!is_char(t)) return false;
  const char c = chars_[static_cast<std::size_t>(t - kFirstChar)];
  return c == ' ' || c == '\n' || c == '\t';
}

char Vocab::char_of(Token t) const {
  if (!is_char(t)) {
    throw UnknownToken("token id " + std::to_string(t) + " is not a character token");
  }
  return chars_[static_cast<std::size_t>(t - kFirstChar)];
}

}  // namespace zrl
