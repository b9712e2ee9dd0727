#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zrl/vocab.hpp"

namespace zrl {

/// The training template: system preamble plus the tag contract.
struct Template {
  std::string system_text;
  std::string think_open = std::string(kThinkOpen);
  std::string think_close = std::string(kThinkClose);
  std::string answer_open = std::string(kAnswerOpen);
  std::string answer_close = std::string(kAnswerClose);

  /// The standard system preamble instructing the think/answer structure.
  static Template standard();

  /// Empty system text; used by desk-scale configs where the toy policy
  /// cannot read the preamble anyway.
  static Template bare();
};

/// A parsed completion. Spans exclude the tags themselves. Lengths are
/// tracked both in tokens (what penalties use) and characters (what the
/// training-dynamics reports use).
struct TaggedResponse {
  std::vector<Token> raw;
  int think_tokens = 0;
  int answer_tokens = 0;
  std::int64_t think_chars = 0;
  std::int64_t answer_chars = 0;
  bool format_ok = false;
  bool truncated = false;

  // Half-open token index ranges of the spans inside raw; empty when the
  // corresponding tags were not found in valid positions.
  std::size_t think_begin = 0, think_end = 0;
  std::size_t answer_begin = 0, answer_end = 0;

  /// Decoded answer span, or nullopt when the format is invalid (no
  /// extractable answer).
  std::optional<std::string> answer_text(const Vocab& vocab) const;
  std::string think_text(const Vocab& vocab) const;
};

/// Renders system text, prior context turns, and the user prompt, joined by
/// single newlines, then tokenizes. Throws PreconditionViolated for an empty
/// prompt and UnknownSymbol for characters outside the vocabulary.
std::vector<Token> render_prompt(const Template& tmpl, std::string_view user_prompt,
                                 std::span<const std::string> context_turns,
                                 const Vocab& vocab);

/// Parses a completion against the strict tag grammar:
///   [ws] <thinking> T </thinking> [ws] <answer> A </answer> [ws] [eos]
/// with exactly one occurrence of each tag, think before answer, and only
/// whitespace outside the spans. A single trailing end-of-sequence symbol is
/// permitted; an end-of-sequence anywhere else invalidates the format.
/// Malformed input never throws; it yields format_ok=false and empty spans.
/// `window` is the generation budget the completion was sampled under and
/// must be >= raw.size().
TaggedResponse parse_response(std::span<const Token> raw, const Template& tmpl,
                              const Vocab& vocab, std::size_t window);

/// y = answer_tokens - think_tokens, the argument of the think-length penalty.
std::int64_t length_gap(const TaggedResponse& resp);

}  // namespace zrl
