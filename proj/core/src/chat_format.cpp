#include "zrl/chat_format.hpp"

#include "zrl/errors.hpp"

namespace zrl {

Template Template::standard() {
  Template t;
  t.system_text =
      "A conversation between User and Assistant. The user asks a question, and the "
      "Assistant solves it. The assistant first thinks about the reasoning process in "
      "the mind and then provides the user with the answer. The reasoning process and "
      "answer are enclosed within <thinking> </thinking> and <answer> </answer> tags, "
      "respectively, i.e., <thinking> reasoning process here </thinking> <answer> "
      "answer here </answer>. Now the user asks you to solve a problem. After "
      "thinking, when you finally reach a conclusion, give a summary of the thinking "
      "process and clearly state the conclusion within <answer> </answer> tags.";
  return t;
}

Template Template::bare() { return Template{}; }

std::optional<std::string> TaggedResponse::answer_text(const Vocab& vocab) const {
  if (!format_ok) return std::nullopt;
  return vocab.decode(std::span<const Token>(raw).subspan(answer_begin, answer_end - answer_begin));
}

std::string TaggedResponse::think_text(const Vocab& vocab) const {
  if (!format_ok) return {};
  return vocab.decode(std::span<const Token>(raw).subspan(think_begin, think_end - think_begin));
}

std::vector<Token> render_prompt(const Template& tmpl, std::string_view user_prompt,
                                 std::span<const std::string> context_turns,
                                 const Vocab& vocab) {
  if (user_prompt.empty()) {
    throw PreconditionViolated("render_prompt: user prompt must be non-empty");
  }
  std::string text;
  auto append = [&text](std::string_view part) {
    if (part.empty()) return;
    if (!text.empty()) text.push_back('\n');
    text.append(part);
  };
  append(tmpl.system_text);
  for (const auto& turn : context_turns) append(turn);
  append(user_prompt);
  return vocab.encode(text);
}

TaggedResponse parse_response(std::span<const Token> raw, const Template& tmpl,
                              const Vocab& vocab, std::size_t window) {
  (void)tmpl;  // the tag symbols are fixed vocabulary constants
  if (window < raw.size()) {
    throw PreconditionViolated("parse_response: window smaller than the completion");
  }

  TaggedResponse resp;
  resp.raw.assign(raw.begin(), raw.end());

  const bool ends_with_eos = !raw.empty() && raw.back() == Vocab::kEos;
  resp.truncated = !ends_with_eos && raw.size() == window;

  // Body excludes one trailing end-of-sequence symbol, if present.
  const std::size_t n = ends_with_eos ? raw.size() - 1 : raw.size();

  std::size_t pos[4] = {0, 0, 0, 0};
  int count[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const Token t = raw[i];
    if (t == Vocab::kEos) return resp;  // interior end-of-sequence: invalid
    if (vocab.is_tag(t)) {
      const int which = t - Vocab::kThinkOpenTok;
      if (++count[which] > 1) return resp;  // duplicate tag
      pos[which] = i;
    }
  }
  for (int c : count) {
    if (c != 1) return resp;
  }
  const std::size_t to = pos[0], tc = pos[1], ao = pos[2], ac = pos[3];
  if (!(to < tc && tc < ao && ao < ac)) return resp;

  // Only whitespace is allowed outside the two spans.
  auto all_ws = [&](std::size_t from, std::size_t upto) {
    for (std::size_t i = from; i < upto; ++i) {
      if (!vocab.is_whitespace(raw[i])) return false;
    }
    return true;
  };
  if (!all_ws(0, to) || !all_ws(tc + 1, ao) || !all_ws(ac + 1, n)) return resp;

  resp.format_ok = true;
  resp.think_begin = to + 1;
  resp.think_end = tc;
  resp.answer_begin = ao + 1;
  resp.answer_end = ac;
  resp.think_tokens = static_cast<int>(resp.think_end - resp.think_begin);
  resp.answer_tokens = static_cast<int>(resp.answer_end - resp.answer_begin);
  resp.think_chars = static_cast<std::int64_t>(resp.think_text(vocab).size());
  resp.answer_chars = static_cast<std::int64_t>(resp.answer_text(vocab)->size());
  return resp;
}

std::int64_t length_gap(const TaggedResponse& resp) {
  return static_cast<std::int64_t>(resp.answer_tokens) -
         static_cast<std::int64_t>(resp.think_tokens);
}

}  // namespace zrl
