#include <regex>
#include <string>
#include <vector>

#include "doctest.h"
#include "zrl/chat_format.hpp"
#include "zrl/errors.hpp"
#include "zrl/rng.hpp"
#include "zrl/vocab.hpp"

using namespace zrl;

namespace {

const Vocab& desk() {
  static const Vocab v = Vocab::desk();
  return v;
}

std::vector<Token> toks(const std::string& text) { return desk().encode(text); }

// The generous default window stands for "the sampler stopped on its own";
// truncation tests pass an exact window instead.
TaggedResponse parse(const std::vector<Token>& raw, std::size_t window = 0) {
  if (window == 0) window = raw.size() + 8;
  return parse_response(raw, Template::bare(), desk(), window);
}

/// Independent grammar oracle. Classifies each token and matches the
/// classified string against a regular expression: optional whitespace,
/// one think span, whitespace, one answer span, optional whitespace, and
/// at most one trailing end marker. Span interiors admit any character
/// token, whitespace or not.
bool oracle_format_ok(const std::vector<Token>& raw, const Vocab& v) {
  std::string classes;
  for (Token t : raw) {
    if (t == Vocab::kEos) classes.push_back('E');
    else if (t == Vocab::kThinkOpenTok) classes.push_back('T');
    else if (t == Vocab::kThinkCloseTok) classes.push_back('t');
    else if (t == Vocab::kAnswerOpenTok) classes.push_back('A');
    else if (t == Vocab::kAnswerCloseTok) classes.push_back('a');
    else if (v.is_whitespace(t)) classes.push_back('w');
    else classes.push_back('c');
  }
  static const std::regex shape("^w*T[wc]*tw*A[wc]*aw*E?$");
  return std::regex_match(classes, shape);
}

}  // namespace

TEST_CASE("render_prompt joins system text, context, and prompt with newlines") {
  const Vocab v = Vocab::ascii_full();
  Template tmpl;
  tmpl.system_text = "sys";
  const std::vector<std::string> context = {"user: hi", "assistant: hello"};
  const auto tokens = render_prompt(tmpl, "2+2=?", context, v);
  CHECK(v.decode(tokens) == "sys\nuser: hi\nassistant: hello\n2+2=?");
}

TEST_CASE("render_prompt with the bare template is just the prompt") {
  const auto tokens = render_prompt(Template::bare(), "3+4=?", {}, desk());
  CHECK(tokens == toks("3+4=?"));
}

TEST_CASE("render_prompt rejects an empty prompt") {
  CHECK_THROWS_AS(render_prompt(Template::bare(), "", {}, desk()), PreconditionViolated);
}

TEST_CASE("standard template text tokenizes under the ascii vocabulary") {
  const Vocab v = Vocab::ascii_full();
  const auto tokens = render_prompt(Template::standard(), "2+2=?", {}, v);
  CHECK(tokens.size() > 100);
}

TEST_CASE("well-formed response parses with correct spans") {
  const auto raw = toks("<thinking>3+4 is 7</thinking><answer>7</answer>");
  const auto resp = parse(raw);
  CHECK(resp.format_ok);
  CHECK_FALSE(resp.truncated);
  CHECK(resp.think_tokens == 8);
  CHECK(resp.answer_tokens == 1);
  CHECK(resp.think_text(desk()) == "3+4 is 7");
  REQUIRE(resp.answer_text(desk()).has_value());
  CHECK(*resp.answer_text(desk()) == "7");
  CHECK(resp.think_chars == 8);
  CHECK(resp.answer_chars == 1);
}

TEST_CASE("whitespace is tolerated between the structural parts") {
  auto raw = toks("  <thinking>x</thinking> \n <answer>y</answer>\n");
  raw.push_back(Vocab::kEos);
  const auto resp = parse(raw);
  CHECK(resp.format_ok);
  CHECK(resp.think_text(desk()) == "x");
  CHECK(*resp.answer_text(desk()) == "y");
}

TEST_CASE("empty spans are well-formed") {
  const auto resp = parse(toks("<thinking></thinking><answer></answer>"));
  CHECK(resp.format_ok);
  CHECK(resp.think_tokens == 0);
  CHECK(resp.answer_tokens == 0);
  CHECK(*resp.answer_text(desk()) == "");
}

TEST_CASE("malformed responses are rejected") {
  // Missing tags, duplicated tags, wrong order, stray text, interior eos.
  const char* bad[] = {
      "<thinking>x</thinking>",
      "<answer>y</answer>",
      "<answer>y</answer><thinking>x</thinking>",
      "<thinking>x<thinking></thinking></thinking><answer>y</answer>",
      "<thinking>x</thinking><answer>y</answer><answer>z</answer>",
      "<thinking>x</thinking>q<answer>y</answer>",
      "q<thinking>x</thinking><answer>y</answer>",
      "<thinking>x</thinking><answer>y</answer>q",
      "<thinking>x</answer><answer>y</thinking>",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_FALSE(parse(toks(text)).format_ok);
  }

  auto interior_eos = toks("<thinking>x</thinking>");
  interior_eos.push_back(Vocab::kEos);
  for (Token t : toks("<answer>y</answer>")) interior_eos.push_back(t);
  CHECK_FALSE(parse(interior_eos).format_ok);

  auto double_eos = toks("<thinking>x</thinking><answer>y</answer>");
  double_eos.push_back(Vocab::kEos);
  double_eos.push_back(Vocab::kEos);
  CHECK_FALSE(parse(double_eos).format_ok);
}

TEST_CASE("an unfinished completion that fills the window is truncated") {
  const auto raw = toks("<thinking>abc");
  const auto resp = parse(raw, raw.size());
  CHECK(resp.truncated);
  CHECK_FALSE(resp.format_ok);
  CHECK_FALSE(resp.answer_text(desk()).has_value());

  // The same tokens under a larger window just stopped early; that is not
  // a truncation even though it is still malformed.
  const auto resp2 = parse(raw, raw.size() + 5);
  CHECK_FALSE(resp2.truncated);
  CHECK_FALSE(resp2.format_ok);
}

TEST_CASE("a window-filling response that ends with eos is not truncated") {
  auto raw = toks("<thinking>a</thinking><answer>b</answer>");
  raw.push_back(Vocab::kEos);
  const auto resp = parse(raw, raw.size());
  CHECK_FALSE(resp.truncated);
  CHECK(resp.format_ok);
}

TEST_CASE("parse_response rejects completions longer than the window") {
  const auto raw = toks("<thinking>a</thinking><answer>b</answer>");
  CHECK_THROWS_AS(parse(raw, raw.size() - 1), PreconditionViolated);
}

TEST_CASE("length_gap is answer minus think tokens") {
  const auto resp = parse(toks("<thinking>abc</thinking><answer>defgh</answer>"));
  CHECK(length_gap(resp) == 2);
  const auto resp2 = parse(toks("<thinking>abcde</thinking><answer>f</answer>"));
  CHECK(length_gap(resp2) == -4);
}

TEST_CASE("grammar agrees with an independent oracle on random sequences") {
  const Vocab& v = desk();
  const Token palette[] = {
      Vocab::kEos,           Vocab::kThinkOpenTok, Vocab::kThinkCloseTok,
      Vocab::kAnswerOpenTok, Vocab::kAnswerCloseTok,
      v.encode_char('a'),    v.encode_char('3'),   v.encode_char(' '),
  };
  zrl::Stream stream(2024, 11);

  // Half the trials start from a well-formed skeleton and take a few random
  // edits, so the fuzz is dense around the decision boundary; the rest are
  // pure noise. The oracle is authoritative for both.
  auto skeleton = [&]() {
    std::vector<Token> raw;
    auto pad = [&](std::uint64_t n) {
      for (std::uint64_t i = 0; i < n; ++i) raw.push_back(v.encode_char(' '));
    };
    auto span = [&](std::uint64_t n) {
      for (std::uint64_t i = 0; i < n; ++i) raw.push_back(palette[5 + stream.next_below(3)]);
    };
    pad(stream.next_below(2));
    raw.push_back(Vocab::kThinkOpenTok);
    span(stream.next_below(4));
    raw.push_back(Vocab::kThinkCloseTok);
    pad(stream.next_below(2));
    raw.push_back(Vocab::kAnswerOpenTok);
    span(stream.next_below(4));
    raw.push_back(Vocab::kAnswerCloseTok);
    pad(stream.next_below(2));
    if (stream.next_below(2) == 1) raw.push_back(Vocab::kEos);
    return raw;
  };

  int well_formed = 0;
  for (int trial = 0; trial < 30000; ++trial) {
    std::vector<Token> raw;
    if (trial % 2 == 0) {
      raw = skeleton();
      const std::uint64_t edits = stream.next_below(3);
      for (std::uint64_t e = 0; e < edits && !raw.empty(); ++e) {
        switch (stream.next_below(3)) {
          case 0:
            raw.insert(raw.begin() + static_cast<std::ptrdiff_t>(
                                         stream.next_below(raw.size() + 1)),
                       palette[stream.next_below(8)]);
            break;
          case 1:
            raw.erase(raw.begin() +
                      static_cast<std::ptrdiff_t>(stream.next_below(raw.size())));
            break;
          default:
            raw[stream.next_below(raw.size())] = palette[stream.next_below(8)];
            break;
        }
      }
      if (raw.empty()) raw.push_back(palette[stream.next_below(8)]);
    } else {
      raw.resize(1 + stream.next_below(12));
      for (auto& t : raw) t = palette[stream.next_below(8)];
    }

    const bool want = oracle_format_ok(raw, v);
    const auto resp = parse_response(raw, Template::bare(), v, raw.size());
    CAPTURE(v.decode(raw));
    CHECK(resp.format_ok == want);
    if (want) {
      ++well_formed;
      // Spans must line up with the tag positions.
      CHECK(raw[resp.think_begin - 1] == Vocab::kThinkOpenTok);
      CHECK(raw[resp.think_end] == Vocab::kThinkCloseTok);
      CHECK(raw[resp.answer_begin - 1] == Vocab::kAnswerOpenTok);
      CHECK(raw[resp.answer_end] == Vocab::kAnswerCloseTok);
    }
  }
  // If this drops the fuzz stopped testing the accepting path.
  CHECK(well_formed > 3000);
}
