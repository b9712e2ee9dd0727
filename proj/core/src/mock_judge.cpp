#include "zrl/mock_judge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "zrl/errors.hpp"
#include "zrl/rng.hpp"
#include "zrl/vocab.hpp"

namespace zrl {

void MockJudgeConfig::validate() const {
  auto bad = [](const std::string& what) { throw ConfigError("judge: " + what); };
  if (!(length_bias_scale > 0.0) || !std::isfinite(length_bias_scale)) {
    bad("length_bias_scale must be a positive real");
  }
  if (!(length_bias_cap >= 0.0) || !std::isfinite(length_bias_cap)) {
    bad("length_bias_cap must be finite and >= 0");
  }
  if (!(rubric_weight >= 0.0) || !std::isfinite(rubric_weight)) {
    bad("rubric_weight must be finite and >= 0");
  }
  if (!std::isfinite(floor)) bad("floor must be finite");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    bad("noise_std must be finite and >= 0");
  }
}

const std::vector<std::string>& judge_stopwords() {
  static const std::vector<std::string> words = {
      "tell", "me", "about", "and", "explain", "describe",
      "what", "is",  "write", "a",   "the",     "please",
  };
  return words;
}

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Text between the first answer-open tag and the next answer-close tag;
/// empty when either is missing. String-level and forgiving: the judge must
/// score whatever the policy produced.
std::string_view answer_span(std::string_view response) {
  const auto open = response.find(kAnswerOpen);
  if (open == std::string_view::npos) return {};
  const auto begin = open + kAnswerOpen.size();
  const auto close = response.find(kAnswerClose, begin);
  if (close == std::string_view::npos) return {};
  return response.substr(begin, close - begin);
}

}  // namespace

double mock_judge_score(const std::string& prompt, const std::string& response,
                        const MockJudgeConfig& cfg) {
  cfg.validate();
  const std::string_view answer = answer_span(response);

  std::vector<std::string> keywords;
  for (std::string& word : split_words(prompt)) {
    const auto& stop = judge_stopwords();
    if (std::find(stop.begin(), stop.end(), word) != stop.end()) continue;
    if (std::find(keywords.begin(), keywords.end(), word) != keywords.end()) continue;
    keywords.push_back(std::move(word));
  }

  double rubric_fraction = 0.0;
  if (!keywords.empty()) {
    const std::vector<std::string> answer_words = split_words(answer);
    int hits = 0;
    for (const std::string& kw : keywords) {
      if (std::find(answer_words.begin(), answer_words.end(), kw) != answer_words.end()) {
        ++hits;
      }
    }
    rubric_fraction = static_cast<double>(hits) / static_cast<double>(keywords.size());
  }

  const double length_term =
      std::min(static_cast<double>(answer.size()) / cfg.length_bias_scale,
               cfg.length_bias_cap);

  double score = cfg.floor + cfg.rubric_weight * rubric_fraction + length_term;
  if (cfg.noise_std > 0.0) {
    Stream noise(cfg.seed, fnv1a64(prompt + "\x1f" + response));
    score += cfg.noise_std * noise.next_gaussian();
  }
  return std::clamp(score, -5.0, 5.0);
}

MockJudge::MockJudge(const MockJudgeConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

}  // namespace zrl
