#include "zrl/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "zrl/errors.hpp"

namespace zrl {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

double require_number(const ordered_json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw SchemaError(std::string("step report: missing numeric field \"") + key + "\"");
  }
  return it->get<double>();
}

std::string require_string(const ordered_json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw SchemaError(std::string("step report: missing string field \"") + key + "\"");
  }
  return it->get<std::string>();
}

}  // namespace

std::string step_report_to_line(const StepReport& r) {
  ordered_json j;
  j["step"] = r.step;
  j["window"] = r.window;
  j["config_hash"] = r.config_hash;
  j["objective"] = r.objective;
  j["grad_norm"] = r.grad_norm;
  j["lr_scale"] = r.lr_scale;
  j["n_verifiable"] = r.n_verifiable;
  j["n_general"] = r.n_general;
  j["ver_reward_mean"] = r.ver_reward_mean;
  j["ver_accuracy"] = r.ver_accuracy;
  j["ver_format_mean"] = r.ver_format_mean;
  j["gen_reward_mean"] = r.gen_reward_mean;
  j["gen_judge_mean"] = r.gen_judge_mean;
  j["gen_format_mean"] = r.gen_format_mean;
  j["gen_len_think_mean"] = r.gen_len_think_mean;
  j["gen_len_answer_mean"] = r.gen_len_answer_mean;
  j["think_tokens_mean"] = r.think_tokens_mean;
  j["think_tokens_p50"] = r.think_tokens_p50;
  j["think_tokens_p90"] = r.think_tokens_p90;
  j["answer_tokens_mean"] = r.answer_tokens_mean;
  j["answer_tokens_p50"] = r.answer_tokens_p50;
  j["answer_tokens_p90"] = r.answer_tokens_p90;
  j["think_chars_mean"] = r.think_chars_mean;
  j["answer_chars_mean"] = r.answer_chars_mean;
  j["ver_think_tokens_mean"] = r.ver_think_tokens_mean;
  j["ver_answer_tokens_mean"] = r.ver_answer_tokens_mean;
  j["gen_think_tokens_mean"] = r.gen_think_tokens_mean;
  j["gen_answer_tokens_mean"] = r.gen_answer_tokens_mean;
  j["response_tokens_mean"] = r.response_tokens_mean;
  j["format_rate"] = r.format_rate;
  j["truncated_rate"] = r.truncated_rate;
  j["eval_accuracy"] = r.eval_accuracy;
  return j.dump();
}

StepReport step_report_from_line(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetParseError(std::string("step report is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DatasetParseError("step report line is not a JSON object");

  StepReport r;
  r.step = static_cast<std::int64_t>(require_number(j, "step"));
  r.window = static_cast<int>(require_number(j, "window"));
  r.config_hash = require_string(j, "config_hash");
  r.objective = require_number(j, "objective");
  r.grad_norm = require_number(j, "grad_norm");
  r.lr_scale = require_number(j, "lr_scale");
  r.n_verifiable = static_cast<int>(require_number(j, "n_verifiable"));
  r.n_general = static_cast<int>(require_number(j, "n_general"));
  r.ver_reward_mean = require_number(j, "ver_reward_mean");
  r.ver_accuracy = require_number(j, "ver_accuracy");
  r.ver_format_mean = require_number(j, "ver_format_mean");
  r.gen_reward_mean = require_number(j, "gen_reward_mean");
  r.gen_judge_mean = require_number(j, "gen_judge_mean");
  r.gen_format_mean = require_number(j, "gen_format_mean");
  r.gen_len_think_mean = require_number(j, "gen_len_think_mean");
  r.gen_len_answer_mean = require_number(j, "gen_len_answer_mean");
  r.think_tokens_mean = require_number(j, "think_tokens_mean");
  r.think_tokens_p50 = require_number(j, "think_tokens_p50");
  r.think_tokens_p90 = require_number(j, "think_tokens_p90");
  r.answer_tokens_mean = require_number(j, "answer_tokens_mean");
  r.answer_tokens_p50 = require_number(j, "answer_tokens_p50");
  r.answer_tokens_p90 = require_number(j, "answer_tokens_p90");
  r.think_chars_mean = require_number(j, "think_chars_mean");
  r.answer_chars_mean = require_number(j, "answer_chars_mean");
  r.ver_think_tokens_mean = require_number(j, "ver_think_tokens_mean");
  r.ver_answer_tokens_mean = require_number(j, "ver_answer_tokens_mean");
  r.gen_think_tokens_mean = require_number(j, "gen_think_tokens_mean");
  r.gen_answer_tokens_mean = require_number(j, "gen_answer_tokens_mean");
  r.response_tokens_mean = require_number(j, "response_tokens_mean");
  r.format_rate = require_number(j, "format_rate");
  r.truncated_rate = require_number(j, "truncated_rate");
  r.eval_accuracy = require_number(j, "eval_accuracy");
  return r;
}

std::vector<StepReport> read_step_reports(std::istream& in) {
  std::vector<StepReport> reports;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      reports.push_back(step_report_from_line(line));
    } catch (const Error& e) {
      throw DatasetParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return reports;
}

std::vector<StepReport> read_step_reports_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetParseError("cannot open step log: " + path);
  return read_step_reports(in);
}

namespace {

constexpr const char* kCsvColumns[] = {
    "step",
    "window",
    "think_tokens_mean",
    "think_tokens_p50",
    "think_tokens_p90",
    "answer_tokens_mean",
    "answer_tokens_p50",
    "answer_tokens_p90",
    "think_chars_mean",
    "answer_chars_mean",
    "ver_think_tokens_mean",
    "ver_answer_tokens_mean",
    "gen_think_tokens_mean",
    "gen_answer_tokens_mean",
    "ver_accuracy",
    "response_tokens_mean",
    "format_rate",
    "truncated_rate",
    "objective",
    "grad_norm",
    "eval_accuracy",
};

std::vector<std::string> csv_row(const StepReport& r) {
  return {std::to_string(r.step),
          std::to_string(r.window),
          fmt(r.think_tokens_mean),
          fmt(r.think_tokens_p50),
          fmt(r.think_tokens_p90),
          fmt(r.answer_tokens_mean),
          fmt(r.answer_tokens_p50),
          fmt(r.answer_tokens_p90),
          fmt(r.think_chars_mean),
          fmt(r.answer_chars_mean),
          fmt(r.ver_think_tokens_mean),
          fmt(r.ver_answer_tokens_mean),
          fmt(r.gen_think_tokens_mean),
          fmt(r.gen_answer_tokens_mean),
          fmt(r.ver_accuracy),
          fmt(r.response_tokens_mean),
          fmt(r.format_rate),
          fmt(r.truncated_rate),
          fmt(r.objective),
          fmt(r.grad_norm),
          fmt(r.eval_accuracy)};
}

void write_joined(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out << ',';
    out << cells[i];
  }
  out << '\n';
}

}  // namespace

void write_report_csv(const std::vector<StepReport>& reports, std::ostream& out) {
  if (!reports.empty()) out << "# config_hash = " << reports.front().config_hash << '\n';
  std::vector<std::string> header(std::begin(kCsvColumns), std::end(kCsvColumns));
  write_joined(out, header);
  for (const StepReport& r : reports) write_joined(out, csv_row(r));
}

void write_comparison_csv(const std::vector<StepReport>& a,
                          const std::vector<StepReport>& b, std::ostream& out) {
  if (!a.empty() || !b.empty()) {
    out << "# a_config_hash = " << (a.empty() ? "" : a.front().config_hash)
        << "  b_config_hash = " << (b.empty() ? "" : b.front().config_hash) << '\n';
  }
  std::vector<std::string> header{"step"};
  for (const char* prefix : {"a_", "b_"}) {
    for (const char* col : {"think_tokens_mean", "answer_tokens_mean", "ver_accuracy",
                            "response_tokens_mean", "format_rate"}) {
      header.push_back(std::string(prefix) + col);
    }
  }
  write_joined(out, header);

  std::size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    if (a[ia].step < b[ib].step) {
      ++ia;
    } else if (b[ib].step < a[ia].step) {
      ++ib;
    } else {
      const StepReport& ra = a[ia];
      const StepReport& rb = b[ib];
      write_joined(out, {std::to_string(ra.step), fmt(ra.think_tokens_mean),
                         fmt(ra.answer_tokens_mean), fmt(ra.ver_accuracy),
                         fmt(ra.response_tokens_mean), fmt(ra.format_rate),
                         fmt(rb.think_tokens_mean), fmt(rb.answer_tokens_mean),
                         fmt(rb.ver_accuracy), fmt(rb.response_tokens_mean),
                         fmt(rb.format_rate)});
      ++ia;
      ++ib;
    }
  }
}

namespace {

double mean_of(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  if (begin >= end) return 0.0;
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += v[i];
  return sum / static_cast<double>(end - begin);
}

double slope_of(const std::vector<StepReport>& reports, std::size_t begin, std::size_t end,
                double StepReport::*field) {
  if (end - begin < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const double x = static_cast<double>(reports[i].step);
    const double y = reports[i].*field;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) return 0.0;
  return (n * sxy - sx * sy) / denom;
}

SeriesStats series_stats(const std::vector<StepReport>& reports,
                         const std::vector<double>& values, std::size_t base_begin,
                         std::size_t base_end, std::size_t tail_begin,
                         double StepReport::*field) {
  SeriesStats s;
  s.baseline = mean_of(values, base_begin, base_end);
  s.trailing = mean_of(values, tail_begin, values.size());
  s.growth = s.baseline != 0.0 ? s.trailing / s.baseline : 0.0;
  s.slope = slope_of(reports, tail_begin, reports.size(), field);
  return s;
}

}  // namespace

ReportSummary summarize(const std::vector<StepReport>& reports, std::int64_t baseline_step,
                        std::int64_t trailing_window) {
  ReportSummary s;
  s.baseline_step = baseline_step;
  s.trailing_window = trailing_window;
  s.steps = static_cast<std::int64_t>(reports.size());
  if (reports.empty()) return s;

  std::vector<StepReport> sorted(reports);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const StepReport& x, const StepReport& y) { return x.step < y.step; });
  s.first_step = sorted.front().step;
  s.last_step = sorted.back().step;

  // Baseline window: the trailing_window steps ending at baseline_step. When
  // the log starts later or is too short, fall back to the earliest slice of
  // the same width so short logs still summarize.
  std::size_t base_end = 0;
  while (base_end < sorted.size() && sorted[base_end].step <= baseline_step) ++base_end;
  if (base_end == 0) base_end = std::min<std::size_t>(sorted.size(), 1);
  const std::size_t width = static_cast<std::size_t>(std::max<std::int64_t>(trailing_window, 1));
  const std::size_t base_begin = base_end > width ? base_end - width : 0;
  const std::size_t tail_begin = sorted.size() > width ? sorted.size() - width : 0;

  std::vector<double> think(sorted.size()), answer(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    think[i] = sorted[i].think_tokens_mean;
    answer[i] = sorted[i].answer_tokens_mean;
  }
  s.think_tokens = series_stats(sorted, think, base_begin, base_end, tail_begin,
                                &StepReport::think_tokens_mean);
  s.answer_tokens = series_stats(sorted, answer, base_begin, base_end, tail_begin,
                                 &StepReport::answer_tokens_mean);

  double acc = 0.0, fmt_rate = 0.0;
  for (std::size_t i = tail_begin; i < sorted.size(); ++i) {
    acc += sorted[i].ver_accuracy;
    fmt_rate += sorted[i].format_rate;
  }
  const double tail_n = static_cast<double>(sorted.size() - tail_begin);
  s.trailing_ver_accuracy = acc / tail_n;
  s.trailing_format_rate = fmt_rate / tail_n;

  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if (it->eval_accuracy >= 0.0) {
      s.final_eval_accuracy = it->eval_accuracy;
      break;
    }
  }

  const double think_growth = std::max(s.think_tokens.growth, 1e-9);
  s.hacking_ratio = s.answer_tokens.growth / think_growth;
  s.hacking_suspected =
      s.answer_tokens.growth >= 1.5 && s.hacking_ratio >= 1.25 && s.answer_tokens.slope > 0.0;
  return s;
}

std::string summary_text(const ReportSummary& s) {
  if (s.steps == 0) return "no steps recorded\n";
  char buf[256];
  std::string out;
  auto line = [&](const char* format, auto... args) {
    std::snprintf(buf, sizeof(buf), format, args...);
    out += buf;
    out += '\n';
  };
  line("steps: %lld (step %lld .. %lld)", static_cast<long long>(s.steps),
       static_cast<long long>(s.first_step), static_cast<long long>(s.last_step));
  line("baseline step: %lld, trailing window: %lld steps",
       static_cast<long long>(s.baseline_step), static_cast<long long>(s.trailing_window));
  line("think tokens:  baseline %.3f, trailing %.3f, growth %.3fx, slope %+.5f/step",
       s.think_tokens.baseline, s.think_tokens.trailing, s.think_tokens.growth,
       s.think_tokens.slope);
  line("answer tokens: baseline %.3f, trailing %.3f, growth %.3fx, slope %+.5f/step",
       s.answer_tokens.baseline, s.answer_tokens.trailing, s.answer_tokens.growth,
       s.answer_tokens.slope);
  line("verifiable accuracy (trailing): %.3f", s.trailing_ver_accuracy);
  if (s.final_eval_accuracy >= 0.0) {
    line("held-out accuracy (last eval): %.3f", s.final_eval_accuracy);
  } else {
    out += "held-out accuracy: no eval recorded\n";
  }
  line("format rate (trailing): %.3f", s.trailing_format_rate);
  line("hacking diagnostic: answer growth %.3fx vs think growth %.3fx (ratio %.3f) -> %s",
       s.answer_tokens.growth, s.think_tokens.growth, s.hacking_ratio,
       s.hacking_suspected ? "answer-length hacking suspected" : "no hacking signature");
  return out;
}

}  // namespace zrl
