#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace zrl {

/// One training step's metrics. Serialized to the run's steps.jsonl exactly
/// once per step, append only, fixed key order, so equal runs produce equal
/// bytes. wall_ms is the exception: it goes to the timings.jsonl sidecar and
/// never into the deterministic log.
struct StepReport {
  std::int64_t step = 0;
  int window = 0;
  std::string config_hash;

  double objective = 0.0;
  double grad_norm = 0.0;
  double lr_scale = 1.0;

  int n_verifiable = 0;
  int n_general = 0;

  double ver_reward_mean = 0.0;
  double ver_accuracy = 0.0;  // fraction of verifiable rollouts that verified
  double ver_format_mean = 0.0;

  double gen_reward_mean = 0.0;
  double gen_judge_mean = 0.0;
  double gen_format_mean = 0.0;
  double gen_len_think_mean = 0.0;
  double gen_len_answer_mean = 0.0;

  double think_tokens_mean = 0.0;
  double think_tokens_p50 = 0.0;
  double think_tokens_p90 = 0.0;
  double answer_tokens_mean = 0.0;
  double answer_tokens_p50 = 0.0;
  double answer_tokens_p90 = 0.0;
  double think_chars_mean = 0.0;
  double answer_chars_mean = 0.0;

  double ver_think_tokens_mean = 0.0;
  double ver_answer_tokens_mean = 0.0;
  double gen_think_tokens_mean = 0.0;
  double gen_answer_tokens_mean = 0.0;

  double response_tokens_mean = 0.0;
  double format_rate = 0.0;
  double truncated_rate = 0.0;
  double eval_accuracy = -1.0;  // -1 when no held-out eval ran this step

  double wall_ms = 0.0;  // sidecar only

  bool operator==(const StepReport&) const = default;
};

std::string step_report_to_line(const StepReport& report);
StepReport step_report_from_line(const std::string& line);

/// Reads a steps.jsonl stream. Throws DatasetParseError with the line number
/// on malformed input.
std::vector<StepReport> read_step_reports(std::istream& in);
std::vector<StepReport> read_step_reports_file(const std::string& path);

/// Plot-ready series, one row per step, leading "# config_hash = ..." comment
/// when the log is non-empty.
void write_report_csv(const std::vector<StepReport>& reports, std::ostream& out);

/// Two-run comparison (e.g. with vs. without the length penalty): inner join
/// on step, columns prefixed a_/b_.
void write_comparison_csv(const std::vector<StepReport>& a,
                          const std::vector<StepReport>& b, std::ostream& out);

struct SeriesStats {
  double baseline = 0.0;  // mean over the window ending at baseline_step
  double trailing = 0.0;  // mean over the last trailing_window steps
  double growth = 0.0;    // trailing / baseline (0 when baseline is 0)
  double slope = 0.0;     // least-squares slope over the trailing window, per step
};

struct ReportSummary {
  std::int64_t steps = 0;
  std::int64_t first_step = 0;
  std::int64_t last_step = 0;
  std::int64_t baseline_step = 100;
  std::int64_t trailing_window = 100;
  SeriesStats think_tokens;
  SeriesStats answer_tokens;
  double trailing_ver_accuracy = 0.0;
  double final_eval_accuracy = -1.0;  // last recorded held-out accuracy, -1 if none
  double trailing_format_rate = 0.0;
  /// Hacking diagnostic: answer growth relative to think growth over the
  /// trailing window. Ratios well above 1 mean answers are inflating while
  /// thinks are not, the judge-length-bias signature.
  double hacking_ratio = 0.0;
  bool hacking_suspected = false;
};

ReportSummary summarize(const std::vector<StepReport>& reports,
                        std::int64_t baseline_step = 100,
                        std::int64_t trailing_window = 100);

std::string summary_text(const ReportSummary& summary);

}  // namespace zrl
