// zrl: train / score / filter / report / serve-judge.
//
// Exit codes: 0 success, 2 configuration or input validation failure,
// 3 non-finite training abort, 1 anything else.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zrl/dataset.hpp"
#include "zrl/errors.hpp"
#include "zrl/judge_client.hpp"
#include "zrl/judge_server.hpp"
#include "zrl/mock_judge.hpp"
#include "zrl/report.hpp"
#include "zrl/tasks.hpp"
#include "zrl/trainer.hpp"

namespace {

namespace fs = std::filesystem;

std::string resolve_config_path(const std::string& path) {
  if (path.empty() || fs::exists(path)) return path;
  if (const char* dir = std::getenv("ZRL_CONFIG_DIR")) {
    const fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

zrl::TrainConfig load_with_overrides(const std::string& config_path,
                                     const std::vector<std::string>& overrides) {
  zrl::TrainConfig config = config_path.empty()
                                ? zrl::TrainConfig::desk_profile()
                                : zrl::load_config(resolve_config_path(config_path));
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw zrl::ConfigError("--override expects key=value, got \"" + item + "\"");
    }
    zrl::apply_override(config, item.substr(0, eq), item.substr(eq + 1));
  }
  return config;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw zrl::ConfigError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::unique_ptr<zrl::Judge> make_judge(const zrl::TrainConfig& config) {
  if (config.judge_backend == zrl::JudgeBackend::mock) {
    return std::make_unique<zrl::MockJudge>(config.judge);
  }
  zrl::HttpBackendConfig http;
  http.base_url = config.judge_url;
  http.timeout_ms = config.http_timeout_ms;
  http.retries = config.http_retries;
  return std::make_unique<zrl::HttpJudge>(http);
}

std::unique_ptr<zrl::Verifier> make_verifier(const zrl::TrainConfig& config) {
  if (config.verifier_backend == zrl::VerifierBackend::exact) {
    return std::make_unique<zrl::ExactMatchVerifier>(config.verifier_normalize_ws);
  }
  zrl::HttpBackendConfig http;
  http.base_url = config.verifier_url;
  http.timeout_ms = config.http_timeout_ms;
  http.retries = config.http_retries;
  return std::make_unique<zrl::HttpVerifier>(http);
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "zrl-run";
  bool resume = false;
};

int cmd_train(const TrainArgs& args) {
  zrl::RunResult result;
  std::string hash;
  if (args.resume) {
    zrl::Trainer trainer = zrl::Trainer::from_checkpoint(args.out + "/checkpoint");
    hash = trainer.config_hash_hex();
    result = trainer.run(args.out);
  } else {
    zrl::TrainConfig config = load_with_overrides(args.config, args.overrides);
    config.validate();
    zrl::Trainer trainer(config);
    hash = trainer.config_hash_hex();
    result = trainer.run(args.out);
  }
  std::printf("run %s: completed %lld step(s)%s%s\n", hash.c_str(),
              static_cast<long long>(result.steps_completed),
              result.stopped_early ? ", stopped early: " : "",
              result.stopped_early ? result.stop_reason.c_str() : "");
  return 0;
}

struct ScoreArgs {
  std::string prompts;
  std::string responses;
  std::string references;
  std::string kind = "verifiable";
  std::string config;
  std::vector<std::string> overrides;
};

int cmd_score(const ScoreArgs& args) {
  const zrl::TrainConfig config = load_with_overrides(args.config, args.overrides);
  const zrl::TaskKind kind = zrl::task_kind_from_string(args.kind);
  const zrl::Vocab vocab =
      config.vocab == "ascii" ? zrl::Vocab::ascii_full() : zrl::Vocab::desk();
  const zrl::Template tmpl = config.chat_template == "standard"
                                 ? zrl::Template::standard()
                                 : zrl::Template::bare();

  const auto prompts = read_lines(args.prompts);
  const auto responses = read_lines(args.responses);
  if (prompts.size() != responses.size()) {
    throw zrl::ConfigError("prompt and response files have different line counts");
  }
  std::vector<std::string> references;
  if (kind == zrl::TaskKind::verifiable) {
    if (args.references.empty()) {
      throw zrl::ConfigError("--references is required for kind=verifiable");
    }
    references = read_lines(args.references);
    if (references.size() != prompts.size()) {
      throw zrl::ConfigError("reference file line count does not match prompts");
    }
  }

  const auto judge = make_judge(config);
  const auto verifier = make_verifier(config);
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const std::vector<zrl::Token> tokens = vocab.encode(responses[i]);
    const zrl::TaggedResponse parsed =
        zrl::parse_response(tokens, tmpl, vocab, tokens.size());
    double acc = 0.0;
    if (kind == zrl::TaskKind::verifiable) {
      acc = zrl::accuracy_verifiable(parsed.answer_text(vocab), references[i], *verifier);
    } else {
      acc = zrl::accuracy_judge(prompts[i], responses[i], *judge);
    }
    const zrl::RewardBreakdown b = zrl::combine(parsed, acc, kind, config.reward);
    nlohmann::ordered_json j;
    j["acc"] = b.acc;
    j["format"] = b.format;
    j["len_think"] = b.len_think;
    j["len_answer"] = b.len_answer;
    j["len_total"] = b.len_total;
    j["total"] = b.total;
    j["task_kind"] = std::string(zrl::to_string(b.task_kind));
    std::cout << j.dump() << '\n';
  }
  return 0;
}

struct FilterArgs {
  std::string dataset;
  std::string checkpoint;
  std::string out;
  std::string audit;
  int k = 8;
};

int cmd_filter(const FilterArgs& args) {
  zrl::Trainer trainer = zrl::Trainer::from_checkpoint(args.checkpoint);
  const zrl::TrainConfig& config = trainer.config();

  zrl::IngestOptions options;
  options.min_prompt_tokens = config.min_prompt_tokens;
  const std::vector<zrl::TaskRecord> records = zrl::ingest_dataset(args.dataset, options);
  for (const zrl::TaskRecord& rec : records) {
    if (rec.kind != zrl::TaskKind::verifiable) {
      throw zrl::ConfigError("difficulty filter needs a verifiable-only dataset; record \"" +
                             rec.id + "\" is general");
    }
  }

  zrl::SamplingParams sampling;
  sampling.temperature = config.temperature;
  sampling.top_p = config.top_p;
  sampling.max_new_tokens = trainer.window();
  const auto verifier = make_verifier(config);

  const zrl::FilterOutcome outcome =
      zrl::difficulty_filter(records, trainer.policy(), args.k, sampling,
                             trainer.chat_template(), trainer.vocab(), *verifier,
                             config.seed, config.workers);

  zrl::write_dataset(args.out, outcome.kept);
  if (!args.audit.empty()) {
    std::ofstream audit(args.audit);
    if (!audit) throw zrl::ConfigError("cannot write " + args.audit);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const int passes = outcome.pass_counts[i];
      nlohmann::ordered_json j;
      j["id"] = records[i].id;
      j["pass_count"] = passes;
      j["kept"] = passes > 0 && passes < args.k;
      audit << j.dump() << '\n';
    }
  }
  std::printf("kept %zu of %zu record(s)\n", outcome.kept.size(), records.size());
  return 0;
}

struct ReportArgs {
  std::string log;
  std::string csv;
  std::string compare;
  bool summary_only = false;
  std::int64_t baseline_step = 100;
  std::int64_t trailing_window = 100;
};

int cmd_report(const ReportArgs& args) {
  const std::vector<zrl::StepReport> reports = zrl::read_step_reports_file(args.log);

  auto emit_csv = [&](auto&& writer) {
    if (args.csv.empty()) {
      writer(std::cout);
      return;
    }
    std::ofstream out(args.csv);
    if (!out) throw zrl::ConfigError("cannot write " + args.csv);
    writer(out);
  };

  if (!args.compare.empty()) {
    const std::vector<zrl::StepReport> other = zrl::read_step_reports_file(args.compare);
    emit_csv([&](std::ostream& out) { zrl::write_comparison_csv(reports, other, out); });
    return 0;
  }
  if (!args.summary_only) {
    emit_csv([&](std::ostream& out) { zrl::write_report_csv(reports, out); });
  }
  if (args.summary_only || !args.csv.empty()) {
    std::cout << zrl::summary_text(
        zrl::summarize(reports, args.baseline_step, args.trailing_window));
  }
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8791;
  std::string config;
  std::vector<std::string> overrides;
};

int cmd_serve_judge(const ServeArgs& args) {
  const zrl::TrainConfig config = load_with_overrides(args.config, args.overrides);
  config.judge.validate();
  zrl::JudgeServer server(config.judge, config.verifier_normalize_ws);
  std::printf("serving mock judge on http://%s:%d (POST /score, POST /verify)\n",
              args.host.c_str(), args.port);
  std::fflush(stdout);
  server.serve_forever(args.host, args.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale zero-RL trainer and reward tooling"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "run the training loop");
  train->add_option("--config", train_args.config,
                    "config file (key=value or JSON); searched in $ZRL_CONFIG_DIR too");
  train->add_option("--override", train_args.overrides, "key=value config override")
      ->take_all();
  train->add_option("--out", train_args.out, "output directory for logs and checkpoints");
  train->add_flag("--resume", train_args.resume, "resume from <out>/checkpoint");

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "score (prompt, response) pairs");
  score->add_option("--prompts", score_args.prompts, "one prompt per line")->required();
  score->add_option("--responses", score_args.responses, "one response per line")->required();
  score->add_option("--references", score_args.references,
                    "one reference answer per line (verifiable only)");
  score->add_option("--kind", score_args.kind, "verifiable or general");
  score->add_option("--config", score_args.config, "config supplying the coefficients");
  score->add_option("--override", score_args.overrides, "key=value config override")
      ->take_all();

  FilterArgs filter_args;
  CLI::App* filter = app.add_subcommand("filter", "difficulty-band filter a dataset");
  filter->add_option("--dataset", filter_args.dataset, "verifiable JSONL dataset")->required();
  filter->add_option("--checkpoint", filter_args.checkpoint, "policy checkpoint directory")
      ->required();
  filter->add_option("--out", filter_args.out, "kept-records JSONL output")->required();
  filter->add_option("--audit", filter_args.audit, "per-record pass-count audit JSONL");
  filter->add_option("--k", filter_args.k, "rollouts per record");

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "emit CSV series and a text summary");
  report->add_option("--log", report_args.log, "steps.jsonl path")->required();
  report->add_option("--csv", report_args.csv, "CSV output path (stdout when omitted)");
  report->add_option("--compare", report_args.compare,
                     "second steps.jsonl; emits a joined comparison CSV");
  report->add_flag("--summary-only", report_args.summary_only, "skip the CSV series");
  report->add_option("--baseline-step", report_args.baseline_step,
                     "baseline step for growth ratios");
  report->add_option("--trailing-window", report_args.trailing_window,
                     "trailing window length in steps");

  ServeArgs serve_args;
  CLI::App* serve = app.add_subcommand("serve-judge", "serve the mock judge over HTTP");
  serve->add_option("--host", serve_args.host, "bind address");
  serve->add_option("--port", serve_args.port, "bind port");
  serve->add_option("--config", serve_args.config, "config supplying judge settings");
  serve->add_option("--override", serve_args.overrides, "key=value config override")
      ->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (score->parsed()) return cmd_score(score_args);
    if (filter->parsed()) return cmd_filter(filter_args);
    if (report->parsed()) return cmd_report(report_args);
    if (serve->parsed()) return cmd_serve_judge(serve_args);
  } catch (const zrl::NonFinite& e) {
    std::fprintf(stderr, "non-finite abort: %s\n", e.what());
    return 3;
  } catch (const zrl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const zrl::SchemaError& e) {
    std::fprintf(stderr, "schema error: %s\n", e.what());
    return 2;
  } catch (const zrl::DatasetParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const zrl::UnknownSymbol& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const zrl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
