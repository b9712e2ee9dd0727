#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zrl/reward.hpp"

namespace zrl {

struct Turn {
  std::string role;  // "user" or "assistant"
  std::string text;

  bool operator==(const Turn&) const = default;
};

/// One training prompt. Verifiable records carry a reference answer for the
/// verifier; general records carry rubric keywords the judge rewards.
struct TaskRecord {
  std::string id;
  TaskKind kind = TaskKind::verifiable;
  std::string prompt;
  std::optional<std::string> reference;
  std::vector<std::string> rubric;
  std::vector<Turn> context_turns;
  std::string source_tag;

  bool operator==(const TaskRecord&) const = default;

  /// Kind/field consistency; throws SchemaError.
  void check() const;
};

/// JSONL line <-> record. parse_record throws SchemaError (missing or
/// mistyped field) or DatasetParseError (not JSON).
TaskRecord parse_record(const std::string& line);
std::string record_to_json_line(const TaskRecord& record);

struct IngestOptions {
  /// Exploded records whose user prompt is shorter than this many vocabulary
  /// tokens are dropped (the "overly simplistic" heuristic). Characters the
  /// vocabulary does not know still count one token each, so the filter is
  /// total on arbitrary text.
  int min_prompt_tokens = 0;
};

/// Reads a JSONL dataset. Multi-turn records (non-empty "context", no "#" in
/// the id) are exploded into one record per user turn, id-suffixed "#0",
/// "#1", ...; records already carrying "#" pass through untouched, which
/// makes ingestion idempotent on its own output. Throws DatasetParseError
/// with a line number or SchemaError naming the field.
std::vector<TaskRecord> ingest_dataset(std::istream& in, const IngestOptions& options);
std::vector<TaskRecord> ingest_dataset(const std::string& path, const IngestOptions& options);

void write_dataset(std::ostream& out, const std::vector<TaskRecord>& records);
void write_dataset(const std::string& path, const std::vector<TaskRecord>& records);

/// Token count under the tag-aware tokenizer: tag literals collapse to one
/// token, every other character counts one token whether or not a given
/// vocabulary knows it. Never throws, so the ingest filter is total.
int count_tokens_lenient(std::string_view text);

}  // namespace zrl
