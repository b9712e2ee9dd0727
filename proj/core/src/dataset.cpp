#include "zrl/dataset.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "zrl/errors.hpp"
#include "zrl/vocab.hpp"

namespace zrl {

void TaskRecord::check() const {
  if (id.empty()) throw SchemaError("record field \"id\" must be non-empty");
  if (prompt.empty()) throw SchemaError("record field \"prompt\" must be non-empty");
  if (source_tag.empty()) throw SchemaError("record field \"source\" must be non-empty");
  if (kind == TaskKind::verifiable) {
    if (!reference.has_value() || reference->empty()) {
      throw SchemaError("verifiable record needs a non-empty \"reference\"");
    }
  } else if (reference.has_value()) {
    throw SchemaError("general record must not carry a \"reference\"");
  }
  for (const Turn& turn : context_turns) {
    if (turn.role != "user" && turn.role != "assistant") {
      throw SchemaError("context turn \"role\" must be \"user\" or \"assistant\"");
    }
  }
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string require_string(const json& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end()) throw SchemaError(std::string("record is missing \"") + field + "\"");
  if (!it->is_string()) throw SchemaError(std::string("record field \"") + field + "\" must be a string");
  return it->get<std::string>();
}

}  // namespace

TaskRecord parse_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DatasetParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DatasetParseError("record line is not a JSON object");

  TaskRecord r;
  r.id = require_string(j, "id");
  r.kind = task_kind_from_string(require_string(j, "kind"));
  r.prompt = require_string(j, "prompt");
  r.source_tag = require_string(j, "source");
  if (j.contains("reference")) {
    if (!j["reference"].is_string()) throw SchemaError("record field \"reference\" must be a string");
    r.reference = j["reference"].get<std::string>();
  }
  if (j.contains("rubric")) {
    if (!j["rubric"].is_array()) throw SchemaError("record field \"rubric\" must be an array");
    for (const auto& item : j["rubric"]) {
      if (!item.is_string()) throw SchemaError("record field \"rubric\" must hold strings");
      r.rubric.push_back(item.get<std::string>());
    }
  }
  if (j.contains("context")) {
    if (!j["context"].is_array()) throw SchemaError("record field \"context\" must be an array");
    for (const auto& item : j["context"]) {
      if (!item.is_object()) throw SchemaError("context turns must be objects");
      Turn t;
      t.role = require_string(item, "role");
      t.text = require_string(item, "text");
      r.context_turns.push_back(std::move(t));
    }
  }
  r.check();
  return r;
}

std::string record_to_json_line(const TaskRecord& record) {
  record.check();
  ordered_json j;
  j["id"] = record.id;
  j["kind"] = std::string(to_string(record.kind));
  j["prompt"] = record.prompt;
  if (record.reference.has_value()) j["reference"] = *record.reference;
  if (!record.rubric.empty()) j["rubric"] = record.rubric;
  if (!record.context_turns.empty()) {
    ordered_json turns = ordered_json::array();
    for (const Turn& t : record.context_turns) {
      turns.push_back(ordered_json{{"role", t.role}, {"text", t.text}});
    }
    j["context"] = std::move(turns);
  }
  j["source"] = record.source_tag;
  return j.dump();
}

int count_tokens_lenient(std::string_view text) {
  int n = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t step = 1;
    for (std::string_view tag : {kThinkClose, kAnswerClose, kThinkOpen, kAnswerOpen}) {
      if (text.substr(i, tag.size()) == tag) {
        step = tag.size();
        break;
      }
    }
    i += step;
    ++n;
  }
  return n;
}

namespace {

/// One record per user turn, earlier turns as context. Records already
/// exploded (id contains '#') or without context pass through unchanged.
void explode_into(const TaskRecord& raw, std::vector<TaskRecord>& out) {
  if (raw.id.find('#') != std::string::npos || raw.context_turns.empty()) {
    out.push_back(raw);
    return;
  }
  std::vector<Turn> full = raw.context_turns;
  full.push_back(Turn{"user", raw.prompt});
  int j = 0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (full[i].role != "user") continue;
    TaskRecord rec = raw;
    rec.id = raw.id + "#" + std::to_string(j++);
    rec.prompt = full[i].text;
    rec.context_turns.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(i));
    out.push_back(std::move(rec));
  }
}

}  // namespace

std::vector<TaskRecord> ingest_dataset(std::istream& in, const IngestOptions& options) {
  std::vector<TaskRecord> out;
  std::string line;
  int line_no = 0;
  std::vector<TaskRecord> exploded;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TaskRecord raw;
    try {
      raw = parse_record(line);
    } catch (const DatasetParseError& e) {
      throw DatasetParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
    exploded.clear();
    explode_into(raw, exploded);
    for (TaskRecord& rec : exploded) {
      if (count_tokens_lenient(rec.prompt) < options.min_prompt_tokens) continue;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<TaskRecord> ingest_dataset(const std::string& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw DatasetParseError("cannot open dataset file: " + path);
  return ingest_dataset(in, options);
}

void write_dataset(std::ostream& out, const std::vector<TaskRecord>& records) {
  for (const TaskRecord& r : records) out << record_to_json_line(r) << '\n';
}

void write_dataset(const std::string& path, const std::vector<TaskRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DatasetParseError("cannot open dataset file for writing: " + path);
  write_dataset(out, records);
}

}  // namespace zrl
