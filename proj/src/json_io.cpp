#include "truex/json_io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <system_error>
#include <thread>

#include "truex/errors.hpp"
#include "truex/step_format.hpp"

namespace truex {

namespace {

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::string string_field(const json& j, const char* key, std::string fallback = {}) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace

Rational rational_from_json(const json& v) {
  if (v.is_string()) {
    auto r = parse_rational(v.get<std::string>());
    if (!r) throw DataError("not a number: " + v.get<std::string>());
    return *r;
  }
  if (v.is_number_integer()) return Rational(v.get<long long>());
  if (v.is_number()) {
    // Re-read the shortest decimal form so 0.1 becomes exactly 1/10.
    auto r = parse_rational(v.dump());
    if (!r) throw DataError("not a number: " + v.dump());
    return *r;
  }
  throw DataError("expected a number, got " + v.dump());
}

json to_json(const Answer& answer) {
  json j;
  if (answer.kind() == Answer::Kind::numeric) {
    j["kind"] = "numeric";
    j["value"] = to_string(answer.numeric_value());
    if (answer.inexact()) j["inexact"] = true;
  } else {
    j["kind"] = "choice";
    j["label"] = answer.choice_label();
  }
  return j;
}

Answer answer_from_json(const json& j) {
  if (j.is_object()) {
    const std::string kind = string_field(j, "kind");
    if (kind == "choice") return Answer::choice(string_field(j, "label"));
    if (kind == "numeric" || kind.empty()) {
      return Answer::numeric(rational_from_json(require(j, "value")), j.value("inexact", false));
    }
    throw DataError("unknown answer kind '" + kind + "'");
  }
  if (j.is_number()) return Answer::numeric(rational_from_json(j));
  if (j.is_string()) {
    if (auto r = parse_rational(j.get<std::string>())) return Answer::numeric(*r);
    return Answer::choice(j.get<std::string>());
  }
  throw DataError("malformed answer: " + j.dump());
}

json to_json(const Problem& p) {
  json j;
  j["v"] = kSchemaVersion;
  j["id"] = p.id;
  j["statement"] = p.statement;
  j["answer"] = to_json(p.answer);
  j["reference_steps"] = p.reference_steps;
  j["task_kind"] = std::string(to_string(p.task_kind));
  if (!p.choices.empty()) {
    json choices = json::array();
    for (const auto& c : p.choices) choices.push_back({{"label", c.label}, {"text", c.text}});
    j["choices"] = choices;
  }
  j["metadata"] = p.metadata;
  return j;
}

Problem problem_from_json(const json& j) {
  if (j.contains("v") && j.at("v") != kSchemaVersion) throw DataError("unsupported problem schema version");
  Problem p;
  p.id = string_field(j, "id");
  p.statement = string_field(j, "statement");
  const std::string kind = string_field(j, "task_kind", "numeric");
  auto tk = task_kind_from_string(kind);
  if (!tk) throw DataError("unknown task_kind '" + kind + "'");
  p.task_kind = *tk;
  const json& answer = require(j, "answer");
  if (p.task_kind == TaskKind::multiple_choice && answer.is_string()) {
    // A bare "3" in a choice task is a label, not a number.
    p.answer = Answer::choice(answer.get<std::string>());
  } else {
    p.answer = answer_from_json(answer);
  }
  if (j.contains("reference_steps")) p.reference_steps = j.at("reference_steps").get<std::vector<std::string>>();
  if (j.contains("choices")) {
    for (const auto& c : j.at("choices")) {
      p.choices.push_back({canonical_choice_label(string_field(c, "label")), string_field(c, "text")});
    }
  }
  if (j.contains("metadata")) p.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  auto issues = check_problem(p);
  if (!issues.empty()) throw DataError("problem '" + p.id + "': " + issues.front());
  return p;
}

json to_json(const ReasoningStep& s) {
  json j;
  j["index"] = s.index;
  j["opcode"] = std::string(to_string(s.opcode));
  j["in"] = s.inputs;
  if (s.output) j["out"] = *s.output;
  if (s.expression) j["expr"] = *s.expression;
  if (s.rule) j["rule"] = *s.rule;
  j["desc"] = s.description;
  return j;
}

ReasoningStep step_from_json(const json& j) {
  ReasoningStep s;
  s.index = require(j, "index").get<int>();
  const std::string op = string_field(j, "opcode");
  auto parsed = opcode_from_string(op);
  if (!parsed) throw DataError("unknown opcode '" + op + "'");
  s.opcode = *parsed;
  if (j.contains("in")) s.inputs = j.at("in").get<std::vector<std::string>>();
  if (j.contains("out") && !j.at("out").is_null()) s.output = j.at("out").get<std::string>();
  if (j.contains("expr") && !j.at("expr").is_null()) s.expression = j.at("expr").get<std::string>();
  if (j.contains("rule") && !j.at("rule").is_null()) s.rule = j.at("rule").get<std::string>();
  s.description = string_field(j, "desc");
  return s;
}

json to_json(const ExplanationSpec& spec) {
  json j;
  j["v"] = kSchemaVersion;
  j["problem_id"] = spec.problem_id;
  j["generator"] = spec.generator;
  json steps = json::array();
  for (const auto& s : spec.steps) steps.push_back(to_json(s));
  j["steps"] = steps;
  return j;
}

ExplanationSpec spec_from_json(const json& j) {
  ExplanationSpec spec;
  if (j.contains("text")) {
    ParseResult parsed = parse_spec(require(j, "text").get<std::string>());
    if (!parsed.spec) {
      const auto& d = parsed.diagnostics.front();
      throw DataError("spec text: " + d.code + " at line " + std::to_string(d.line));
    }
    spec = *parsed.spec;
  } else {
    for (const auto& s : require(j, "steps")) spec.steps.push_back(step_from_json(s));
  }
  if (j.contains("problem_id")) spec.problem_id = string_field(j, "problem_id");
  if (j.contains("generator")) spec.generator = string_field(j, "generator");
  return spec;
}

json to_json(const Trajectory& t) {
  json j;
  j["v"] = kSchemaVersion;
  j["problem_id"] = t.problem_id;
  j["steps"] = t.steps;
  j["predicted"] = t.predicted_answer ? to_json(*t.predicted_answer) : json(nullptr);
  j["correct"] = t.correct ? json(*t.correct) : json(nullptr);
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.problem_id = string_field(j, "problem_id");
  if (j.contains("steps")) t.steps = j.at("steps").get<std::vector<std::string>>();
  if (j.contains("predicted") && !j.at("predicted").is_null()) t.predicted_answer = answer_from_json(j.at("predicted"));
  if (j.contains("correct") && !j.at("correct").is_null()) t.correct = j.at("correct").get<bool>();
  return t;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<json> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

namespace {

template <class T, class F>
std::vector<T> read_records(const std::filesystem::path& path, F&& convert) {
  std::vector<T> out;
  int n = 0;
  for (const auto& j : read_jsonl(path)) {
    ++n;
    try {
      out.push_back(convert(j));
    } catch (const DataError& e) {
      throw DataError(path.string() + " record " + std::to_string(n) + ": " + e.what());
    } catch (const json::exception& e) {
      throw DataError(path.string() + " record " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<Problem> read_problems(const std::filesystem::path& path) {
  auto problems = read_records<Problem>(path, problem_from_json);
  std::set<std::string> ids;
  for (const auto& p : problems) {
    if (!ids.insert(p.id).second) throw DataError(path.string() + ": duplicate problem id '" + p.id + "'");
  }
  return problems;
}

std::vector<ExplanationSpec> read_specs(const std::filesystem::path& path) {
  return read_records<ExplanationSpec>(path, spec_from_json);
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  return read_records<Trajectory>(path, trajectory_from_json);
}

std::optional<json> extract_json_object(const std::string& text) {
  const size_t open = text.find('{');
  const size_t close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  try {
    return json::parse(text.substr(open, close - open + 1));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace truex
