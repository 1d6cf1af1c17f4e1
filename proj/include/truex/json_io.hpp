#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "truex/model.hpp"

namespace truex {

using nlohmann::json;

// Current schema version written into every record ("v": 1).
inline constexpr int kSchemaVersion = 1;

// Numbers, numeric strings ("1/3", "0.25") -> exact rational. Throws DataError.
Rational rational_from_json(const json& v);

// The outermost {...} of a model reply that may carry prose or code fences.
std::optional<json> extract_json_object(const std::string& text);

json to_json(const Answer& answer);
Answer answer_from_json(const json& j);

json to_json(const Problem& problem);
Problem problem_from_json(const json& j);

json to_json(const ReasoningStep& step);
ReasoningStep step_from_json(const json& j);

json to_json(const ExplanationSpec& spec);
// Accepts the structured form ({"steps": [...]}) and the text form
// ({"problem_id": ..., "text": "STEP 1: ..."}).
ExplanationSpec spec_from_json(const json& j);

json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const json& j);

// One JSON value per non-blank line. Throws DataError naming file:line.
std::vector<json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<json>& records);

std::vector<Problem> read_problems(const std::filesystem::path& path);
std::vector<ExplanationSpec> read_specs(const std::filesystem::path& path);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace truex
