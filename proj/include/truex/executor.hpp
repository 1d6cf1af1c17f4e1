#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "truex/json_io.hpp"
#include "truex/model.hpp"
#include "truex/provider.hpp"

namespace truex {

enum class StepStatus { executed, tool_failed, interpreter_failed, skipped_narrate };
enum class ToolUsed { none, calculator, rule_matcher, provider_interpreter };

std::string_view to_string(StepStatus s);
std::string_view to_string(ToolUsed t);

struct ExecutionRecord {
  int step_index = 0;
  StepStatus status = StepStatus::skipped_narrate;
  ToolUsed tool = ToolUsed::none;
  // (variable, canonical value); choice labels are stored as the label text.
  std::optional<std::pair<std::string, std::string>> bound_output;
  std::string detail;

  bool operator==(const ExecutionRecord&) const = default;
};

struct VerificationOutcome {
  std::string problem_id;
  std::optional<Answer> predicted;
  std::vector<ExecutionRecord> records;
  bool executable = false;
  bool blind = true;
  // Filled in by verify(), never by blind_execute().
  std::optional<Answer> gold;
  std::optional<bool> correct;

  bool operator==(const VerificationOutcome&) const = default;
};

struct ExecOptions {
  // Consulted for steps the white-box tools cannot run. May be null, in
  // which case such steps fail.
  Provider* interpreter = nullptr;
  double temperature = 0.0;
};

// Runs the spec step by step with no access to the problem statement:
// bind_given binds literals, compute goes to the calculator, lookup_rule to
// the rule matcher, everything else to the interpreter template. Stops at
// the first hard failure. Never throws for spec content.
VerificationOutcome blind_execute(const ExplanationSpec& spec, const std::vector<Choice>& choices,
                                  const ExecOptions& options = {});

// Executes each problem's spec (matched by problem id) and scores it
// against the gold answer. Problems without a spec get an empty, failed
// outcome. Results are in dataset order regardless of `workers`.
std::vector<VerificationOutcome> verify_dataset(const std::vector<Problem>& problems,
                                                const std::vector<ExplanationSpec>& specs, const ExecOptions& options,
                                                int workers = 1);

json to_json(const VerificationOutcome& outcome);
VerificationOutcome outcome_from_json(const json& j);
std::vector<VerificationOutcome> read_outcomes(const std::filesystem::path& path);

struct E3Counts {
  long N = 0;
  long N_exec = 0;   // blind executor answered correctly
  long N_orig = 0;   // original prediction correct
  long N_joint = 0;  // both
  long N_rec = 0;    // blind correct, original not

  bool operator==(const E3Counts&) const = default;
};

// Exact rationals; nullopt means the metric is undefined (zero denominator).
struct E3Metrics {
  std::optional<Rational> EA;
  std::optional<Rational> OA;
  std::optional<Rational> EC;
  std::optional<Rational> ERR;
};

struct E3Item {
  VerificationOutcome outcome;
  bool original_correct = false;
  Answer gold;
};

// Throws DataError when the counts are mutually inconsistent.
void check_counts(const E3Counts& c);
E3Metrics e3_from_counts(const E3Counts& c);
std::pair<E3Counts, E3Metrics> score_e3(const std::vector<E3Item>& items);

// Joins outcomes with the original predictions by problem id. An original
// prediction that is missing counts as incorrect.
std::vector<E3Item> join_e3_inputs(const std::vector<VerificationOutcome>& outcomes,
                                   const std::vector<Trajectory>& originals);

// "95.7" or "—".
std::string format_percent(const std::optional<Rational>& proportion);

json to_json(const E3Counts& c, const E3Metrics& m);

}  // namespace truex
