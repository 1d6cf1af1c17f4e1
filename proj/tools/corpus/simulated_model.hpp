#pragma once

// A deterministic stand-in for a language model, used only to author the
// bundled synthetic corpus and its mock script. It understands the word
// problems it generates (a small catalog of templated families), answers
// every prompt template the pipeline sends, and makes mistakes at rates
// driven by wording features of the statement.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "truex/model.hpp"
#include "truex/provider.hpp"

namespace corpus {

using truex::Rational;

struct GivenDef {
  std::string name;
  std::string sentence;  // one "{}" placeholder for the value
  std::vector<std::string> desc;
};

struct ComputeDef {
  std::string out;
  std::vector<std::string> in;
  std::string expr;
  std::vector<std::string> desc;
  std::string wrong_expr;
  std::string wrong_desc;
};

enum class Placement { prefix, after_first, suffix };

struct FeatureDef {
  std::string name;
  std::string description;
  std::string error_type;
  std::string complexity;
  std::vector<std::string> keywords;
  std::string sentence;  // no digits
  Placement where = Placement::suffix;
  double error_rate = 0.0;
};

struct ClusterDef {
  std::string id;
  std::string pattern_summary;
  double base_error = 0.0;
  std::vector<FeatureDef> features;
};

struct FamilyDef {
  std::string id;
  std::string key;  // substring that identifies the family
  int cluster = 0;
  truex::TaskKind kind = truex::TaskKind::numeric;
  std::vector<GivenDef> givens;
  std::vector<ComputeDef> computes;
  std::string question;
  std::string answer_var;
};

// A concrete problem: family, given values and active features.
struct Instance {
  const FamilyDef* family = nullptr;
  std::vector<Rational> values;
  unsigned features = 0;  // bit i = cluster feature i
};

const std::vector<ClusterDef>& clusters();
const std::vector<FamilyDef>& families();
const FamilyDef& family(const std::string& id);

std::string render_statement(const Instance& inst);
std::optional<Instance> parse_statement(const std::string& statement);

std::vector<std::string> reference_steps(const Instance& inst);
Rational answer_value(const Instance& inst);
std::vector<truex::Choice> choices_for(const Instance& inst);
truex::Problem make_problem(const std::string& id, const Instance& inst);

// Answers any builtin template.
std::string respond(const truex::ProviderRequest& req);

// Throws std::logic_error when paraphrases would not merge under the
// overlap judge or distinct steps would.
void check_catalog(double threshold);

}  // namespace corpus
