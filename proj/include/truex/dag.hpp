#pragma once

#include <optional>
#include <string>
#include <vector>

#include "truex/executor.hpp"
#include "truex/judge.hpp"
#include "truex/neighborhood.hpp"

namespace truex {

// One reasoning step of a trajectory as seen by the DAG: the text compared
// by the judge and whether blind execution ran it successfully.
struct TrajectoryStep {
  int step_index = 0;
  std::string text;
  bool executed = false;

  bool operator==(const TrajectoryStep&) const = default;
};

// Description when present, otherwise the serialized step.
std::string step_text(const ReasoningStep& step);

// Non-narrate steps of a spec, flagged with their execution status.
std::vector<TrajectoryStep> trajectory_steps(const ExplanationSpec& spec, const VerificationOutcome& outcome);

// Texts of the non-narrate reference steps.
std::vector<std::string> reference_texts(const Problem& problem);

// A model's explanation of one instance, executed blind.
struct InstanceRun {
  Problem problem;
  ExplanationSpec spec;
  VerificationOutcome outcome;
  std::vector<TrajectoryStep> steps;
  std::string parse_error;  // set when the reply was not a valid spec
};

struct ExplainOptions {
  std::string strategy = "cot";  // explain.<strategy>
  double temperature = 0.0;
  std::optional<int64_t> seed;
  int workers = 1;
};

// Asks the generator for an executable explanation of `problem`; `sample`
// distinguishes repeated draws. Returns nullopt (with the first diagnostic
// in *error) when the reply does not parse.
std::optional<ExplanationSpec> request_explanation(Provider& generator, const Problem& problem,
                                                   const ExplainOptions& options, int sample = 0,
                                                   std::string* error = nullptr);

// Explains and blind-executes each problem; output order = input order.
std::vector<InstanceRun> run_instances(const std::vector<const Problem*>& problems, Provider& generator,
                                       Provider* interpreter, const ExplainOptions& options);

// `count` independent explanations of one problem (samples 1..count).
std::vector<InstanceRun> run_samples(const Problem& problem, int count, Provider& generator, Provider* interpreter,
                                     const ExplainOptions& options);

// Numbered step texts, one per line.
std::string render_trace(const InstanceRun& run);

json to_json(const InstanceRun& run);
InstanceRun instance_run_from_json(const json& j);

struct StepAssessment {
  std::string instance_id;
  int step_index = 0;
  std::string text;
  int C = 0;
  long n_exec = 0;
  long neighborhood_size = 0;

  Rational R() const { return neighborhood_size == 0 ? Rational(0) : Rational(n_exec, neighborhood_size); }
  Rational W() const { return C * R(); }
};

struct AssessedTrajectory {
  std::string instance_id;
  std::vector<StepAssessment> steps;
};

struct AssessmentResult {
  std::vector<AssessedTrajectory> trajectories;
  std::vector<std::string> warnings;
};

// C: the judge compares each step with the most token-similar reference
// step of its own instance. n_exec: the number of instances whose
// trajectory contains an equivalent step that executed. Instances without
// reference steps are skipped with a warning.
AssessmentResult assess_steps(const std::vector<InstanceRun>& runs, StepJudge& judge);

struct StepRef {
  std::string instance_id;
  int step_index = 0;
  bool operator==(const StepRef&) const = default;
};

struct DagNode {
  int id = 0;
  std::string canonical;
  std::vector<StepRef> members;
  int rank = 0;  // minimum observed 1-based position
  long c_sum = 0;
  long count = 0;
  long n_exec_sum = 0;
  long size_sum = 0;

  // Pooled C times pooled R.
  Rational weight() const;
};

struct DagEdge {
  int from = 0;
  int to = 0;
  long count = 0;
  bool operator==(const DagEdge&) const = default;
};

struct FeasibleRegionDag {
  std::string anchor_id;
  std::vector<DagNode> nodes;  // ids are 1..n in creation order
  std::vector<DagEdge> edges;  // sorted by (from, to)

  const DagNode* find(int id) const;
};

// Sequential fold in input order. A step joins the first node judged
// equivalent to it unless that node is the previous step's node or would
// close a cycle; otherwise it opens a new node. Edges link adjacent steps.
FeasibleRegionDag build_dag(const std::vector<AssessedTrajectory>& trajectories, StepJudge& judge,
                            std::string anchor_id = {});

bool is_acyclic(const FeasibleRegionDag& dag);

std::string to_dot(const FeasibleRegionDag& dag);
json to_json(const FeasibleRegionDag& dag);
FeasibleRegionDag dag_from_json(const json& j);

// Plain-text rendering handed to the success predictor.
std::string dag_prompt_text(const FeasibleRegionDag& dag);

// Fraction of steps equivalent to some node; nullopt for an empty list.
std::optional<Rational> coverage_fraction(const FeasibleRegionDag& dag, const std::vector<std::string>& steps,
                                          StepJudge& judge);

struct TrajectoryCoverage {
  std::string id;
  std::string kind;  // "perturbed" or "reference"
  size_t matched = 0;
  size_t total = 0;
  Rational fraction() const { return total == 0 ? Rational(0) : Rational(matched, total); }
};

struct CoverageReport {
  std::vector<TrajectoryCoverage> items;
  std::optional<Rational> pret_match;
  std::optional<Rational> gt_match;
  size_t dag_nodes = 0;
  size_t dag_edges = 0;
  std::vector<std::string> warnings;
};

// Coverage of arbitrary trajectories against a fixed DAG.
CoverageReport coverage(const FeasibleRegionDag& dag, const std::vector<std::pair<std::string, std::vector<std::string>>>& trajectories,
                        StepJudge& judge, const std::string& kind = "perturbed");

// Neighborhood protocol: each perturbed instance's trajectory is scored
// against the DAG built from all other trajectories (leave one out), and
// every instance's reference procedure against the full DAG.
CoverageReport neighborhood_coverage(const std::vector<InstanceRun>& runs, StepJudge& judge);

json to_json(const CoverageReport& report);

// Fraction of instances whose blind execution was correct.
std::optional<Rational> perturbation_success_rate(const std::vector<InstanceRun>& runs);

struct PredictionRecord {
  std::string problem_id;
  std::optional<double> p;
  int y = 0;
  double ce = 0.0;
  bool excluded = false;
  std::string note;
};

struct PredictionSummary {
  std::vector<PredictionRecord> records;
  std::optional<double> mean_ce;
};

inline constexpr double kProbabilityEpsilon = 1e-6;

// -[y ln p + (1-y) ln(1-p)] with p clamped to [eps, 1-eps].
double cross_entropy(double p, int y, double eps = kProbabilityEpsilon);

// Reads "PROBABILITY: 0.7", "0.7", or "70%". nullopt when no value in
// [0, 1] can be found.
std::optional<double> parse_probability(const std::string& text);

struct PredictOptions {
  double temperature = 0.0;
  std::optional<int64_t> seed;
};

// One predict.success request per run (one retry when unparseable).
PredictionSummary predict_success(const std::vector<InstanceRun>& runs, const FeasibleRegionDag& dag,
                                  Provider& predictor, const PredictOptions& options);

// Same request budget, but the graph comes from repeated samples of the
// anchor alone.
PredictionSummary baseline_predict(const std::vector<InstanceRun>& anchor_samples,
                                   const std::vector<InstanceRun>& runs, StepJudge& judge, Provider& predictor,
                                   const PredictOptions& options);

json to_json(const PredictionSummary& s);

}  // namespace truex
