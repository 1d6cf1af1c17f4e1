#include "truex/dag.hpp"

#include <cmath>
#include <deque>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "truex/errors.hpp"
#include "truex/parallel.hpp"
#include "truex/step_format.hpp"

namespace truex {

namespace {

std::string strip_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

std::string step_text(const ReasoningStep& step) {
  if (!step.description.empty()) return step.description;
  ReasoningStep copy = step;
  copy.index = 1;
  std::string line = strip_newline(serialize_step(copy));
  // Drop the "STEP 1: " prefix so the text is position independent.
  if (auto colon = line.find(": "); colon != std::string::npos) line = line.substr(colon + 2);
  return line;
}

std::vector<TrajectoryStep> trajectory_steps(const ExplanationSpec& spec, const VerificationOutcome& outcome) {
  std::map<int, StepStatus> status;
  for (const auto& r : outcome.records) status[r.step_index] = r.status;
  std::vector<TrajectoryStep> out;
  for (const auto& step : spec.steps) {
    if (step.opcode == Opcode::narrate) continue;
    auto it = status.find(step.index);
    out.push_back({step.index, step_text(step), it != status.end() && it->second == StepStatus::executed});
  }
  return out;
}

std::vector<std::string> reference_texts(const Problem& problem) {
  if (problem.reference_steps.empty()) return {};
  std::vector<std::string> out;
  for (const auto& step : reference_spec(problem).steps) {
    if (step.opcode != Opcode::narrate) out.push_back(step_text(step));
  }
  return out;
}

std::optional<ExplanationSpec> request_explanation(Provider& generator, const Problem& problem,
                                                   const ExplainOptions& options, int sample, std::string* error) {
  ProviderRequest req;
  req.template_id = "explain." + options.strategy;
  req.slots = {{"problem", problem.statement}, {"choices", render_choices(problem.choices)}};
  if (sample > 0) req.slots["sample"] = std::to_string(sample);
  req.temperature = options.temperature;
  req.seed = options.seed;
  ParseResult parsed = parse_spec(generator.complete(req).text);
  if (!parsed.spec) {
    if (error) {
      const auto& d = parsed.diagnostics.front();
      *error = d.code + " at line " + std::to_string(d.line) + ": " + d.message;
    }
    return std::nullopt;
  }
  parsed.spec->problem_id = problem.id;
  if (parsed.spec->generator.empty()) parsed.spec->generator = options.strategy;
  return parsed.spec;
}

namespace {

InstanceRun explain_and_execute(const Problem& problem, Provider& generator, Provider* interpreter,
                                const ExplainOptions& options, int sample) {
  InstanceRun run;
  run.problem = problem;
  std::string error;
  auto spec = request_explanation(generator, problem, options, sample, &error);
  if (spec) {
    run.spec = *spec;
    run.outcome = blind_execute(run.spec, problem.choices, ExecOptions{interpreter});
  } else {
    run.spec.problem_id = problem.id;
    run.parse_error = error;
  }
  run.outcome.problem_id = problem.id;
  run.outcome.gold = problem.answer;
  run.outcome.correct = run.outcome.predicted && answer_matches_gold(*run.outcome.predicted, problem.answer);
  run.steps = trajectory_steps(run.spec, run.outcome);
  return run;
}

}  // namespace

std::vector<InstanceRun> run_instances(const std::vector<const Problem*>& problems, Provider& generator,
                                       Provider* interpreter, const ExplainOptions& options) {
  std::vector<InstanceRun> runs(problems.size());
  parallel_for(problems.size(), options.workers, [&](size_t i) {
    runs[i] = explain_and_execute(*problems[i], generator, interpreter, options, 0);
  });
  return runs;
}

std::vector<InstanceRun> run_samples(const Problem& problem, int count, Provider& generator, Provider* interpreter,
                                     const ExplainOptions& options) {
  std::vector<InstanceRun> runs(static_cast<size_t>(std::max(0, count)));
  parallel_for(runs.size(), options.workers, [&](size_t i) {
    runs[i] = explain_and_execute(problem, generator, interpreter, options, static_cast<int>(i) + 1);
  });
  return runs;
}

json to_json(const InstanceRun& run) {
  json j;
  j["v"] = kSchemaVersion;
  j["problem"] = to_json(run.problem);
  j["spec"] = to_json(run.spec);
  j["outcome"] = to_json(run.outcome);
  if (!run.parse_error.empty()) j["parse_error"] = run.parse_error;
  return j;
}

InstanceRun instance_run_from_json(const json& j) {
  InstanceRun run;
  try {
    run.problem = problem_from_json(j.at("problem"));
    run.spec = spec_from_json(j.at("spec"));
    run.outcome = outcome_from_json(j.at("outcome"));
    run.parse_error = j.value("parse_error", "");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed instance run: ") + e.what());
  }
  run.steps = trajectory_steps(run.spec, run.outcome);
  return run;
}

AssessmentResult assess_steps(const std::vector<InstanceRun>& runs, StepJudge& judge) {
  AssessmentResult result;
  const long size = static_cast<long>(runs.size());
  for (const auto& run : runs) {
    std::vector<std::string> refs;
    try {
      refs = reference_texts(run.problem);
    } catch (const DataError& e) {
      result.warnings.push_back(e.what());
    }
    if (refs.empty()) {
      result.warnings.push_back("instance '" + run.problem.id + "' has no reference steps; assessment skipped");
      continue;
    }
    AssessedTrajectory traj;
    traj.instance_id = run.problem.id;
    for (const auto& step : run.steps) {
      StepAssessment a;
      a.instance_id = run.problem.id;
      a.step_index = step.step_index;
      a.text = step.text;
      a.neighborhood_size = size;

      size_t best = 0;
      double best_overlap = -1.0;
      for (size_t r = 0; r < refs.size(); ++r) {
        const double o = token_overlap(step.text, refs[r]);
        if (o > best_overlap) {
          best_overlap = o;
          best = r;
        }
      }
      a.C = judge.equivalent(step.text, refs[best]) ? 1 : 0;

      for (const auto& other : runs) {
        bool hit = false;
        for (const auto& s : other.steps) {
          if (s.executed && judge.equivalent(step.text, s.text)) {
            hit = true;
            break;
          }
        }
        a.n_exec += hit;
      }
      traj.steps.push_back(std::move(a));
    }
    result.trajectories.push_back(std::move(traj));
  }
  return result;
}

Rational DagNode::weight() const {
  if (count == 0 || size_sum == 0) return Rational(0);
  return Rational(c_sum, count) * Rational(n_exec_sum, size_sum);
}

const DagNode* FeasibleRegionDag::find(int id) const {
  if (id < 1 || static_cast<size_t>(id) > nodes.size()) return nullptr;
  return &nodes[static_cast<size_t>(id) - 1];
}

namespace {

bool reaches(const std::map<int, std::set<int>>& adj, int from, int target) {
  std::set<int> seen{from};
  std::deque<int> queue{from};
  while (!queue.empty()) {
    int n = queue.front();
    queue.pop_front();
    if (n == target) return true;
    auto it = adj.find(n);
    if (it == adj.end()) continue;
    for (int next : it->second) {
      if (seen.insert(next).second) queue.push_back(next);
    }
  }
  return false;
}

}  // namespace

FeasibleRegionDag build_dag(const std::vector<AssessedTrajectory>& trajectories, StepJudge& judge,
                            std::string anchor_id) {
  FeasibleRegionDag dag;
  dag.anchor_id = anchor_id.empty() && !trajectories.empty() ? trajectories.front().instance_id : anchor_id;
  std::map<std::pair<int, int>, long> edge_counts;
  std::map<int, std::set<int>> adj;

  for (const auto& traj : trajectories) {
    int prev = 0;
    int position = 0;
    for (const auto& step : traj.steps) {
      ++position;
      int target = 0;
      for (const auto& node : dag.nodes) {
        if (node.id == prev) continue;
        if (!judge.equivalent(node.canonical, step.text)) continue;
        if (prev != 0 && reaches(adj, node.id, prev)) continue;
        target = node.id;
        break;
      }
      if (target == 0) {
        DagNode fresh;
        fresh.id = static_cast<int>(dag.nodes.size()) + 1;
        fresh.canonical = step.text;
        fresh.rank = position;
        dag.nodes.push_back(fresh);
        target = fresh.id;
      }
      DagNode& node = dag.nodes[static_cast<size_t>(target) - 1];
      node.members.push_back({step.instance_id, step.step_index});
      node.rank = std::min(node.rank, position);
      node.c_sum += step.C;
      node.count += 1;
      node.n_exec_sum += step.n_exec;
      node.size_sum += step.neighborhood_size;
      if (prev != 0) {
        ++edge_counts[{prev, target}];
        adj[prev].insert(target);
      }
      prev = target;
    }
  }
  for (const auto& [key, count] : edge_counts) dag.edges.push_back({key.first, key.second, count});
  return dag;
}

bool is_acyclic(const FeasibleRegionDag& dag) {
  std::map<int, int> indegree;
  std::map<int, std::vector<int>> adj;
  for (const auto& n : dag.nodes) indegree[n.id] = 0;
  for (const auto& e : dag.edges) {
    if (!indegree.count(e.from) || !indegree.count(e.to)) return false;
    adj[e.from].push_back(e.to);
    ++indegree[e.to];
  }
  std::deque<int> ready;
  for (const auto& [id, d] : indegree) {
    if (d == 0) ready.push_back(id);
  }
  size_t visited = 0;
  while (!ready.empty()) {
    int n = ready.front();
    ready.pop_front();
    ++visited;
    for (int next : adj[n]) {
      if (--indegree[next] == 0) ready.push_back(next);
    }
  }
  return visited == dag.nodes.size();
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out;
}

}  // namespace

std::string to_dot(const FeasibleRegionDag& dag) {
  std::ostringstream out;
  out << "digraph feasible_region {\n";
  out << "  rankdir=LR;\n";
  if (!dag.anchor_id.empty()) out << "  label=\"" << dot_escape(dag.anchor_id) << "\";\n";
  for (const auto& n : dag.nodes) {
    out << "  n" << n.id << " [label=\"" << dot_escape(n.canonical) << "\\nW=" << to_fixed(n.weight(), 3)
        << "\", rank=" << n.rank << "];\n";
  }
  for (const auto& e : dag.edges) {
    out << "  n" << e.from << " -> n" << e.to << " [label=\"" << e.count << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

json to_json(const FeasibleRegionDag& dag) {
  json j;
  j["v"] = kSchemaVersion;
  j["anchor_id"] = dag.anchor_id;
  json nodes = json::array();
  for (const auto& n : dag.nodes) {
    json members = json::array();
    for (const auto& m : n.members) members.push_back({{"instance", m.instance_id}, {"step", m.step_index}});
    nodes.push_back({{"id", n.id},
                     {"canonical", n.canonical},
                     {"rank", n.rank},
                     {"weight", to_string(n.weight())},
                     {"weight_3dp", to_fixed(n.weight(), 3)},
                     {"c_sum", n.c_sum},
                     {"count", n.count},
                     {"n_exec_sum", n.n_exec_sum},
                     {"size_sum", n.size_sum},
                     {"members", members}});
  }
  j["nodes"] = nodes;
  json edges = json::array();
  for (const auto& e : dag.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"count", e.count}});
  j["edges"] = edges;
  return j;
}

FeasibleRegionDag dag_from_json(const json& j) {
  FeasibleRegionDag dag;
  try {
    if (j.value("v", kSchemaVersion) != kSchemaVersion) throw DataError("unsupported DAG schema version");
    dag.anchor_id = j.value("anchor_id", "");
    for (const auto& nj : j.at("nodes")) {
      DagNode n;
      n.id = nj.at("id").get<int>();
      n.canonical = nj.at("canonical").get<std::string>();
      n.rank = nj.at("rank").get<int>();
      n.c_sum = nj.at("c_sum").get<long>();
      n.count = nj.at("count").get<long>();
      n.n_exec_sum = nj.at("n_exec_sum").get<long>();
      n.size_sum = nj.at("size_sum").get<long>();
      for (const auto& m : nj.at("members")) {
        n.members.push_back({m.at("instance").get<std::string>(), m.at("step").get<int>()});
      }
      if (n.id != static_cast<int>(dag.nodes.size()) + 1) throw DataError("DAG node ids must run 1..n");
      dag.nodes.push_back(std::move(n));
    }
    for (const auto& ej : j.at("edges")) {
      DagEdge e{ej.at("from").get<int>(), ej.at("to").get<int>(), ej.at("count").get<long>()};
      if (!dag.find(e.from) || !dag.find(e.to)) throw DataError("DAG edge references a missing node");
      dag.edges.push_back(e);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed DAG: ") + e.what());
  }
  return dag;
}

std::string dag_prompt_text(const FeasibleRegionDag& dag) {
  std::vector<const DagNode*> order;
  for (const auto& n : dag.nodes) order.push_back(&n);
  std::stable_sort(order.begin(), order.end(), [](const DagNode* a, const DagNode* b) { return a->rank < b->rank; });
  std::string out;
  for (const DagNode* n : order) {
    out += "S" + std::to_string(n->id) + " (w=" + to_fixed(n->weight(), 3) + "): " + n->canonical + "\n";
  }
  if (!dag.edges.empty()) {
    out += "edges:";
    for (const auto& e : dag.edges) out += " S" + std::to_string(e.from) + "->S" + std::to_string(e.to);
    out += "\n";
  }
  return out;
}

std::optional<Rational> coverage_fraction(const FeasibleRegionDag& dag, const std::vector<std::string>& steps,
                                          StepJudge& judge) {
  if (steps.empty()) return std::nullopt;
  size_t matched = 0;
  for (const auto& s : steps) {
    for (const auto& n : dag.nodes) {
      if (judge.equivalent(n.canonical, s)) {
        ++matched;
        break;
      }
    }
  }
  return Rational(static_cast<long>(matched), static_cast<long>(steps.size()));
}

namespace {

std::optional<Rational> mean_of(const std::vector<TrajectoryCoverage>& items, const std::string& kind) {
  Rational sum = 0;
  long n = 0;
  for (const auto& item : items) {
    if (item.kind != kind) continue;
    sum += item.fraction();
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

TrajectoryCoverage score(const FeasibleRegionDag& dag, const std::string& id, const std::string& kind,
                         const std::vector<std::string>& steps, StepJudge& judge) {
  TrajectoryCoverage c{id, kind, 0, steps.size()};
  auto f = coverage_fraction(dag, steps, judge);
  if (f) c.matched = static_cast<size_t>((*f * static_cast<long>(steps.size())).convert_to<long>());
  return c;
}

std::vector<std::string> texts(const std::vector<TrajectoryStep>& steps) {
  std::vector<std::string> out;
  for (const auto& s : steps) out.push_back(s.text);
  return out;
}

// Coverage only needs node texts, so skip the (judge-heavy) assessment.
AssessedTrajectory shape_only(const InstanceRun& run) {
  AssessedTrajectory t;
  t.instance_id = run.problem.id;
  for (const auto& s : run.steps) t.steps.push_back({run.problem.id, s.step_index, s.text, 0, 0, 0});
  return t;
}

}  // namespace

CoverageReport coverage(const FeasibleRegionDag& dag,
                        const std::vector<std::pair<std::string, std::vector<std::string>>>& trajectories,
                        StepJudge& judge, const std::string& kind) {
  CoverageReport report;
  report.dag_nodes = dag.nodes.size();
  report.dag_edges = dag.edges.size();
  for (const auto& [id, steps] : trajectories) {
    if (steps.empty()) {
      report.warnings.push_back("trajectory '" + id + "' is empty; excluded");
      continue;
    }
    report.items.push_back(score(dag, id, kind, steps, judge));
  }
  report.pret_match = mean_of(report.items, "perturbed");
  report.gt_match = mean_of(report.items, "reference");
  return report;
}

CoverageReport neighborhood_coverage(const std::vector<InstanceRun>& runs, StepJudge& judge) {
  CoverageReport report;
  std::vector<AssessedTrajectory> all;
  for (const auto& run : runs) all.push_back(shape_only(run));
  const FeasibleRegionDag full = build_dag(all, judge);
  report.dag_nodes = full.nodes.size();
  report.dag_edges = full.edges.size();

  for (size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].steps.empty()) {
      report.warnings.push_back("trajectory '" + runs[k].problem.id + "' is empty; excluded");
      continue;
    }
    std::vector<AssessedTrajectory> others;
    for (size_t i = 0; i < runs.size(); ++i) {
      if (i != k) others.push_back(all[i]);
    }
    const FeasibleRegionDag loo = build_dag(others, judge);
    report.items.push_back(score(loo, runs[k].problem.id, "perturbed", texts(runs[k].steps), judge));
  }
  for (const auto& run : runs) {
    std::vector<std::string> refs;
    try {
      refs = reference_texts(run.problem);
    } catch (const DataError& e) {
      report.warnings.push_back(e.what());
    }
    if (refs.empty()) {
      report.warnings.push_back("instance '" + run.problem.id + "' has no reference steps");
      continue;
    }
    report.items.push_back(score(full, run.problem.id, "reference", refs, judge));
  }
  report.pret_match = mean_of(report.items, "perturbed");
  report.gt_match = mean_of(report.items, "reference");
  return report;
}

json to_json(const CoverageReport& r) {
  auto pct = [](const std::optional<Rational>& v) { return v ? json(format_percent(v)) : json(nullptr); };
  json j;
  j["v"] = kSchemaVersion;
  json items = json::array();
  for (const auto& i : r.items) {
    items.push_back({{"id", i.id}, {"kind", i.kind}, {"matched", i.matched}, {"total", i.total},
                     {"fraction", to_string(i.fraction())}});
  }
  j["trajectories"] = items;
  j["pret_match"] = pct(r.pret_match);
  j["gt_match"] = pct(r.gt_match);
  j["pret_match_exact"] = r.pret_match ? json(to_string(*r.pret_match)) : json(nullptr);
  j["gt_match_exact"] = r.gt_match ? json(to_string(*r.gt_match)) : json(nullptr);
  j["dag_nodes"] = r.dag_nodes;
  j["dag_edges"] = r.dag_edges;
  j["warnings"] = r.warnings;
  return j;
}

std::optional<Rational> perturbation_success_rate(const std::vector<InstanceRun>& runs) {
  if (runs.empty()) return std::nullopt;
  long ok = 0;
  for (const auto& r : runs) ok += r.outcome.correct.value_or(false);
  return Rational(ok, static_cast<long>(runs.size()));
}

double cross_entropy(double p, int y, double eps) {
  p = std::clamp(p, eps, 1.0 - eps);
  return y ? -std::log(p) : -std::log(1.0 - p);
}

std::optional<double> parse_probability(const std::string& text) {
  static const std::regex labelled(R"(probability\s*[:=]\s*([0-9]*\.?[0-9]+)\s*(%?))", std::regex::icase);
  static const std::regex bare(R"((^|[^0-9.])([0-9]*\.?[0-9]+)\s*(%?))");
  std::smatch m;
  auto read = [](const std::string& number, bool percent) -> std::optional<double> {
    double v = std::stod(number);
    if (percent) v /= 100.0;
    if (v < 0.0 || v > 1.0) return std::nullopt;
    return v;
  };
  if (std::regex_search(text, m, labelled)) return read(m[1].str(), m[2].length() > 0);
  if (std::regex_search(text, m, bare)) return read(m[2].str(), m[3].length() > 0);
  return std::nullopt;
}

std::string render_trace(const InstanceRun& run) {
  std::string out;
  int i = 0;
  for (const auto& s : run.steps) out += std::to_string(++i) + ". " + s.text + "\n";
  return out.empty() ? "(no steps)\n" : out;
}

PredictionSummary predict_success(const std::vector<InstanceRun>& runs, const FeasibleRegionDag& dag,
                                  Provider& predictor, const PredictOptions& options) {
  PredictionSummary summary;
  const std::string graph = dag_prompt_text(dag);
  double total = 0.0;
  long counted = 0;
  for (const auto& run : runs) {
    PredictionRecord rec;
    rec.problem_id = run.problem.id;
    rec.y = run.outcome.correct.value_or(false) ? 1 : 0;
    for (int attempt = 1; attempt <= 2 && !rec.p; ++attempt) {
      ProviderRequest req;
      req.template_id = "predict.success";
      req.slots = {{"problem", run.problem.statement + "\n" + render_choices(run.problem.choices)},
                   {"dag", graph},
                   {"trace", render_trace(run)}};
      if (attempt > 1) req.slots["attempt"] = std::to_string(attempt);
      req.temperature = options.temperature;
      req.seed = options.seed;
      rec.p = parse_probability(predictor.complete(req).text);
    }
    if (!rec.p) {
      rec.excluded = true;
      rec.note = "unparseable probability after retry";
    } else {
      rec.ce = cross_entropy(*rec.p, rec.y);
      total += rec.ce;
      ++counted;
    }
    summary.records.push_back(rec);
  }
  if (counted > 0) summary.mean_ce = total / static_cast<double>(counted);
  return summary;
}

PredictionSummary baseline_predict(const std::vector<InstanceRun>& anchor_samples,
                                   const std::vector<InstanceRun>& runs, StepJudge& judge, Provider& predictor,
                                   const PredictOptions& options) {
  AssessmentResult assessed = assess_steps(anchor_samples, judge);
  const std::string anchor = anchor_samples.empty() ? std::string() : anchor_samples.front().problem.id;
  FeasibleRegionDag dag = build_dag(assessed.trajectories, judge, anchor);
  return predict_success(runs, dag, predictor, options);
}

json to_json(const PredictionSummary& s) {
  json j;
  j["v"] = kSchemaVersion;
  json records = json::array();
  for (const auto& r : s.records) {
    json rj{{"problem_id", r.problem_id}, {"y", r.y}, {"excluded", r.excluded}};
    rj["p"] = r.p ? json(*r.p) : json(nullptr);
    rj["ce"] = r.excluded ? json(nullptr) : json(r.ce);
    if (!r.note.empty()) rj["note"] = r.note;
    records.push_back(rj);
  }
  j["records"] = records;
  j["mean_ce"] = s.mean_ce ? json(*s.mean_ce) : json(nullptr);
  return j;
}

}  // namespace truex
