#include "truex/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <map>
#include <ostream>
#include <set>

#include "truex/dag.hpp"
#include "truex/errors.hpp"
#include "truex/hash.hpp"
#include "truex/json_io.hpp"
#include "truex/parallel.hpp"
#include "truex/step_format.hpp"

namespace truex {

namespace fs = std::filesystem;

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order{"verify",   "e3",       "neighborhood", "dag",       "coverage",
                                              "predict",  "failures", "shapley",      "stability", "report"};
  return order;
}

const std::vector<std::string>& stage_dependencies(const std::string& stage) {
  static const std::map<std::string, std::vector<std::string>> deps{
      {"verify", {}},
      {"e3", {"verify"}},
      {"neighborhood", {}},
      {"dag", {"neighborhood"}},
      {"coverage", {"neighborhood"}},
      {"predict", {"neighborhood", "dag"}},
      {"failures", {}},
      {"shapley", {"failures"}},
      {"stability", {"failures", "shapley"}},
      {"report", {}}};
  auto it = deps.find(stage);
  if (it == deps.end()) throw DataError("unknown stage '" + stage + "'");
  return it->second;
}

json to_json(const Manifest& m) {
  json j{{"v", kSchemaVersion},
         {"stage", m.stage},
         {"input_hash", m.input_hash},
         {"inputs", m.inputs},
         {"parents", m.parents},
         {"outputs", m.outputs},
         {"tool_version", m.tool_version}};
  j["created"] = m.created;
  j["manifest_hash"] = m.manifest_hash;
  return j;
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  try {
    m.stage = j.at("stage").get<std::string>();
    m.input_hash = j.at("input_hash").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.parents = j.at("parents").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.created = j.value("created", "");
    m.manifest_hash = j.at("manifest_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::string compute_manifest_hash(const Manifest& m) {
  json j = to_json(m);
  j.erase("created");
  j.erase("manifest_hash");
  return sha256_hex(j.dump());
}

fs::path manifest_path(const fs::path& out_dir, const std::string& stage) {
  return out_dir / "manifests" / (stage + ".json");
}

namespace {

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::optional<Manifest> load_manifest(const fs::path& out_dir, const std::string& stage) {
  const fs::path p = manifest_path(out_dir, stage);
  if (!fs::exists(p)) return std::nullopt;
  return manifest_from_json(read_json(p));
}

// Problems with one manifest: bad self hash or outputs that changed.
std::vector<std::string> check_manifest(const fs::path& out_dir, const Manifest& m) {
  std::vector<std::string> issues;
  if (compute_manifest_hash(m) != m.manifest_hash) issues.push_back(m.stage + ": manifest hash mismatch");
  for (const auto& [rel, hash] : m.outputs) {
    const fs::path p = out_dir / rel;
    if (!fs::exists(p)) {
      issues.push_back(m.stage + ": output missing: " + rel);
    } else if (sha256_file(p) != hash) {
      issues.push_back(m.stage + ": output modified: " + rel);
    }
  }
  return issues;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out.empty() ? "_" : out;
}

json section(const json& raw, const char* key) { return raw.contains(key) ? raw.at(key) : json(nullptr); }

json run_array(const std::vector<InstanceRun>& runs) {
  json a = json::array();
  for (const auto& r : runs) a.push_back(to_json(r));
  return a;
}

std::vector<InstanceRun> runs_from(const json& a) {
  std::vector<InstanceRun> out;
  for (const auto& r : a) out.push_back(instance_run_from_json(r));
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

class Stages {
 public:
  Stages(const RunConfig& config, const ProviderSet& providers, const PipelineOptions& options)
      : c_(config), providers_(providers), options_(options), out_(config.output_dir) {
    providers_json_ = json::object();
    for (const auto& [role, b] : c_.providers) {
      json d{{"kind", b.kind}};
      if (b.kind == "mock") {
        d["script_sha256"] = sha256_file(b.script);
        d["fallback"] = b.fallback == MockFallback::echo ? "echo" : "error";
      } else {
        d["base_url"] = b.http.base_url;
        d["model"] = b.http.model;
      }
      providers_json_[role] = d;
    }
    dataset_json_ = {{"problems", sha256_file(c_.problems)}};
    if (c_.specs) dataset_json_["specs"] = sha256_file(*c_.specs);
    if (c_.originals) dataset_json_["originals"] = sha256_file(*c_.originals);
  }

  std::vector<StageResult> run() {
    std::set<std::string> wanted(options_.stages.begin(), options_.stages.end());
    for (const auto& s : wanted) stage_dependencies(s);  // validates names
    std::vector<StageResult> results;
    for (const auto& stage : stage_order()) {
      if (!wanted.empty() && !wanted.count(stage)) continue;
      results.push_back(run_stage(stage));
    }
    return results;
  }

 private:
  const RunConfig& c_;
  const ProviderSet& providers_;
  const PipelineOptions& options_;
  fs::path out_;
  json providers_json_;
  json dataset_json_;

  // Stage-local state.
  std::string stage_;
  std::map<std::string, std::string> outputs_;
  std::map<std::string, Manifest> parents_;

  void log(const std::string& line) {
    if (options_.log) *options_.log << line << "\n";
  }

  uint64_t stage_seed(const std::string& name) const { return derive_seed(c_.seed, name); }
  // Providers take signed seeds; keep them non-negative.
  std::optional<int64_t> provider_seed(const std::string& name) const {
    return static_cast<int64_t>(stage_seed(name) >> 1);
  }

  std::unique_ptr<StepJudge> make_judge() const {
    if (c_.judge_kind == "provider") return std::make_unique<ProviderJudge>(providers_.get("judge"));
    return std::make_unique<OverlapJudge>(c_.judge_threshold);
  }

  Provider* interpreter() const { return c_.use_interpreter ? &providers_.get("executor") : nullptr; }

  ExplainOptions explain_options(const std::string& stage) const {
    ExplainOptions o;
    o.strategy = c_.strategy;
    o.temperature = c_.explain_temperature;
    o.seed = provider_seed(stage);
    o.workers = c_.workers;
    return o;
  }

  json stage_inputs(const std::string& stage) const {
    json j{{"stage", stage}, {"tool_version", kToolVersion}, {"seed", stage_seed(stage)}};
    auto with = [&](std::initializer_list<const char*> keys) {
      for (const char* k : keys) j["config"][k] = section(c_.raw, k);
    };
    if (stage == "verify") {
      with({"verify"});
      j["dataset"] = dataset_json_;
      j["providers"] = providers_json_;
    } else if (stage == "e3") {
      j["dataset"] = dataset_json_;
      j["name"] = c_.dataset_name;
      j["strategy"] = c_.strategy;
    } else if (stage == "neighborhood") {
      with({"verify", "neighborhood"});
      j["dataset"] = dataset_json_;
      j["providers"] = providers_json_;
    } else if (stage == "dag" || stage == "coverage") {
      with({"judge"});
      j["providers"] = providers_json_;
    } else if (stage == "predict") {
      with({"judge", "neighborhood"});
      j["providers"] = providers_json_;
    } else if (stage == "failures") {
      with({"verify", "judge", "failures"});
      j["dataset"] = dataset_json_;
      j["providers"] = providers_json_;
    } else if (stage == "shapley") {
      with({"failures", "impact"});
    } else if (stage == "stability") {
      with({"verify", "judge", "failures", "stability"});
      j["providers"] = providers_json_;
    } else if (stage == "report") {
      with({"impact"});
    }
    return j;
  }

  void write(const std::string& rel, const std::string& contents) {
    const fs::path p = out_ / rel;
    fs::create_directories(p.parent_path());
    write_file_atomic(p, contents);
    outputs_[rel] = sha256_hex(contents);
  }

  std::vector<std::string> parent_outputs(const std::string& stage, const std::string& suffix) const {
    std::vector<std::string> out;
    auto it = parents_.find(stage);
    if (it == parents_.end()) return out;
    for (const auto& [rel, hash] : it->second.outputs) {
      if (rel.size() >= suffix.size() && rel.compare(rel.size() - suffix.size(), suffix.size(), suffix) == 0) {
        out.push_back(rel);
      }
    }
    return out;
  }

  StageResult run_stage(const std::string& stage) {
    stage_ = stage;
    outputs_.clear();
    parents_.clear();
    const bool optional_parents = stage == "report";
    const auto& deps = optional_parents ? stage_order() : stage_dependencies(stage);
    for (const auto& dep : deps) {
      if (dep == stage) continue;
      auto m = load_manifest(out_, dep);
      if (!m) {
        if (optional_parents) continue;
        throw DataError("stage '" + stage + "' needs the '" + dep + "' artifact " +
                        manifest_path(out_, dep).string() + ", which is missing; run stage '" + dep + "' first");
      }
      auto issues = check_manifest(out_, *m);
      if (!issues.empty()) throw DataError("stage '" + stage + "': upstream artifact invalid: " + issues.front());
      parents_[dep] = *m;
    }

    Manifest m;
    m.stage = stage;
    m.tool_version = kToolVersion;
    for (const auto& [dep, pm] : parents_) m.parents[dep] = pm.manifest_hash;
    json inputs = stage_inputs(stage);
    inputs["parents"] = m.parents;
    m.input_hash = sha256_hex(inputs.dump());
    if (inputs.contains("dataset")) m.inputs = inputs["dataset"].get<std::map<std::string, std::string>>();

    if (!options_.force) {
      if (auto old = load_manifest(out_, stage); old && old->input_hash == m.input_hash && old->parents == m.parents &&
                                                 check_manifest(out_, *old).empty()) {
        log("[" + stage + "] skipped (inputs unchanged)");
        StageResult r{stage, true, {}};
        for (const auto& [rel, h] : old->outputs) r.outputs.push_back(rel);
        return r;
      }
    }

    log("[" + stage + "] running");
    if (stage == "verify") do_verify();
    else if (stage == "e3") do_e3();
    else if (stage == "neighborhood") do_neighborhood();
    else if (stage == "dag") do_dag();
    else if (stage == "coverage") do_coverage();
    else if (stage == "predict") do_predict();
    else if (stage == "failures") do_failures();
    else if (stage == "shapley") do_shapley();
    else if (stage == "stability") do_stability();
    else if (stage == "report") do_report();

    m.outputs = outputs_;
    m.created = utc_now();
    m.manifest_hash = compute_manifest_hash(m);
    const fs::path mp = manifest_path(out_, stage);
    fs::create_directories(mp.parent_path());
    write_file_atomic(mp, dump(to_json(m)));
    StageResult r{stage, false, {}};
    for (const auto& [rel, h] : outputs_) r.outputs.push_back(rel);
    log("[" + stage + "] wrote " + std::to_string(r.outputs.size()) + " file(s)");
    return r;
  }

  std::vector<Problem> problems() const { return read_problems(c_.problems); }

  const Problem& find_problem(const std::vector<Problem>& all, const std::string& id) const {
    for (const auto& p : all) {
      if (p.id == id) return p;
    }
    throw DataError("unknown problem id '" + id + "'");
  }

  // ---- verify -------------------------------------------------------------

  static std::optional<Answer> parse_answer_line(const std::string& text, const Problem& p,
                                                 std::vector<std::string>* steps) {
    std::optional<Answer> answer;
    size_t start = 0;
    while (start <= text.size()) {
      size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      std::string line = text.substr(start, end - start);
      start = end + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.rfind("ANSWER:", 0) == 0) {
        std::string value = line.substr(7);
        value.erase(0, value.find_first_not_of(' '));
        while (!value.empty() && value.back() == ' ') value.pop_back();
        if (p.task_kind == TaskKind::multiple_choice) {
          if (!value.empty()) answer = Answer::choice(value);
        } else if (auto r = parse_rational(value)) {
          answer = Answer::numeric(*r);
        }
      } else if (!line.empty() && steps) {
        steps->push_back(line);
      }
      if (end == text.size()) break;
    }
    return answer;
  }

  void do_verify() {
    const auto all = problems();
    std::vector<ExplanationSpec> specs;
    if (c_.specs) {
      specs = read_specs(*c_.specs);
    } else {
      Provider& gen = providers_.get("generator");
      const ExplainOptions o = explain_options("verify");
      std::vector<std::optional<ExplanationSpec>> got(all.size());
      parallel_for(all.size(), c_.workers, [&](size_t i) { got[i] = request_explanation(gen, all[i], o); });
      std::vector<json> lines;
      for (auto& s : got) {
        if (!s) continue;
        specs.push_back(*s);
        lines.push_back(to_json(*s));
      }
      write("verify/specs.jsonl", to_jsonl(lines));
    }
    if (!c_.originals) {
      Provider& gen = providers_.get("generator");
      std::vector<Trajectory> originals(all.size());
      parallel_for(all.size(), c_.workers, [&](size_t i) {
        ProviderRequest req;
        req.template_id = "solve.cot";
        req.slots = {{"problem", all[i].statement}, {"choices", render_choices(all[i].choices)}, {"sample", "1"}};
        req.temperature = c_.explain_temperature;
        req.seed = provider_seed("verify");
        Trajectory t;
        t.problem_id = all[i].id;
        t.predicted_answer = parse_answer_line(gen.complete(req).text, all[i], &t.steps);
        t.correct = t.predicted_answer && answer_matches_gold(*t.predicted_answer, all[i].answer);
        originals[i] = std::move(t);
      });
      std::vector<json> lines;
      for (const auto& t : originals) lines.push_back(to_json(t));
      write("verify/originals.jsonl", to_jsonl(lines));
    }
    ExecOptions eo;
    eo.interpreter = interpreter();
    auto outcomes = verify_dataset(all, specs, eo, c_.workers);
    std::vector<json> lines;
    for (const auto& o : outcomes) lines.push_back(to_json(o));
    write("verify/outcomes.jsonl", to_jsonl(lines));
  }

  // ---- e3 -----------------------------------------------------------------

  void do_e3() {
    const auto outcomes = read_outcomes(out_ / "verify/outcomes.jsonl");
    const fs::path originals_path = c_.originals ? *c_.originals : out_ / "verify/originals.jsonl";
    const auto originals = read_trajectories(originals_path);
    auto [counts, metrics] = score_e3(join_e3_inputs(outcomes, originals));
    json j = to_json(counts, metrics);
    j["v"] = kSchemaVersion;
    j["dataset"] = c_.dataset_name;
    j["strategy"] = c_.strategy;
    write("e3/e3.json", dump(j));
  }

  // ---- neighborhood, dag, coverage, predict -----------------------------

  void do_neighborhood() {
    const auto all = problems();
    Provider& gen = providers_.get("generator");
    std::vector<std::string> index;
    for (const auto& id : c_.anchors) {
      const Problem& anchor = find_problem(all, id);
      NeighborhoodOptions no;
      no.K = c_.K;
      no.regime = c_.regime;
      no.kinds = c_.kinds;
      no.retry_budget = c_.retry_budget;
      no.workers = c_.workers;
      no.temperature = c_.perturb_temperature;
      no.seed = provider_seed("neighborhood");
      Neighborhood n = generate_neighborhood(anchor, gen, no);
      const auto runs = run_instances(n.instances(), gen, interpreter(), explain_options("neighborhood"));
      ExplainOptions so = explain_options("neighborhood");
      so.temperature = c_.sample_temperature;
      const auto samples = run_samples(anchor, c_.baseline_samples, gen, interpreter(), so);
      json j{{"v", kSchemaVersion},
             {"anchor", id},
             {"neighborhood", to_json(n)},
             {"runs", run_array(runs)},
             {"samples", run_array(samples)}};
      write("neighborhood/" + safe_name(id) + ".json", dump(j));
      index.push_back(id);
    }
    write("neighborhood/index.json", dump(json{{"v", kSchemaVersion}, {"anchors", index}}));
  }

  std::vector<std::pair<std::string, json>> neighborhoods() const {
    std::vector<std::pair<std::string, json>> out;
    const json index = read_json(out_ / "neighborhood/index.json");
    for (const auto& id : index.at("anchors")) {
      out.emplace_back(id.get<std::string>(),
                       read_json(out_ / ("neighborhood/" + safe_name(id.get<std::string>()) + ".json")));
    }
    return out;
  }

  void do_dag() {
    auto judge = make_judge();
    std::vector<std::string> index;
    for (const auto& [id, nj] : neighborhoods()) {
      const auto runs = runs_from(nj.at("runs"));
      const AssessmentResult assessed = assess_steps(runs, *judge);
      const FeasibleRegionDag dag = build_dag(assessed.trajectories, *judge, id);
      json steps = json::array();
      for (const auto& t : assessed.trajectories) {
        for (const auto& s : t.steps) {
          steps.push_back({{"instance", s.instance_id},
                           {"step", s.step_index},
                           {"text", s.text},
                           {"C", s.C},
                           {"n_exec", s.n_exec},
                           {"neighborhood_size", s.neighborhood_size},
                           {"W", to_string(s.W())}});
        }
      }
      json j{{"v", kSchemaVersion},       {"anchor", id},
             {"dag", to_json(dag)},       {"acyclic", is_acyclic(dag)},
             {"assessments", steps},      {"warnings", assessed.warnings}};
      write("dag/" + safe_name(id) + ".json", dump(j));
      write("dag/" + safe_name(id) + ".dot", to_dot(dag));
      index.push_back(id);
    }
    write("dag/index.json", dump(json{{"v", kSchemaVersion}, {"anchors", index}}));
  }

  void do_coverage() {
    auto judge = make_judge();
    json anchors = json::array();
    for (const auto& [id, nj] : neighborhoods()) {
      const auto runs = runs_from(nj.at("runs"));
      const CoverageReport report = neighborhood_coverage(runs, *judge);
      const auto sr = perturbation_success_rate(runs);
      anchors.push_back({{"anchor", id},
                         {"instances", runs.size()},
                         {"coverage", to_json(report)},
                         {"pert_sr", format_percent(sr)},
                         {"pert_sr_exact", sr ? json(to_string(*sr)) : json(nullptr)}});
    }
    write("coverage/coverage.json", dump(json{{"v", kSchemaVersion}, {"anchors", anchors}}));
  }

  void do_predict() {
    auto judge = make_judge();
    Provider& predictor = providers_.get("predictor");
    PredictOptions po;
    po.seed = provider_seed("predict");
    json anchors = json::array();
    for (const auto& [id, nj] : neighborhoods()) {
      const auto runs = runs_from(nj.at("runs"));
      const auto samples = runs_from(nj.at("samples"));
      const FeasibleRegionDag dag = dag_from_json(read_json(out_ / ("dag/" + safe_name(id) + ".json")).at("dag"));
      const auto ours = predict_success(runs, dag, predictor, po);
      const auto base = baseline_predict(samples, runs, *judge, predictor, po);
      json a{{"anchor", id}, {"dag", to_json(ours)}, {"baseline", to_json(base)}};
      a["delta_ce"] = ours.mean_ce && base.mean_ce ? json(*base.mean_ce - *ours.mean_ce) : json(nullptr);
      anchors.push_back(a);
    }
    write("predict/predict.json", dump(json{{"v", kSchemaVersion}, {"anchors", anchors}}));
  }

  // ---- failures, shapley, stability --------------------------------------

  struct ClusterWork {
    Cluster cluster;
    std::vector<InstanceRun> runs;
    FailureModeSet modes;
    std::vector<Mask> observed;
    AugmentedCluster augmented;
    std::vector<VariantEvaluation> evaluations;
  };

  // Discovery, detection, interventions and evaluation for one set of
  // member runs. Shared by the failures and stability stages.
  ClusterWork analyse(const Cluster& cluster, std::vector<InstanceRun> runs, StepJudge& judge,
                      const std::string& seed_name) {
    ClusterWork w;
    w.cluster = cluster;
    w.runs = std::move(runs);
    Provider& gen = providers_.get("generator");
    DiscoveryOptions d;
    d.K_max = c_.K_max;
    d.seed = provider_seed(seed_name);
    d.workers = c_.workers;
    w.modes = discover_failure_modes(cluster.id, w.runs, gen, judge, d);
    FailureDetector detector(c_.detector == "provider" ? &providers_.get("judge") : nullptr);
    std::vector<std::string> ids;
    std::vector<Problem> originals;
    for (const auto& r : w.runs) {
      w.observed.push_back(detector.configuration(w.modes, r.problem, render_trace(r)));
      ids.push_back(r.problem.id);
      originals.push_back(r.problem);
    }
    InterventionOptions io;
    io.retry_budget = c_.intervention_retries;
    io.seed = provider_seed(seed_name);
    io.workers = c_.workers;
    const auto plan = w.modes.size() == 0 ? std::vector<PlannedVariant>{} : exact_plan(ids, w.observed, w.modes.size());
    w.augmented = intervene(originals, w.observed, w.modes, plan, gen, io);
    w.evaluations = evaluate_variants(w.augmented, w.runs, gen, interpreter(), explain_options(seed_name));
    return w;
  }

  void do_failures() {
    const auto all = problems();
    auto judge = make_judge();
    Provider& gen = providers_.get("generator");
    std::vector<std::string> index;
    for (const auto& spec : c_.clusters) {
      Cluster cluster{spec.id, {}, spec.pattern_summary};
      for (const auto& id : spec.members) cluster.members.push_back(find_problem(all, id));
      if (auto issues = check_cluster(cluster); !issues.empty()) throw DataError(issues.front());
      std::vector<const Problem*> ptrs;
      for (const auto& p : cluster.members) ptrs.push_back(&p);
      auto runs = run_instances(ptrs, gen, interpreter(), explain_options("failures"));
      const ClusterWork w = analyse(cluster, std::move(runs), *judge, "failures");

      json observed = json::array();
      for (size_t i = 0; i < w.runs.size(); ++i) {
        observed.push_back({{"id", w.runs[i].problem.id},
                            {"mask", w.observed[i]},
                            {"configuration", mask_label(w.observed[i], w.modes.size())},
                            {"correct", w.runs[i].outcome.correct.value_or(false)}});
      }
      json evals = json::array();
      for (const auto& e : w.evaluations) evals.push_back({{"id", e.id}, {"mask", e.mask}, {"correct", e.correct}});
      json j{{"v", kSchemaVersion},
             {"cluster", to_json(cluster)},
             {"library", to_json(w.modes)},
             {"runs", run_array(w.runs)},
             {"observed", observed},
             {"augmented", to_json(w.augmented)},
             {"evaluations", evals}};
      write("failures/" + safe_name(spec.id) + ".json", dump(j));
      write("failures/" + safe_name(spec.id) + ".library.json", dump(to_json(w.modes)));
      index.push_back(spec.id);
    }
    write("failures/index.json", dump(json{{"v", kSchemaVersion}, {"clusters", index}}));
  }

  std::vector<std::pair<std::string, json>> failure_artifacts() const {
    std::vector<std::pair<std::string, json>> out;
    const json index = read_json(out_ / "failures/index.json");
    for (const auto& id : index.at("clusters")) {
      out.emplace_back(id.get<std::string>(),
                       read_json(out_ / ("failures/" + safe_name(id.get<std::string>()) + ".json")));
    }
    return out;
  }

  static std::vector<VariantEvaluation> evaluations_from(const json& a) {
    std::vector<VariantEvaluation> out;
    for (const auto& e : a) out.push_back({e.at("id").get<std::string>(), e.at("mask").get<Mask>(), e.at("correct")});
    return out;
  }

  ShapleyResult attribute(const CharacteristicTable& table, const std::string& seed_name) const {
    ShapleyOptions so;
    so.exact_threshold = c_.exact_threshold;
    so.seed = stage_seed(seed_name);
    so.workers = c_.workers;
    if (c_.permutations && table.K > c_.exact_threshold) so.permutations = c_.permutations;
    return shapley(table, so);
  }

  void do_shapley() {
    std::vector<std::string> index;
    for (const auto& [id, fj] : failure_artifacts()) {
      const FailureModeSet modes = failure_modes_from_json(fj.at("library"));
      const auto evals = evaluations_from(fj.at("evaluations"));
      json j{{"v", kSchemaVersion}, {"cluster_id", id}};
      std::string text = "Cluster " + id + "\n";
      if (modes.size() == 0) {
        j["table"] = nullptr;
        j["attribution"] = nullptr;
        j["ranking"] = json::array();
        j["note"] = "no failure modes discovered";
        text += "(no failure modes discovered)\n";
      } else {
        const CharacteristicTable table = estimate_v(evals, modes.size(), c_.missing);
        const ShapleyResult result = attribute(table, "shapley/" + id);
        j["table"] = to_json(table, &modes);
        j["attribution"] = to_json(result, modes, c_.impact);
        j["ranking"] = rank_modes(modes, result);
        text += render_attribution_table(modes, result, c_.impact);
      }
      write("shapley/" + safe_name(id) + ".json", dump(j));
      write("shapley/" + safe_name(id) + ".txt", text);
      index.push_back(id);
    }
    write("shapley/index.json", dump(json{{"v", kSchemaVersion}, {"clusters", index}}));
  }

  void do_stability() {
    auto judge = make_judge();
    std::vector<std::string> index;
    for (const auto& [id, fj] : failure_artifacts()) {
      const Cluster cluster = cluster_from_json(fj.at("cluster"));
      const auto runs = runs_from(fj.at("runs"));
      const FailureModeSet full_modes = failure_modes_from_json(fj.at("library"));
      const json sj = read_json(out_ / ("shapley/" + safe_name(id) + ".json"));
      const auto reference = sj.at("ranking").get<std::vector<std::string>>();
      std::vector<std::string> notices;

      RankFn rank = [&](const std::vector<size_t>& members, uint64_t) -> std::vector<std::string> {
        std::vector<InstanceRun> sub;
        std::map<std::string, int> seen;
        for (size_t idx : members) {
          InstanceRun r = runs.at(idx);
          const int n = ++seen[r.problem.id];
          if (n > 1) r.problem.id += "#" + std::to_string(n);
          sub.push_back(std::move(r));
        }
        const ClusterWork w = analyse(cluster, std::move(sub), *judge, "failures");
        if (w.modes.size() == 0) return {};
        CharacteristicTable table;
        try {
          table = estimate_v(w.evaluations, w.modes.size(), MissingPolicy::nearest_superset);
        } catch (const CoverageError& e) {
          notices.push_back(std::string("subsample skipped: ") + e.what());
          return {};
        }
        std::vector<std::string> ranking;
        for (const auto& name : rank_modes(w.modes, attribute(table, "stability/" + id))) {
          std::string mapped = name;
          for (const auto& m : full_modes.modes) {
            if (m.name == name || judge->equivalent(m.name, name)) {
              mapped = m.name;
              break;
            }
          }
          if (std::find(ranking.begin(), ranking.end(), mapped) == ranking.end()) ranking.push_back(mapped);
        }
        return ranking;
      };
      StabilityOptions so = c_.stability;
      so.seed = stage_seed("stability/" + id);
      StabilityReport report = stability(runs.size(), reference, rank, so);
      for (auto& n : notices) report.notices.push_back(std::move(n));
      json j = to_json(report);
      j["cluster_id"] = id;
      write("stability/" + safe_name(id) + ".json", dump(j));
      write("stability/" + safe_name(id) + ".csv", stability_csv(report));
      index.push_back(id);
    }
    write("stability/index.json", dump(json{{"v", kSchemaVersion}, {"clusters", index}}));
  }

  // ---- report -------------------------------------------------------------

  void do_report() {
    const RenderedReport r = render_report(out_);
    write("report/report.txt", r.text);
    write("report/report.json", dump(r.data));
    write("report/stability.csv", r.stability_csv);
  }
};

}  // namespace

std::vector<std::string> verify_chain(const fs::path& out_dir) {
  std::vector<std::string> issues;
  std::map<std::string, Manifest> manifests;
  for (const auto& stage : stage_order()) {
    auto m = load_manifest(out_dir, stage);
    if (!m) continue;
    if (m->stage != stage) issues.push_back(stage + ": manifest names stage '" + m->stage + "'");
    for (auto& i : check_manifest(out_dir, *m)) issues.push_back(std::move(i));
    manifests[stage] = *m;
  }
  for (const auto& [stage, m] : manifests) {
    for (const auto& [parent, hash] : m.parents) {
      auto it = manifests.find(parent);
      if (it == manifests.end()) {
        issues.push_back(stage + ": parent manifest '" + parent + "' missing");
      } else if (it->second.manifest_hash != hash) {
        issues.push_back(stage + ": parent '" + parent + "' changed since this stage ran");
      }
    }
  }
  if (manifests.empty()) issues.push_back("no manifests under " + (out_dir / "manifests").string());
  return issues;
}

std::vector<StageResult> run_pipeline(const RunConfig& config, const ProviderSet& providers,
                                      const PipelineOptions& options) {
  Stages stages(config, providers, options);
  return stages.run();
}

}  // namespace truex
