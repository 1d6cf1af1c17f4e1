#include "truex/failures.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "truex/hash.hpp"
#include "truex/parallel.hpp"
#include "truex/sampling.hpp"

namespace truex {

std::vector<std::string> check_cluster(const Cluster& cluster) {
  std::vector<std::string> issues;
  if (cluster.members.size() < 2) issues.push_back("cluster '" + cluster.id + "' needs at least two members");
  std::set<std::string> ids;
  for (const auto& m : cluster.members) {
    if (!ids.insert(m.id).second) issues.push_back("duplicate member id '" + m.id + "'");
  }
  return issues;
}

json to_json(const Cluster& cluster) {
  json members = json::array();
  for (const auto& m : cluster.members) members.push_back(to_json(m));
  return {{"v", kSchemaVersion}, {"id", cluster.id}, {"pattern_summary", cluster.pattern_summary}, {"members", members}};
}

Cluster cluster_from_json(const json& j) {
  Cluster c;
  try {
    c.id = j.at("id").get<std::string>();
    c.pattern_summary = j.value("pattern_summary", "");
    for (const auto& m : j.at("members")) c.members.push_back(problem_from_json(m));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed cluster: ") + e.what());
  }
  return c;
}

namespace {

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::string normalize_name(const std::string& name) {
  std::string out;
  bool space = false;
  for (char ch : name) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

std::string reference_block(const Problem& p) {
  std::string out;
  for (const auto& line : p.reference_steps) out += line + "\n";
  return out;
}

std::string problem_block(const Problem& p) {
  std::string out = p.statement + "\n";
  if (!p.choices.empty()) out += render_choices(p.choices);
  return out;
}

std::string text_field(const json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

}  // namespace

FailureModeSet discover_failure_modes(const std::string& cluster_id, const std::vector<InstanceRun>& runs,
                                      Provider& provider, StepJudge& judge, const DiscoveryOptions& options) {
  FailureModeSet set;
  set.cluster_id = cluster_id;
  std::vector<const InstanceRun*> incorrect;
  for (const auto& run : runs) {
    if (run.outcome.correct.value_or(false)) continue;
    if (run.problem.reference_steps.empty()) {
      set.notices.push_back("member '" + run.problem.id + "' has no reference procedure; skipped");
      continue;
    }
    incorrect.push_back(&run);
  }
  if (incorrect.empty()) {
    set.notices.push_back("no incorrectly predicted members; no failure modes");
    return set;
  }

  std::vector<std::optional<json>> replies(incorrect.size());
  parallel_for(incorrect.size(), options.workers, [&](size_t i) {
    ProviderRequest req;
    req.template_id = "failures.discover";
    req.slots = {{"problem", problem_block(incorrect[i]->problem)},
                 {"trace", render_trace(*incorrect[i])},
                 {"reference", reference_block(incorrect[i]->problem)}};
    req.temperature = options.temperature;
    req.seed = options.seed;
    replies[i] = extract_json_object(provider.complete(req).text);
  });

  std::vector<FailureMode> groups;
  for (size_t i = 0; i < incorrect.size(); ++i) {
    const auto& reply = replies[i];
    if (!reply || !reply->contains("candidates") || !(*reply)["candidates"].is_array()) {
      set.notices.push_back("discovery reply for '" + incorrect[i]->problem.id + "' was not usable");
      continue;
    }
    for (const auto& c : (*reply)["candidates"]) {
      if (!c.is_object()) continue;
      FailureMode cand;
      cand.name = text_field(c, "name");
      if (normalize_name(cand.name).empty()) continue;
      cand.description = text_field(c, "description");
      cand.error_type = text_field(c, "error_type");
      cand.complexity = text_field(c, "complexity");
      if (c.contains("keywords") && c["keywords"].is_array()) {
        for (const auto& k : c["keywords"]) {
          if (k.is_string() && !k.get<std::string>().empty()) cand.keywords.push_back(lower(k.get<std::string>()));
        }
      }
      ++set.candidates;

      FailureMode* home = nullptr;
      for (auto& g : groups) {
        if (normalize_name(g.name) == normalize_name(cand.name) || judge.equivalent(g.name, cand.name)) {
          home = &g;
          break;
        }
      }
      if (!home) {
        cand.frequency = 0;
        groups.push_back(cand);
        home = &groups.back();
        home->keywords.clear();
      }
      ++home->frequency;
      for (const auto& k : cand.keywords) {
        if (std::find(home->keywords.begin(), home->keywords.end(), k) == home->keywords.end()) {
          home->keywords.push_back(k);
        }
      }
    }
  }

  std::stable_sort(groups.begin(), groups.end(),
                   [](const FailureMode& a, const FailureMode& b) { return a.frequency > b.frequency; });
  if (groups.size() > options.K_max) {
    set.notices.push_back(std::to_string(groups.size()) + " modes after merging; kept the " +
                          std::to_string(options.K_max) + " most frequent");
    groups.resize(options.K_max);
  }
  for (size_t i = 0; i < groups.size(); ++i) groups[i].id = "f" + std::to_string(i + 1);
  set.modes = std::move(groups);
  return set;
}

json to_json(const FailureModeSet& set) {
  json modes = json::array();
  for (const auto& m : set.modes) {
    modes.push_back({{"id", m.id},
                     {"name", m.name},
                     {"description", m.description},
                     {"error_type", m.error_type},
                     {"complexity", m.complexity},
                     {"frequency", m.frequency},
                     {"detector", {{"template", "failures.detect"}, {"keywords", m.keywords}}},
                     {"interventions", {{"inject", "failures.intervene"}, {"remove", "failures.intervene"}}}});
  }
  return {{"v", kSchemaVersion},
          {"cluster_id", set.cluster_id},
          {"candidates", set.candidates},
          {"modes", modes},
          {"notices", set.notices}};
}

FailureModeSet failure_modes_from_json(const json& j) {
  FailureModeSet set;
  try {
    if (j.value("v", kSchemaVersion) != kSchemaVersion) throw DataError("unsupported failure library version");
    set.cluster_id = j.value("cluster_id", "");
    set.candidates = j.value("candidates", size_t{0});
    for (const auto& mj : j.at("modes")) {
      FailureMode m;
      m.id = mj.at("id").get<std::string>();
      m.name = mj.at("name").get<std::string>();
      m.description = mj.value("description", "");
      m.error_type = mj.value("error_type", "");
      m.complexity = mj.value("complexity", "");
      m.frequency = mj.value("frequency", 0L);
      if (mj.contains("detector")) m.keywords = mj["detector"].value("keywords", std::vector<std::string>{});
      set.modes.push_back(std::move(m));
    }
    if (j.contains("notices")) set.notices = j["notices"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed failure library: ") + e.what());
  }
  std::set<std::string> ids;
  for (const auto& m : set.modes) {
    if (!ids.insert(m.id).second) throw DataError("duplicate failure mode id '" + m.id + "'");
  }
  if (set.modes.size() > 31) throw DataError("at most 31 failure modes are supported");
  return set;
}

bool keyword_detect(const FailureMode& mode, const std::string& statement, const std::string& trace) {
  const std::string hay = lower(statement) + "\n" + lower(trace);
  for (const auto& k : mode.keywords) {
    if (!k.empty() && hay.find(lower(k)) != std::string::npos) return true;
  }
  return false;
}

bool FailureDetector::detect(const FailureMode& mode, const Problem& problem, const std::string& trace) const {
  if (provider_) {
    ProviderRequest req;
    req.template_id = "failures.detect";
    req.slots = {{"mode", mode.name},
                 {"mode_description", mode.description},
                 {"problem", problem_block(problem)},
                 {"trace", trace}};
    req.temperature = temperature_;
    std::string reply = provider_->complete(req).text;
    reply.erase(0, reply.find_first_not_of(" \t\r\n"));
    const std::string head = lower(reply.substr(0, 3));
    if (head == "yes") return true;
    if (head.rfind("no", 0) == 0) return false;
  }
  return keyword_detect(mode, problem.statement, trace);
}

uint32_t FailureDetector::configuration(const FailureModeSet& set, const Problem& problem,
                                        const std::string& trace) const {
  uint32_t mask = 0;
  for (size_t i = 0; i < set.modes.size(); ++i) {
    if (detect(set.modes[i], problem, trace)) mask |= 1u << i;
  }
  return mask;
}

std::string mask_label(Mask mask, size_t K) {
  std::string out;
  for (size_t i = 0; i < K; ++i) {
    if (!(mask & (1u << i))) continue;
    if (!out.empty()) out += ",";
    out += "f" + std::to_string(i + 1);
  }
  return out.empty() ? "{}" : out;
}

namespace {

std::string mask_bits(Mask mask, size_t K) {
  std::string out;
  for (size_t i = 0; i < K; ++i) out += (mask & (1u << i)) ? '1' : '0';
  return out;
}

}  // namespace

std::vector<PlannedVariant> exact_plan(const std::vector<std::string>& base_ids, const std::vector<Mask>& observed,
                                       size_t K) {
  if (base_ids.size() != observed.size()) throw DataError("plan: one observed configuration per base instance");
  std::vector<PlannedVariant> plan;
  const Mask full = K == 0 ? 0 : static_cast<Mask>((1ull << K) - 1);
  for (size_t b = 0; b < base_ids.size(); ++b) {
    for (Mask s = 0; s <= full; ++s) {
      if (s != observed[b]) plan.push_back({base_ids[b], s});
      if (s == full) break;
    }
  }
  return plan;
}

namespace {

struct Built {
  std::optional<Variant> variant;
  std::vector<std::string> warnings;
};

Built build_variant(const Problem& base, Mask observed, const FailureModeSet& modes, const PlannedVariant& planned,
                    Provider& provider, const InterventionOptions& options) {
  Built out;
  const size_t K = modes.size();
  const std::string tag = base.id + " -> " + mask_label(planned.target, K);
  std::map<std::string, Rational> overrides;
  std::string statement = base.statement;
  std::vector<std::string> reference = base.reference_steps;
  std::optional<Answer> gold;
  std::string actions;

  for (size_t i = 0; i < K; ++i) {
    const Mask bit = 1u << i;
    if ((observed & bit) == (planned.target & bit)) continue;
    const std::string action = (planned.target & bit) ? "inject" : "remove";
    bool done = false;
    for (int attempt = 1; attempt <= std::max(1, options.retry_budget) && !done; ++attempt) {
      Problem current = base;
      current.statement = statement;
      current.reference_steps = reference;
      ProviderRequest req;
      req.template_id = "failures.intervene";
      req.slots = {{"action", action},
                   {"mode", modes.modes[i].name},
                   {"mode_description", modes.modes[i].description},
                   {"problem", problem_block(current)},
                   {"reference", reference_block(current)},
                   {"attempt", std::to_string(attempt)}};
      req.temperature = options.temperature;
      req.seed = options.seed;
      auto reply = extract_json_object(provider.complete(req).text);
      if (reply && reply->value("infeasible", false)) {
        out.warnings.push_back("variant " + tag + ": " + action + " " + modes.modes[i].id + " infeasible; dropped");
        return out;
      }
      const std::string next = reply ? text_field(*reply, "statement") : std::string();
      if (next.empty()) {
        out.warnings.push_back("variant " + tag + ": unusable intervention reply (attempt " +
                               std::to_string(attempt) + ")");
        continue;
      }
      std::map<std::string, Rational> merged = overrides;
      try {
        if (reply->contains("bindings") && (*reply)["bindings"].is_object()) {
          for (const auto& [name, value] : (*reply)["bindings"].items()) merged[name] = rational_from_json(value);
        }
      } catch (const DataError& e) {
        out.warnings.push_back("variant " + tag + ": bad binding (" + e.what() + ")");
        continue;
      }
      std::string why;
      auto relabeled = relabel(base, merged, base.choices, &why);
      if (!relabeled) {
        out.warnings.push_back("variant " + tag + ": relabel failed (" + why + ")");
        continue;
      }
      overrides = std::move(merged);
      statement = next;
      reference = rewrite_reference(base, overrides);
      gold = relabeled;
      if (!actions.empty()) actions += ",";
      actions += action + ":" + modes.modes[i].id;
      done = true;
    }
    if (!done) {
      out.warnings.push_back("variant " + tag + ": dropped after " + std::to_string(std::max(1, options.retry_budget)) +
                             " attempts");
      return out;
    }
  }
  if (!gold) {
    out.warnings.push_back("variant " + tag + ": target equals the observed configuration; skipped");
    return out;
  }
  Variant v;
  v.problem = base;
  v.problem.id = base.id + "~m" + mask_bits(planned.target, K);
  v.problem.statement = statement;
  v.problem.reference_steps = reference;
  v.problem.answer = *gold;
  v.problem.metadata["base"] = base.id;
  v.problem.metadata["configuration"] = mask_label(planned.target, K);
  v.problem.metadata["interventions"] = actions;
  v.base_id = base.id;
  v.mask = planned.target;
  auto issues = check_problem(v.problem);
  if (!issues.empty()) {
    out.warnings.push_back("variant " + tag + ": " + issues.front());
    return out;
  }
  out.variant = std::move(v);
  return out;
}

}  // namespace

AugmentedCluster intervene(const std::vector<Problem>& originals, const std::vector<Mask>& observed,
                           const FailureModeSet& modes, const std::vector<PlannedVariant>& plan, Provider& provider,
                           const InterventionOptions& options) {
  if (originals.size() != observed.size()) throw DataError("intervene: one observed configuration per original");
  AugmentedCluster out;
  std::map<std::string, size_t> by_id;
  for (size_t i = 0; i < originals.size(); ++i) {
    by_id[originals[i].id] = i;
    out.variants.push_back({originals[i], originals[i].id, observed[i], true});
  }
  if (plan.empty()) return out;
  if (modes.modes.empty()) throw DataError("intervene: no failure modes");
  for (const auto& p : plan) {
    if (!by_id.count(p.base_id)) throw DataError("intervene: unknown base instance '" + p.base_id + "'");
  }
  std::vector<Built> built(plan.size());
  parallel_for(plan.size(), options.workers, [&](size_t i) {
    const size_t b = by_id.at(plan[i].base_id);
    built[i] = build_variant(originals[b], observed[b], modes, plan[i], provider, options);
  });
  std::set<std::string> seen;
  for (const auto& v : out.variants) seen.insert(v.problem.id);
  for (auto& b : built) {
    for (auto& w : b.warnings) out.warnings.push_back(std::move(w));
    if (!b.variant) continue;
    if (!seen.insert(b.variant->problem.id).second) continue;  // duplicate plan entry
    out.variants.push_back(std::move(*b.variant));
  }
  return out;
}

json to_json(const AugmentedCluster& c) {
  json variants = json::array();
  for (const auto& v : c.variants) {
    variants.push_back(
        {{"base_id", v.base_id}, {"mask", v.mask}, {"original", v.original}, {"problem", to_json(v.problem)}});
  }
  return {{"v", kSchemaVersion}, {"variants", variants}, {"warnings", c.warnings}};
}

AugmentedCluster augmented_cluster_from_json(const json& j) {
  AugmentedCluster c;
  try {
    for (const auto& vj : j.at("variants")) {
      c.variants.push_back({problem_from_json(vj.at("problem")), vj.at("base_id").get<std::string>(),
                            vj.at("mask").get<Mask>(), vj.at("original").get<bool>()});
    }
    if (j.contains("warnings")) c.warnings = j["warnings"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed augmented cluster: ") + e.what());
  }
  return c;
}

std::vector<VariantEvaluation> evaluate_variants(const AugmentedCluster& cluster,
                                                 const std::vector<InstanceRun>& original_runs, Provider& generator,
                                                 Provider* interpreter, const ExplainOptions& options) {
  std::map<std::string, const InstanceRun*> runs;
  for (const auto& r : original_runs) runs[r.problem.id] = &r;
  std::vector<VariantEvaluation> out(cluster.variants.size());
  std::vector<const Problem*> todo;
  std::vector<size_t> slots;
  for (size_t i = 0; i < cluster.variants.size(); ++i) {
    const auto& v = cluster.variants[i];
    out[i].id = v.problem.id;
    out[i].mask = v.mask;
    auto it = runs.find(v.problem.id);
    if (v.original && it != runs.end()) {
      out[i].correct = it->second->outcome.correct.value_or(false);
    } else {
      todo.push_back(&v.problem);
      slots.push_back(i);
    }
  }
  auto fresh = run_instances(todo, generator, interpreter, options);
  for (size_t k = 0; k < fresh.size(); ++k) out[slots[k]].correct = fresh[k].outcome.correct.value_or(false);
  return out;
}

CharacteristicTable CharacteristicTable::from_values(size_t K, const std::vector<Rational>& values) {
  if (K > 31 || values.size() != (size_t{1} << K)) throw DataError("table needs 2^K values");
  CharacteristicTable t;
  t.K = K;
  for (const auto& v : values) t.v.emplace_back(v);
  t.correct.assign(values.size(), 0);
  t.total.assign(values.size(), 0);
  t.imputed.assign(values.size(), false);
  return t;
}

std::vector<Mask> CharacteristicTable::missing() const {
  std::vector<Mask> out;
  for (size_t m = 0; m < v.size(); ++m) {
    if (!v[m]) out.push_back(static_cast<Mask>(m));
  }
  return out;
}

namespace {

std::string list_masks(const std::vector<Mask>& masks, size_t K) {
  std::string out;
  for (Mask m : masks) out += (out.empty() ? "" : " ") + std::string("[") + mask_label(m, K) + "]";
  return out;
}

std::optional<Rational> nearest(const CharacteristicTable& t, Mask s, bool supersets) {
  const size_t n = t.v.size();
  for (int d = 1; d <= static_cast<int>(t.K); ++d) {
    Rational sum = 0;
    long hits = 0;
    for (size_t m = 0; m < n; ++m) {
      const Mask other = static_cast<Mask>(m);
      if (!t.v[m] || t.imputed[m]) continue;
      const bool related = supersets ? (other & s) == s : (other & s) == other;
      if (!related || std::popcount(other ^ s) != d) continue;
      sum += *t.v[m];
      ++hits;
    }
    if (hits > 0) return sum / hits;
  }
  return std::nullopt;
}

}  // namespace

CharacteristicTable estimate_v(const std::vector<VariantEvaluation>& evaluations, size_t K, MissingPolicy policy) {
  if (K > 20) throw DataError("estimate_v: too many failure modes for a full table");
  CharacteristicTable t;
  t.K = K;
  const size_t n = size_t{1} << K;
  t.v.assign(n, std::nullopt);
  t.correct.assign(n, 0);
  t.total.assign(n, 0);
  t.imputed.assign(n, false);
  for (const auto& e : evaluations) {
    if (e.mask >= n) throw DataError("evaluation '" + e.id + "' has a configuration outside 2^K");
    t.total[e.mask] += 1;
    t.correct[e.mask] += e.correct ? 1 : 0;
  }
  for (size_t m = 0; m < n; ++m) {
    if (t.total[m] > 0) t.v[m] = Rational(t.correct[m], t.total[m]);
  }
  const auto missing = t.missing();
  if (missing.empty()) return t;
  if (policy == MissingPolicy::strict) {
    throw CoverageError("uncovered coalitions: " + list_masks(missing, K), missing);
  }
  std::vector<std::optional<Rational>> fills;
  for (Mask s : missing) {
    auto fill = nearest(t, s, true);
    if (!fill) fill = nearest(t, s, false);
    fills.push_back(fill);
  }
  std::vector<Mask> still;
  for (size_t i = 0; i < missing.size(); ++i) {
    if (!fills[i]) {
      still.push_back(missing[i]);
      continue;
    }
    t.v[missing[i]] = fills[i];
    t.imputed[missing[i]] = true;
  }
  if (!still.empty()) throw CoverageError("no covered coalition to impute from: " + list_masks(still, K), still);
  return t;
}

json to_json(const CharacteristicTable& table, const FailureModeSet* modes) {
  json rows = json::array();
  for (size_t m = 0; m < table.v.size(); ++m) {
    json row{{"mask", m}, {"coalition", mask_label(static_cast<Mask>(m), table.K)}};
    row["v"] = table.v[m] ? json(to_string(*table.v[m])) : json(nullptr);
    row["v_4dp"] = table.v[m] ? json(to_fixed(*table.v[m], 4)) : json(nullptr);
    row["correct"] = table.correct[m];
    row["total"] = table.total[m];
    row["imputed"] = static_cast<bool>(table.imputed[m]);
    rows.push_back(row);
  }
  json j{{"v", kSchemaVersion}, {"K", table.K}, {"coalitions", rows}};
  if (modes) {
    json names = json::array();
    for (const auto& m : modes->modes) names.push_back({{"id", m.id}, {"name", m.name}});
    j["modes"] = names;
  }
  return j;
}

ShapleyResult shapley(const CharacteristicTable& table, const ShapleyOptions& options) {
  const size_t K = table.K;
  if (table.v.size() != (size_t{1} << K)) throw DataError("shapley: table size is not 2^K");
  const auto missing = table.missing();
  if (!missing.empty()) throw CoverageError("shapley: uncovered coalitions: " + list_masks(missing, K), missing);

  std::vector<Rational> u(table.v.size());
  for (size_t m = 0; m < u.size(); ++m) u[m] = Rational(1) - *table.v[m];

  ShapleyResult r;
  r.phi.assign(K, Rational(0));
  if (options.permutations) {
    if (*options.permutations <= 0) throw DataError("shapley: permutation budget must be positive");
    r.mode = ShapleyMode::sampled;
    r.permutations = *options.permutations;
    r.seed = options.seed;
    std::mt19937_64 rng(options.seed);
    std::vector<size_t> order(K);
    for (long p = 0; p < *options.permutations; ++p) {
      for (size_t i = 0; i < K; ++i) order[i] = i;
      fisher_yates(order, rng);
      Mask s = 0;
      for (size_t i : order) {
        const Mask next = s | (1u << i);
        r.phi[i] += u[next] - u[s];
        s = next;
      }
    }
    for (auto& phi : r.phi) phi /= *options.permutations;
  } else {
    if (K > options.exact_threshold) {
      throw DataError("shapley: K=" + std::to_string(K) + " exceeds the exact threshold " +
                      std::to_string(options.exact_threshold) + "; set a permutation budget");
    }
    r.mode = ShapleyMode::exact;
    // |S|!(K-|S|-1)!/K! for each coalition size.
    std::vector<Rational> weight(K);
    auto factorial = [](size_t n) {
      BigInt f = 1;
      for (size_t i = 2; i <= n; ++i) f *= i;
      return f;
    };
    for (size_t s = 0; s < K; ++s) weight[s] = Rational(factorial(s) * factorial(K - s - 1), factorial(K));
    parallel_for(K, options.workers, [&](size_t i) {
      const Mask bit = 1u << i;
      Rational sum = 0;
      for (size_t m = 0; m < u.size(); ++m) {
        if (m & bit) continue;
        sum += weight[std::popcount(static_cast<Mask>(m))] * (u[m | bit] - u[m]);
      }
      r.phi[i] = sum;
    });
  }
  for (const auto& phi : r.phi) r.phi_raw.push_back(-phi);
  return r;
}

std::string impact_label(const Rational& phi, const ImpactThresholds& t) {
  if (phi < t.low) return "Low";
  if (phi < t.high) return "Med.";
  return "High";
}

std::vector<std::string> rank_modes(const FailureModeSet& modes, const ShapleyResult& result) {
  if (modes.modes.size() != result.phi.size()) throw DataError("rank_modes: mode count differs from result");
  std::vector<size_t> idx(modes.modes.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return result.phi[a] > result.phi[b]; });
  std::vector<std::string> out;
  for (size_t i : idx) out.push_back(modes.modes[i].name);
  return out;
}

json to_json(const ShapleyResult& result, const FailureModeSet& modes, const ImpactThresholds& t) {
  if (modes.modes.size() != result.phi.size()) throw DataError("shapley report: mode count differs from result");
  json rows = json::array();
  for (size_t i = 0; i < result.phi.size(); ++i) {
    const auto& m = modes.modes[i];
    rows.push_back({{"id", m.id},
                    {"name", m.name},
                    {"error_type", m.error_type},
                    {"complexity", m.complexity},
                    {"phi", to_fixed(result.phi[i], 4)},
                    {"phi_exact", to_string(result.phi[i])},
                    {"phi_raw_exact", to_string(result.phi_raw[i])},
                    {"impact", impact_label(result.phi[i], t)}});
  }
  json j{{"v", kSchemaVersion},
         {"cluster_id", modes.cluster_id},
         {"attributed", "1 - v"},
         {"mode", result.mode == ShapleyMode::exact ? "exact" : "sampled"},
         {"thresholds", {{"low", to_string(t.low)}, {"high", to_string(t.high)}}},
         {"modes", rows}};
  if (result.mode == ShapleyMode::sampled) {
    j["permutations"] = result.permutations;
    j["seed"] = result.seed;
  }
  return j;
}

std::string render_attribution_table(const FailureModeSet& modes, const ShapleyResult& result,
                                     const ImpactThresholds& t) {
  std::vector<std::array<std::string, 5>> rows{{"Failure Mode", "Error Type", "Complexity", "Shapley phi", "Impact"}};
  for (size_t i = 0; i < modes.modes.size() && i < result.phi.size(); ++i) {
    const auto& m = modes.modes[i];
    rows.push_back({m.name, m.error_type.empty() ? "-" : m.error_type, m.complexity.empty() ? "-" : m.complexity,
                    to_fixed(result.phi[i], 2), impact_label(result.phi[i], t)});
  }
  std::array<size_t, 5> width{};
  for (const auto& row : rows) {
    for (size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (size_t c = 0; c < 5; ++c) {
      std::string cell = rows[r][c];
      cell.resize(width[c], ' ');
      line += (c ? " | " : "") + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (r == 0) {
      std::string rule;
      for (size_t c = 0; c < 5; ++c) rule += (c ? "-+-" : "") + std::string(width[c], '-');
      out += rule + "\n";
    }
  }
  return out;
}

Rational jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return Rational(1);
  long inter = 0;
  for (const auto& x : sa) inter += sb.count(x);
  const long uni = static_cast<long>(sa.size() + sb.size()) - inter;
  return Rational(inter, uni);
}

std::optional<Rational> kendall_tau(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::string, size_t> pos_b;
  for (size_t i = 0; i < b.size(); ++i) pos_b.emplace(b[i], i);
  std::vector<std::pair<size_t, size_t>> shared;  // (position in a, position in b)
  std::set<std::string> used;
  for (size_t i = 0; i < a.size(); ++i) {
    auto it = pos_b.find(a[i]);
    if (it != pos_b.end() && used.insert(a[i]).second) shared.emplace_back(i, it->second);
  }
  const long m = static_cast<long>(shared.size());
  if (m < 2) return std::nullopt;
  long concordant = 0, discordant = 0;
  for (long i = 0; i < m; ++i) {
    for (long j = i + 1; j < m; ++j) {
      const bool same = (shared[i].first < shared[j].first) == (shared[i].second < shared[j].second);
      (same ? concordant : discordant) += 1;
    }
  }
  return Rational(concordant - discordant, m * (m - 1) / 2);
}

StabilityReport stability(size_t cluster_size, const std::vector<std::string>& reference_ranking, const RankFn& rank,
                          const StabilityOptions& options) {
  StabilityReport report;
  report.k = options.k;
  report.reference_top_k.assign(reference_ranking.begin(),
                                reference_ranking.begin() + std::min(options.k, reference_ranking.size()));
  for (size_t size : options.sizes) {
    StabilityRow row;
    row.size = size;
    if (size == 0 || cluster_size == 0) {
      report.notices.push_back("size " + std::to_string(size) + " skipped: empty sample");
      report.rows.push_back(row);
      continue;
    }
    if (size > cluster_size && !options.with_replacement) {
      report.notices.push_back("size " + std::to_string(size) + " skipped: cluster has " +
                               std::to_string(cluster_size) + " members and sampling is without replacement");
      report.rows.push_back(row);
      continue;
    }
    Rational jac_sum = 0, tau_sum = 0;
    long tau_n = 0;
    for (int rep = 0; rep < options.repeats; ++rep) {
      const uint64_t seed =
          derive_seed(options.seed, "stability/" + std::to_string(size) + "/" + std::to_string(rep));
      std::mt19937_64 rng(seed);
      StabilitySample s;
      s.size = size;
      s.repeat = rep;
      if (size <= cluster_size) {
        std::vector<size_t> all(cluster_size);
        for (size_t i = 0; i < cluster_size; ++i) all[i] = i;
        fisher_yates(all, rng);
        s.members.assign(all.begin(), all.begin() + static_cast<long>(size));
      } else {
        for (size_t i = 0; i < size; ++i) s.members.push_back(static_cast<size_t>(uniform_below(rng, cluster_size)));
      }
      std::sort(s.members.begin(), s.members.end());
      const auto ranking = rank(s.members, seed);
      s.top_k.assign(ranking.begin(), ranking.begin() + std::min(options.k, ranking.size()));
      s.jaccard = jaccard(s.top_k, report.reference_top_k);
      s.tau = kendall_tau(s.top_k, report.reference_top_k);
      jac_sum += s.jaccard;
      if (s.tau) {
        tau_sum += *s.tau;
        ++tau_n;
      } else {
        ++row.undefined_tau;
      }
      ++row.samples;
      report.samples.push_back(std::move(s));
    }
    if (row.samples > 0) row.mean_jaccard = jac_sum / static_cast<long>(row.samples);
    if (tau_n > 0) row.mean_tau = tau_sum / tau_n;
    report.rows.push_back(row);
  }
  return report;
}

namespace {

json opt_fixed(const std::optional<Rational>& v) { return v ? json(to_fixed(*v, 4)) : json(nullptr); }

}  // namespace

json to_json(const StabilityReport& report) {
  json samples = json::array();
  for (const auto& s : report.samples) {
    samples.push_back({{"size", s.size},
                       {"repeat", s.repeat},
                       {"members", s.members},
                       {"top_k", s.top_k},
                       {"jaccard", to_fixed(s.jaccard, 4)},
                       {"kendall_tau", opt_fixed(s.tau)}});
  }
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"size", r.size},
                    {"samples", r.samples},
                    {"jaccard", opt_fixed(r.mean_jaccard)},
                    {"kendall_tau", opt_fixed(r.mean_tau)},
                    {"undefined_tau", r.undefined_tau}});
  }
  return {{"v", kSchemaVersion},   {"k", report.k},   {"reference_top_k", report.reference_top_k},
          {"samples", samples},    {"rows", rows},    {"notices", report.notices}};
}

std::string stability_csv(const StabilityReport& report) {
  std::string out = "size,jaccard,kendall_tau\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.size) + "," + (r.mean_jaccard ? to_fixed(*r.mean_jaccard, 4) : "") + "," +
           (r.mean_tau ? to_fixed(*r.mean_tau, 4) : "") + "\n";
  }
  return out;
}

}  // namespace truex
