#include "truex/config.hpp"

#include <cstdlib>
#include <set>

#include "truex/errors.hpp"
#include "truex/json_io.hpp"

namespace truex {

namespace fs = std::filesystem;

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw DataError("config: '" + where + "' must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw DataError("config: unknown key '" + where + "." + key + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError("config: bad value for '" + where + "." + key + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

fs::path existing(const fs::path& base, const std::string& p, const std::string& what) {
  fs::path path = resolve(base, p);
  if (!fs::exists(path)) throw DataError("config: " + what + " not found: " + path.string());
  return path;
}

Rational rational_value(const json& j, const char* key, Rational fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return rational_from_json(*it);
  } catch (const DataError&) {
    throw DataError("config: bad value for '" + where + "." + key + "'");
  }
}

ProviderBinding parse_binding(const json& j, const std::string& role, const fs::path& base) {
  const std::string where = "providers." + role;
  only_keys(j, where, {"kind", "script", "fallback", "base_url", "model", "timeout_seconds", "max_in_flight", "retry",
                       "cache"});
  ProviderBinding b;
  b.kind = get_or<std::string>(j, "kind", "mock", where);
  if (b.kind == "mock") {
    if (!j.contains("script")) throw DataError("config: " + where + " needs a script");
    b.script = existing(base, j.at("script").get<std::string>(), "mock script");
    const std::string fallback = get_or<std::string>(j, "fallback", "error", where);
    if (fallback == "echo") {
      b.fallback = MockFallback::echo;
    } else if (fallback != "error") {
      throw DataError("config: " + where + ".fallback must be error or echo");
    }
  } else if (b.kind == "http") {
    b.http.base_url = get_or<std::string>(j, "base_url", b.http.base_url, where);
    b.http.model = get_or<std::string>(j, "model", b.http.model, where);
    b.http.timeout_seconds = get_or<int>(j, "timeout_seconds", b.http.timeout_seconds, where);
    b.http.max_in_flight = get_or<int>(j, "max_in_flight", b.http.max_in_flight, where);
    if (j.contains("retry")) {
      const json& r = j["retry"];
      only_keys(r, where + ".retry", {"max_attempts", "initial_delay_ms", "multiplier", "max_delay_ms"});
      b.retry.max_attempts = get_or<int>(r, "max_attempts", b.retry.max_attempts, where + ".retry");
      b.retry.initial_delay =
          std::chrono::milliseconds(get_or<long>(r, "initial_delay_ms", b.retry.initial_delay.count(), where));
      b.retry.multiplier = get_or<double>(r, "multiplier", b.retry.multiplier, where + ".retry");
      b.retry.max_delay = std::chrono::milliseconds(get_or<long>(r, "max_delay_ms", b.retry.max_delay.count(), where));
    }
    b.cache = get_or<bool>(j, "cache", true, where);
  } else {
    throw DataError("config: " + where + ".kind must be mock or http");
  }
  return b;
}

}  // namespace

RunConfig parse_config(const json& j, const fs::path& base) {
  only_keys(j, "config", {"dataset", "seed", "workers", "output_dir", "cache_dir", "providers", "judge", "verify",
                          "neighborhood", "failures", "stability", "impact"});
  RunConfig c;
  c.raw = j;
  if (!j.contains("seed") || !j["seed"].is_number_unsigned()) {
    throw DataError("config: 'seed' is required (non-negative integer)");
  }
  c.seed = j["seed"].get<uint64_t>();
  c.workers = std::max(1, get_or<int>(j, "workers", 1, "config"));
  c.output_dir = resolve(base, get_or<std::string>(j, "output_dir", "out", "config"));
  if (j.contains("cache_dir") && !j["cache_dir"].is_null()) c.cache_dir = resolve(base, j["cache_dir"]);

  if (!j.contains("dataset")) throw DataError("config: 'dataset' is required");
  const json& d = j["dataset"];
  only_keys(d, "dataset", {"name", "problems", "specs", "originals"});
  c.dataset_name = get_or<std::string>(d, "name", "dataset", "dataset");
  if (!d.contains("problems")) throw DataError("config: dataset.problems is required");
  c.problems = existing(base, d["problems"].get<std::string>(), "problems file");
  if (d.contains("specs") && !d["specs"].is_null()) c.specs = existing(base, d["specs"], "specs file");
  if (d.contains("originals") && !d["originals"].is_null()) {
    c.originals = existing(base, d["originals"], "originals file");
  }

  if (j.contains("providers")) {
    const json& p = j["providers"];
    only_keys(p, "providers", {"default", "generator", "executor", "judge", "predictor"});
    for (const auto& [role, binding] : p.items()) c.providers[role] = parse_binding(binding, role, base);
  }

  if (j.contains("judge")) {
    const json& jj = j["judge"];
    only_keys(jj, "judge", {"kind", "threshold"});
    c.judge_kind = get_or<std::string>(jj, "kind", c.judge_kind, "judge");
    if (c.judge_kind != "overlap" && c.judge_kind != "provider") {
      throw DataError("config: judge.kind must be overlap or provider");
    }
    c.judge_threshold = get_or<double>(jj, "threshold", c.judge_threshold, "judge");
  }

  if (j.contains("verify")) {
    const json& v = j["verify"];
    only_keys(v, "verify", {"strategy", "interpreter", "temperature"});
    c.strategy = get_or<std::string>(v, "strategy", c.strategy, "verify");
    c.use_interpreter = get_or<bool>(v, "interpreter", c.use_interpreter, "verify");
    c.explain_temperature = get_or<double>(v, "temperature", c.explain_temperature, "verify");
  }
  if (!TemplateRegistry::builtin().find("explain." + c.strategy)) {
    throw DataError("config: unknown strategy '" + c.strategy + "'");
  }

  if (j.contains("neighborhood")) {
    const json& n = j["neighborhood"];
    only_keys(n, "neighborhood", {"anchors", "K", "regime", "kinds", "retry_budget", "temperature",
                                  "baseline_samples", "sample_temperature"});
    c.anchors = get_or<std::vector<std::string>>(n, "anchors", {}, "neighborhood");
    c.K = get_or<int>(n, "K", c.K, "neighborhood");
    if (c.K < 0) throw DataError("config: neighborhood.K must be >= 0");
    auto regime = regime_from_string(get_or<std::string>(n, "regime", "mild", "neighborhood"));
    if (!regime) throw DataError("config: neighborhood.regime must be mild, moderate or aggressive");
    c.regime = *regime;
    if (n.contains("kinds")) {
      c.kinds.clear();
      for (const auto& k : n["kinds"]) {
        auto kind = perturbation_kind_from_string(k.get<std::string>());
        if (!kind) throw DataError("config: unknown perturbation kind " + k.dump());
        c.kinds.push_back(*kind);
      }
    }
    c.retry_budget = get_or<int>(n, "retry_budget", c.retry_budget, "neighborhood");
    c.perturb_temperature = get_or<double>(n, "temperature", c.perturb_temperature, "neighborhood");
    c.baseline_samples = get_or<int>(n, "baseline_samples", c.baseline_samples, "neighborhood");
    c.sample_temperature = get_or<double>(n, "sample_temperature", c.sample_temperature, "neighborhood");
  }
  if (c.baseline_samples < 0) c.baseline_samples = c.K + 1;

  if (j.contains("failures")) {
    const json& f = j["failures"];
    only_keys(f, "failures", {"clusters", "K_max", "detector", "missing", "permutations", "exact_threshold",
                              "intervention_retries"});
    if (f.contains("clusters")) {
      for (const auto& cj : f["clusters"]) {
        only_keys(cj, "failures.clusters[]", {"id", "members", "pattern_summary"});
        ClusterSpec spec;
        spec.id = get_or<std::string>(cj, "id", "", "failures.clusters[]");
        spec.members = get_or<std::vector<std::string>>(cj, "members", {}, "failures.clusters[]");
        spec.pattern_summary = get_or<std::string>(cj, "pattern_summary", "", "failures.clusters[]");
        if (spec.id.empty()) throw DataError("config: every cluster needs an id");
        c.clusters.push_back(std::move(spec));
      }
    }
    c.K_max = get_or<size_t>(f, "K_max", c.K_max, "failures");
    if (c.K_max > 20) throw DataError("config: failures.K_max must be <= 20");
    c.detector = get_or<std::string>(f, "detector", c.detector, "failures");
    if (c.detector != "keywords" && c.detector != "provider") {
      throw DataError("config: failures.detector must be keywords or provider");
    }
    const std::string missing = get_or<std::string>(f, "missing", "nearest_superset", "failures");
    if (missing == "strict") {
      c.missing = MissingPolicy::strict;
    } else if (missing != "nearest_superset") {
      throw DataError("config: failures.missing must be strict or nearest_superset");
    }
    if (f.contains("permutations") && !f["permutations"].is_null()) c.permutations = f["permutations"].get<long>();
    c.exact_threshold = get_or<size_t>(f, "exact_threshold", c.exact_threshold, "failures");
    c.intervention_retries = get_or<int>(f, "intervention_retries", c.intervention_retries, "failures");
  }

  if (j.contains("stability")) {
    const json& s = j["stability"];
    only_keys(s, "stability", {"sizes", "repeats", "k", "with_replacement"});
    c.stability.sizes = get_or<std::vector<size_t>>(s, "sizes", c.stability.sizes, "stability");
    c.stability.repeats = get_or<int>(s, "repeats", c.stability.repeats, "stability");
    c.stability.k = get_or<size_t>(s, "k", c.stability.k, "stability");
    c.stability.with_replacement = get_or<bool>(s, "with_replacement", false, "stability");
  }

  if (j.contains("impact")) {
    const json& i = j["impact"];
    only_keys(i, "impact", {"low", "high"});
    c.impact.low = rational_value(i, "low", c.impact.low, "impact");
    c.impact.high = rational_value(i, "high", c.impact.high, "impact");
    if (c.impact.low > c.impact.high) throw DataError("config: impact.low must not exceed impact.high");
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError("config " + path.string() + ": " + e.what());
  }
  RunConfig c = parse_config(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
  c.config_path = path;
  return c;
}

bool ProviderSet::has(const std::string& role) const { return roles.count(role) || roles.count("default"); }

Provider& ProviderSet::get(const std::string& role) const {
  if (auto it = roles.find(role); it != roles.end()) return *it->second;
  if (auto it = roles.find("default"); it != roles.end()) return *it->second;
  throw DataError("no provider bound for role '" + role + "' (and no default)");
}

ProviderSet make_providers(const RunConfig& config) {
  ProviderSet set;
  std::optional<fs::path> cache_dir = config.cache_dir;
  if (const char* env = std::getenv("TRUE_CACHE_DIR"); env && *env) cache_dir = fs::path(env);
  std::map<std::string, std::shared_ptr<Provider>> mock_by_script;
  for (const auto& [role, b] : config.providers) {
    std::shared_ptr<Provider> p;
    if (b.kind == "mock") {
      const std::string key = b.script.string() + (b.fallback == MockFallback::echo ? "#echo" : "");
      auto& shared = mock_by_script[key];
      if (!shared) shared = std::make_shared<MockProvider>(MockProvider::load_script(b.script), b.fallback);
      p = shared;
    } else {
      HttpConfig http = b.http;
      if (const char* key = std::getenv("TRUE_API_KEY"); key && *key) http.api_key = key;
      p = std::make_shared<RetryingProvider>(std::make_shared<HttpProvider>(http), b.retry);
      if (b.cache && cache_dir) p = std::make_shared<CachingProvider>(p, *cache_dir);
    }
    set.roles[role] = p;
  }
  return set;
}

}  // namespace truex
