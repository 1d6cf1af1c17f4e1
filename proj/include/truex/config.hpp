#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "truex/failures.hpp"
#include "truex/neighborhood.hpp"
#include "truex/provider.hpp"

namespace truex {

inline constexpr const char* kToolVersion = "truex 1.0.0";

// How one provider role is served.
struct ProviderBinding {
  std::string kind = "mock";  // mock | http
  std::filesystem::path script;
  MockFallback fallback = MockFallback::error;
  HttpConfig http;
  RetryPolicy retry;
  bool cache = true;  // http only; cache directory from the run config
};

struct ClusterSpec {
  std::string id;
  std::vector<std::string> members;  // problem ids
  std::string pattern_summary;
};

struct RunConfig {
  std::filesystem::path config_path;
  std::string dataset_name;
  std::filesystem::path problems;
  std::optional<std::filesystem::path> specs;      // generated when absent
  std::optional<std::filesystem::path> originals;  // generated when absent
  uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> cache_dir;

  // role (generator, executor, judge, predictor, or default) -> binding
  std::map<std::string, ProviderBinding> providers;

  std::string judge_kind = "overlap";  // overlap | provider
  double judge_threshold = 0.5;

  std::string strategy = "cot";
  bool use_interpreter = true;
  double explain_temperature = 0.0;

  std::vector<std::string> anchors;
  int K = 10;
  Regime regime = Regime::mild;
  std::vector<PerturbationKind> kinds{PerturbationKind::parameter_variation};
  int retry_budget = 3;
  double perturb_temperature = 0.7;
  int baseline_samples = -1;  // -1 => K + 1
  double sample_temperature = 0.7;

  std::vector<ClusterSpec> clusters;
  size_t K_max = 5;
  std::string detector = "keywords";  // keywords | provider
  MissingPolicy missing = MissingPolicy::nearest_superset;
  std::optional<long> permutations;
  size_t exact_threshold = 12;
  int intervention_retries = 2;
  StabilityOptions stability;
  ImpactThresholds impact;

  json raw;  // parsed file, used for per-stage input hashes
};

// Reads a JSON run configuration. Relative paths resolve against the file's
// directory. Throws DataError on unknown keys, bad values, or missing files.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const json& j, const std::filesystem::path& base_dir);

// Providers for each role, built once per run.
struct ProviderSet {
  std::map<std::string, std::shared_ptr<Provider>> roles;
  // Throws DataError when neither the role nor "default" is bound.
  Provider& get(const std::string& role) const;
  bool has(const std::string& role) const;
};

// Mock scripts are loaded from disk; http bindings take TRUE_API_KEY from
// the environment and are wrapped in retry and (when a cache directory is
// configured or TRUE_CACHE_DIR is set) a response cache.
ProviderSet make_providers(const RunConfig& config);

}  // namespace truex
