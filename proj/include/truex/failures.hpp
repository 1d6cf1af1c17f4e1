#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "truex/dag.hpp"
#include "truex/errors.hpp"

namespace truex {

struct Cluster {
  std::string id;
  std::vector<Problem> members;
  std::string pattern_summary;
};

// Empty when the cluster has at least two members with unique ids.
std::vector<std::string> check_cluster(const Cluster& cluster);
json to_json(const Cluster& cluster);
Cluster cluster_from_json(const json& j);

struct FailureMode {
  std::string id;  // f1..fK in ranking order
  std::string name;
  std::string description;
  std::string error_type;
  std::string complexity;
  std::vector<std::string> keywords;  // keyword fallback of the detector
  long frequency = 0;                 // candidates merged into this mode

  bool operator==(const FailureMode&) const = default;
};

struct FailureModeSet {
  std::string cluster_id;
  std::vector<FailureMode> modes;
  size_t candidates = 0;
  std::vector<std::string> notices;

  size_t size() const { return modes.size(); }
};

struct DiscoveryOptions {
  size_t K_max = 5;
  double temperature = 0.0;
  std::optional<int64_t> seed;
  int workers = 1;
};

// Asks failures.discover about every incorrectly predicted member, merges
// candidates whose names the judge deems equivalent, keeps the K_max most
// frequent (ties by first appearance).
FailureModeSet discover_failure_modes(const std::string& cluster_id, const std::vector<InstanceRun>& runs,
                                      Provider& provider, StepJudge& judge, const DiscoveryOptions& options);

// Versioned library file; detectors and interventions name their templates.
json to_json(const FailureModeSet& set);
FailureModeSet failure_modes_from_json(const json& j);

// True when any keyword occurs (case-insensitively) in the statement or trace.
bool keyword_detect(const FailureMode& mode, const std::string& statement, const std::string& trace);

// Provider-backed detector. Without a provider, or when the reply is neither
// YES nor NO, the keyword fallback decides.
class FailureDetector {
 public:
  explicit FailureDetector(Provider* provider = nullptr, double temperature = 0.0)
      : provider_(provider), temperature_(temperature) {}
  bool detect(const FailureMode& mode, const Problem& problem, const std::string& trace) const;
  // Bit i set when modes[i] is present.
  uint32_t configuration(const FailureModeSet& set, const Problem& problem, const std::string& trace) const;

 private:
  Provider* provider_;
  double temperature_;
};

using Mask = uint32_t;

// "f1,f3" style listing of a mask; "{}" for the empty coalition.
std::string mask_label(Mask mask, size_t K);

struct PlannedVariant {
  std::string base_id;
  Mask target = 0;
};

// Every coalition other than the observed one, for every base instance.
std::vector<PlannedVariant> exact_plan(const std::vector<std::string>& base_ids, const std::vector<Mask>& observed,
                                       size_t K);

struct Variant {
  Problem problem;
  std::string base_id;
  Mask mask = 0;
  bool original = false;
};

struct AugmentedCluster {
  std::vector<Variant> variants;  // originals first, then planned variants in plan order
  std::vector<std::string> warnings;
};

struct InterventionOptions {
  int retry_budget = 2;
  double temperature = 0.0;
  std::optional<int64_t> seed;
  int workers = 1;
};

// Builds each planned variant by composing one inject or remove request per
// mode whose bit differs, in mode order, then recomputes the gold label with
// the reference procedure. Variants that are infeasible or fail relabeling
// after the retry budget are dropped with a warning.
AugmentedCluster intervene(const std::vector<Problem>& originals, const std::vector<Mask>& observed,
                           const FailureModeSet& modes, const std::vector<PlannedVariant>& plan, Provider& provider,
                           const InterventionOptions& options);

json to_json(const AugmentedCluster& c);
AugmentedCluster augmented_cluster_from_json(const json& j);

struct VariantEvaluation {
  std::string id;
  Mask mask = 0;
  bool correct = false;
};

// Originals reuse `original_runs` (matched by problem id); the other variants
// are explained and executed blind.
std::vector<VariantEvaluation> evaluate_variants(const AugmentedCluster& cluster,
                                                 const std::vector<InstanceRun>& original_runs, Provider& generator,
                                                 Provider* interpreter, const ExplainOptions& options);

class CoverageError : public DataError {
 public:
  CoverageError(const std::string& what, std::vector<Mask> missing) : DataError(what), missing_(std::move(missing)) {}
  const std::vector<Mask>& missing() const { return missing_; }

 private:
  std::vector<Mask> missing_;
};

struct CharacteristicTable {
  size_t K = 0;
  std::vector<std::optional<Rational>> v;  // indexed by mask, size 2^K
  std::vector<long> correct;
  std::vector<long> total;
  std::vector<bool> imputed;  // filled from the nearest covered coalition

  static CharacteristicTable from_values(size_t K, const std::vector<Rational>& values);
  std::vector<Mask> missing() const;
  bool complete() const { return missing().empty(); }
};

enum class MissingPolicy { strict, nearest_superset };

// v(S) = mean correctness over evaluations whose configuration is exactly S.
// Under nearest_superset an uncovered S takes the mean v of the covered
// supersets at the smallest distance (subsets when no superset is covered)
// and is flagged as imputed.
CharacteristicTable estimate_v(const std::vector<VariantEvaluation>& evaluations, size_t K, MissingPolicy policy);

json to_json(const CharacteristicTable& table, const FailureModeSet* modes = nullptr);

enum class ShapleyMode { exact, sampled };

struct ShapleyOptions {
  std::optional<long> permutations;  // set => sampled mode
  uint64_t seed = 0;
  size_t exact_threshold = 12;
  int workers = 1;
};

struct ShapleyResult {
  ShapleyMode mode = ShapleyMode::exact;
  std::vector<Rational> phi;      // attribution of u = 1 - v (harmful modes positive)
  std::vector<Rational> phi_raw;  // attribution of v itself
  long permutations = 0;
  uint64_t seed = 0;
};

ShapleyResult shapley(const CharacteristicTable& table, const ShapleyOptions& options = {});

struct ImpactThresholds {
  Rational low{1, 5};   // phi below this is Low
  Rational high{3, 10}; // phi at or above this is High
};

std::string impact_label(const Rational& phi, const ImpactThresholds& t = {});

// Mode names ordered by descending phi (ties by mode order).
std::vector<std::string> rank_modes(const FailureModeSet& modes, const ShapleyResult& result);

json to_json(const ShapleyResult& result, const FailureModeSet& modes, const ImpactThresholds& t = {});

// Failure Mode | Error Type | Complexity | Shapley phi | Impact
std::string render_attribution_table(const FailureModeSet& modes, const ShapleyResult& result,
                                     const ImpactThresholds& t = {});

// |A ∩ B| / |A ∪ B|; 1 when both are empty.
Rational jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

// (concordant - discordant) / (m(m-1)/2) over the m items present in both
// rankings; nullopt when m < 2.
std::optional<Rational> kendall_tau(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct StabilitySample {
  size_t size = 0;
  int repeat = 0;
  std::vector<size_t> members;  // indices into the cluster
  std::vector<std::string> top_k;
  Rational jaccard;
  std::optional<Rational> tau;
};

struct StabilityRow {
  size_t size = 0;
  size_t samples = 0;
  std::optional<Rational> mean_jaccard;
  std::optional<Rational> mean_tau;  // over samples where tau is defined
  size_t undefined_tau = 0;
};

struct StabilityReport {
  size_t k = 3;
  std::vector<std::string> reference_top_k;
  std::vector<StabilitySample> samples;
  std::vector<StabilityRow> rows;
  std::vector<std::string> notices;
};

struct StabilityOptions {
  std::vector<size_t> sizes{5, 10, 20, 40};
  int repeats = 1;
  size_t k = 3;
  bool with_replacement = false;
  uint64_t seed = 0;
};

// Ranked mode names for a subsample (member indices) and a seed.
using RankFn = std::function<std::vector<std::string>(const std::vector<size_t>& members, uint64_t seed)>;

StabilityReport stability(size_t cluster_size, const std::vector<std::string>& reference_ranking, const RankFn& rank,
                          const StabilityOptions& options);

json to_json(const StabilityReport& report);
// size,jaccard,kendall_tau per size (means; empty cell when undefined).
std::string stability_csv(const StabilityReport& report);

}  // namespace truex
