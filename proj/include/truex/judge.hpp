#pragma once

#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "truex/provider.hpp"

namespace truex {

// Lower-cased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

// |A ∩ B| / |A ∪ B| over token sets; 1 when both are empty.
double token_overlap(std::string_view a, std::string_view b);

// Semantic step equivalence. Implementations must be symmetric and
// deterministic for a fixed configuration.
class StepJudge {
 public:
  virtual ~StepJudge() = default;
  virtual bool equivalent(const std::string& a, const std::string& b) = 0;
};

class OverlapJudge : public StepJudge {
 public:
  explicit OverlapJudge(double threshold = 0.5) : threshold_(threshold) {}
  bool equivalent(const std::string& a, const std::string& b) override;

 private:
  double threshold_;
};

// Asks the judge.equivalent template; answers are memoized per unordered
// pair so each comparison costs at most one request.
class ProviderJudge : public StepJudge {
 public:
  explicit ProviderJudge(Provider& provider, double temperature = 0.0) : provider_(provider), temperature_(temperature) {}
  bool equivalent(const std::string& a, const std::string& b) override;
  size_t requests() const;

 private:
  Provider& provider_;
  double temperature_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, bool> memo_;
};

}  // namespace truex
