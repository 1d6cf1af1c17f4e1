#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "truex/executor.hpp"
#include "truex/model.hpp"
#include "truex/provider.hpp"

namespace truex {

enum class PerturbationKind { parameter_variation, entity_substitution, condition_adjustment };
enum class Regime { mild, moderate, aggressive };

std::string_view to_string(PerturbationKind k);
std::string_view to_string(Regime r);
std::optional<PerturbationKind> perturbation_kind_from_string(std::string_view s);
std::optional<Regime> regime_from_string(std::string_view s);

// Largest allowed relative change of a given under parameter_variation;
// nullopt means unbounded.
std::optional<Rational> regime_bound(Regime r);

struct Neighborhood {
  Problem anchor;
  std::vector<Problem> perturbed;
  std::vector<PerturbationKind> kinds;  // parallel to `perturbed`
  Regime regime = Regime::mild;
  std::vector<std::string> warnings;

  size_t size() const { return perturbed.size() + 1; }
  // Anchor first, then perturbations in index order.
  std::vector<const Problem*> instances() const;
};

struct NeighborhoodOptions {
  int K = 10;
  Regime regime = Regime::mild;
  std::vector<PerturbationKind> kinds{PerturbationKind::parameter_variation};
  int retry_budget = 3;  // attempts per perturbation index
  int workers = 1;
  double temperature = 0.7;
  std::optional<int64_t> seed;
};

// Parses reference_steps (STEP lines) into a spec. Throws DataError.
ExplanationSpec reference_spec(const Problem& problem);

// Re-executes the reference procedure with some givens replaced. Returns
// the tool-computed answer, or nullopt with the reason in *why.
std::optional<Answer> relabel(const Problem& base, const std::map<std::string, Rational>& overrides,
                              const std::vector<Choice>& choices, std::string* why = nullptr);

// Reference steps with the overridden bind_given literals rewritten.
std::vector<std::string> rewrite_reference(const Problem& base, const std::map<std::string, Rational>& overrides);

std::string render_choices(const std::vector<Choice>& choices);

Neighborhood generate_neighborhood(const Problem& anchor, Provider& generator, const NeighborhoodOptions& options);

json to_json(const Neighborhood& n);
Neighborhood neighborhood_from_json(const json& j);

}  // namespace truex
