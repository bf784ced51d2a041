#pragma once

// Subset selectors: the concept-diversity-gated uncertainty ranking plus the
// pure-uncertainty and random baselines.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cbdsel/concept_space.hpp"
#include "cbdsel/uncertainty.hpp"

namespace cbdsel {

/// A candidate joins during greedy selection only if entropy rises by more
/// than this many bits; exact ties are otherwise at the mercy of rounding.
inline constexpr double kEntropyGainTolerance = 1e-12;

enum class SelectionPhase { seed, greedy, fill };
std::string_view to_string(SelectionPhase phase) noexcept;

struct SelectionStep {
  std::size_t candidate = 0;
  SelectionPhase phase = SelectionPhase::greedy;
  bool accepted = false;
  double cbd_before = 0.0;
  double cbd_after = 0.0;

  friend bool operator==(const SelectionStep&, const SelectionStep&) = default;
};

struct SelectionProvenance {
  std::string strategy;
  std::string uncertainty_metric;
  std::size_t m = 0;
  std::size_t k = 0;
  double tau = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const SelectionProvenance&, const SelectionProvenance&) = default;
};

struct SelectionResult {
  std::vector<std::size_t> selected;
  std::size_t pool_size = 0;
  std::size_t budget = 0;
  std::size_t seed_count = 0;
  std::size_t fill_count = 0;
  /// Entropy of the final selection; only populated by select_cbd.
  double final_cbd = 0.0;
  std::vector<SelectionStep> steps;
  SelectionProvenance provenance;

  friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

/// Indices sorted by descending score, ascending index among equal scores.
std::vector<std::size_t> rank_descending(const Vector<double>& scores);

/// max(1, floor(b / 10)).
std::size_t seed_phase_size(std::size_t budget) noexcept;

/// Uncertainty-ranked greedy selection gated by concept entropy.
///
/// 1. Rank candidates by uncertainty (descending, index tie-break).
/// 2. Take the first seed_phase_size(b) unconditionally.
/// 3. Scan the rest in rank order; accept a candidate iff it strictly raises
///    the entropy of the selected set's concept histogram.
/// 4. If the pool runs out first, top up with the best-ranked rejected
///    candidates; their number is reported as fill_count.
SelectionResult select_cbd(std::span<const ConceptAssignment> assignments, const UncertaintyVector& uncertainty,
                           std::size_t budget);

SelectionResult select_top_uncertainty(const UncertaintyVector& uncertainty, std::size_t budget);

/// b distinct indices from a seeded partial Fisher-Yates shuffle.
SelectionResult select_random(std::size_t n, std::size_t budget, std::uint64_t seed);

/// floor(n * percent / 100), at least 1. percent must lie in (0, 100].
std::size_t budget_from_percent(std::size_t n, double percent);

/// JSON text with fixed field order:
/// {"pool_size","budget","seed_count","fill_count","final_cbd","selected",
///  "provenance":{"strategy","uncertainty_metric","m","k","tau","lambda","seed"},
///  "steps":[{"candidate","phase","accepted","cbd_before","cbd_after"}]}
std::string to_json(const SelectionResult& result);
SelectionResult selection_from_json(const std::string& text);

}  // namespace cbdsel
