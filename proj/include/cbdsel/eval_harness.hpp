#pragma once

// Desk-scale reproductions of the diversity correlation study, the scoring
// and selection timing studies, and the normalised accuracy-improvement
// formula.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbdsel/concept_space.hpp"
#include "cbdsel/diversity.hpp"
#include "cbdsel/selector.hpp"
#include "cbdsel/types.hpp"

namespace cbdsel {

// ---------------------------------------------------------------------------
// Controlled-diversity subsets

/// Fixed-size subsets whose class coverage grows along `schedule`.
///
/// Classes enter in ascending id order. The first subset covers the first
/// schedule[0] classes; each later step brings in the next classes, each new
/// class replacing `replace_per_class` inputs evicted uniformly at random from
/// those whose class would keep at least one member.
struct ControlledSubsetPlan {
  std::size_t subset_size = 0;
  std::vector<std::size_t> schedule;
  std::uint64_t seed = 0;
  /// 0 means subset_size / schedule.back().
  std::size_t replace_per_class = 0;
  /// Independent passes over the schedule; each contributes |schedule| subsets.
  std::size_t repetitions = 1;

  std::size_t replacement_count() const noexcept;
  std::size_t subsets_per_plan() const noexcept { return schedule.size() * repetitions; }
};

/// Throws ConfigError for infeasible plans.
void validate_plan(const ControlledSubsetPlan& plan, const LabelVector& labels);

/// Subset i covers exactly plan.schedule[i % |schedule|] classes.
std::vector<std::vector<std::size_t>> build_controlled_subsets(const LabelVector& labels,
                                                               const ControlledSubsetPlan& plan);

// ---------------------------------------------------------------------------
// Rank correlation

/// 1-based ranks; tied values share their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Throws DegenerateError when either
/// input has no rank variance.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct CorrelationRow {
  std::size_t subset_id = 0;
  std::size_t class_count = 0;
  double cbd = 0.0;
  double gd = 0.0;
};

struct CorrelationReport {
  std::uint64_t seed = 0;
  std::size_t subset_size = 0;
  std::vector<CorrelationRow> rows;
  double rho = 0.0;

  std::size_t n_subsets() const noexcept { return rows.size(); }
};

struct Rq1Options {
  std::size_t m = kDefaultTopM;
  double gd_eps = kDefaultGdJitter;
  unsigned threads = 1;
};

/// One report per plan: CBD over top-m RCS concepts of `embeddings_shared`,
/// GD over `features_gd` (or the shared embeddings when absent).
std::vector<CorrelationReport> run_rq1(const EmbeddingMatrix& embeddings_shared,
                                       const std::optional<EmbeddingMatrix>& features_gd, const Rcs& rcs,
                                       const LabelVector& labels, std::span<const ControlledSubsetPlan> plans,
                                       const Rq1Options& options = {});

// ---------------------------------------------------------------------------
// Timing

inline constexpr std::size_t kWarmupIterations = 3;

struct TimingStats {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  std::size_t repeats = 0;
};

TimingStats summarize_ms(std::span<const double> samples_ms);

struct DiversityTimingRow {
  std::size_t subset_size = 0;
  TimingStats cbd;
  TimingStats gd;

  double gd_over_cbd() const noexcept { return cbd.mean_ms > 0.0 ? gd.mean_ms / cbd.mean_ms : 0.0; }
};

/// Mean wall-clock scoring time of cbd_score and gd_score on the same
/// `repeats` seeded random subsets per size. Three warm-up subsets per size
/// are scored and discarded.
std::vector<DiversityTimingRow> time_diversity(const EmbeddingMatrix& features_gd,
                                               std::span<const ConceptAssignment> assignments,
                                               std::span<const std::size_t> sizes, std::size_t repeats,
                                               std::uint64_t seed, double gd_eps = kDefaultGdJitter);

enum class SelectorKind { cbd, top_uncertainty, random };
std::string_view to_string(SelectorKind kind) noexcept;
SelectorKind parse_selector_kind(std::string_view text);

struct SelectionPool {
  const ProbabilityMatrix& probs;
  std::span<const ConceptAssignment> assignments;
};

struct SelectionTimingRow {
  SelectorKind selector = SelectorKind::cbd;
  std::size_t budget = 0;
  TimingStats time;
};

/// Wall-clock time per selector and budget. Uncertainty-driven selectors are
/// timed from the probability matrix onward, so margin scoring and ranking
/// are included for both the cbd and top-uncertainty selectors.
std::vector<SelectionTimingRow> time_selection(const SelectionPool& pool, std::span<const SelectorKind> selectors,
                                               std::span<const std::size_t> budgets, std::size_t repeats,
                                               std::uint64_t seed);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Accuracy improvement

/// 100 * (fine - orig) / (max - orig). Throws DegenerateError when max == orig.
double improvement_pct(double acc_fine, double acc_orig, double acc_max);

// ---------------------------------------------------------------------------
// Reports

std::string correlation_csv(std::span<const CorrelationReport> reports);
std::string correlation_table(std::span<const CorrelationReport> reports);
std::string diversity_timing_csv(std::span<const DiversityTimingRow> rows);
std::string diversity_timing_table(std::span<const DiversityTimingRow> rows);
std::string selection_timing_csv(std::span<const SelectionTimingRow> rows);
std::string selection_timing_table(std::span<const SelectionTimingRow> rows);

}  // namespace cbdsel
