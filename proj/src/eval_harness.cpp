#include "cbdsel/eval_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "cbdsel/uncertainty.hpp"

namespace cbdsel {

// ---------------------------------------------------------------------------
// Controlled-diversity subsets

std::size_t ControlledSubsetPlan::replacement_count() const noexcept {
  if (replace_per_class > 0) return replace_per_class;
  if (schedule.empty() || schedule.back() == 0) return 1;
  return std::max<std::size_t>(1, subset_size / schedule.back());
}

namespace {

std::vector<std::vector<std::size_t>> members_by_class(const LabelVector& labels) {
  std::vector<std::vector<std::size_t>> members(labels.num_classes());
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  return members;
}

/// Removes and returns a uniformly chosen element of `pool`.
std::size_t take_random(std::vector<std::size_t>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const std::size_t at = pick(rng);
  const std::size_t value = pool[at];
  pool[at] = pool.back();
  pool.pop_back();
  return value;
}

}  // namespace

void validate_plan(const ControlledSubsetPlan& plan, const LabelVector& labels) {
  const auto& s = plan.schedule;
  if (s.empty()) throw ConfigError("controlled subsets: empty class schedule");
  if (s.front() < 1) throw ConfigError("controlled subsets: schedule must start at >= 1 class");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] <= s[i - 1]) throw ConfigError("controlled subsets: schedule must be strictly increasing");
  if (s.back() > labels.num_classes())
    throw ConfigError("controlled subsets: schedule needs " + std::to_string(s.back()) + " classes, labels have " +
                      std::to_string(labels.num_classes()));
  if (plan.subset_size < s.back())
    throw ConfigError("controlled subsets: subset size " + std::to_string(plan.subset_size) +
                      " cannot cover " + std::to_string(s.back()) + " classes");
  if (plan.repetitions < 1) throw ConfigError("controlled subsets: repetitions must be >= 1");

  const auto members = members_by_class(labels);
  std::size_t first_pool = 0;
  for (std::size_t c = 0; c < s.back(); ++c) {
    if (members[c].empty()) throw ConfigError("controlled subsets: class " + std::to_string(c) + " has no inputs");
    if (c < s.front()) first_pool += members[c].size();
  }
  if (first_pool < plan.subset_size)
    throw ConfigError("controlled subsets: the first " + std::to_string(s.front()) + " classes hold only " +
                      std::to_string(first_pool) + " inputs, need " + std::to_string(plan.subset_size));
  // Every step must be able to evict at least one input per incoming class.
  for (std::size_t i = 1; i < s.size(); ++i)
    if (plan.subset_size - s[i - 1] < s[i] - s[i - 1])
      throw ConfigError("controlled subsets: subset too small to introduce " + std::to_string(s[i] - s[i - 1]) +
                        " classes at step " + std::to_string(i));
}

std::vector<std::vector<std::size_t>> build_controlled_subsets(const LabelVector& labels,
                                                               const ControlledSubsetPlan& plan) {
  validate_plan(plan, labels);
  const auto members = members_by_class(labels);
  const auto& schedule = plan.schedule;
  std::mt19937_64 rng(plan.seed);

  std::vector<std::vector<std::size_t>> subsets;
  subsets.reserve(plan.subsets_per_plan());

  for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
    std::vector<std::size_t> current;
    std::vector<std::size_t> class_count(labels.num_classes(), 0);

    // One guaranteed representative per starting class, the rest uniform.
    std::vector<std::size_t> leftovers;
    for (std::size_t c = 0; c < schedule.front(); ++c) {
      auto pool = members[c];
      current.push_back(take_random(pool, rng));
      ++class_count[c];
      leftovers.insert(leftovers.end(), pool.begin(), pool.end());
    }
    while (current.size() < plan.subset_size) {
      const std::size_t pick = take_random(leftovers, rng);
      current.push_back(pick);
      ++class_count[labels[pick]];
    }
    subsets.push_back(current);

    for (std::size_t step = 1; step < schedule.size(); ++step) {
      const std::size_t incoming = schedule[step] - schedule[step - 1];
      const std::size_t present_before = schedule[step - 1];
      // Leave room so every incoming class gets at least one slot.
      const std::size_t budget_per_class =
          std::max<std::size_t>(1, std::min(plan.replacement_count(), (plan.subset_size - present_before) / incoming));
      for (std::size_t c = schedule[step - 1]; c < schedule[step]; ++c) {
        auto pool = members[c];
        const std::size_t replace = std::min(budget_per_class, pool.size());
        for (std::size_t r = 0; r < replace; ++r) {
          std::vector<std::size_t> evictable;
          for (std::size_t pos = 0; pos < current.size(); ++pos)
            if (class_count[labels[current[pos]]] > 1) evictable.push_back(pos);
          if (evictable.empty()) break;
          std::uniform_int_distribution<std::size_t> pick(0, evictable.size() - 1);
          const std::size_t pos = evictable[pick(rng)];
          --class_count[labels[current[pos]]];
          current[pos] = take_random(pool, rng);
          ++class_count[c];
        }
      }
      subsets.push_back(current);
    }
  }
  return subsets;
}

// ---------------------------------------------------------------------------
// Rank correlation

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = mean_rank;
    i = j;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("spearman_rho: inputs differ in length");
  if (x.size() < 2) throw DegenerateError("spearman_rho: need at least 2 observations");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InvariantError("spearman_rho: non-finite input");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateError("spearman_rho: an input has zero rank variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<CorrelationReport> run_rq1(const EmbeddingMatrix& embeddings_shared,
                                       const std::optional<EmbeddingMatrix>& features_gd, const Rcs& rcs,
                                       const LabelVector& labels, std::span<const ControlledSubsetPlan> plans,
                                       const Rq1Options& options) {
  const EmbeddingMatrix& gd_features = features_gd ? *features_gd : embeddings_shared;
  if (labels.size() != static_cast<std::size_t>(embeddings_shared.rows()) ||
      gd_features.rows() != embeddings_shared.rows())
    throw ShapeError("run_rq1: embeddings, GD features and labels must have the same row count");

  const CosineIndex index(rcs.space.embeddings);
  const auto assignments = assign_concepts(embeddings_shared, index, options.m, options.threads);

  std::vector<CorrelationReport> reports;
  for (const auto& plan : plans) {
    CorrelationReport report;
    report.seed = plan.seed;
    report.subset_size = plan.subset_size;
    const auto subsets = build_controlled_subsets(labels, plan);
    std::vector<double> cbd, gd;
    for (std::size_t s = 0; s < subsets.size(); ++s) {
      CorrelationRow row;
      row.subset_id = s;
      row.class_count = plan.schedule[s % plan.schedule.size()];
      row.cbd = cbd_score(assignments, subsets[s]);
      row.gd = gd_score(gd_features, std::span<const std::size_t>(subsets[s]), options.gd_eps);
      cbd.push_back(row.cbd);
      gd.push_back(row.gd);
      report.rows.push_back(row);
    }
    report.rho = spearman_rho(cbd, gd);
    reports.push_back(std::move(report));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Timing

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::vector<std::size_t> random_subset(std::size_t n, std::size_t b, std::mt19937_64& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < b; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(b);
  return pool;
}

volatile double g_sink = 0.0;

}  // namespace

TimingStats summarize_ms(std::span<const double> samples_ms) {
  TimingStats s;
  s.repeats = samples_ms.size();
  if (samples_ms.empty()) return s;
  const double n = static_cast<double>(samples_ms.size());
  s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / n;
  double var = 0.0;
  for (double v : samples_ms) var += (v - s.mean_ms) * (v - s.mean_ms);
  s.stddev_ms = samples_ms.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return s;
}

std::vector<DiversityTimingRow> time_diversity(const EmbeddingMatrix& features_gd,
                                               std::span<const ConceptAssignment> assignments,
                                               std::span<const std::size_t> sizes, std::size_t repeats,
                                               std::uint64_t seed, double gd_eps) {
  std::vector<DiversityTimingRow> rows;
  if (repeats == 0) return rows;
  const auto n = static_cast<std::size_t>(features_gd.rows());
  if (assignments.size() != n) throw ShapeError("time_diversity: features and assignments differ in row count");
  std::mt19937_64 rng(seed);
  for (const std::size_t b : sizes) {
    if (b < 1 || b > n) throw BudgetError("time_diversity: subset size " + std::to_string(b) + " outside [1, n]");
    std::vector<double> cbd_ms, gd_ms;
    for (std::size_t r = 0; r < kWarmupIterations + repeats; ++r) {
      const auto subset = random_subset(n, b, rng);
      auto start = Clock::now();
      g_sink = cbd_score(assignments, subset);
      const double t_cbd = elapsed_ms(start);
      start = Clock::now();
      g_sink = gd_score(features_gd, std::span<const std::size_t>(subset), gd_eps);
      const double t_gd = elapsed_ms(start);
      if (r >= kWarmupIterations) {
        cbd_ms.push_back(t_cbd);
        gd_ms.push_back(t_gd);
      }
    }
    rows.push_back({b, summarize_ms(cbd_ms), summarize_ms(gd_ms)});
  }
  return rows;
}

std::string_view to_string(SelectorKind kind) noexcept {
  switch (kind) {
    case SelectorKind::cbd:
      return "cbd";
    case SelectorKind::top_uncertainty:
      return "uncertainty";
    case SelectorKind::random:
      return "random";
  }
  return "cbd";
}

SelectorKind parse_selector_kind(std::string_view text) {
  if (text == "cbd") return SelectorKind::cbd;
  if (text == "uncertainty" || text == "margin") return SelectorKind::top_uncertainty;
  if (text == "random") return SelectorKind::random;
  throw ConfigError("unknown selector '" + std::string(text) + "' (expected cbd, uncertainty or random)");
}

std::vector<SelectionTimingRow> time_selection(const SelectionPool& pool, std::span<const SelectorKind> selectors,
                                               std::span<const std::size_t> budgets, std::size_t repeats,
                                               std::uint64_t seed) {
  std::vector<SelectionTimingRow> rows;
  if (repeats == 0) return rows;
  const auto n = static_cast<std::size_t>(pool.probs.rows());
  if (pool.assignments.size() != n) throw ShapeError("time_selection: probabilities and assignments differ in row count");
  for (const auto kind : selectors) {
    for (const std::size_t b : budgets) {
      if (b < 1 || b > n) throw BudgetError("time_selection: budget " + std::to_string(b) + " outside [1, n]");
      std::vector<double> samples;
      for (std::size_t r = 0; r < kWarmupIterations + repeats; ++r) {
        const auto start = Clock::now();
        SelectionResult result;
        switch (kind) {
          case SelectorKind::cbd:
            result = select_cbd(pool.assignments, margin_uncertainty(pool.probs), b);
            break;
          case SelectorKind::top_uncertainty:
            result = select_top_uncertainty(margin_uncertainty(pool.probs), b);
            break;
          case SelectorKind::random:
            result = select_random(n, b, seed + r);
            break;
        }
        const double ms = elapsed_ms(start);
        g_sink = static_cast<double>(result.selected.size());
        if (r >= kWarmupIterations) samples.push_back(ms);
      }
      rows.push_back({kind, b, summarize_ms(samples)});
    }
  }
  return rows;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("loglog_slope: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DegenerateError("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]) - mx;
    sxy += lx * (std::log(y[i]) - my);
    sxx += lx * lx;
  }
  if (sxx == 0.0) throw DegenerateError("loglog_slope: x values are all equal");
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Accuracy improvement

double improvement_pct(double acc_fine, double acc_orig, double acc_max) {
  if (acc_max == acc_orig)
    throw DegenerateError("improvement_pct: maximum accuracy equals original accuracy (zero denominator)");
  return 100.0 * (acc_fine - acc_orig) / (acc_max - acc_orig);
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string num(double v) { return fmt("%.10g", v); }

}  // namespace

std::string correlation_csv(std::span<const CorrelationReport> reports) {
  std::string out = "plan,seed,subset_size,subset_id,class_count,cbd,gd,rho\n";
  for (std::size_t p = 0; p < reports.size(); ++p)
    for (const auto& r : reports[p].rows)
      out += std::to_string(p) + "," + std::to_string(reports[p].seed) + "," + std::to_string(reports[p].subset_size) +
             "," + std::to_string(r.subset_id) + "," + std::to_string(r.class_count) + "," + num(r.cbd) + "," +
             num(r.gd) + "," + num(reports[p].rho) + "\n";
  return out;
}

std::string correlation_table(std::span<const CorrelationReport> reports) {
  std::string out = "plan  seed        b  subsets  spearman(CBD,GD)\n";
  for (std::size_t p = 0; p < reports.size(); ++p) {
    char line[128];
    std::snprintf(line, sizeof line, "%4zu  %4llu  %7zu  %7zu  %16.4f\n", p,
                  static_cast<unsigned long long>(reports[p].seed), reports[p].subset_size, reports[p].n_subsets(),
                  reports[p].rho);
    out += line;
  }
  return out;
}

std::string diversity_timing_csv(std::span<const DiversityTimingRow> rows) {
  std::string out = "subset_size,repeats,cbd_mean_ms,cbd_std_ms,gd_mean_ms,gd_std_ms,gd_over_cbd\n";
  for (const auto& r : rows)
    out += std::to_string(r.subset_size) + "," + std::to_string(r.cbd.repeats) + "," + num(r.cbd.mean_ms) + "," +
           num(r.cbd.stddev_ms) + "," + num(r.gd.mean_ms) + "," + num(r.gd.stddev_ms) + "," + num(r.gd_over_cbd()) +
           "\n";
  return out;
}

std::string diversity_timing_table(std::span<const DiversityTimingRow> rows) {
  std::string out = "       b   CBD mean ms (sd)      GD mean ms (sd)     GD/CBD\n";
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%8zu  %10.4f (%7.4f)  %10.4f (%7.4f)  %9.2f\n", r.subset_size, r.cbd.mean_ms,
                  r.cbd.stddev_ms, r.gd.mean_ms, r.gd.stddev_ms, r.gd_over_cbd());
    out += line;
  }
  return out;
}

std::string selection_timing_csv(std::span<const SelectionTimingRow> rows) {
  std::string out = "selector,budget,repeats,mean_ms,std_ms\n";
  for (const auto& r : rows)
    out += std::string(to_string(r.selector)) + "," + std::to_string(r.budget) + "," +
           std::to_string(r.time.repeats) + "," + num(r.time.mean_ms) + "," + num(r.time.stddev_ms) + "\n";
  return out;
}

std::string selection_timing_table(std::span<const SelectionTimingRow> rows) {
  std::string out = "selector         budget     mean ms       sd ms\n";
  for (const auto& r : rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%-12s  %9zu  %10.3f  %10.3f\n", std::string(to_string(r.selector)).c_str(),
                  r.budget, r.time.mean_ms, r.time.stddev_ms);
    out += line;
  }
  return out;
}

}  // namespace cbdsel
