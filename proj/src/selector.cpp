#include "cbdsel/selector.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "cbdsel/diversity.hpp"
#include "json.hpp"

namespace cbdsel {

std::string_view to_string(SelectionPhase phase) noexcept {
  switch (phase) {
    case SelectionPhase::seed:
      return "seed";
    case SelectionPhase::greedy:
      return "greedy";
    case SelectionPhase::fill:
      return "fill";
  }
  return "greedy";
}

namespace {

SelectionPhase parse_phase(const std::string& text) {
  if (text == "seed") return SelectionPhase::seed;
  if (text == "greedy") return SelectionPhase::greedy;
  if (text == "fill") return SelectionPhase::fill;
  throw InvariantError("unknown selection phase '" + text + "'");
}

void check_budget(std::size_t n, std::size_t budget) {
  if (budget == 0) throw BudgetError("selection budget must be >= 1");
  if (budget > n)
    throw BudgetError("selection budget " + std::to_string(budget) + " exceeds the " + std::to_string(n) +
                      " candidates");
}

}  // namespace

std::vector<std::size_t> rank_descending(const Vector<double>& scores) {
  require_finite(scores, "uncertainty scores");
  std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Eigen::Index>(a)], sb = scores[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return order;
}

std::size_t seed_phase_size(std::size_t budget) noexcept { return std::max<std::size_t>(1, budget / 10); }

SelectionResult select_cbd(std::span<const ConceptAssignment> assignments, const UncertaintyVector& uncertainty,
                           std::size_t budget) {
  const std::size_t n = uncertainty.size();
  if (assignments.size() != n)
    throw ShapeError("select_cbd: " + std::to_string(assignments.size()) + " concept assignments for " +
                     std::to_string(n) + " uncertainty scores");
  check_budget(n, budget);

  const auto order = rank_descending(uncertainty.scores);

  SelectionResult result;
  result.pool_size = n;
  result.budget = budget;
  result.seed_count = seed_phase_size(budget);
  result.provenance.strategy = "cbd";
  result.provenance.uncertainty_metric = std::string(to_string(uncertainty.metric));
  result.selected.reserve(budget);
  result.steps.reserve(n);

  ConceptHistogram hist;
  std::size_t j = 0;
  for (; j < result.seed_count; ++j) {
    const std::size_t cand = order[j];
    const double before = hist.entropy_or_zero();
    hist.add(assignments[cand]);
    result.selected.push_back(cand);
    result.steps.push_back({cand, SelectionPhase::seed, true, before, hist.entropy_or_zero()});
  }

  std::vector<std::size_t> rejected;
  for (; j < n && result.selected.size() < budget; ++j) {
    const std::size_t cand = order[j];
    const double before = hist.entropy_or_zero();
    const double after = hist.entropy_with(assignments[cand]);
    const bool accept = after > before + kEntropyGainTolerance;
    if (accept) {
      hist.add(assignments[cand]);
      result.selected.push_back(cand);
    } else {
      rejected.push_back(cand);
    }
    result.steps.push_back({cand, SelectionPhase::greedy, accept, before, after});
  }

  // Only reachable once the scan has exhausted the pool, so `rejected` holds
  // every unselected candidate in rank order.
  for (std::size_t r = 0; result.selected.size() < budget && r < rejected.size(); ++r) {
    const std::size_t cand = rejected[r];
    const double before = hist.entropy_or_zero();
    hist.add(assignments[cand]);
    result.selected.push_back(cand);
    result.steps.push_back({cand, SelectionPhase::fill, true, before, hist.entropy_or_zero()});
    ++result.fill_count;
  }

  result.final_cbd = hist.entropy_or_zero();
  return result;
}

SelectionResult select_top_uncertainty(const UncertaintyVector& uncertainty, std::size_t budget) {
  check_budget(uncertainty.size(), budget);
  SelectionResult result;
  result.pool_size = uncertainty.size();
  result.budget = budget;
  result.provenance.strategy = "uncertainty";
  result.provenance.uncertainty_metric = std::string(to_string(uncertainty.metric));
  auto order = rank_descending(uncertainty.scores);
  order.resize(budget);
  result.selected = std::move(order);
  return result;
}

SelectionResult select_random(std::size_t n, std::size_t budget, std::uint64_t seed) {
  check_budget(n, budget);
  SelectionResult result;
  result.pool_size = n;
  result.budget = budget;
  result.provenance.strategy = "random";
  result.provenance.uncertainty_metric = "none";
  result.provenance.seed = seed;
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < budget; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(budget);
  result.selected = std::move(pool);
  return result;
}

std::size_t budget_from_percent(std::size_t n, double percent) {
  if (!(percent > 0.0 && percent <= 100.0)) throw ConfigError("budget percent must lie in (0, 100]");
  const auto b = static_cast<std::size_t>(std::floor(static_cast<double>(n) * percent / 100.0));
  return std::max<std::size_t>(1, b);
}

std::string to_json(const SelectionResult& result) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["pool_size"] = result.pool_size;
  j["budget"] = result.budget;
  j["seed_count"] = result.seed_count;
  j["fill_count"] = result.fill_count;
  j["final_cbd"] = result.final_cbd;
  j["selected"] = result.selected;
  const auto& p = result.provenance;
  j["provenance"] = ordered_json{{"strategy", p.strategy}, {"uncertainty_metric", p.uncertainty_metric},
                                 {"m", p.m},           {"k", p.k},
                                 {"tau", p.tau},       {"lambda", p.lambda},
                                 {"seed", p.seed}};
  ordered_json steps = ordered_json::array();
  for (const auto& s : result.steps)
    steps.push_back(ordered_json{{"candidate", s.candidate},
                                 {"phase", std::string(to_string(s.phase))},
                                 {"accepted", s.accepted},
                                 {"cbd_before", s.cbd_before},
                                 {"cbd_after", s.cbd_after}});
  j["steps"] = std::move(steps);
  return j.dump(2) + "\n";
}

SelectionResult selection_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    SelectionResult r;
    r.pool_size = j.at("pool_size").get<std::size_t>();
    r.budget = j.at("budget").get<std::size_t>();
    r.seed_count = j.at("seed_count").get<std::size_t>();
    r.fill_count = j.at("fill_count").get<std::size_t>();
    r.final_cbd = j.at("final_cbd").get<double>();
    r.selected = j.at("selected").get<std::vector<std::size_t>>();
    const auto& p = j.at("provenance");
    r.provenance.strategy = p.at("strategy").get<std::string>();
    r.provenance.uncertainty_metric = p.at("uncertainty_metric").get<std::string>();
    r.provenance.m = p.at("m").get<std::size_t>();
    r.provenance.k = p.at("k").get<std::size_t>();
    r.provenance.tau = p.at("tau").get<double>();
    r.provenance.lambda = p.at("lambda").get<double>();
    r.provenance.seed = p.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("steps"))
      r.steps.push_back({s.at("candidate").get<std::size_t>(), parse_phase(s.at("phase").get<std::string>()),
                         s.at("accepted").get<bool>(), s.at("cbd_before").get<double>(),
                         s.at("cbd_after").get<double>()});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvariantError(std::string("malformed selection JSON: ") + e.what());
  }
}

}  // namespace cbdsel
