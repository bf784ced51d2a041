#pragma once

// Seeded pools shared by the selector tests and the acceptance binary.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "cbdsel/concept_space.hpp"
#include "cbdsel/uncertainty.hpp"

namespace fixture {

struct Pool {
  std::vector<cbdsel::ConceptAssignment> assignments;
  cbdsel::UncertaintyVector uncertainty;
};

/// n candidates, each with m distinct concepts drawn from [0, k), and
/// uniform(0, 1) uncertainty scores.
inline Pool random_pool(std::size_t n, std::size_t m, std::uint32_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Pool pool;
  pool.uncertainty.scores.resize(static_cast<Eigen::Index>(n));
  std::vector<std::uint32_t> all(k);
  std::iota(all.begin(), all.end(), 0u);
  for (std::size_t i = 0; i < n; ++i) {
    std::shuffle(all.begin(), all.end(), rng);
    cbdsel::ConceptAssignment a{i, {}};
    for (std::size_t j = 0; j < m; ++j) a.concepts.push_back({all[j], 1.0 - 0.01 * static_cast<double>(j)});
    pool.assignments.push_back(std::move(a));
    pool.uncertainty.scores[static_cast<Eigen::Index>(i)] = unit(rng);
  }
  return pool;
}

/// A pool where groups of `copies` candidates share the same concept set, so
/// most candidates add nothing once one of their group is in.
inline Pool redundant_pool(std::size_t groups, std::size_t copies, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Pool pool;
  pool.uncertainty.scores.resize(static_cast<Eigen::Index>(groups * copies));
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t c = 0; c < copies; ++c) {
      const std::size_t i = g * copies + c;
      const auto base = static_cast<std::uint32_t>(2 * g);
      pool.assignments.push_back({i, {{base, 0.9}, {base + 1, 0.8}}});
      pool.uncertainty.scores[static_cast<Eigen::Index>(i)] = unit(rng);
    }
  return pool;
}

}  // namespace fixture
