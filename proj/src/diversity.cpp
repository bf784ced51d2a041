#include "cbdsel/diversity.hpp"

#include <algorithm>

namespace cbdsel {

namespace {

constexpr double kFixedScale = 4294967296.0;  // 2^32

std::int64_t xlog2x_fixed_uncached(std::uint64_t f) {
  if (f <= 1) return 0;
  const double x = static_cast<double>(f);
  return std::llround(x * std::log2(x) * kFixedScale);
}

constexpr std::size_t kTableSize = std::size_t{1} << 16;

std::int64_t xlog2x_fixed(std::uint64_t f) {
  static const std::vector<std::int64_t> table = [] {
    std::vector<std::int64_t> t(kTableSize);
    for (std::size_t i = 0; i < kTableSize; ++i) t[i] = xlog2x_fixed_uncached(i);
    return t;
  }();
  return f < kTableSize ? table[f] : xlog2x_fixed_uncached(f);
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw DiversityError("concept histogram too large for fixed-point entropy");
  return out;
}

}  // namespace

double ConceptHistogram::entropy_from(std::uint64_t total, std::int64_t weighted_fixed, std::size_t distinct) noexcept {
  if (total == 0 || distinct <= 1) return 0.0;  // a single concept is exactly zero, whatever the rounding
  const double t = static_cast<double>(total);
  return std::max(std::log2(t) - static_cast<double>(weighted_fixed) / (kFixedScale * t), 0.0);
}

void ConceptHistogram::refresh_entropy() noexcept { entropy_ = entropy_from(total_, weighted_fixed_, distinct_); }

double ConceptHistogram::entropy_with(const ConceptAssignment& a) const {
  if (a.concepts.empty()) throw DiversityError("cannot add an empty concept assignment");
  std::int64_t weighted = weighted_fixed_;
  std::size_t distinct = distinct_;
  for (std::size_t i = 0; i < a.concepts.size(); ++i) {
    const auto idx = a.concepts[i].concept_index;
    std::uint64_t f = frequency(idx);
    for (std::size_t j = 0; j < i; ++j) f += a.concepts[j].concept_index == idx ? 1u : 0u;
    if (f == 0) ++distinct;
    weighted = checked_add(weighted, xlog2x_fixed(f + 1) - xlog2x_fixed(f));
  }
  return entropy_from(total_ + a.concepts.size(), weighted, distinct);
}

void ConceptHistogram::add(const ConceptAssignment& a) {
  if (a.concepts.empty()) throw DiversityError("cannot add an empty concept assignment");
  for (const auto& c : a.concepts) {
    if (c.concept_index >= freq_.size()) freq_.resize(static_cast<std::size_t>(c.concept_index) + 1, 0);
    auto& f = freq_[c.concept_index];
    weighted_fixed_ = checked_add(weighted_fixed_, xlog2x_fixed(f + 1ull) - xlog2x_fixed(f));
    if (f == 0) ++distinct_;
    ++f;
    ++total_;
  }
  refresh_entropy();
}

void ConceptHistogram::remove(const ConceptAssignment& a) {
  // Decrement in place; on a missing concept undo what was done so far.
  std::size_t done = 0;
  for (; done < a.concepts.size(); ++done) {
    const auto idx = a.concepts[done].concept_index;
    if (frequency(idx) == 0) break;
    --freq_[idx];
  }
  if (done < a.concepts.size()) {
    for (std::size_t i = 0; i < done; ++i) ++freq_[a.concepts[i].concept_index];
    throw DiversityError("histogram accounting: concept " + std::to_string(a.concepts[done].concept_index) +
                         " is not present");
  }
  for (const auto& c : a.concepts) {
    const std::uint64_t f = freq_[c.concept_index];
    weighted_fixed_ += xlog2x_fixed(f) - xlog2x_fixed(f + 1);
    if (f == 0) --distinct_;
    --total_;
  }
  refresh_entropy();
}

bool operator==(const ConceptHistogram& a, const ConceptHistogram& b) noexcept {
  if (a.total_ != b.total_ || a.distinct_ != b.distinct_ || a.weighted_fixed_ != b.weighted_fixed_) return false;
  const std::size_t n = std::max(a.freq_.size(), b.freq_.size());
  for (std::size_t i = 0; i < n; ++i)
    if (a.frequency(static_cast<std::uint32_t>(i)) != b.frequency(static_cast<std::uint32_t>(i))) return false;
  return true;
}

ConceptHistogram histogram_add(ConceptHistogram h, const ConceptAssignment& a) {
  h.add(a);
  return h;
}

ConceptHistogram histogram_remove(ConceptHistogram h, const ConceptAssignment& a) {
  h.remove(a);
  return h;
}

namespace {

template <typename Visit>
double pooled_entropy(std::size_t count, Visit&& assignment_at) {
  if (count == 0) throw DiversityError("cbd_score: diversity of an empty subset is undefined");
  std::vector<std::uint64_t> freq;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const ConceptAssignment& a = assignment_at(i);
    if (a.concepts.empty()) throw DiversityError("cbd_score: assignment " + std::to_string(i) + " has no concepts");
    for (const auto& c : a.concepts) {
      if (c.concept_index >= freq.size()) freq.resize(static_cast<std::size_t>(c.concept_index) + 1, 0);
      ++freq[c.concept_index];
      ++total;
    }
  }
  const double t = static_cast<double>(total);
  double h = 0.0;
  for (auto f : freq) {
    if (f == 0) continue;
    const double p = static_cast<double>(f) / t;
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

}  // namespace

double cbd_score(std::span<const ConceptAssignment> assignments) {
  return pooled_entropy(assignments.size(), [&](std::size_t i) -> const ConceptAssignment& { return assignments[i]; });
}

double cbd_score(std::span<const ConceptAssignment> assignments, std::span<const std::size_t> subset) {
  return pooled_entropy(subset.size(), [&](std::size_t i) -> const ConceptAssignment& {
    if (subset[i] >= assignments.size()) throw ShapeError("cbd_score: subset index out of range");
    return assignments[subset[i]];
  });
}

}  // namespace cbdsel
