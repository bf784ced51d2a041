#pragma once

// Per-input uncertainty scores. Convention everywhere: higher = more uncertain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

#include "cbdsel/types.hpp"

namespace cbdsel {

enum class UncertaintyMetric { margin, datis };

std::string_view to_string(UncertaintyMetric metric) noexcept;
UncertaintyMetric parse_uncertainty_metric(std::string_view text);

struct UncertaintyVector {
  Vector<double> scores;
  UncertaintyMetric metric = UncertaintyMetric::margin;

  std::size_t size() const noexcept { return static_cast<std::size_t>(scores.size()); }
};

struct DatisConfig {
  std::size_t k = 10;
  double tau = 1.0;

  void validate() const;
};

/// Score assigned when the predicted class has no neighbour support at all.
inline constexpr double kDatisSaturation = 1e12;

/// 1 - (p_max - p_second) per row.
UncertaintyVector margin_uncertainty(const ProbabilityMatrix& probs);

/// The k nearest rows of `train_z` to `z` by squared Euclidean distance,
/// nearest first, ties broken by ascending training index.
struct Neighbour {
  std::size_t index;
  double sq_distance;
};
std::vector<Neighbour> nearest_neighbours(const Vector<double>& z, const EmbeddingMatrix& train_z, std::size_t k);

/// Distance-weighted label support over the k nearest training rows:
/// p*_c = sum_t exp(-||z - z_t||^2 / tau) [y_t = c] / sum_t exp(-||z - z_t||^2 / tau).
Vector<double> datis_support(const Vector<double>& z, const EmbeddingMatrix& train_z, const LabelVector& train_labels,
                             const DatisConfig& cfg);

/// p*_n / p*_m where m is the predicted class and n the best-supported other
/// class. Saturates at kDatisSaturation when p*_m = 0.
double datis_score(const Vector<double>& support, std::uint32_t predicted);

UncertaintyVector datis_uncertainty(const EmbeddingMatrix& z, const LabelVector& predicted,
                                    const EmbeddingMatrix& train_z, const LabelVector& train_labels,
                                    const DatisConfig& cfg, unsigned threads = 1);

/// Argmax class per probability row, lowest index on ties.
LabelVector predicted_labels(const ProbabilityMatrix& probs);

}  // namespace cbdsel
