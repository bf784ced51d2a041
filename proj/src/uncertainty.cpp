#include "cbdsel/uncertainty.hpp"

#include <string>

#include "cbdsel/detail/parallel.hpp"

namespace cbdsel {

std::string_view to_string(UncertaintyMetric metric) noexcept {
  return metric == UncertaintyMetric::margin ? "margin" : "datis";
}

UncertaintyMetric parse_uncertainty_metric(std::string_view text) {
  if (text == "margin") return UncertaintyMetric::margin;
  if (text == "datis") return UncertaintyMetric::datis;
  throw ConfigError("unknown uncertainty metric '" + std::string(text) + "' (expected margin or datis)");
}

void DatisConfig::validate() const {
  if (k < 1) throw ConfigError("DATIS: k must be >= 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("DATIS: tau must be a positive finite number");
}

UncertaintyVector margin_uncertainty(const ProbabilityMatrix& probs) {
  if (probs.classes() < 2) throw ConfigError("margin needs at least 2 classes, got " + std::to_string(probs.classes()));
  const auto& p = probs.values();
  UncertaintyVector out;
  out.metric = UncertaintyMetric::margin;
  out.scores.resize(p.rows());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    double first = -1.0, second = -1.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double v = p(r, c);
      if (v > first) {
        second = first;
        first = v;
      } else if (v > second) {
        second = v;
      }
    }
    out.scores[r] = std::clamp(1.0 - (first - second), 0.0, 1.0);
  }
  return out;
}

std::vector<Neighbour> nearest_neighbours(const Vector<double>& z, const EmbeddingMatrix& train_z, std::size_t k) {
  if (z.size() != train_z.cols())
    throw ShapeError("DATIS: query has dimension " + std::to_string(z.size()) + ", training features have " +
                     std::to_string(train_z.cols()));
  const auto n = static_cast<std::size_t>(train_z.rows());
  if (n < k)
    throw ConfigError("DATIS: k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " training rows");
  std::vector<Neighbour> all(n);
  for (std::size_t t = 0; t < n; ++t)
    all[t] = {t, (train_z.row(static_cast<Eigen::Index>(t)).cast<double>().transpose() - z).squaredNorm()};
  auto closer = [](const Neighbour& a, const Neighbour& b) {
    if (a.sq_distance != b.sq_distance) return a.sq_distance < b.sq_distance;
    return a.index < b.index;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

Vector<double> datis_support(const Vector<double>& z, const EmbeddingMatrix& train_z, const LabelVector& train_labels,
                             const DatisConfig& cfg) {
  cfg.validate();
  if (train_labels.size() != static_cast<std::size_t>(train_z.rows()))
    throw ShapeError("DATIS: " + std::to_string(train_labels.size()) + " training labels for " +
                     std::to_string(train_z.rows()) + " training rows");
  const auto neighbours = nearest_neighbours(z, train_z, cfg.k);
  // Shifting by the nearest distance cancels in the ratio and avoids underflow.
  const double shift = neighbours.front().sq_distance;
  Vector<double> support = Vector<double>::Zero(train_labels.num_classes());
  double total = 0.0;
  for (const auto& nb : neighbours) {
    const double w = std::exp(-(nb.sq_distance - shift) / cfg.tau);
    support[train_labels[nb.index]] += w;
    total += w;
  }
  support /= total;
  return support;
}

double datis_score(const Vector<double>& support, std::uint32_t predicted) {
  if (support.size() < 2) throw ConfigError("DATIS needs at least 2 classes");
  if (predicted >= support.size()) throw InvariantError("predicted class " + std::to_string(predicted) + " out of range");
  double best_other = 0.0;
  for (Eigen::Index c = 0; c < support.size(); ++c)
    if (c != predicted) best_other = std::max(best_other, support[c]);
  const double own = support[predicted];
  if (own == 0.0) return kDatisSaturation;
  return best_other / own;
}

UncertaintyVector datis_uncertainty(const EmbeddingMatrix& z, const LabelVector& predicted,
                                    const EmbeddingMatrix& train_z, const LabelVector& train_labels,
                                    const DatisConfig& cfg, unsigned threads) {
  cfg.validate();
  if (train_labels.num_classes() < 2) throw ConfigError("DATIS needs at least 2 classes");
  if (predicted.size() != static_cast<std::size_t>(z.rows()))
    throw ShapeError("DATIS: " + std::to_string(predicted.size()) + " predictions for " + std::to_string(z.rows()) +
                     " inputs");
  if (predicted.num_classes() > train_labels.num_classes())
    throw ShapeError("DATIS: predictions use more classes than the training labels");
  if (static_cast<std::size_t>(train_z.rows()) < cfg.k)
    throw ConfigError("DATIS: k = " + std::to_string(cfg.k) + " exceeds the " + std::to_string(train_z.rows()) +
                      " training rows");
  UncertaintyVector out;
  out.metric = UncertaintyMetric::datis;
  out.scores.resize(z.rows());
  detail::parallel_for(static_cast<std::size_t>(z.rows()), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Vector<double> query = z.row(static_cast<Eigen::Index>(i)).cast<double>();
      out.scores[static_cast<Eigen::Index>(i)] = datis_score(datis_support(query, train_z, train_labels, cfg), predicted[i]);
    }
  });
  return out;
}

LabelVector predicted_labels(const ProbabilityMatrix& probs) {
  const auto& p = probs.values();
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < p.cols(); ++c)
      if (p(r, c) > p(r, best)) best = c;
    labels[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(best);
  }
  return LabelVector(std::move(labels), static_cast<std::uint32_t>(p.cols()));
}

}  // namespace cbdsel
