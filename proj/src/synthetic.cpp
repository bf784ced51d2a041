#include "cbdsel/synthetic.hpp"

#include <Eigen/QR>
#include <cmath>
#include <string>

namespace cbdsel::synthetic {

RowMatrix<double> gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  RowMatrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

RowMatrix<double> random_orthogonal(Eigen::Index dim, std::mt19937_64& rng) {
  const Eigen::MatrixXd g = gaussian_matrix(dim, dim, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

World make_world(const WorldConfig& cfg) {
  if (cfg.classes < 1 || cfg.dim < 1) throw ConfigError("synthetic world needs classes >= 1 and dim >= 1");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  World w;
  const auto dim = static_cast<Eigen::Index>(cfg.dim);
  w.centers = gaussian_matrix(static_cast<Eigen::Index>(cfg.classes), dim, rng);

  const std::size_t n_concepts = cfg.classes * cfg.concepts_per_class;
  w.concepts.embeddings.resize(static_cast<Eigen::Index>(n_concepts), dim);
  for (std::size_t j = 0; j < n_concepts; ++j) {
    const std::size_t cls = j / cfg.concepts_per_class;
    for (Eigen::Index c = 0; c < dim; ++c)
      w.concepts.embeddings(static_cast<Eigen::Index>(j), c) =
          static_cast<float>(w.centers(static_cast<Eigen::Index>(cls), c) + cfg.concept_noise * normal(rng));
    w.concepts.names.push_back("class" + std::to_string(cls) + "_concept" +
                               std::to_string(j % cfg.concepts_per_class));
  }

  std::vector<std::uint32_t> labels(cfg.points);
  w.points.resize(static_cast<Eigen::Index>(cfg.points), dim);
  for (std::size_t i = 0; i < cfg.points; ++i) {
    const auto cls = static_cast<std::uint32_t>(i % cfg.classes);
    labels[i] = cls;
    for (Eigen::Index c = 0; c < dim; ++c)
      w.points(static_cast<Eigen::Index>(i), c) =
          static_cast<float>(w.centers(cls, c) + cfg.point_noise * normal(rng));
  }
  w.labels = LabelVector(std::move(labels), static_cast<std::uint32_t>(cfg.classes));
  return w;
}

ProbabilityMatrix class_probabilities(const World& world, double temperature, double logit_noise, std::uint64_t seed) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, logit_noise > 0.0 ? logit_noise : 1.0);
  const Eigen::Index n = world.points.rows();
  const Eigen::Index classes = world.centers.rows();
  RowMatrix<float> probs(n, classes);
  Vector<double> logits(classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector<double> x = world.points.row(i).cast<double>();
    for (Eigen::Index k = 0; k < classes; ++k) {
      logits[k] = -(world.centers.row(k).transpose() - x).squaredNorm() / temperature;
      if (logit_noise > 0.0) logits[k] += normal(rng);
    }
    const double mx = logits.maxCoeff();
    const Vector<double> e = (logits.array() - mx).exp().matrix();
    probs.row(i) = (e / e.sum()).cast<float>().transpose();
  }
  return ProbabilityMatrix(std::move(probs));
}

AffinePair make_affine_pair(Eigen::Index n, Eigen::Index source_dim, Eigen::Index target_dim, double noise,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AffinePair p;
  p.source = gaussian_matrix(n, source_dim, rng);
  p.weights = gaussian_matrix(source_dim, target_dim, rng, 1.0 / std::sqrt(static_cast<double>(source_dim)));
  p.bias = gaussian_matrix(target_dim, 1, rng);
  p.target = p.source * p.weights;
  p.target.rowwise() += p.bias.transpose();
  if (noise > 0.0) p.target += gaussian_matrix(n, target_dim, rng, noise);
  return p;
}

}  // namespace cbdsel::synthetic
