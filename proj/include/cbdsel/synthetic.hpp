#pragma once

// Seeded synthetic fixtures: Gaussian class clusters with per-class concept
// embeddings, classifier-like probabilities, and affine representation pairs.

#include <cstdint>
#include <random>

#include "cbdsel/types.hpp"

namespace cbdsel::synthetic {

struct WorldConfig {
  std::size_t classes = 10;
  std::size_t dim = 64;
  std::size_t points = 5000;
  /// Concepts centred near each class centre.
  std::size_t concepts_per_class = 4;
  /// Standard deviation of a point around its class centre (per coordinate).
  double point_noise = 0.5;
  /// Standard deviation of a concept around its class centre (per coordinate).
  double concept_noise = 1.0;
  std::uint64_t seed = 0;
};

struct World {
  EmbeddingMatrix points;
  LabelVector labels;
  /// Concept j belongs to class j / concepts_per_class.
  ConceptSpace concepts;
  RowMatrix<double> centers;
};

/// Class centres ~ N(0, I); points are assigned to classes round-robin.
World make_world(const WorldConfig& cfg);

/// Softmax over -||x - c_k||^2 / temperature plus Gaussian logit noise.
ProbabilityMatrix class_probabilities(const World& world, double temperature, double logit_noise, std::uint64_t seed);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
RowMatrix<double> random_orthogonal(Eigen::Index dim, std::mt19937_64& rng);

RowMatrix<double> gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double stddev = 1.0);

/// target = source * weights + bias (+ N(0, noise^2) per coordinate).
struct AffinePair {
  RowMatrix<double> source;
  RowMatrix<double> target;
  RowMatrix<double> weights;
  Vector<double> bias;
};

AffinePair make_affine_pair(Eigen::Index n, Eigen::Index source_dim, Eigen::Index target_dim, double noise,
                            std::uint64_t seed);

}  // namespace cbdsel::synthetic
