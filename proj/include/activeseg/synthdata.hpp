#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "activeseg/region_graph.hpp"

namespace activeseg {

struct SynthConfig {
  std::size_t n_bodies = 60;
  std::size_t n_superpixels = 3000;
  std::vector<std::size_t> lattice_dims{50, 60};  // 2 or 3 entries, product = n_superpixels
  std::size_t feature_dim = 12;
  std::size_t n_subclasses = 3;
  double class_separation = 3.0;
  double label_noise = 0.05;
  std::uint64_t rng_seed = 0;
  std::int64_t min_node_size = 50;
  std::int64_t max_node_size = 150;

  /// Throws PreconditionError on an invalid combination.
  void validate() const;
};

/// Class-conditional Gaussian mixtures with unit covariance. True-boundary
/// (+1) component means lie on the sphere of radius class_separation; false
/// boundary (-1) means are their mirror images through the origin.
struct FeatureMixture {
  std::size_t dim = 0;
  std::size_t components = 0;
  std::vector<double> positive_means;  // components x dim
  std::vector<double> negative_means;
};

FeatureMixture make_mixture(const SynthConfig& config);

/// Lattice RAG with bodies planted by multi-source random flood fill, edge
/// labels from body membership and mixture features. With probability
/// label_noise an edge draws its features from the opposite class (the label
/// is kept).
RegionGraph generate(const SynthConfig& config);
RegionGraph generate(const SynthConfig& config, const FeatureMixture& mixture, std::uint64_t layout_seed);

/// Two independent graphs sharing the mixture of config.rng_seed.
std::pair<RegionGraph, RegionGraph> train_test_pair(const SynthConfig& config, std::uint64_t seed_a,
                                                    std::uint64_t seed_b);

/// Ids of the lattice neighbors of node i (4- or 6-connectivity).
/// Training and test graphs of the benchmark: one mixture, layouts seeded
/// with rng_seed and rng_seed + 1.
std::pair<RegionGraph, RegionGraph> benchmark_pair(const SynthConfig& config);

std::vector<std::size_t> lattice_neighbors(const std::vector<std::size_t>& dims, std::size_t i);

}  // namespace activeseg
