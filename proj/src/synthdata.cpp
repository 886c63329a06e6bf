#include "activeseg/synthdata.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "activeseg/rng.hpp"

namespace activeseg {

namespace {

constexpr std::uint64_t kMixtureStream = 101;
constexpr std::uint64_t kLayoutStream = 102;
constexpr std::uint64_t kFeatureStream = 103;

/// Appends count points on the sphere of the given radius. While count <= dim
/// the directions are mutually orthogonal (Gram-Schmidt on Gaussian draws),
/// so every pair of components sits at the same distance.
void spread_on_sphere(Engine& rng, double radius, std::size_t dim, std::size_t count, std::vector<double>& out) {
  std::vector<std::vector<double>> basis;
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
      for (auto& x : v) x = standard_normal(rng);
      if (basis.size() < dim) {
        for (const auto& b : basis) {
          double dot = 0.0;
          for (std::size_t i = 0; i < dim; ++i) dot += v[i] * b[i];
          for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
        }
      }
      norm = 0.0;
      for (auto x : v) norm += x * x;
      norm = std::sqrt(norm);
    } while (!(norm > 1e-9));
    for (auto& x : v) x /= norm;
    for (auto x : v) out.push_back(radius * x);
    basis.push_back(std::move(v));
  }
}

std::vector<std::int64_t> plant_bodies(const std::vector<std::size_t>& dims, std::size_t n, std::size_t m, Engine& rng) {
  std::vector<std::int64_t> body(n, -1);
  std::vector<std::size_t> nodes(n);
  std::iota(nodes.begin(), nodes.end(), std::size_t{0});
  // Partial shuffle picks m distinct seed nodes.
  for (std::size_t i = 0; i < m; ++i) std::swap(nodes[i], nodes[i + uniform_index(rng, n - i)]);
  std::vector<std::pair<std::size_t, std::int64_t>> frontier;
  // Seeds are claimed up front so no body loses its seed to a neighbor.
  for (std::size_t b = 0; b < m; ++b) body[nodes[b]] = static_cast<std::int64_t>(b);
  for (std::size_t b = 0; b < m; ++b)
    for (auto nb : lattice_neighbors(dims, nodes[b]))
      if (body[nb] < 0) frontier.emplace_back(nb, static_cast<std::int64_t>(b));
  while (!frontier.empty()) {
    const std::size_t pick = uniform_index(rng, frontier.size());
    const auto [node, b] = frontier[pick];
    frontier[pick] = frontier.back();
    frontier.pop_back();
    if (body[node] >= 0) continue;
    body[node] = b;
    for (auto nb : lattice_neighbors(dims, node))
      if (body[nb] < 0) frontier.emplace_back(nb, b);
  }
  return body;
}

}  // namespace

void SynthConfig::validate() const {
  if (lattice_dims.size() != 2 && lattice_dims.size() != 3) throw PreconditionError("lattice must be 2-D or 3-D");
  const std::size_t product = std::accumulate(lattice_dims.begin(), lattice_dims.end(), std::size_t{1}, std::multiplies<>());
  if (product != n_superpixels)
    throw PreconditionError("lattice dims multiply to " + std::to_string(product) + ", expected " +
                            std::to_string(n_superpixels));
  if (n_superpixels < 2) throw PreconditionError("need at least 2 superpixels");
  if (n_bodies < 1 || n_bodies > n_superpixels) throw PreconditionError("n_bodies must lie in [1, n_superpixels]");
  if (feature_dim < 1) throw PreconditionError("feature_dim must be >= 1");
  if (n_subclasses < 1) throw PreconditionError("n_subclasses must be >= 1");
  if (!(class_separation > 0.0)) throw PreconditionError("class_separation must be positive");
  if (!(label_noise >= 0.0 && label_noise < 0.5)) throw PreconditionError("label_noise must lie in [0, 0.5)");
  if (min_node_size < 1 || max_node_size < min_node_size) throw PreconditionError("invalid node size range");
}

std::vector<std::size_t> lattice_neighbors(const std::vector<std::size_t>& dims, std::size_t i) {
  std::vector<std::size_t> out;
  std::size_t stride = 1;
  for (std::size_t axis = dims.size(); axis-- > 0;) {
    const std::size_t coord = (i / stride) % dims[axis];
    if (coord > 0) out.push_back(i - stride);
    if (coord + 1 < dims[axis]) out.push_back(i + stride);
    stride *= dims[axis];
  }
  return out;
}

FeatureMixture make_mixture(const SynthConfig& config) {
  config.validate();
  Engine rng = make_engine(config.rng_seed, {kMixtureStream});
  FeatureMixture mix;
  mix.dim = config.feature_dim;
  mix.components = config.n_subclasses;
  spread_on_sphere(rng, config.class_separation, config.feature_dim, config.n_subclasses, mix.positive_means);
  // False-class means mirror the true-class means through the origin.
  for (double v : mix.positive_means) mix.negative_means.push_back(-v);
  return mix;
}

RegionGraph generate(const SynthConfig& config, const FeatureMixture& mixture, std::uint64_t layout_seed) {
  config.validate();
  const std::size_t n = config.n_superpixels;
  Engine layout = make_engine(layout_seed, {kLayoutStream});
  const auto body = plant_bodies(config.lattice_dims, n, config.n_bodies, layout);

  std::vector<SuperpixelNode> nodes(n);
  const auto size_span = static_cast<std::size_t>(config.max_node_size - config.min_node_size + 1);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i].id = static_cast<NodeId>(i);
    nodes[i].size = config.min_node_size + static_cast<std::int64_t>(uniform_index(layout, size_span));
    nodes[i].true_body = body[i];
  }

  Engine feat = make_engine(layout_seed, {kFeatureStream});
  std::vector<BoundarySample> edges;
  const std::size_t d = mixture.dim;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : lattice_neighbors(config.lattice_dims, i)) {
      if (j <= i) continue;
      BoundarySample e;
      e.id = static_cast<EdgeId>(edges.size());
      e.u = static_cast<NodeId>(i);
      e.v = static_cast<NodeId>(j);
      e.true_label = body[i] != body[j] ? 1 : -1;
      bool positive_mixture = *e.true_label > 0;
      if (uniform01(feat) < config.label_noise) positive_mixture = !positive_mixture;
      const auto& means = positive_mixture ? mixture.positive_means : mixture.negative_means;
      const std::size_t comp = uniform_index(feat, mixture.components);
      e.x.resize(d);
      for (std::size_t a = 0; a < d; ++a) e.x[a] = means[comp * d + a] + standard_normal(feat);
      edges.push_back(std::move(e));
    }
  }
  return RegionGraph(std::move(nodes), std::move(edges));
}

RegionGraph generate(const SynthConfig& config) { return generate(config, make_mixture(config), config.rng_seed); }

std::pair<RegionGraph, RegionGraph> train_test_pair(const SynthConfig& config, std::uint64_t seed_a,
                                                    std::uint64_t seed_b) {
  const auto mix = make_mixture(config);
  return {generate(config, mix, seed_a), generate(config, mix, seed_b)};
}

std::pair<RegionGraph, RegionGraph> benchmark_pair(const SynthConfig& config) {
  return train_test_pair(config, config.rng_seed, config.rng_seed + 1);
}

}  // namespace activeseg
