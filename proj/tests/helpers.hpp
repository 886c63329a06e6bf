#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "activeseg/affinity.hpp"
#include "activeseg/region_graph.hpp"

namespace testutil {

using namespace activeseg;

/// Star-shaped region graph whose edges carry the given feature vectors:
/// node 0 is the hub and edge i joins nodes 0 and i + 1.
inline RegionGraph star_graph(const std::vector<std::vector<double>>& xs, const std::vector<Label>& labels = {}) {
  std::vector<SuperpixelNode> nodes(xs.size() + 1);
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].id = static_cast<NodeId>(i);
  std::vector<BoundarySample> edges(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    edges[i].id = static_cast<EdgeId>(i);
    edges[i].u = 0;
    edges[i].v = static_cast<NodeId>(i + 1);
    edges[i].x = xs[i];
    if (!labels.empty()) edges[i].true_label = labels[i];
  }
  return RegionGraph(std::move(nodes), std::move(edges));
}

inline LabelState labeled(std::size_t n, const std::map<EdgeId, Label>& answers) {
  return apply_labels(LabelState(n), answers);
}

/// Random symmetric weights, zero diagonal, each off-diagonal pair present
/// with probability density.
inline std::vector<double> random_dense_weights(std::size_t n, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < density) w[i * n + j] = w[j * n + i] = 0.05 + 0.95 * u(rng);
  return w;
}

/// Gaussian elimination with partial pivoting on a dense copy.
inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a[r * n + k] * x[k];
    x[r] = s / a[r * n + r];
  }
  return x;
}

}  // namespace testutil
