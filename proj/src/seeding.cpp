#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "activeseg/active_loop.hpp"
#include "activeseg/rng.hpp"

namespace activeseg {

namespace {

double sqdist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

std::vector<EdgeId> seed_by_degree(const AffinityGraph& aff, std::size_t count) {
  const std::size_t n = aff.size();
  std::vector<EdgeId> order(n);
  std::iota(order.begin(), order.end(), EdgeId{0});
  std::stable_sort(order.begin(), order.end(), [&](EdgeId a, EdgeId b) {
    return aff.degree[static_cast<std::size_t>(a)] > aff.degree[static_cast<std::size_t>(b)];
  });
  std::vector<bool> chosen(n, false), blocked(n, false);
  std::vector<EdgeId> out;
  for (EdgeId id : order) {
    if (out.size() == count) break;
    const auto i = static_cast<std::size_t>(id);
    if (blocked[i]) continue;
    chosen[i] = true;
    out.push_back(id);
    for (std::size_t p = aff.weights.row_ptr[i]; p < aff.weights.row_ptr[i + 1]; ++p)
      blocked[static_cast<std::size_t>(aff.weights.col[p])] = true;
  }
  // Relax non-adjacency once the independent candidates run out.
  for (EdgeId id : order) {
    if (out.size() == count) break;
    if (!chosen[static_cast<std::size_t>(id)]) {
      chosen[static_cast<std::size_t>(id)] = true;
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace

std::vector<double> standardized_features(const RegionGraph& graph) {
  const std::size_t n = graph.edge_count(), d = graph.feature_dim();
  const auto x = graph.feature_matrix();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) mean[a] += x[i * d + a];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) sd[a] += (x[i * d + a] - mean[a]) * (x[i * d + a] - mean[a]);
  for (auto& s : sd) s = std::sqrt(std::max(s / static_cast<double>(n), 1e-8));
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) out[i * d + a] = (x[i * d + a] - mean[a]) / sd[a];
  return out;
}

KMeansResult kmeans(std::span<const double> data, std::size_t dim, std::size_t k, std::size_t max_iterations,
                    std::uint64_t rng_seed) {
  const std::size_t n = data.size() / dim;
  if (k == 0 || k > n) throw PreconditionError("k-means needs 1 <= k <= number of points");
  Engine rng(rng_seed);
  KMeansResult res;
  res.centers.resize(k * dim);

  // k-means++ seeding
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  std::size_t first = uniform_index(rng, n);
  std::copy_n(data.data() + first * dim, dim, res.centers.data());
  for (std::size_t c = 1; c < k; ++c) {
    const double* prev = res.centers.data() + (c - 1) * dim;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], sqdist(data.data() + i * dim, prev, dim));
      total += closest[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += closest[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(rng, n);
    }
    std::copy_n(data.data() + pick * dim, dim, res.centers.data() + c * dim);
  }

  res.assignment.assign(n, k);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
    bool changed = false;
    const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) reduction(|| : changed)
    for (std::int64_t ii = 0; ii < ni; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = sqdist(data.data() + i * dim, res.centers.data() + c * dim, dim);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = res.assignment[i];
      ++counts[c];
      for (std::size_t a = 0; a < dim; ++a) sums[c * dim + a] += data[i * dim + a];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c])  // an empty cluster keeps its previous center
        for (std::size_t a = 0; a < dim; ++a) res.centers[c * dim + a] = sums[c * dim + a] / static_cast<double>(counts[c]);
  }
  return res;
}

std::vector<EdgeId> seed_initial(const RegionGraph& graph, const AffinityGraph& aff, std::size_t count,
                                 SeedMethod method, std::uint64_t rng_seed) {
  const std::size_t n = graph.edge_count();
  if (count > n) throw PreconditionError("seed count exceeds the number of edges");
  std::vector<EdgeId> out;
  if (count == n) {
    out.resize(n);
    std::iota(out.begin(), out.end(), EdgeId{0});
    return out;
  }
  if (count == 0) return out;

  if (method == SeedMethod::max_degree) {
    if (aff.size() != n) throw DimensionMismatch("affinity graph size differs from edge count");
    out = seed_by_degree(aff, count);
  } else {
    const std::size_t d = graph.feature_dim();
    const auto z = standardized_features(graph);
    const auto km = kmeans(z, d, count, 100, derive_seed(rng_seed, {stream::kSeeding}));
    std::vector<bool> taken(n, false);
    std::vector<std::pair<double, std::size_t>> order(n);
    for (std::size_t c = 0; c < count; ++c) {
      const double* center = km.centers.data() + c * d;
      for (std::size_t i = 0; i < n; ++i) order[i] = {sqdist(z.data() + i * d, center, d), i};
      std::sort(order.begin(), order.end());
      for (const auto& [dist, i] : order) {
        if (!taken[i]) {
          taken[i] = true;
          out.push_back(static_cast<EdgeId>(i));
          break;
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace activeseg
