#include "activeseg/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace activeseg {

namespace {

using Pair = std::pair<std::int64_t, std::int64_t>;

double scaled_sqdist(std::span<const double> a, std::span<const double> b, std::span<const double> inv_sigma) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t * inv_sigma[k];
  }
  return s;
}

void check_config(const RegionGraph& graph, const AffinityConfig& config) {
  if (config.sigma_diag.size() != graph.feature_dim())
    throw DimensionMismatch("sigma has " + std::to_string(config.sigma_diag.size()) + " entries, features have " +
                            std::to_string(graph.feature_dim()));
  if (config.neighbors_k < 1) throw PreconditionError("neighbors_k must be >= 1");
  for (double s : config.sigma_diag)
    if (!(s > 0.0)) throw PreconditionError("sigma entries must be positive");
}

// Neighbors of datapoint i: the k smallest scaled distances, ties to the smaller id.
void nearest_of(std::size_t i, const RegionGraph& graph, std::span<const double> inv_sigma, std::size_t k,
                std::vector<std::pair<double, std::int64_t>>& buf, std::vector<std::int64_t>& out) {
  const std::size_t n = graph.edge_count();
  buf.clear();
  const auto xi = graph.features(static_cast<EdgeId>(i));
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    buf.emplace_back(scaled_sqdist(xi, graph.features(static_cast<EdgeId>(j)), inv_sigma), static_cast<std::int64_t>(j));
  }
  const std::size_t keep = std::min(k, buf.size());
  std::partial_sort(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(keep), buf.end());
  out.clear();
  for (std::size_t r = 0; r < keep; ++r) out.push_back(buf[r].second);
}

AffinityGraph assemble(const RegionGraph& graph, std::span<const double> sigma,
                       const std::vector<std::vector<std::int64_t>>& neighbors) {
  const std::size_t n = graph.edge_count();
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (auto j : neighbors[i]) pairs.emplace_back(std::min<std::int64_t>(i, j), std::max<std::int64_t>(i, j));
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<std::vector<std::pair<std::int64_t, double>>> rows(n);
  for (const auto& [a, b] : pairs) {
    const double w = kernel_weight(graph.features(a), graph.features(b), sigma);
    if (!(w > 0.0)) continue;  // underflow; keep entries strictly positive
    rows[static_cast<std::size_t>(a)].emplace_back(b, w);
    rows[static_cast<std::size_t>(b)].emplace_back(a, w);
  }

  AffinityGraph g;
  g.weights.rows = g.weights.cols = n;
  g.weights.row_ptr.assign(1, 0);
  g.degree.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end());
    for (const auto& [j, w] : r) {
      g.weights.col.push_back(j);
      g.weights.val.push_back(w);
      g.degree[i] += w;
    }
    g.weights.row_ptr.push_back(g.weights.col.size());
  }
  return g;
}

std::vector<double> inverse(std::span<const double> sigma) {
  std::vector<double> inv(sigma.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) inv[k] = 1.0 / sigma[k];
  return inv;
}

}  // namespace

double kernel_weight(std::span<const double> a, std::span<const double> b, std::span<const double> sigma) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t / sigma[k];
  }
  return std::exp(-0.5 * s);
}

double AffinityGraph::laplacian_quadratic(std::span<const double> y) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    s += degree[i] * y[i] * y[i];
    for (std::size_t p = weights.row_ptr[i]; p < weights.row_ptr[i + 1]; ++p)
      s -= weights.val[p] * y[i] * y[static_cast<std::size_t>(weights.col[p])];
  }
  return s;
}

AffinityConfig estimate_sigma(const RegionGraph& graph, double floor) {
  if (graph.edge_count() < 2) throw PreconditionError("need at least 2 edges to estimate feature variance");
  if (!(floor > 0.0)) throw PreconditionError("variance floor must be positive");
  const std::size_t n = graph.edge_count();
  const std::size_t d = graph.feature_dim();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = graph.features(static_cast<EdgeId>(i));
    for (std::size_t a = 0; a < d; ++a) mean[a] += x[a];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = graph.features(static_cast<EdgeId>(i));
    for (std::size_t a = 0; a < d; ++a) var[a] += (x[a] - mean[a]) * (x[a] - mean[a]);
  }
  AffinityConfig config;
  config.epsilon_floor = floor;
  config.sigma_diag.resize(d);
  for (std::size_t a = 0; a < d; ++a) config.sigma_diag[a] = std::max(var[a] / static_cast<double>(n), floor);
  return config;
}

AffinityGraph build_affinity_reference(const RegionGraph& graph, const AffinityConfig& config) {
  check_config(graph, config);
  const std::size_t n = graph.edge_count();
  const auto inv = inverse(config.sigma_diag);
  std::vector<std::vector<std::int64_t>> neighbors(n);
  std::vector<std::pair<double, std::int64_t>> buf;
  for (std::size_t i = 0; i < n; ++i) nearest_of(i, graph, inv, config.neighbors_k, buf, neighbors[i]);
  return assemble(graph, config.sigma_diag, neighbors);
}

AffinityGraph build_affinity(const RegionGraph& graph, const AffinityConfig& config) {
  check_config(graph, config);
  const std::size_t n = graph.edge_count();
  const auto inv = inverse(config.sigma_diag);
  std::vector<std::vector<std::int64_t>> neighbors(n);
#pragma omp parallel
  {
    std::vector<std::pair<double, std::int64_t>> buf;
    buf.reserve(n);
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
      nearest_of(static_cast<std::size_t>(i), graph, inv, config.neighbors_k, buf, neighbors[static_cast<std::size_t>(i)]);
  }
  return assemble(graph, config.sigma_diag, neighbors);
}

AffinityGraph affinity_from_dense(std::size_t n, const std::vector<double>& dense) {
  if (dense.size() != n * n) throw DimensionMismatch("dense affinity must be n*n");
  AffinityGraph g;
  g.weights.rows = g.weights.cols = n;
  g.weights.row_ptr.assign(1, 0);
  g.degree.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = dense[i * n + j];
      if (i == j || w == 0.0) continue;
      if (w != dense[j * n + i]) throw ValidationError("dense affinity is not symmetric");
      if (!(w > 0.0)) throw ValidationError("affinities must be positive");
      g.weights.col.push_back(static_cast<std::int64_t>(j));
      g.weights.val.push_back(w);
      g.degree[i] += w;
    }
    g.weights.row_ptr.push_back(g.weights.col.size());
  }
  return g;
}

LaplaceBlocks partition_blocks(const AffinityGraph& aff, const LabelState& state) {
  const std::size_t n = aff.size();
  if (state.size() != n)
    throw PreconditionError("label partition covers " + std::to_string(state.size()) + " datapoints, affinity has " +
                            std::to_string(n));
  if (state.labeled().empty()) throw PreconditionError("harmonic system needs at least one labeled datapoint");

  LaplaceBlocks b;
  b.unlabeled_ids = state.unlabeled_ids();
  b.labeled_ids = state.labeled_ids();
  constexpr std::int64_t kNone = -1;
  std::vector<std::int64_t> u_pos(n, kNone), l_pos(n, kNone);
  for (std::size_t r = 0; r < b.unlabeled_ids.size(); ++r) u_pos[static_cast<std::size_t>(b.unlabeled_ids[r])] = static_cast<std::int64_t>(r);
  for (std::size_t c = 0; c < b.labeled_ids.size(); ++c) l_pos[static_cast<std::size_t>(b.labeled_ids[c])] = static_cast<std::int64_t>(c);

  auto& L = b.laplacian_uu;
  auto& Wl = b.weights_ul;
  L.rows = L.cols = b.unlabeled_ids.size();
  Wl.rows = b.unlabeled_ids.size();
  Wl.cols = b.labeled_ids.size();
  const auto& W = aff.weights;
  for (EdgeId id : b.unlabeled_ids) {
    const auto i = static_cast<std::size_t>(id);
    const auto self = u_pos[i];
    bool diag_done = false;
    for (std::size_t p = W.row_ptr[i]; p < W.row_ptr[i + 1]; ++p) {
      const auto j = static_cast<std::size_t>(W.col[p]);
      if (u_pos[j] != kNone) {
        if (!diag_done && u_pos[j] > self) {
          L.col.push_back(self);
          L.val.push_back(aff.degree[i]);
          diag_done = true;
        }
        L.col.push_back(u_pos[j]);
        L.val.push_back(-W.val[p]);
      } else {
        Wl.col.push_back(l_pos[j]);
        Wl.val.push_back(W.val[p]);
      }
    }
    if (!diag_done) {
      L.col.push_back(self);
      L.val.push_back(aff.degree[i]);
    }
    L.row_ptr.push_back(L.col.size());
    Wl.row_ptr.push_back(Wl.col.size());
  }
  return b;
}

void write_matrix_market(std::ostream& out, const CsrMatrix& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows << ' ' << m.cols << ' ' << m.nnz() << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p) out << i + 1 << ' ' << m.col[p] + 1 << ' ' << m.val[p] << '\n';
}

void write_matrix_market(const std::filesystem::path& path, const CsrMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_matrix_market(out, m);
}

}  // namespace activeseg
