#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "activeseg/region_graph.hpp"
#include "activeseg/sparse.hpp"

namespace activeseg {

struct AffinityConfig {
  std::vector<double> sigma_diag;  // per-feature variance, length d
  std::size_t neighbors_k = 10;
  double epsilon_floor = 1e-8;
};

/// Sparse symmetric affinity over boundary samples (edges as datapoints).
struct AffinityGraph {
  CsrMatrix weights;            // n x n, zero diagonal, entries in (0, 1]
  std::vector<double> degree;   // row sums of weights

  std::size_t size() const noexcept { return degree.size(); }
  /// y^T (D - W) y.
  double laplacian_quadratic(std::span<const double> y) const;
};

/// Population variance of every feature over all edges, clamped below by floor.
AffinityConfig estimate_sigma(const RegionGraph& graph, double floor = 1e-8);

/// Gaussian kernel on the Mahalanobis distance with diagonal covariance:
///   w_ij = exp(-1/2 * sum_a (x_ia - x_ja)^2 / sigma_a).
/// Each datapoint keeps its neighbors_k largest-affinity partners (ties to the
/// smaller id); a pair kept by either side is stored in both rows.
AffinityGraph build_affinity(const RegionGraph& graph, const AffinityConfig& config);

/// Single-threaded scan producing the same graph as build_affinity.
AffinityGraph build_affinity_reference(const RegionGraph& graph, const AffinityConfig& config);

/// Builds an affinity graph from explicit symmetric weights (tests, tools).
AffinityGraph affinity_from_dense(std::size_t n, const std::vector<double>& dense);

double kernel_weight(std::span<const double> a, std::span<const double> b, std::span<const double> sigma);

/// Blocks of the harmonic system L_uu y_u = W_ul y_l. L_uu keeps the
/// full-graph degrees on its diagonal. Rows follow unlabeled_ids, W_ul
/// columns follow labeled_ids.
struct LaplaceBlocks {
  CsrMatrix laplacian_uu;
  CsrMatrix weights_ul;
  std::vector<EdgeId> unlabeled_ids;
  std::vector<EdgeId> labeled_ids;
};

/// Throws PreconditionError when the partition size differs from the graph or
/// nothing is labeled.
LaplaceBlocks partition_blocks(const AffinityGraph& aff, const LabelState& state);

void write_matrix_market(std::ostream& out, const CsrMatrix& m);
void write_matrix_market(const std::filesystem::path& path, const CsrMatrix& m);

}  // namespace activeseg
