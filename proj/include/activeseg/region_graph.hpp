#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "activeseg/errors.hpp"

namespace activeseg {

using NodeId = std::int64_t;
using EdgeId = std::int64_t;

/// Boundary label: +1 true cell boundary, -1 spurious over-segmentation boundary.
using Label = int;

struct SuperpixelNode {
  NodeId id = 0;
  std::int64_t size = 1;
  std::optional<std::int64_t> true_body;
};

struct BoundarySample {
  EdgeId id = 0;
  NodeId u = 0;  // u < v
  NodeId v = 0;
  std::vector<double> x;
  std::optional<Label> true_label;
};

/// Superpixel adjacency graph. Node ids are 0..N-1 and edge ids 0..|E|-1
/// (dense, so ids double as indices). Immutable after construction.
class RegionGraph {
 public:
  RegionGraph() = default;

  /// Validates and takes ownership. Endpoints are reordered so u < v.
  /// Throws DanglingEndpoint, DimensionMismatch or ValidationError.
  RegionGraph(std::vector<SuperpixelNode> nodes, std::vector<BoundarySample> edges);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::size_t feature_dim() const noexcept { return dim_; }

  const std::vector<SuperpixelNode>& nodes() const noexcept { return nodes_; }
  const std::vector<BoundarySample>& edges() const noexcept { return edges_; }
  const SuperpixelNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const BoundarySample& edge(EdgeId id) const { return edges_.at(static_cast<std::size_t>(id)); }

  /// Row-major |E| x d copy of all edge features.
  std::span<const double> feature_matrix() const noexcept { return features_; }
  std::span<const double> features(EdgeId id) const {
    return std::span<const double>(features_).subspan(static_cast<std::size_t>(id) * dim_, dim_);
  }

  /// Incident edge ids of a node, ascending.
  const std::vector<EdgeId>& incident(NodeId id) const { return adjacency_.at(static_cast<std::size_t>(id)); }

  bool has_edge_labels() const noexcept { return all_edges_labeled_; }
  bool has_bodies() const noexcept { return all_nodes_have_body_; }

  /// True labels as a dense vector; throws PreconditionError if any is missing.
  std::vector<Label> true_labels() const;

 private:
  std::vector<SuperpixelNode> nodes_;
  std::vector<BoundarySample> edges_;
  std::vector<std::vector<EdgeId>> adjacency_;
  std::vector<double> features_;
  std::size_t dim_ = 0;
  bool all_edges_labeled_ = false;
  bool all_nodes_have_body_ = false;
};

/// Partition of edge ids into labeled (with +/-1 answers) and unlabeled sets.
/// Both sets iterate in ascending id order.
class LabelState {
 public:
  LabelState() = default;
  /// Every edge id in [0, edge_count) starts unlabeled.
  explicit LabelState(std::size_t edge_count);

  const std::set<EdgeId>& labeled() const noexcept { return labeled_; }
  const std::set<EdgeId>& unlabeled() const noexcept { return unlabeled_; }
  const std::map<EdgeId, Label>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labeled_.size() + unlabeled_.size(); }

  bool is_labeled(EdgeId id) const { return labeled_.contains(id); }
  Label label(EdgeId id) const { return labels_.at(id); }

  std::vector<EdgeId> labeled_ids() const { return {labeled_.begin(), labeled_.end()}; }
  std::vector<EdgeId> unlabeled_ids() const { return {unlabeled_.begin(), unlabeled_.end()}; }

  friend bool operator==(const LabelState&, const LabelState&) = default;

 private:
  friend LabelState apply_labels(const LabelState&, const std::map<EdgeId, Label>&);
  std::set<EdgeId> labeled_;
  std::map<EdgeId, Label> labels_;
  std::set<EdgeId> unlabeled_;
};

/// Moves answered ids from the unlabeled to the labeled set.
/// Throws PreconditionError for ids that are unknown, already labeled, or
/// carry a label other than +/-1.
LabelState apply_labels(const LabelState& state, const std::map<EdgeId, Label>& answers);

inline bool is_valid_label(Label y) { return y == 1 || y == -1; }

/// Hard decision for a signed confidence. Zero counts as -1.
inline Label sign_label(double h) { return h > 0.0 ? 1 : -1; }

}  // namespace activeseg
