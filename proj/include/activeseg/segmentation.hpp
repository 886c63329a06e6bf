#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "activeseg/forest.hpp"
#include "activeseg/region_graph.hpp"

namespace activeseg {

/// Confidence that a (possibly merged) boundary is a true cell boundary.
/// features is the size-weighted mean over the original boundary samples in
/// members.
class BoundaryScorer {
 public:
  virtual ~BoundaryScorer() = default;
  virtual double score(std::span<const double> features, std::span<const EdgeId> members) const = 0;
};

class ForestScorer final : public BoundaryScorer {
 public:
  /// Throws UntrainedModelError for an empty forest.
  explicit ForestScorer(const ForestModel& model);
  double score(std::span<const double> features, std::span<const EdgeId> members) const override;

 private:
  const ForestModel& model_;
};

/// Perfect predictor: mean true_label of the member samples.
class TruthScorer final : public BoundaryScorer {
 public:
  explicit TruthScorer(const RegionGraph& graph);
  double score(std::span<const double> features, std::span<const EdgeId> members) const override;

 private:
  const RegionGraph& graph_;
};

struct AgglomerationConfig {
  double delta_c = 0.2;
};

struct Segmentation {
  std::vector<std::int64_t> assignment;  // node id -> segment id, contiguous from 0
  std::size_t segment_count = 0;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

struct MergeStep {
  NodeId survivor = 0;
  NodeId absorbed = 0;
  double confidence = 0.0;
  EdgeId boundary = 0;  // smallest original edge id of the merged boundary
};

/// Greedy merging: pop the lowest-confidence boundary (ties by smallest
/// original edge id); merge while it is below delta_c. Boundaries that end up
/// between the same pair of regions are combined by size-weighted mean of
/// their features, where the size of a boundary is its number of original
/// samples, and every boundary of the merged region is re-scored.
Segmentation agglomerate(const RegionGraph& graph, const BoundaryScorer& scorer, const AgglomerationConfig& config);
Segmentation agglomerate(const RegionGraph& graph, const ForestModel& model, const AgglomerationConfig& config);

/// Full merge order with no threshold (runs until no boundary is left).
/// Cutting it before the first step with confidence >= delta gives
/// agglomerate(..., delta).
std::vector<MergeStep> merge_history(const RegionGraph& graph, const BoundaryScorer& scorer);
Segmentation segmentation_at(const RegionGraph& graph, std::span<const MergeStep> history, double delta);

/// Identity segmentation (every superpixel its own segment).
Segmentation identity_segmentation(std::size_t node_count);
/// Renumbers arbitrary labels to 0.. in order of first appearance.
Segmentation make_segmentation(std::span<const std::int64_t> labels);

}  // namespace activeseg
