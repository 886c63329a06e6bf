#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "activeseg/region_graph.hpp"
#include "activeseg/segmentation.hpp"

namespace activeseg {

struct SplitScores {
  double vi_false_merge = 0.0;  // H(T|S), bits
  double vi_false_split = 0.0;  // H(S|T), bits
  double ri_false_merge = 0.0;
  double ri_false_split = 0.0;
};

struct SplitPair {
  double false_merge = 0.0;
  double false_split = 0.0;
};

/// Weighted contingency table between a segmentation S and groundtruth T.
struct Contingency {
  std::vector<std::int64_t> seg_of_cell;
  std::vector<std::int64_t> body_of_cell;
  std::vector<double> cell_weight;
  std::vector<double> seg_weight;   // indexed by segment id
  std::vector<double> body_weight;  // indexed by dense body index
  double total = 0.0;
};

/// seg and truth are per-element labels (any non-negative integers), weights
/// per-element sizes.
Contingency contingency(std::span<const std::int64_t> seg, std::span<const std::int64_t> truth,
                        std::span<const double> weights);

/// H(T|S) and H(S|T) in bits from the contingency table.
SplitPair split_vi(const Contingency& table);
/// Falsely merged / falsely split element-pair fractions, from table marginals.
SplitPair split_ri(const Contingency& table);

/// Segment metrics against node true_body weighted by node size.
/// Throws PreconditionError when groundtruth is missing.
SplitPair split_vi(const Segmentation& seg, const RegionGraph& graph);
SplitPair split_ri(const Segmentation& seg, const RegionGraph& graph);
SplitScores evaluate_segmentation(const Segmentation& seg, const RegionGraph& graph);

/// Groundtruth segmentation from node bodies.
Segmentation groundtruth_segmentation(const RegionGraph& graph);

struct CalibrationResult {
  double delta = 0.0;
  double achieved = 0.0;   // candidate vi_false_merge at delta
  double target = 0.0;     // reference vi_false_merge at reference_delta
  std::size_t steps = 0;
  bool converged = false;  // false: closest delta returned after the step limit
};

/// Bisection on delta so that the candidate's vi_false_merge on the
/// calibration graph is within rel_band of the reference scorer's value at
/// reference_delta. A zero target returns the largest delta still giving zero.
CalibrationResult calibrate_delta(const RegionGraph& graph, const BoundaryScorer& candidate,
                                  const BoundaryScorer& reference, double reference_delta, double rel_band = 0.05,
                                  std::size_t max_steps = 30);

}  // namespace activeseg
