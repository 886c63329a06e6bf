#include "activeseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace activeseg {

namespace {

double pairs(double w) { return 0.5 * w * (w - 1.0); }

void require_groundtruth(const RegionGraph& graph) {
  if (!graph.has_bodies()) throw PreconditionError("segmentation metrics need true_body on every node");
}

std::vector<std::int64_t> bodies(const RegionGraph& graph) {
  std::vector<std::int64_t> out;
  out.reserve(graph.node_count());
  for (const auto& s : graph.nodes()) out.push_back(*s.true_body);
  return out;
}

std::vector<double> sizes(const RegionGraph& graph) {
  std::vector<double> out;
  out.reserve(graph.node_count());
  for (const auto& s : graph.nodes()) out.push_back(static_cast<double>(s.size));
  return out;
}

}  // namespace

Contingency contingency(std::span<const std::int64_t> seg, std::span<const std::int64_t> truth,
                        std::span<const double> weights) {
  if (seg.size() != truth.size() || seg.size() != weights.size())
    throw DimensionMismatch("segmentation, groundtruth and weights must align");
  std::map<std::int64_t, std::int64_t> seg_index, body_index;
  for (auto s : seg) seg_index.emplace(s, 0);
  for (auto t : truth) body_index.emplace(t, 0);
  std::int64_t k = 0;
  for (auto& [key, v] : seg_index) v = k++;
  k = 0;
  for (auto& [key, v] : body_index) v = k++;

  Contingency c;
  c.seg_weight.assign(seg_index.size(), 0.0);
  c.body_weight.assign(body_index.size(), 0.0);
  std::map<std::pair<std::int64_t, std::int64_t>, double> cells;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const auto s = seg_index[seg[i]];
    const auto t = body_index[truth[i]];
    cells[{s, t}] += weights[i];
    c.seg_weight[static_cast<std::size_t>(s)] += weights[i];
    c.body_weight[static_cast<std::size_t>(t)] += weights[i];
    c.total += weights[i];
  }
  for (const auto& [key, w] : cells) {
    c.seg_of_cell.push_back(key.first);
    c.body_of_cell.push_back(key.second);
    c.cell_weight.push_back(w);
  }
  return c;
}

SplitPair split_vi(const Contingency& table) {
  if (!(table.total > 0.0)) throw PreconditionError("contingency table is empty");
  // Conditional entropies summed cell by cell, so a cell that fills its whole
  // segment (or body) contributes exactly zero.
  double h_body_given_seg = 0.0, h_seg_given_body = 0.0;
  for (std::size_t c = 0; c < table.cell_weight.size(); ++c) {
    const double w = table.cell_weight[c];
    if (!(w > 0.0)) continue;
    const double p = w / table.total;
    h_body_given_seg -= p * std::log2(w / table.seg_weight[static_cast<std::size_t>(table.seg_of_cell[c])]);
    h_seg_given_body -= p * std::log2(w / table.body_weight[static_cast<std::size_t>(table.body_of_cell[c])]);
  }
  return {std::max(0.0, h_body_given_seg), std::max(0.0, h_seg_given_body)};
}

SplitPair split_ri(const Contingency& table) {
  const double total_pairs = pairs(table.total);
  if (!(total_pairs > 0.0)) return {0.0, 0.0};
  double same_seg = 0.0, same_body = 0.0, same_both = 0.0;
  for (double w : table.seg_weight) same_seg += pairs(w);
  for (double w : table.body_weight) same_body += pairs(w);
  for (double w : table.cell_weight) same_both += pairs(w);
  return {(same_seg - same_both) / total_pairs, (same_body - same_both) / total_pairs};
}

SplitPair split_vi(const Segmentation& seg, const RegionGraph& graph) {
  require_groundtruth(graph);
  return split_vi(contingency(seg.assignment, bodies(graph), sizes(graph)));
}

SplitPair split_ri(const Segmentation& seg, const RegionGraph& graph) {
  require_groundtruth(graph);
  return split_ri(contingency(seg.assignment, bodies(graph), sizes(graph)));
}

SplitScores evaluate_segmentation(const Segmentation& seg, const RegionGraph& graph) {
  require_groundtruth(graph);
  if (seg.assignment.size() != graph.node_count()) throw DimensionMismatch("segmentation size differs from node count");
  const auto table = contingency(seg.assignment, bodies(graph), sizes(graph));
  const auto vi = split_vi(table);
  const auto ri = split_ri(table);
  return {vi.false_merge, vi.false_split, ri.false_merge, ri.false_split};
}

Segmentation groundtruth_segmentation(const RegionGraph& graph) {
  require_groundtruth(graph);
  return make_segmentation(bodies(graph));
}

CalibrationResult calibrate_delta(const RegionGraph& graph, const BoundaryScorer& candidate,
                                  const BoundaryScorer& reference, double reference_delta, double rel_band,
                                  std::size_t max_steps) {
  require_groundtruth(graph);
  CalibrationResult res;
  {
    const auto ref_hist = merge_history(graph, reference);
    res.target = split_vi(segmentation_at(graph, ref_hist, reference_delta), graph).false_merge;
  }
  const auto hist = merge_history(graph, candidate);
  auto false_merge_at = [&](double delta) { return split_vi(segmentation_at(graph, hist, delta), graph).false_merge; };

  double lo = -1.0, hi = 1.0;
  if (res.target == 0.0) {
    // Largest delta that still merges nothing wrong.
    for (res.steps = 0; res.steps < max_steps; ++res.steps) {
      const double mid = 0.5 * (lo + hi);
      (false_merge_at(mid) == 0.0 ? lo : hi) = mid;
    }
    res.delta = lo;
    res.achieved = false_merge_at(lo);
    res.converged = res.achieved == 0.0;
    return res;
  }

  auto within = [&](double v) { return std::abs(v - res.target) <= rel_band * res.target; };
  res.delta = reference_delta;
  res.achieved = false_merge_at(reference_delta);
  if (within(res.achieved)) {
    res.converged = true;
    return res;
  }
  double best_gap = std::abs(res.achieved - res.target);
  for (res.steps = 1; res.steps <= max_steps; ++res.steps) {
    const double mid = 0.5 * (lo + hi);
    const double v = false_merge_at(mid);
    if (std::abs(v - res.target) < best_gap) {
      best_gap = std::abs(v - res.target);
      res.delta = mid;
      res.achieved = v;
    }
    if (within(v)) {
      res.converged = true;
      return res;
    }
    (v < res.target ? lo : hi) = mid;
  }
  res.steps = max_steps;
  return res;
}

}  // namespace activeseg
