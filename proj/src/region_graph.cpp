#include "activeseg/region_graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace activeseg {

RegionGraph::RegionGraph(std::vector<SuperpixelNode> nodes, std::vector<BoundarySample> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  const std::size_t n = nodes_.size();
  if (n < 2) throw ValidationError("region graph needs at least 2 nodes");
  if (edges_.empty()) throw ValidationError("region graph needs at least 1 edge");

  std::sort(nodes_.begin(), nodes_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes_[i].id != static_cast<NodeId>(i))
      throw ValidationError("node ids must be exactly 0.." + std::to_string(n - 1));
    if (nodes_[i].size < 1) throw ValidationError("node " + std::to_string(i) + " has size < 1");
    if (nodes_[i].true_body && *nodes_[i].true_body < 0)
      throw ValidationError("node " + std::to_string(i) + " has a negative true_body");
  }

  std::sort(edges_.begin(), edges_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  dim_ = edges_.front().x.size();
  if (dim_ == 0) throw DimensionMismatch("edge features must be non-empty");

  adjacency_.assign(n, {});
  std::set<std::pair<NodeId, NodeId>> seen;
  features_.reserve(edges_.size() * dim_);
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    auto& e = edges_[k];
    if (e.id != static_cast<EdgeId>(k))
      throw ValidationError("edge ids must be exactly 0.." + std::to_string(edges_.size() - 1));
    if (e.u < 0 || e.v < 0 || e.u >= static_cast<NodeId>(n) || e.v >= static_cast<NodeId>(n))
      throw DanglingEndpoint("edge " + std::to_string(e.id) + " references a missing node");
    if (e.u == e.v) throw ValidationError("edge " + std::to_string(e.id) + " is a self-loop");
    if (e.u > e.v) std::swap(e.u, e.v);
    if (!seen.emplace(e.u, e.v).second)
      throw ValidationError("duplicate edge {" + std::to_string(e.u) + "," + std::to_string(e.v) + "}");
    if (e.x.size() != dim_)
      throw DimensionMismatch("edge " + std::to_string(e.id) + " has " + std::to_string(e.x.size()) +
                              " features, expected " + std::to_string(dim_));
    for (double f : e.x)
      if (!std::isfinite(f)) throw ValidationError("edge " + std::to_string(e.id) + " has a non-finite feature");
    if (e.true_label && !is_valid_label(*e.true_label))
      throw ValidationError("edge " + std::to_string(e.id) + " true_label must be -1 or +1");
    adjacency_[static_cast<std::size_t>(e.u)].push_back(e.id);
    adjacency_[static_cast<std::size_t>(e.v)].push_back(e.id);
    features_.insert(features_.end(), e.x.begin(), e.x.end());
  }

  all_edges_labeled_ = std::all_of(edges_.begin(), edges_.end(), [](const auto& e) { return e.true_label.has_value(); });
  all_nodes_have_body_ = std::all_of(nodes_.begin(), nodes_.end(), [](const auto& s) { return s.true_body.has_value(); });
}

std::vector<Label> RegionGraph::true_labels() const {
  if (!all_edges_labeled_) throw PreconditionError("graph has edges without true_label");
  std::vector<Label> out;
  out.reserve(edges_.size());
  for (const auto& e : edges_) out.push_back(*e.true_label);
  return out;
}

LabelState::LabelState(std::size_t edge_count) {
  for (std::size_t i = 0; i < edge_count; ++i) unlabeled_.insert(unlabeled_.end(), static_cast<EdgeId>(i));
}

LabelState apply_labels(const LabelState& state, const std::map<EdgeId, Label>& answers) {
  for (const auto& [id, y] : answers) {
    if (state.labeled_.contains(id)) throw PreconditionError("edge " + std::to_string(id) + " is already labeled");
    if (!state.unlabeled_.contains(id)) throw PreconditionError("unknown edge id " + std::to_string(id));
    if (!is_valid_label(y)) throw PreconditionError("label for edge " + std::to_string(id) + " must be -1 or +1");
  }
  LabelState next = state;
  for (const auto& [id, y] : answers) {
    next.unlabeled_.erase(id);
    next.labeled_.insert(id);
    next.labels_[id] = y;
  }
  return next;
}

}  // namespace activeseg
