#include "activeseg/segmentation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>
#include <unordered_map>

namespace activeseg {

ForestScorer::ForestScorer(const ForestModel& model) : model_(model) {
  if (!model_.trained()) throw UntrainedModelError("agglomeration needs a trained forest");
}

double ForestScorer::score(std::span<const double> features, std::span<const EdgeId>) const {
  return model_.confidence(features);
}

TruthScorer::TruthScorer(const RegionGraph& graph) : graph_(graph) {
  if (!graph_.has_edge_labels()) throw PreconditionError("truth scorer needs a true_label on every edge");
}

double TruthScorer::score(std::span<const double>, std::span<const EdgeId> members) const {
  double s = 0.0;
  for (EdgeId id : members) s += *graph_.edge(id).true_label;
  return s / static_cast<double>(members.size());
}

namespace {

struct Boundary {
  NodeId a = 0;  // region roots
  NodeId b = 0;
  std::vector<double> feature_sum;
  std::vector<EdgeId> members;
  EdgeId min_edge = 0;
  std::uint64_t version = 0;
  bool alive = true;
};

struct QueueEntry {
  double confidence;
  EdgeId min_edge;
  std::size_t boundary;
  std::uint64_t version;
  bool operator>(const QueueEntry& o) const {
    if (confidence != o.confidence) return confidence > o.confidence;
    return min_edge > o.min_edge;
  }
};

class Agglomerator {
 public:
  Agglomerator(const RegionGraph& graph, const BoundaryScorer& scorer) : graph_(graph), scorer_(scorer) {
    const std::size_t n = graph.node_count();
    parent_.resize(n);
    std::iota(parent_.begin(), parent_.end(), NodeId{0});
    neighbors_.resize(n);
    boundaries_.reserve(graph.edge_count());
    mean_.resize(graph.feature_dim());
    for (const auto& e : graph.edges()) {
      Boundary bd;
      bd.a = e.u;
      bd.b = e.v;
      bd.feature_sum = e.x;
      bd.members = {e.id};
      bd.min_edge = e.id;
      const std::size_t idx = boundaries_.size();
      boundaries_.push_back(std::move(bd));
      neighbors_[static_cast<std::size_t>(e.u)][e.v] = idx;
      neighbors_[static_cast<std::size_t>(e.v)][e.u] = idx;
      push(idx);
    }
  }

  /// Pops and merges until the lowest current confidence reaches limit
  /// (or nothing is left). Returns the merges performed.
  std::vector<MergeStep> run(double limit, bool unlimited) {
    std::vector<MergeStep> steps;
    while (!queue_.empty()) {
      const QueueEntry top = queue_.top();
      const auto& bd = boundaries_[top.boundary];
      if (!bd.alive || bd.version != top.version) {
        queue_.pop();
        continue;
      }
      if (!unlimited && !(top.confidence < limit)) break;
      queue_.pop();
      steps.push_back(merge(top.boundary, top.confidence));
    }
    return steps;
  }

  Segmentation result() {
    std::vector<std::int64_t> labels(parent_.size());
    for (std::size_t i = 0; i < parent_.size(); ++i) labels[i] = find(static_cast<NodeId>(i));
    return make_segmentation(labels);
  }

 private:
  NodeId find(NodeId x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      parent_[static_cast<std::size_t>(x)] = parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(x)])];
      x = parent_[static_cast<std::size_t>(x)];
    }
    return x;
  }

  void push(std::size_t idx) {
    auto& bd = boundaries_[idx];
    const double inv = 1.0 / static_cast<double>(bd.members.size());
    for (std::size_t k = 0; k < mean_.size(); ++k) mean_[k] = bd.feature_sum[k] * inv;
    const double c = scorer_.score(mean_, bd.members);
    queue_.push({c, bd.min_edge, idx, bd.version});
  }

  MergeStep merge(std::size_t idx, double confidence) {
    Boundary& joined = boundaries_[idx];
    joined.alive = false;
    NodeId s = joined.a, t = joined.b;
    // The region with more neighbors survives; ties keep the smaller id.
    auto& ns = neighbors_[static_cast<std::size_t>(s)];
    auto& nt = neighbors_[static_cast<std::size_t>(t)];
    if (nt.size() > ns.size() || (nt.size() == ns.size() && t < s)) std::swap(s, t);
    auto& surv = neighbors_[static_cast<std::size_t>(s)];
    auto& gone = neighbors_[static_cast<std::size_t>(t)];
    surv.erase(t);
    gone.erase(s);
    parent_[static_cast<std::size_t>(t)] = s;

    for (const auto& [nbr, bidx] : gone) {
      auto& other = neighbors_[static_cast<std::size_t>(nbr)];
      other.erase(t);
      Boundary& moving = boundaries_[bidx];
      auto it = surv.find(nbr);
      if (it == surv.end()) {
        moving.a = std::min(s, nbr);
        moving.b = std::max(s, nbr);
        surv[nbr] = bidx;
        other[s] = bidx;
      } else {
        Boundary& keep = boundaries_[it->second];
        for (std::size_t k = 0; k < keep.feature_sum.size(); ++k) keep.feature_sum[k] += moving.feature_sum[k];
        keep.members.insert(keep.members.end(), moving.members.begin(), moving.members.end());
        keep.min_edge = std::min(keep.min_edge, moving.min_edge);
        moving.alive = false;
      }
    }
    gone.clear();

    // Re-score every boundary of the merged region, in ascending neighbor order.
    std::vector<std::pair<NodeId, std::size_t>> incident(surv.begin(), surv.end());
    std::sort(incident.begin(), incident.end());
    for (const auto& [nbr, bidx] : incident) {
      ++boundaries_[bidx].version;
      push(bidx);
    }
    return {s, t, confidence, joined.min_edge};
  }

  const RegionGraph& graph_;
  const BoundaryScorer& scorer_;
  std::vector<NodeId> parent_;
  std::vector<std::unordered_map<NodeId, std::size_t>> neighbors_;
  std::vector<Boundary> boundaries_;
  std::vector<double> mean_;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue_;
};

}  // namespace

Segmentation agglomerate(const RegionGraph& graph, const BoundaryScorer& scorer, const AgglomerationConfig& config) {
  Agglomerator agg(graph, scorer);
  agg.run(config.delta_c, false);
  return agg.result();
}

Segmentation agglomerate(const RegionGraph& graph, const ForestModel& model, const AgglomerationConfig& config) {
  const ForestScorer scorer(model);
  return agglomerate(graph, scorer, config);
}

std::vector<MergeStep> merge_history(const RegionGraph& graph, const BoundaryScorer& scorer) {
  Agglomerator agg(graph, scorer);
  return agg.run(0.0, true);
}

Segmentation segmentation_at(const RegionGraph& graph, std::span<const MergeStep> history, double delta) {
  std::vector<NodeId> parent(graph.node_count());
  std::iota(parent.begin(), parent.end(), NodeId{0});
  auto find = [&](NodeId x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (const auto& step : history) {
    if (!(step.confidence < delta)) break;
    parent[static_cast<std::size_t>(find(step.absorbed))] = find(step.survivor);
  }
  std::vector<std::int64_t> labels(parent.size());
  for (std::size_t i = 0; i < parent.size(); ++i) labels[i] = find(static_cast<NodeId>(i));
  return make_segmentation(labels);
}

Segmentation identity_segmentation(std::size_t node_count) {
  Segmentation s;
  s.assignment.resize(node_count);
  std::iota(s.assignment.begin(), s.assignment.end(), std::int64_t{0});
  s.segment_count = node_count;
  return s;
}

Segmentation make_segmentation(std::span<const std::int64_t> labels) {
  Segmentation s;
  std::map<std::int64_t, std::int64_t> remap;
  s.assignment.reserve(labels.size());
  for (auto l : labels) {
    auto [it, inserted] = remap.emplace(l, static_cast<std::int64_t>(remap.size()));
    s.assignment.push_back(it->second);
  }
  s.segment_count = remap.size();
  return s;
}

}  // namespace activeseg
