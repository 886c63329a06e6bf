#include "activeseg/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "activeseg/rng.hpp"

namespace activeseg {

namespace {

struct SplitChoice {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // sum over children of (pos^2 + neg^2) / w; larger is purer
};

struct Entry {
  double value;
  std::uint32_t slot;
};

/// Grows one tree on presorted per-feature lists. Each node owns the same
/// range [begin, end) of every list; a split stable-partitions all of them.
class TreeGrower {
 public:
  TreeGrower(const TrainingSet& data, const std::vector<std::vector<std::uint32_t>>& presorted,
             const ForestConfig& config, Engine rng)
      : data_(data), presorted_(presorted), config_(config), rng_(std::move(rng)), mtry_(config.resolved_features(data.dim)) {}

  DecisionTree grow() {
    const std::size_t n = data_.size();
    const std::size_t d = data_.dim;
    std::vector<std::uint32_t> copies(n, 0);
    if (config_.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) ++copies[uniform_index(rng_, n)];
    } else {
      std::fill(copies.begin(), copies.end(), 1u);
    }
    // Slots are bootstrap draws ordered by sample index.
    std::vector<std::uint32_t> first_slot(n, 0);
    slot_sample_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      first_slot[i] = static_cast<std::uint32_t>(slot_sample_.size());
      for (std::uint32_t c = 0; c < copies[i]; ++c) slot_sample_.push_back(static_cast<std::uint32_t>(i));
    }
    const std::size_t m = slot_sample_.size();
    lists_.assign(d, {});
    for (std::size_t f = 0; f < d; ++f) {
      auto& list = lists_[f];
      list.reserve(m);
      for (auto i : presorted_[f])
        for (std::uint32_t c = 0; c < copies[i]; ++c) list.push_back({data_.row(i)[f], first_slot[i] + c});
    }
    goes_left_.assign(m, 0);
    buffer_.resize(m);
    feature_pool_.resize(d);
    nodes_.clear();
    build(0, m, 0);
    return DecisionTree(std::move(nodes_));
  }

 private:
  double weight(std::uint32_t slot) const { return data_.weights[slot_sample_[slot]]; }
  bool positive(std::uint32_t slot) const { return data_.labels[slot_sample_[slot]] > 0; }

  std::int32_t build(std::size_t begin, std::size_t end, std::size_t depth) {
    double pos = 0.0, total = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const auto slot = lists_[0][k].slot;
      total += weight(slot);
      if (positive(slot)) pos += weight(slot);
    }
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(TreeNode{-1, 0.0, -1, -1, pos, total});

    const std::size_t count = end - begin;
    const bool pure = pos <= 0.0 || pos >= total;
    if (pure || depth >= config_.max_depth || count < 2 * config_.min_leaf) return id;

    const double neg = total - pos;
    const double parent_score = (pos * pos + neg * neg) / total;
    const SplitChoice best = find_split(begin, end, total, pos);
    if (best.feature < 0 || !(best.score > parent_score * (1.0 + 1e-12))) return id;

    std::size_t nleft = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& e = lists_[static_cast<std::size_t>(best.feature)][k];
      goes_left_[e.slot] = e.value <= best.threshold;
      nleft += goes_left_[e.slot];
    }
    for (auto& list : lists_) {
      std::size_t l = begin, r = 0;
      for (std::size_t k = begin; k < end; ++k) {
        if (goes_left_[list[k].slot])
          list[l++] = list[k];
        else
          buffer_[r++] = list[k];
      }
      std::copy_n(buffer_.begin(), r, list.begin() + static_cast<std::ptrdiff_t>(l));
    }
    const std::size_t mid = begin + nleft;

    nodes_[static_cast<std::size_t>(id)].feature = best.feature;
    nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
    const auto left = build(begin, mid, depth + 1);
    const auto right = build(mid, end, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  SplitChoice find_split(std::size_t begin, std::size_t end, double tot, double tpos) {
    std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
    SplitChoice best;
    const std::size_t count = end - begin;
    for (std::size_t f = 0; f < mtry_; ++f) {
      const std::size_t pick = f + uniform_index(rng_, data_.dim - f);
      std::swap(feature_pool_[f], feature_pool_[pick]);
      const std::size_t feature = feature_pool_[f];
      const auto& list = lists_[feature];

      double lw = 0.0, lpos = 0.0;
      for (std::size_t k = 0; k + 1 < count; ++k) {
        const auto& e = list[begin + k];
        lw += weight(e.slot);
        if (positive(e.slot)) lpos += weight(e.slot);
        const double next = list[begin + k + 1].value;
        if (e.value == next) continue;
        const std::size_t nleft = k + 1;
        if (nleft < config_.min_leaf || count - nleft < config_.min_leaf) continue;
        const double rw = tot - lw;
        const double rpos = tpos - lpos;
        if (!(lw > 0.0) || !(rw > 0.0)) continue;
        const double lneg = lw - lpos;
        const double rneg = rw - rpos;
        const double score = (lpos * lpos + lneg * lneg) / lw + (rpos * rpos + rneg * rneg) / rw;
        if (best.feature < 0 || score > best.score) {
          double thr = 0.5 * (e.value + next);
          if (!(thr < next)) thr = e.value;
          best = {static_cast<std::int32_t>(feature), thr, score};
        }
      }
    }
    return best;
  }

  const TrainingSet& data_;
  const std::vector<std::vector<std::uint32_t>>& presorted_;
  const ForestConfig& config_;
  Engine rng_;
  std::size_t mtry_;
  std::vector<std::uint32_t> slot_sample_;
  std::vector<std::vector<Entry>> lists_;
  std::vector<std::uint8_t> goes_left_;
  std::vector<Entry> buffer_;
  std::vector<std::size_t> feature_pool_;
  std::vector<TreeNode> nodes_;
};

/// Sample indices sorted by each feature (ties by index).
std::vector<std::vector<std::uint32_t>> presort(const TrainingSet& data) {
  std::vector<std::vector<std::uint32_t>> out(data.dim);
  for (std::size_t f = 0; f < data.dim; ++f) {
    auto& idx = out[f];
    idx.resize(data.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      const double va = data.row(a)[f], vb = data.row(b)[f];
      return va < vb || (va == vb && a < b);
    });
  }
  return out;
}

void check_training(const TrainingSet& data, const ForestConfig& config) {
  if (data.size() == 0) throw DegenerateTrainingError("cannot train a forest on an empty labeled set");
  if (data.weights.size() != data.size() || data.features.size() != data.size() * data.dim)
    throw DimensionMismatch("training set arrays disagree in length");
  bool has_pos = false, has_neg = false;
  for (auto y : data.labels) {
    if (!is_valid_label(y)) throw PreconditionError("training labels must be -1 or +1");
    (y > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw DegenerateTrainingError("labeled set holds a single class");
  if (config.n_trees < 1) throw PreconditionError("n_trees must be >= 1");
  if (config.min_leaf < 1 || config.max_depth < 1) throw PreconditionError("min_leaf and max_depth must be >= 1");
  const auto mtry = config.resolved_features(data.dim);
  if (mtry < 1 || mtry > data.dim) throw PreconditionError("features_per_split must lie in [1, d]");
  for (double w : data.weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw PreconditionError("sample weights must be positive and finite");
}

DecisionTree grow_tree(const TrainingSet& data, const std::vector<std::vector<std::uint32_t>>& presorted,
                       const ForestConfig& config, std::size_t t) {
  TreeGrower grower(data, presorted, config, make_engine(config.rng_seed, {stream::kTree, t}));
  return grower.grow();
}

}  // namespace

std::size_t ForestConfig::resolved_features(std::size_t dim) const {
  if (features_per_split) return features_per_split;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim)))));
}

double DecisionTree::positive_fraction(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& nd = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
  }
  return nodes_[i].positive_weight / nodes_[i].total_weight;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double ForestModel::confidence(std::span<const double> x) const {
  if (!trained()) throw UntrainedModelError("forest has not been trained");
  if (x.size() != feature_dim_) throw DimensionMismatch("feature vector length differs from the training dimension");
  double s = 0.0;
  for (const auto& t : trees_) s += t.positive_fraction(x);
  const double h = 2.0 * (s / static_cast<double>(trees_.size())) - 1.0;
  return std::clamp(h, -1.0, 1.0);
}

TrainingSet make_training_set(const RegionGraph& graph, std::span<const EdgeId> ids, std::span<const Label> labels,
                              std::span<const double> weights) {
  if (ids.size() != labels.size() || (!weights.empty() && weights.size() != ids.size()))
    throw DimensionMismatch("ids, labels and weights must align");
  TrainingSet ts;
  ts.dim = graph.feature_dim();
  ts.features.reserve(ids.size() * ts.dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto x = graph.features(ids[i]);
    ts.features.insert(ts.features.end(), x.begin(), x.end());
    ts.labels.push_back(labels[i]);
    ts.weights.push_back(weights.empty() ? 1.0 : weights[i]);
  }
  return ts;
}

TrainingSet make_training_set(const RegionGraph& graph, const LabelState& state) {
  std::vector<EdgeId> ids;
  std::vector<Label> labels;
  for (const auto& [id, y] : state.labels()) {
    ids.push_back(id);
    labels.push_back(y);
  }
  return make_training_set(graph, ids, labels);
}

ForestModel train_forest_reference(const TrainingSet& data, const ForestConfig& config) {
  check_training(data, config);
  const auto presorted = presort(data);
  std::vector<DecisionTree> trees;
  trees.reserve(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) trees.push_back(grow_tree(data, presorted, config, t));
  return ForestModel(std::move(trees), config, data.size(), data.dim);
}

ForestModel train_forest(const TrainingSet& data, const ForestConfig& config) {
  check_training(data, config);
  const auto presorted = presort(data);
  std::vector<DecisionTree> trees(config.n_trees);
  const auto n_trees = static_cast<std::int64_t>(config.n_trees);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t t = 0; t < n_trees; ++t)
    trees[static_cast<std::size_t>(t)] = grow_tree(data, presorted, config, static_cast<std::size_t>(t));
  return ForestModel(std::move(trees), config, data.size(), data.dim);
}

ForestModel train_forest(const RegionGraph& graph, const LabelState& state, const ForestConfig& config) {
  return train_forest(make_training_set(graph, state), config);
}

std::vector<double> predict_confidence_reference(const ForestModel& model, const RegionGraph& graph,
                                                 std::span<const EdgeId> ids) {
  if (!model.trained()) throw UntrainedModelError("forest has not been trained");
  std::vector<double> out;
  out.reserve(ids.size());
  for (EdgeId id : ids) out.push_back(model.confidence(graph.features(id)));
  return out;
}

std::vector<double> predict_confidence(const ForestModel& model, const RegionGraph& graph, std::span<const EdgeId> ids) {
  if (!model.trained()) throw UntrainedModelError("forest has not been trained");
  for (EdgeId id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= graph.edge_count())
      throw PreconditionError("edge id " + std::to_string(id) + " is out of range");
  std::vector<double> out(ids.size());
  const auto n = static_cast<std::int64_t>(ids.size());
#pragma omp parallel for schedule(static) if (n > 256)
  for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = model.confidence(graph.features(ids[static_cast<std::size_t>(i)]));
  return out;
}

std::vector<double> predict_all(const ForestModel& model, const RegionGraph& graph) {
  std::vector<EdgeId> ids(graph.edge_count());
  std::iota(ids.begin(), ids.end(), EdgeId{0});
  return predict_confidence(model, graph, ids);
}

void to_json(nlohmann::json& j, const ForestConfig& c) {
  j = {{"n_trees", c.n_trees},       {"max_depth", c.max_depth}, {"min_leaf", c.min_leaf},
       {"features_per_split", c.features_per_split}, {"bootstrap", c.bootstrap}, {"rng_seed", c.rng_seed}};
}

void from_json(const nlohmann::json& j, ForestConfig& c) {
  ForestConfig d;
  c.n_trees = j.value("n_trees", d.n_trees);
  c.max_depth = j.value("max_depth", d.max_depth);
  c.min_leaf = j.value("min_leaf", d.min_leaf);
  c.features_per_split = j.value("features_per_split", d.features_per_split);
  c.bootstrap = j.value("bootstrap", d.bootstrap);
  c.rng_seed = j.value("rng_seed", d.rng_seed);
}

void to_json(nlohmann::json& j, const ForestModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees()) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(), left = nlohmann::json::array(),
                   right = nlohmann::json::array(), pos = nlohmann::json::array(), total = nlohmann::json::array();
    for (const auto& nd : t.nodes()) {
      feature.push_back(nd.feature);
      threshold.push_back(nd.threshold);
      left.push_back(nd.left);
      right.push_back(nd.right);
      pos.push_back(nd.positive_weight);
      total.push_back(nd.total_weight);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                     {"positive_weight", pos}, {"total_weight", total}});
  }
  j = {{"config", m.config()}, {"training_size", m.training_size()}, {"feature_dim", m.feature_dim()}, {"trees", trees}};
}

void from_json(const nlohmann::json& j, ForestModel& m) {
  std::vector<DecisionTree> trees;
  const std::size_t dim = j.at("feature_dim").get<std::size_t>();
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<std::int32_t>>();
    const auto right = t.at("right").get<std::vector<std::int32_t>>();
    const auto pos = t.at("positive_weight").get<std::vector<double>>();
    const auto total = t.at("total_weight").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || pos.size() != n || total.size() != n || n == 0)
      throw ValidationError("malformed tree in forest JSON");
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i] = {feature[i], threshold[i], left[i], right[i], pos[i], total[i]};
      if (feature[i] >= static_cast<std::int32_t>(dim)) throw ValidationError("tree split feature out of range");
      if (feature[i] >= 0 && (left[i] <= static_cast<std::int32_t>(i) || right[i] <= static_cast<std::int32_t>(i) ||
                              left[i] >= static_cast<std::int32_t>(n) || right[i] >= static_cast<std::int32_t>(n)))
        throw ValidationError("tree child index out of range");
      if (feature[i] < 0 && !(total[i] > 0.0)) throw ValidationError("leaf with non-positive total weight");
    }
    trees.emplace_back(std::move(nodes));
  }
  m = ForestModel(std::move(trees), j.at("config").get<ForestConfig>(), j.at("training_size").get<std::size_t>(), dim);
}

}  // namespace activeseg
