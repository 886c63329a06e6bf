#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "activeseg/region_graph.hpp"

namespace activeseg {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 20;
  std::size_t min_leaf = 1;
  std::size_t features_per_split = 0;  // 0 means ceil(sqrt(d))
  bool bootstrap = true;
  std::uint64_t rng_seed = 0;

  std::size_t resolved_features(std::size_t dim) const;
  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

/// E_l is empty or holds only one class.
class DegenerateTrainingError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class UntrainedModelError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double positive_weight = 0.0;
  double total_weight = 0.0;
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  /// Fraction of (weighted) positive training samples in the leaf reached by x.
  double positive_fraction(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t depth() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

/// Row-major training matrix with +/-1 labels and per-sample weights.
struct TrainingSet {
  std::vector<double> features;
  std::size_t dim = 0;
  std::vector<Label> labels;
  std::vector<double> weights;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(features).subspan(i * dim, dim); }
};

/// Gathers the labeled edges of a state, ascending id; weights default to 1.
TrainingSet make_training_set(const RegionGraph& graph, const LabelState& state);
TrainingSet make_training_set(const RegionGraph& graph, std::span<const EdgeId> ids, std::span<const Label> labels,
                              std::span<const double> weights = {});

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<DecisionTree> trees, ForestConfig config, std::size_t training_size, std::size_t feature_dim)
      : trees_(std::move(trees)), config_(config), training_size_(training_size), feature_dim_(feature_dim) {}

  bool trained() const noexcept { return !trees_.empty(); }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  const ForestConfig& config() const noexcept { return config_; }
  std::size_t training_size() const noexcept { return training_size_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }

  /// 2 * (mean positive leaf fraction over trees) - 1, in [-1, 1].
  double confidence(std::span<const double> x) const;

  friend bool operator==(const ForestModel&, const ForestModel&) = default;

 private:
  std::vector<DecisionTree> trees_;
  ForestConfig config_;
  std::size_t training_size_ = 0;
  std::size_t feature_dim_ = 0;
};

/// CART trees on bootstrap resamples, weighted Gini splits over a random
/// subset of features per node. Trees are grown in parallel; tree t draws from
/// the stream derive_seed(rng_seed, {tree, t}) so the result does not depend
/// on the thread count.
ForestModel train_forest(const TrainingSet& data, const ForestConfig& config);
/// Same forest, grown one tree after another.
ForestModel train_forest_reference(const TrainingSet& data, const ForestConfig& config);
ForestModel train_forest(const RegionGraph& graph, const LabelState& state, const ForestConfig& config);

/// Confidences for the given edges, computed in parallel over edges.
std::vector<double> predict_confidence(const ForestModel& model, const RegionGraph& graph, std::span<const EdgeId> ids);
std::vector<double> predict_confidence_reference(const ForestModel& model, const RegionGraph& graph,
                                                 std::span<const EdgeId> ids);
/// Confidences for every edge of the graph, indexed by edge id.
std::vector<double> predict_all(const ForestModel& model, const RegionGraph& graph);

void to_json(nlohmann::json& j, const ForestConfig& c);
void from_json(const nlohmann::json& j, ForestConfig& c);
void to_json(nlohmann::json& j, const ForestModel& m);
void from_json(const nlohmann::json& j, ForestModel& m);

}  // namespace activeseg
