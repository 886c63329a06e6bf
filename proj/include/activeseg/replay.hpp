#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "activeseg/active_loop.hpp"
#include "activeseg/metrics.hpp"

namespace activeseg {

struct TrialResult {
  std::uint64_t seed = 0;
  ForestModel model;
  ErrorTrace trace;
  std::vector<EdgeId> queried;   // every id answered after the seed set, in order
  std::vector<EdgeId> seeds;
  std::size_t labels_used = 0;
  bool stopped_by_rule = false;  // stop rule fired before the budget ran out
};

/// Seed of trial t under a master seed.
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial);

/// Groundtruth answers for a batch; throws PreconditionError on a missing label.
std::map<EdgeId, Label> oracle_answers(const RegionGraph& graph, const QueryBatch& batch);

/// Runs one session to completion, answering from true labels.
TrialResult run_trial(std::shared_ptr<const RegionGraph> graph, std::shared_ptr<const AffinityGraph> affinity,
                      const LoopConfig& config);

/// Runs independent trials; trial t uses rng_seed = trial_seed(master_seed, t).
/// The affinity graph is built once and shared.
std::vector<TrialResult> run_replay(std::shared_ptr<const RegionGraph> graph, const LoopConfig& config,
                                    std::size_t trials, std::uint64_t master_seed);

/// Forest on every edge label, with the delivered-model stream of config.
ForestModel full_supervision_forest(const RegionGraph& graph, const LoopConfig& config);

/// Fraction of edges whose hard prediction matches true_label.
double classification_accuracy(const ForestModel& model, const RegionGraph& graph);

/// One row of an experiment table: a trained model scored on the test graph.
struct ScoreRow {
  std::string strategy;  // "all" for the full-supervision forest
  std::size_t trial = 0;
  std::size_t labels_used = 0;
  bool stopped_by_rule = false;
  double accuracy = 0.0;
  bool segmented = false;
  double delta_c = 0.0;
  SplitScores scores;
};

/// Agglomerates the test graph with model. When calibrate is set, delta is
/// chosen so that the false-merge VI matches the reference model's at
/// reference_delta; otherwise reference_delta is used directly.
void score_segmentation(ScoreRow& row, const RegionGraph& test, const ForestModel& model,
                        const ForestModel& reference, double reference_delta, bool calibrate);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

/// strategy,trial,delta_c,vi_fm,vi_fs,ri_fm,ri_fs (segmented rows only).
std::string scores_csv(const std::vector<ScoreRow>& rows);
/// One line per strategy in first-appearance order with mean and std of
/// labels used, accuracy and the segmentation scores.
std::string summary_csv(const std::vector<ScoreRow>& rows);

}  // namespace activeseg
