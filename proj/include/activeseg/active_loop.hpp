#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "activeseg/affinity.hpp"
#include "activeseg/forest.hpp"
#include "activeseg/laplace_solver.hpp"
#include "activeseg/region_graph.hpp"

namespace activeseg {

enum class SeedMethod { kmeans, max_degree };
enum class Strategy { proposed, cotrain, uncertain, random, iwal };

std::string to_string(SeedMethod m);
std::string to_string(Strategy s);
SeedMethod parse_seed_method(const std::string& s);
Strategy parse_strategy(const std::string& s);

struct LoopConfig {
  double seed_fraction = 0.03;
  SeedMethod seed_method = SeedMethod::kmeans;
  std::size_t batch_size = 10;
  std::size_t budget = 0;  // 0 means min(5000, ceil(0.17 |E|))
  std::size_t stop_extra = 500;
  std::uint64_t rng_seed = 0;
  Strategy strategy = Strategy::proposed;

  ForestConfig forest;  // rng_seed inside is ignored; streams derive from rng_seed above
  std::size_t affinity_neighbors = 10;
  double affinity_floor = 1e-8;
  SolverConfig solver;
  double uncertain_band = 0.3;
  std::size_t committee_size = 10;
  double iwal_p_min = 0.1;

  std::size_t seed_count(std::size_t edge_count) const;
  std::size_t resolved_budget(std::size_t edge_count) const;
  /// Throws PreconditionError when the invariants fail for this edge count.
  void validate(std::size_t edge_count) const;
};

void to_json(nlohmann::json& j, const LoopConfig& c);
void from_json(const nlohmann::json& j, LoopConfig& c);

// ---------------------------------------------------------------------------
// Seeding

/// Initial labeled set. kmeans: centers of k-means (k-means++ init, at most
/// 100 Lloyd iterations) on standardized features, each replaced by its
/// nearest unused edge. max_degree: highest affinity degree first, skipping
/// neighbors of chosen points until exhausted. Result is ascending.
std::vector<EdgeId> seed_initial(const RegionGraph& graph, const AffinityGraph& aff, std::size_t count,
                                 SeedMethod method, std::uint64_t rng_seed);

struct KMeansResult {
  std::vector<double> centers;  // k x d, row-major
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ initialization on row-major data.
KMeansResult kmeans(std::span<const double> data, std::size_t dim, std::size_t k, std::size_t max_iterations,
                    std::uint64_t rng_seed);

/// Features standardized per column (zero mean, unit population variance).
std::vector<double> standardized_features(const RegionGraph& graph);

// ---------------------------------------------------------------------------
// Ranking and query selection

struct QueryBatch {
  std::vector<EdgeId> ids;       // issue order
  std::vector<double> scores;    // parallel to ids
  std::size_t round = 0;
  std::string token;             // identifies the batch for idempotent submission

  std::size_t size() const noexcept { return ids.size(); }
  friend bool operator==(const QueryBatch&, const QueryBatch&) = default;
};

/// R(e) = 1 - h_c(e) * y_u(e), with y_u clamped to [-1, 1].
std::vector<double> rank_disagreement(std::span<const double> h_c, std::span<const double> y_u);

/// Top-k pool entries by descending score; ties by ascending id.
QueryBatch top_k_by_score(std::span<const EdgeId> pool, std::span<const double> scores, std::size_t k);

/// Pool entries with |h_c| <= band ordered by |h_c| ascending (ties by id),
/// topped up with the smallest |h_c| outside the band.
QueryBatch strategy_uncertain(std::span<const EdgeId> pool, std::span<const double> h_c, std::size_t k,
                              double band = 0.3);

/// Uniform sample of k pool entries without replacement.
QueryBatch strategy_random(std::span<const EdgeId> pool, std::size_t k, std::uint64_t rng_seed);

/// Entries where the two classifiers' hard decisions differ (ascending id),
/// filled by largest |h_a - h_b| (ties ascending id).
QueryBatch select_cotrain(std::span<const EdgeId> pool, std::span<const double> h_a, std::span<const double> h_b,
                          std::size_t k);

/// p(e) = p_min + (1 - p_min) * spread(e), spread = (max - min) / 2 over the committee.
double iwal_query_probability(double spread, double p_min);

/// Visits the pool in a random permutation and keeps each entry with
/// probability p(e); returns the first k kept. scores hold p(e).
QueryBatch select_iwal(std::span<const EdgeId> pool, std::span<const double> spread, std::size_t k, double p_min,
                       std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Diagnostics and stopping

struct RoundRecord {
  std::size_t round = 0;
  std::size_t labels_used = 0;  // after this round's answers
  std::size_t batch_size = 0;
  std::size_t clf_query_err = 0;
  std::size_t prop_query_err = 0;
  std::optional<std::size_t> mutual_excl_err;  // needs groundtruth
  std::optional<double> pool_accuracy;          // needs groundtruth

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct ErrorTrace {
  std::vector<RoundRecord> rounds;

  bool empty() const noexcept { return rounds.empty(); }
  friend bool operator==(const ErrorTrace&, const ErrorTrace&) = default;
};

/// CSV with header round,labels_used,clf_query_err,prop_query_err,mutual_excl_err,pool_accuracy.
std::string trace_to_csv(const ErrorTrace& trace);
nlohmann::json trace_to_json(const ErrorTrace& trace);

enum class StopDecision { continue_querying, stopping_phase, stop };
std::string to_string(StopDecision d);

/// Stopping phase starts at the first round whose classifier query error is
/// zero; stop once stop_extra more labels have been answered after that round
/// or the budget is used up.
StopDecision check_stop(const ErrorTrace& trace, const LoopConfig& config, std::size_t budget);

// ---------------------------------------------------------------------------
// Session

enum class Phase { awaiting_labels, computing, stopped };
std::string to_string(Phase p);

/// Per-edge view of the pending batch shown to a labeler.
struct QueryView {
  EdgeId id = 0;
  double score = 0.0;
  std::optional<double> h_c;
  std::optional<double> y_u;
};

/// The interactive loop for one graph. Round 0 asks for the seed set; every
/// later round trains the views on E_l, ranks E_u and asks for one batch.
/// Every random draw comes from rng_seed and the round index, so a session
/// restored from a snapshot issues the same queries as the original.
class ActiveSession {
 public:
  ActiveSession(std::shared_ptr<const RegionGraph> graph, std::shared_ptr<const AffinityGraph> affinity,
                LoopConfig config);

  const RegionGraph& graph() const noexcept { return *graph_; }
  const LoopConfig& config() const noexcept { return config_; }
  const LabelState& labels() const noexcept { return state_; }
  const ErrorTrace& trace() const noexcept { return trace_; }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t labels_used() const noexcept { return state_.labeled().size(); }
  std::size_t round() const noexcept { return round_; }
  Phase phase() const noexcept { return phase_; }
  StopDecision stop_status() const;
  const std::optional<QueryBatch>& pending() const noexcept { return pending_; }
  std::vector<QueryView> pending_views() const;
  /// Importance weight of each labeled id (1 unless the iwal strategy set one).
  double weight_of(EdgeId id) const;

  /// Answers for exactly the pending batch. Throws PreconditionError when an
  /// id is outside the batch, a label is invalid, or answers are missing.
  /// Advances to the next round (or stops).
  void submit(const std::map<EdgeId, Label>& answers);

  /// Applies answers without computing the next batch; the session is in
  /// the computing phase afterwards and advance() must be called.
  void accept(const std::map<EdgeId, Label>& answers);
  void advance();

  /// Forest on all labels so far (importance-weighted for iwal), stream kFinalModel.
  ForestModel final_model() const;

  nlohmann::json snapshot() const;
  static ActiveSession restore(std::shared_ptr<const RegionGraph> graph, std::shared_ptr<const AffinityGraph> affinity,
                               const nlohmann::json& snapshot);

 private:
  ActiveSession() = default;
  void issue_next();
  QueryBatch compute_round(std::size_t k);
  ForestConfig forest_config(std::uint64_t stream, std::uint64_t salt = 0) const;
  TrainingSet training_set(const std::vector<EdgeId>& ids) const;

  std::shared_ptr<const RegionGraph> graph_;
  std::shared_ptr<const AffinityGraph> affinity_;
  LoopConfig config_;
  std::size_t budget_ = 0;
  LabelState state_;
  ErrorTrace trace_;
  std::size_t round_ = 0;
  Phase phase_ = Phase::awaiting_labels;
  std::optional<QueryBatch> pending_;

  // Issue-time views for the pending batch.
  std::map<EdgeId, double> pending_h_;
  std::map<EdgeId, double> pending_y_;
  std::map<EdgeId, double> pending_ha_;  // cotrain views
  std::map<EdgeId, double> pending_hb_;
  std::optional<std::size_t> pending_mutual_;
  std::optional<double> pending_accuracy_;

  std::set<EdgeId> cotrain_a_;
  std::set<EdgeId> cotrain_b_;
  std::map<EdgeId, double> importance_;
};

/// Affinity graph for a session: variance-scaled kernel, kNN sparsified.
AffinityGraph build_session_affinity(const RegionGraph& graph, const LoopConfig& config);

/// Forest configuration used for the delivered model of a run with this loop
/// config; training it on every label reproduces the full-supervision forest.
ForestConfig final_forest_config(const LoopConfig& config);

}  // namespace activeseg
