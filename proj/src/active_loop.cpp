#include "activeseg/active_loop.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "activeseg/rng.hpp"

namespace activeseg {

using nlohmann::json;

std::string to_string(SeedMethod m) { return m == SeedMethod::kmeans ? "kmeans" : "max_degree"; }

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::proposed: return "proposed";
    case Strategy::cotrain: return "cotrain";
    case Strategy::uncertain: return "uncertain";
    case Strategy::random: return "random";
    case Strategy::iwal: return "iwal";
  }
  return "?";
}

SeedMethod parse_seed_method(const std::string& s) {
  if (s == "kmeans") return SeedMethod::kmeans;
  if (s == "max_degree") return SeedMethod::max_degree;
  throw std::invalid_argument("unknown seed method '" + s + "'");
}

Strategy parse_strategy(const std::string& s) {
  for (auto st : {Strategy::proposed, Strategy::cotrain, Strategy::uncertain, Strategy::random, Strategy::iwal})
    if (to_string(st) == s) return st;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

std::string to_string(StopDecision d) {
  switch (d) {
    case StopDecision::continue_querying: return "continue";
    case StopDecision::stopping_phase: return "stopping_phase";
    case StopDecision::stop: return "stop";
  }
  return "?";
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::awaiting_labels: return "awaiting_labels";
    case Phase::computing: return "computing";
    case Phase::stopped: return "stopped";
  }
  return "?";
}

std::size_t LoopConfig::seed_count(std::size_t edge_count) const {
  const auto c = static_cast<std::size_t>(std::ceil(seed_fraction * static_cast<double>(edge_count) - 1e-9));
  return std::min(c, edge_count);
}

std::size_t LoopConfig::resolved_budget(std::size_t edge_count) const {
  if (budget) return budget;
  const auto share = static_cast<std::size_t>(std::ceil(0.17 * static_cast<double>(edge_count) - 1e-9));
  return std::min<std::size_t>(5000, share);
}

void LoopConfig::validate(std::size_t edge_count) const {
  if (!(seed_fraction > 0.0 && seed_fraction < 1.0)) throw PreconditionError("seed_fraction must lie in (0, 1)");
  if (seed_count(edge_count) < 2) throw PreconditionError("seed set must hold at least 2 edges");
  if (batch_size < 1) throw PreconditionError("batch_size must be >= 1");
  if (stop_extra < 1) throw PreconditionError("stop_extra must be >= 1");
  if (resolved_budget(edge_count) < seed_count(edge_count)) throw PreconditionError("budget is smaller than the seed set");
  if (committee_size < 1) throw PreconditionError("iwal committee must not be empty");
  if (!(iwal_p_min > 0.0 && iwal_p_min <= 1.0)) throw PreconditionError("iwal p_min must lie in (0, 1]");
}

void to_json(json& j, const LoopConfig& c) {
  j = {{"seed_fraction", c.seed_fraction},
       {"seed_method", to_string(c.seed_method)},
       {"batch_size", c.batch_size},
       {"budget", c.budget},
       {"stop_extra", c.stop_extra},
       {"rng_seed", c.rng_seed},
       {"strategy", to_string(c.strategy)},
       {"forest", c.forest},
       {"affinity_neighbors", c.affinity_neighbors},
       {"affinity_floor", c.affinity_floor},
       {"solver",
        {{"rel_tolerance", c.solver.rel_tolerance},
         {"max_iterations", c.solver.max_iterations},
         {"preconditioner", c.solver.preconditioner == Preconditioner::jacobi ? "jacobi" : "none"}}},
       {"uncertain_band", c.uncertain_band},
       {"committee_size", c.committee_size},
       {"iwal_p_min", c.iwal_p_min}};
}

void from_json(const json& j, LoopConfig& c) {
  const LoopConfig d;
  c.seed_fraction = j.value("seed_fraction", d.seed_fraction);
  c.seed_method = parse_seed_method(j.value("seed_method", to_string(d.seed_method)));
  c.batch_size = j.value("batch_size", d.batch_size);
  c.budget = j.value("budget", d.budget);
  c.stop_extra = j.value("stop_extra", d.stop_extra);
  c.rng_seed = j.value("rng_seed", d.rng_seed);
  c.strategy = parse_strategy(j.value("strategy", to_string(d.strategy)));
  c.forest = j.contains("forest") ? j["forest"].get<ForestConfig>() : d.forest;
  c.affinity_neighbors = j.value("affinity_neighbors", d.affinity_neighbors);
  c.affinity_floor = j.value("affinity_floor", d.affinity_floor);
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    c.solver.rel_tolerance = s.value("rel_tolerance", d.solver.rel_tolerance);
    c.solver.max_iterations = s.value("max_iterations", d.solver.max_iterations);
    c.solver.preconditioner = s.value("preconditioner", std::string("jacobi")) == "none" ? Preconditioner::none
                                                                                         : Preconditioner::jacobi;
  }
  c.uncertain_band = j.value("uncertain_band", d.uncertain_band);
  c.committee_size = j.value("committee_size", d.committee_size);
  c.iwal_p_min = j.value("iwal_p_min", d.iwal_p_min);
}

std::string trace_to_csv(const ErrorTrace& trace) {
  std::ostringstream out;
  out << "round,labels_used,clf_query_err,prop_query_err,mutual_excl_err,pool_accuracy\n";
  for (const auto& r : trace.rounds) {
    out << r.round << ',' << r.labels_used << ',' << r.clf_query_err << ',' << r.prop_query_err << ',';
    if (r.mutual_excl_err) out << *r.mutual_excl_err;
    out << ',';
    if (r.pool_accuracy) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", *r.pool_accuracy);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

json trace_to_json(const ErrorTrace& trace) {
  json out = json::array();
  for (const auto& r : trace.rounds) {
    json rec = {{"round", r.round},
                {"labels_used", r.labels_used},
                {"batch_size", r.batch_size},
                {"clf_query_err", r.clf_query_err},
                {"prop_query_err", r.prop_query_err}};
    rec["mutual_excl_err"] = r.mutual_excl_err ? json(*r.mutual_excl_err) : json(nullptr);
    rec["pool_accuracy"] = r.pool_accuracy ? json(*r.pool_accuracy) : json(nullptr);
    out.push_back(rec);
  }
  return out;
}

StopDecision check_stop(const ErrorTrace& trace, const LoopConfig& config, std::size_t budget) {
  if (trace.empty()) return StopDecision::continue_querying;
  const std::size_t used = trace.rounds.back().labels_used;
  if (used >= budget) return StopDecision::stop;
  for (const auto& r : trace.rounds) {
    if (r.clf_query_err == 0) {
      return used - r.labels_used >= config.stop_extra ? StopDecision::stop : StopDecision::stopping_phase;
    }
  }
  return StopDecision::continue_querying;
}

AffinityGraph build_session_affinity(const RegionGraph& graph, const LoopConfig& config) {
  auto aff_cfg = estimate_sigma(graph, config.affinity_floor);
  aff_cfg.neighbors_k = config.affinity_neighbors;
  return build_affinity(graph, aff_cfg);
}

ForestConfig final_forest_config(const LoopConfig& config) {
  ForestConfig f = config.forest;
  f.rng_seed = derive_seed(config.rng_seed, {stream::kFinalModel});
  return f;
}

// ---------------------------------------------------------------------------

namespace {

std::string make_token(const std::vector<EdgeId>& ids, std::size_t round, std::uint64_t seed) {
  std::uint64_t h = mix64(seed ^ mix64(round));
  for (EdgeId id : ids) h = mix64(h ^ static_cast<std::uint64_t>(id));
  char buf[40];
  std::snprintf(buf, sizeof buf, "r%zu-%016llx", round, static_cast<unsigned long long>(h));
  return buf;
}

json map_to_json(const std::map<EdgeId, double>& m) {
  json a = json::array();
  for (const auto& [k, v] : m) a.push_back({k, v});
  return a;
}

std::map<EdgeId, double> map_from_json(const json& a) {
  std::map<EdgeId, double> m;
  for (const auto& e : a) m[e.at(0).get<EdgeId>()] = e.at(1).get<double>();
  return m;
}

}  // namespace

ActiveSession::ActiveSession(std::shared_ptr<const RegionGraph> graph, std::shared_ptr<const AffinityGraph> affinity,
                             LoopConfig config)
    : graph_(std::move(graph)), affinity_(std::move(affinity)), config_(std::move(config)) {
  const std::size_t n = graph_->edge_count();
  if (affinity_->size() != n) throw DimensionMismatch("affinity graph size differs from edge count");
  config_.validate(n);
  budget_ = config_.resolved_budget(n);
  state_ = LabelState(n);
  QueryBatch seeds;
  seeds.ids = seed_initial(*graph_, *affinity_, config_.seed_count(n), config_.seed_method, config_.rng_seed);
  seeds.scores.assign(seeds.ids.size(), 0.0);
  seeds.round = 0;
  seeds.token = make_token(seeds.ids, 0, config_.rng_seed);
  pending_ = std::move(seeds);
}

ForestConfig ActiveSession::forest_config(std::uint64_t stream_tag, std::uint64_t salt) const {
  ForestConfig f = config_.forest;
  f.rng_seed = derive_seed(config_.rng_seed, {stream_tag, round_, salt});
  return f;
}

double ActiveSession::weight_of(EdgeId id) const {
  const auto it = importance_.find(id);
  return it == importance_.end() ? 1.0 : it->second;
}

TrainingSet ActiveSession::training_set(const std::vector<EdgeId>& ids) const {
  std::vector<Label> labels;
  std::vector<double> weights;
  for (EdgeId id : ids) {
    labels.push_back(state_.label(id));
    weights.push_back(weight_of(id));
  }
  return make_training_set(*graph_, ids, labels, weights);
}

StopDecision ActiveSession::stop_status() const {
  if (round_ == 0) return StopDecision::continue_querying;
  return check_stop(trace_, config_, budget_);
}

std::vector<QueryView> ActiveSession::pending_views() const {
  std::vector<QueryView> out;
  if (!pending_) return out;
  for (std::size_t i = 0; i < pending_->ids.size(); ++i) {
    QueryView v;
    v.id = pending_->ids[i];
    v.score = pending_->scores[i];
    if (auto it = pending_h_.find(v.id); it != pending_h_.end()) v.h_c = it->second;
    if (auto it = pending_y_.find(v.id); it != pending_y_.end()) v.y_u = it->second;
    out.push_back(v);
  }
  return out;
}

void ActiveSession::submit(const std::map<EdgeId, Label>& answers) {
  accept(answers);
  advance();
}

void ActiveSession::accept(const std::map<EdgeId, Label>& answers) {
  if (phase_ != Phase::awaiting_labels || !pending_) throw PreconditionError("no batch is awaiting labels");
  const auto& batch = *pending_;
  for (const auto& [id, y] : answers) {
    if (std::find(batch.ids.begin(), batch.ids.end(), id) == batch.ids.end())
      throw PreconditionError("edge " + std::to_string(id) + " is not in the pending batch");
    if (!is_valid_label(y)) throw PreconditionError("label for edge " + std::to_string(id) + " must be -1 or +1");
  }
  if (answers.size() != batch.ids.size()) throw PreconditionError("every edge of the pending batch needs an answer");

  state_ = apply_labels(state_, answers);

  if (round_ == 0) {
    if (config_.strategy == Strategy::cotrain) {
      const auto seeds = batch.ids;
      bool ok = false;
      for (std::uint64_t attempt = 0; attempt < 10 && !ok; ++attempt) {
        auto order = seeds;
        Engine rng = make_engine(config_.rng_seed, {stream::kCotrainSplit, attempt});
        shuffle(order, rng);
        const std::size_t half = order.size() / 2;
        std::set<EdgeId> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
        std::set<EdgeId> b(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
        auto two_classes = [&](const std::set<EdgeId>& s) {
          bool pos = false, neg = false;
          for (EdgeId id : s) (state_.label(id) > 0 ? pos : neg) = true;
          return pos && neg;
        };
        if (two_classes(a) && two_classes(b)) {
          cotrain_a_ = std::move(a);
          cotrain_b_ = std::move(b);
          ok = true;
        }
      }
      if (!ok) throw DegenerateTrainingError("co-training split left a half with a single class after 10 attempts");
    }
  } else {
    RoundRecord rec;
    rec.round = round_;
    rec.labels_used = state_.labeled().size();
    rec.batch_size = batch.ids.size();
    for (std::size_t i = 0; i < batch.ids.size(); ++i) {
      const EdgeId id = batch.ids[i];
      const Label y = answers.at(id);
      if (sign_label(pending_h_.at(id)) != y) ++rec.clf_query_err;
      if (sign_label(pending_y_.at(id)) != y) ++rec.prop_query_err;
      if (config_.strategy == Strategy::cotrain) {
        if (sign_label(pending_ha_.at(id)) != y) cotrain_a_.insert(id);
        if (sign_label(pending_hb_.at(id)) != y) cotrain_b_.insert(id);
      }
      if (config_.strategy == Strategy::iwal) importance_[id] = 1.0 / batch.scores[i];
    }
    rec.mutual_excl_err = pending_mutual_;
    rec.pool_accuracy = pending_accuracy_;
    trace_.rounds.push_back(rec);
  }

  pending_.reset();
  pending_h_.clear();
  pending_y_.clear();
  pending_ha_.clear();
  pending_hb_.clear();
  pending_mutual_.reset();
  pending_accuracy_.reset();
  ++round_;
  phase_ = Phase::computing;
}

void ActiveSession::advance() {
  if (phase_ != Phase::computing) throw PreconditionError("session is not between rounds");
  issue_next();
}

void ActiveSession::issue_next() {
  const auto decision = stop_status();
  const std::size_t used = state_.labeled().size();
  std::size_t k = std::min({config_.batch_size, budget_ > used ? budget_ - used : 0, state_.unlabeled().size()});
  if (decision == StopDecision::stopping_phase) {
    std::size_t zero_labels = 0;
    for (const auto& r : trace_.rounds)
      if (r.clf_query_err == 0) {
        zero_labels = r.labels_used;
        break;
      }
    k = std::min(k, config_.stop_extra - (used - zero_labels));
  }
  if (decision == StopDecision::stop || k == 0) {
    phase_ = Phase::stopped;
    pending_.reset();
    return;
  }
  QueryBatch batch = compute_round(k);
  batch.round = round_;
  batch.token = make_token(batch.ids, round_, config_.rng_seed);
  pending_ = std::move(batch);
  phase_ = Phase::awaiting_labels;
}

QueryBatch ActiveSession::compute_round(std::size_t k) {
  const auto pool = state_.unlabeled_ids();
  const auto labeled = state_.labeled_ids();

  const ForestModel clf = train_forest(training_set(labeled), forest_config(stream::kForest));
  const auto h = predict_confidence(clf, *graph_, pool);
  const auto prop = propagate_labels(*affinity_, state_, config_.solver);
  const auto& y = prop.y_u;

  QueryBatch batch;
  std::vector<double> h_a, h_b;
  switch (config_.strategy) {
    case Strategy::proposed:
      batch = top_k_by_score(pool, rank_disagreement(h, y), k);
      break;
    case Strategy::uncertain:
      batch = strategy_uncertain(pool, h, k, config_.uncertain_band);
      break;
    case Strategy::random:
      batch = strategy_random(pool, k, derive_seed(config_.rng_seed, {stream::kRandomQueries, round_}));
      break;
    case Strategy::cotrain: {
      const std::vector<EdgeId> a(cotrain_a_.begin(), cotrain_a_.end()), b(cotrain_b_.begin(), cotrain_b_.end());
      const auto fa = train_forest(training_set(a), forest_config(stream::kForest, 1));
      const auto fb = train_forest(training_set(b), forest_config(stream::kForest, 2));
      h_a = predict_confidence(fa, *graph_, pool);
      h_b = predict_confidence(fb, *graph_, pool);
      batch = select_cotrain(pool, h_a, h_b, k);
      break;
    }
    case Strategy::iwal: {
      ForestConfig member = config_.forest;
      member.n_trees = std::max<std::size_t>(1, config_.forest.n_trees / config_.committee_size);
      std::vector<double> lo(pool.size(), 1.0), hi(pool.size(), -1.0);
      std::size_t members = 0;
      for (std::size_t m = 0; m < config_.committee_size; ++m) {
        Engine rng = make_engine(config_.rng_seed, {stream::kCommittee, round_, m});
        std::vector<EdgeId> resample;
        for (std::size_t i = 0; i < labeled.size(); ++i) resample.push_back(labeled[uniform_index(rng, labeled.size())]);
        std::sort(resample.begin(), resample.end());
        member.rng_seed = derive_seed(config_.rng_seed, {stream::kCommittee, round_, m, 1});
        ForestModel f;
        try {
          f = train_forest(training_set(resample), member);
        } catch (const DegenerateTrainingError&) {
          continue;  // single-class resample
        }
        ++members;
        const auto hm = predict_confidence(f, *graph_, pool);
        for (std::size_t i = 0; i < pool.size(); ++i) {
          lo[i] = std::min(lo[i], hm[i]);
          hi[i] = std::max(hi[i], hm[i]);
        }
      }
      if (members == 0) throw PreconditionError("iwal committee is empty");
      std::vector<double> spread(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) spread[i] = (hi[i] - lo[i]) / 2.0;
      batch = select_iwal(pool, spread, k, config_.iwal_p_min,
                          derive_seed(config_.rng_seed, {stream::kIwalSampling, round_}));
      break;
    }
  }

  std::map<EdgeId, std::size_t> pos;
  for (std::size_t i = 0; i < pool.size(); ++i) pos[pool[i]] = i;
  for (EdgeId id : batch.ids) {
    const std::size_t i = pos.at(id);
    pending_h_[id] = h[i];
    pending_y_[id] = y[i];
    if (!h_a.empty()) {
      pending_ha_[id] = h_a[i];
      pending_hb_[id] = h_b[i];
    }
  }
  if (graph_->has_edge_labels()) {
    std::size_t correct = 0, mutual = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const Label truth = *graph_->edge(pool[i]).true_label;
      const bool clf_ok = sign_label(h[i]) == truth;
      const bool prop_ok = sign_label(y[i]) == truth;
      correct += clf_ok;
      mutual += clf_ok != prop_ok;
    }
    pending_mutual_ = mutual;
    pending_accuracy_ = pool.empty() ? 1.0 : static_cast<double>(correct) / static_cast<double>(pool.size());
  }
  return batch;
}

ForestModel ActiveSession::final_model() const {
  return train_forest(training_set(state_.labeled_ids()), final_forest_config(config_));
}

json ActiveSession::snapshot() const {
  json labels = json::array();
  for (const auto& [id, y] : state_.labels()) labels.push_back({id, y});
  const json trace = trace_to_json(trace_);
  json pending = nullptr;
  if (pending_) {
    pending = {{"ids", pending_->ids},
               {"scores", pending_->scores},
               {"round", pending_->round},
               {"token", pending_->token},
               {"h_c", map_to_json(pending_h_)},
               {"y_u", map_to_json(pending_y_)},
               {"h_a", map_to_json(pending_ha_)},
               {"h_b", map_to_json(pending_hb_)}};
    pending["mutual_excl_err"] = pending_mutual_ ? json(*pending_mutual_) : json(nullptr);
    pending["pool_accuracy"] = pending_accuracy_ ? json(*pending_accuracy_) : json(nullptr);
  }
  return {{"format", 1},
          {"config", config_},
          {"budget", budget_},
          {"round", round_},
          {"phase", to_string(phase_)},
          {"labels", labels},
          {"trace", trace},
          {"pending", pending},
          {"cotrain_a", std::vector<EdgeId>(cotrain_a_.begin(), cotrain_a_.end())},
          {"cotrain_b", std::vector<EdgeId>(cotrain_b_.begin(), cotrain_b_.end())},
          {"importance", map_to_json(importance_)}};
}

ActiveSession ActiveSession::restore(std::shared_ptr<const RegionGraph> graph,
                                     std::shared_ptr<const AffinityGraph> affinity, const json& snap) {
  ActiveSession s;
  s.graph_ = std::move(graph);
  s.affinity_ = std::move(affinity);
  const std::size_t n = s.graph_->edge_count();
  if (s.affinity_->size() != n) throw DimensionMismatch("affinity graph size differs from edge count");
  s.config_ = snap.at("config").get<LoopConfig>();
  s.config_.validate(n);
  s.budget_ = snap.at("budget").get<std::size_t>();
  s.round_ = snap.at("round").get<std::size_t>();
  std::map<EdgeId, Label> answers;
  for (const auto& e : snap.at("labels")) answers[e.at(0).get<EdgeId>()] = e.at(1).get<Label>();
  s.state_ = apply_labels(LabelState(n), answers);
  for (const auto& r : snap.at("trace")) {
    RoundRecord rec;
    rec.round = r.at("round").get<std::size_t>();
    rec.labels_used = r.at("labels_used").get<std::size_t>();
    rec.batch_size = r.at("batch_size").get<std::size_t>();
    rec.clf_query_err = r.at("clf_query_err").get<std::size_t>();
    rec.prop_query_err = r.at("prop_query_err").get<std::size_t>();
    if (!r.at("mutual_excl_err").is_null()) rec.mutual_excl_err = r["mutual_excl_err"].get<std::size_t>();
    if (!r.at("pool_accuracy").is_null()) rec.pool_accuracy = r["pool_accuracy"].get<double>();
    s.trace_.rounds.push_back(rec);
  }
  const auto& pending = snap.at("pending");
  if (!pending.is_null()) {
    QueryBatch b;
    b.ids = pending.at("ids").get<std::vector<EdgeId>>();
    b.scores = pending.at("scores").get<std::vector<double>>();
    b.round = pending.at("round").get<std::size_t>();
    b.token = pending.at("token").get<std::string>();
    s.pending_ = std::move(b);
    s.pending_h_ = map_from_json(pending.at("h_c"));
    s.pending_y_ = map_from_json(pending.at("y_u"));
    s.pending_ha_ = map_from_json(pending.at("h_a"));
    s.pending_hb_ = map_from_json(pending.at("h_b"));
    if (!pending.at("mutual_excl_err").is_null()) s.pending_mutual_ = pending["mutual_excl_err"].get<std::size_t>();
    if (!pending.at("pool_accuracy").is_null()) s.pending_accuracy_ = pending["pool_accuracy"].get<double>();
  }
  const auto a = snap.at("cotrain_a").get<std::vector<EdgeId>>();
  const auto b = snap.at("cotrain_b").get<std::vector<EdgeId>>();
  s.cotrain_a_ = {a.begin(), a.end()};
  s.cotrain_b_ = {b.begin(), b.end()};
  s.importance_ = map_from_json(snap.at("importance"));

  const std::string phase = snap.at("phase").get<std::string>();
  if (phase == "awaiting_labels") {
    if (!s.pending_) throw ValidationError("snapshot awaits labels but holds no pending batch");
    s.phase_ = Phase::awaiting_labels;
  } else if (phase == "stopped") {
    s.phase_ = Phase::stopped;
  } else {
    // Interrupted between rounds: recompute the batch.
    s.phase_ = Phase::computing;
    s.pending_.reset();
    s.issue_next();
  }
  return s;
}

}  // namespace activeseg
