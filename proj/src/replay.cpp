#include "activeseg/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "activeseg/rng.hpp"
#include "activeseg/segmentation.hpp"

namespace activeseg {

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t trial) {
  return derive_seed(master_seed, {stream::kTrial, trial});
}

std::map<EdgeId, Label> oracle_answers(const RegionGraph& graph, const QueryBatch& batch) {
  std::map<EdgeId, Label> answers;
  for (EdgeId id : batch.ids) {
    const auto& e = graph.edge(id);
    if (!e.true_label) throw PreconditionError("replay oracle: edge " + std::to_string(id) + " has no true_label");
    answers[id] = *e.true_label;
  }
  return answers;
}

TrialResult run_trial(std::shared_ptr<const RegionGraph> graph, std::shared_ptr<const AffinityGraph> affinity,
                      const LoopConfig& config) {
  if (!graph->has_edge_labels()) throw PreconditionError("replay needs a true_label on every edge");
  ActiveSession session(graph, std::move(affinity), config);
  TrialResult out;
  out.seed = config.rng_seed;
  while (session.phase() == Phase::awaiting_labels) {
    const auto& batch = *session.pending();
    if (batch.round == 0)
      out.seeds = batch.ids;
    else
      out.queried.insert(out.queried.end(), batch.ids.begin(), batch.ids.end());
    session.submit(oracle_answers(*graph, batch));
  }
  out.trace = session.trace();
  out.labels_used = session.labels_used();
  out.stopped_by_rule = out.labels_used < session.budget() && !session.labels().unlabeled().empty();
  out.model = session.final_model();
  return out;
}

std::vector<TrialResult> run_replay(std::shared_ptr<const RegionGraph> graph, const LoopConfig& config,
                                    std::size_t trials, std::uint64_t master_seed) {
  if (!graph->has_edge_labels()) throw PreconditionError("replay needs a true_label on every edge");
  auto affinity = std::make_shared<const AffinityGraph>(build_session_affinity(*graph, config));
  std::vector<TrialResult> results;
  results.reserve(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    LoopConfig c = config;
    c.rng_seed = trial_seed(master_seed, t);
    results.push_back(run_trial(graph, affinity, c));
  }
  return results;
}

ForestModel full_supervision_forest(const RegionGraph& graph, const LoopConfig& config) {
  std::vector<EdgeId> ids(graph.edge_count());
  std::iota(ids.begin(), ids.end(), EdgeId{0});
  const auto labels = graph.true_labels();
  return train_forest(make_training_set(graph, ids, labels), final_forest_config(config));
}

double classification_accuracy(const ForestModel& model, const RegionGraph& graph) {
  const auto labels = graph.true_labels();
  const auto h = predict_all(model, graph);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < h.size(); ++i) ok += sign_label(h[i]) == labels[i];
  return static_cast<double>(ok) / static_cast<double>(h.size());
}

void score_segmentation(ScoreRow& row, const RegionGraph& test, const ForestModel& model,
                        const ForestModel& reference, double reference_delta, bool calibrate) {
  ForestScorer candidate(model);
  double delta = reference_delta;
  if (calibrate) {
    ForestScorer ref(reference);
    delta = calibrate_delta(test, candidate, ref, reference_delta).delta;
  }
  row.segmented = true;
  row.delta_c = delta;
  row.scores = evaluate_segmentation(agglomerate(test, candidate, AgglomerationConfig{delta}), test);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / (n - 1.0));
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string scores_csv(const std::vector<ScoreRow>& rows) {
  std::ostringstream out;
  out << "strategy,trial,delta_c,vi_fm,vi_fs,ri_fm,ri_fs\n";
  for (const auto& r : rows) {
    if (!r.segmented) continue;
    out << r.strategy << ',' << r.trial << ',' << fmt(r.delta_c) << ',' << fmt(r.scores.vi_false_merge) << ','
        << fmt(r.scores.vi_false_split) << ',' << fmt(r.scores.ri_false_merge) << ',' << fmt(r.scores.ri_false_split)
        << '\n';
  }
  return out.str();
}

std::string summary_csv(const std::vector<ScoreRow>& rows) {
  std::vector<std::string> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);

  std::ostringstream out;
  out << "strategy,trials,labels_mean,labels_std,accuracy_mean,accuracy_std,delta_c_mean,delta_c_std,"
         "vi_fm_mean,vi_fm_std,vi_fs_mean,vi_fs_std,ri_fm_mean,ri_fm_std,ri_fs_mean,ri_fs_std\n";
  for (const auto& name : order) {
    std::vector<double> labels, acc, delta, vfm, vfs, rfm, rfs;
    for (const auto& r : rows) {
      if (r.strategy != name) continue;
      labels.push_back(static_cast<double>(r.labels_used));
      acc.push_back(r.accuracy);
      if (!r.segmented) continue;
      delta.push_back(r.delta_c);
      vfm.push_back(r.scores.vi_false_merge);
      vfs.push_back(r.scores.vi_false_split);
      rfm.push_back(r.scores.ri_false_merge);
      rfs.push_back(r.scores.ri_false_split);
    }
    out << name << ',' << labels.size();
    for (const auto* v : {&labels, &acc}) {
      const auto ms = mean_std(*v);
      out << ',' << fmt(ms.mean) << ',' << fmt(ms.std);
    }
    for (const auto* v : {&delta, &vfm, &vfs, &rfm, &rfs}) {
      if (v->empty()) {
        out << ",,";
      } else {
        const auto ms = mean_std(*v);
        out << ',' << fmt(ms.mean) << ',' << fmt(ms.std);
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace activeseg
