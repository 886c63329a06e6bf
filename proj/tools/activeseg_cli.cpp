// activeseg command-line harness: data generation, batch replay experiments,
// segmentation scoring and the HTTP session service.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "activeseg/errors.hpp"
#include "activeseg/graph_io.hpp"
#include "activeseg/metrics.hpp"
#include "activeseg/replay.hpp"
#include "activeseg/segmentation.hpp"
#include "activeseg/session_service.hpp"
#include "activeseg/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace activeseg;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ForestModel load_model(const fs::path& path) { return read_json_file(path).get<ForestModel>(); }

LoopConfig load_loop_config(const std::string& path) {
  if (path.empty()) return {};
  return read_json_file(path).get<LoopConfig>();
}

SynthConfig synth_from_json(const json& j) {
  SynthConfig c;
  c.n_bodies = j.value("n_bodies", c.n_bodies);
  c.n_superpixels = j.value("n_superpixels", c.n_superpixels);
  c.lattice_dims = j.value("lattice_dims", c.lattice_dims);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.n_subclasses = j.value("n_subclasses", c.n_subclasses);
  c.class_separation = j.value("class_separation", c.class_separation);
  c.label_noise = j.value("label_noise", c.label_noise);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.min_node_size = j.value("min_node_size", c.min_node_size);
  c.max_node_size = j.value("max_node_size", c.max_node_size);
  return c;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string out, test_out, format, config;
  std::optional<std::size_t> bodies, superpixels, feature_dim, subclasses;
  std::vector<std::size_t> dims;
  std::optional<double> separation, noise;
  std::optional<std::uint64_t> seed;
};

int run_generate(const GenerateArgs& a) {
  SynthConfig c = a.config.empty() ? SynthConfig{} : synth_from_json(read_json_file(a.config));
  if (a.bodies) c.n_bodies = *a.bodies;
  if (a.superpixels) c.n_superpixels = *a.superpixels;
  if (!a.dims.empty()) c.lattice_dims = a.dims;
  if (a.feature_dim) c.feature_dim = *a.feature_dim;
  if (a.subclasses) c.n_subclasses = *a.subclasses;
  if (a.separation) c.class_separation = *a.separation;
  if (a.noise) c.label_noise = *a.noise;
  if (a.seed) c.rng_seed = *a.seed;

  auto [train, test] = benchmark_pair(c);
  auto save = [&](const std::string& path, const RegionGraph& g) {
    const auto format = a.format.empty() ? format_from_path(path) : parse_graph_format(a.format);
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    save_region_graph(path, g, format);
    std::cerr << "wrote " << path << " (" << g.node_count() << " nodes, " << g.edge_count() << " edges)\n";
  };
  save(a.out, train);
  if (!a.test_out.empty()) save(a.test_out, test);
  return 0;
}

// ---------------------------------------------------------------------------

struct ReplayArgs {
  std::string graph, test, strategy = "proposed", out_dir, config;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  std::optional<std::size_t> budget, batch_size;
  bool no_segment = false;
  double delta = 0.2;
};

int run_replay_cmd(const ReplayArgs& a) {
  LoopConfig base = load_loop_config(a.config);
  if (a.budget) base.budget = *a.budget;
  if (a.batch_size) base.batch_size = *a.batch_size;

  std::vector<std::string> names;
  if (a.strategy == "all")
    names = {"all", "proposed", "cotrain", "iwal", "uncertain", "random"};
  else
    names = {to_string(parse_strategy(a.strategy))};

  auto train = std::make_shared<const RegionGraph>(load_region_graph(a.graph));
  std::shared_ptr<const RegionGraph> test = train;
  if (!a.test.empty()) test = std::make_shared<const RegionGraph>(load_region_graph(a.test));
  if (!train->has_edge_labels()) throw ValidationError(a.graph + ": replay needs true_label on every edge");
  if (!test->has_edge_labels()) throw ValidationError("test graph needs true_label on every edge");
  if (test->feature_dim() != train->feature_dim()) throw DimensionMismatch("train and test feature dimensions differ");
  const bool segment = !a.no_segment && test->has_bodies();
  base.validate(train->edge_count());

  const auto affinity = std::make_shared<const AffinityGraph>(build_session_affinity(*train, base));
  fs::create_directories(a.out_dir);

  std::vector<ScoreRow> rows;
  std::vector<std::optional<ForestModel>> references(a.trials);
  auto reference = [&](std::size_t t) -> const ForestModel& {
    if (!references[t]) {
      LoopConfig c = base;
      c.rng_seed = trial_seed(a.seed, t);
      references[t] = full_supervision_forest(*train, c);
    }
    return *references[t];
  };

  for (const auto& name : names) {
    for (std::size_t t = 0; t < a.trials; ++t) {
      ScoreRow row;
      row.strategy = name;
      row.trial = t;
      if (name == "all") {
        const auto& model = reference(t);
        row.labels_used = train->edge_count();
        row.accuracy = classification_accuracy(model, *test);
        if (segment) score_segmentation(row, *test, model, model, a.delta, false);
      } else {
        LoopConfig c = base;
        c.strategy = parse_strategy(name);
        c.rng_seed = trial_seed(a.seed, t);
        auto result = run_trial(train, affinity, c);
        row.labels_used = result.labels_used;
        row.stopped_by_rule = result.stopped_by_rule;
        row.accuracy = classification_accuracy(result.model, *test);
        write_text(fs::path(a.out_dir) / ("trace_" + name + "_" + std::to_string(t) + ".csv"),
                   trace_to_csv(result.trace));
        if (segment) score_segmentation(row, *test, result.model, reference(t), a.delta, true);
      }
      std::cerr << name << " trial " << t << ": labels " << row.labels_used << ", accuracy " << row.accuracy;
      if (row.segmented) std::cerr << ", delta " << row.delta_c << ", vi_fs " << row.scores.vi_false_split;
      std::cerr << "\n";
      rows.push_back(row);
    }
  }

  write_text(fs::path(a.out_dir) / "summary.csv", summary_csv(rows));
  if (segment) write_text(fs::path(a.out_dir) / "scores.csv", scores_csv(rows));
  std::cout << summary_csv(rows);
  return 0;
}

// ---------------------------------------------------------------------------

struct SegmentArgs {
  std::string graph, model, out;
  bool truth = false;
  double delta = 0.2;
};

int run_segment(const SegmentArgs& a) {
  const auto graph = load_region_graph(a.graph);
  std::unique_ptr<BoundaryScorer> scorer;
  std::optional<ForestModel> model;
  if (a.truth) {
    if (!graph.has_edge_labels()) throw ValidationError("--truth needs true_label on every edge");
    scorer = std::make_unique<TruthScorer>(graph);
  } else {
    model = load_model(a.model);
    if (model->feature_dim() != graph.feature_dim()) throw DimensionMismatch("model and graph feature dimensions differ");
    scorer = std::make_unique<ForestScorer>(*model);
  }
  const auto seg = agglomerate(graph, *scorer, AgglomerationConfig{a.delta});
  if (!a.out.empty()) {
    std::ostringstream csv;
    csv << "node,segment\n";
    for (std::size_t i = 0; i < seg.assignment.size(); ++i) csv << i << ',' << seg.assignment[i] << '\n';
    write_text(a.out, csv.str());
  }
  std::cout << "delta,segments,vi_fm,vi_fs,ri_fm,ri_fs\n" << a.delta << ',' << seg.segment_count;
  if (graph.has_bodies()) {
    const auto s = evaluate_segmentation(seg, graph);
    std::cout << ',' << s.vi_false_merge << ',' << s.vi_false_split << ',' << s.ri_false_merge << ','
              << s.ri_false_split;
  } else {
    std::cout << ",,,,";
  }
  std::cout << '\n';
  return 0;
}

struct CalibrateArgs {
  std::string graph, model, reference;
  double ref_delta = 0.2, band = 0.05;
  std::size_t max_steps = 30;
};

int run_calibrate(const CalibrateArgs& a) {
  const auto graph = load_region_graph(a.graph);
  if (!graph.has_bodies()) throw ValidationError("calibration needs true_body on every node");
  const auto candidate = load_model(a.model);
  const auto reference = load_model(a.reference);
  const auto r = calibrate_delta(graph, ForestScorer(candidate), ForestScorer(reference), a.ref_delta, a.band,
                                 a.max_steps);
  std::cout << "delta_c,achieved,target,steps,converged\n"
            << r.delta << ',' << r.achieved << ',' << r.target << ',' << r.steps << ',' << (r.converged ? 1 : 0)
            << '\n';
  return 0;
}

struct TrainArgs {
  std::string graph, out, config;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
  const auto graph = load_region_graph(a.graph);
  if (!graph.has_edge_labels()) throw ValidationError("training needs true_label on every edge");
  LoopConfig c = load_loop_config(a.config);
  c.rng_seed = a.seed;
  const auto model = full_supervision_forest(graph, c);
  write_text(a.out, json(model).dump());
  std::cerr << "wrote " << a.out << " (" << model.trees().size() << " trees, " << graph.edge_count() << " edges)\n";
  return 0;
}

struct ServeArgs {
  std::string host = "0.0.0.0", data_dir;
  int port = 8080;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning for boundary classification and region-graph segmentation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic training graph (and optionally its test graph)");
  g->add_option("--out", gen.out, "Training graph path (.jsonl or .csv)")->required();
  g->add_option("--test-out", gen.test_out, "Test graph path (same mixture, next layout seed)");
  g->add_option("--format", gen.format, "jsonl or csv (default: from extension)");
  g->add_option("--config", gen.config, "JSON file with generator fields");
  g->add_option("--bodies", gen.bodies, "Number of planted bodies");
  g->add_option("--superpixels", gen.superpixels, "Number of superpixels (must equal product of --dims)");
  g->add_option("--dims", gen.dims, "Lattice dimensions, 2 or 3 values")->expected(2, 3);
  g->add_option("--feature-dim", gen.feature_dim, "Feature dimension");
  g->add_option("--subclasses", gen.subclasses, "Mixture components per class");
  g->add_option("--separation", gen.separation, "Class separation");
  g->add_option("--noise", gen.noise, "Feature noise probability");
  g->add_option("--seed", gen.seed, "Random seed");

  ReplayArgs rep;
  auto* r = app.add_subcommand("replay", "Run the active loop against groundtruth for several trials");
  r->add_option("--graph", rep.graph, "Training graph")->required();
  r->add_option("--test", rep.test, "Test graph for accuracy and segmentation (default: training graph)");
  r->add_option("--strategy", rep.strategy, "proposed, cotrain, iwal, uncertain, random or all")
      ->check(CLI::IsMember({"proposed", "cotrain", "iwal", "uncertain", "random", "all"}));
  r->add_option("--trials", rep.trials, "Number of trials")->check(CLI::PositiveNumber);
  r->add_option("--seed", rep.seed, "Master seed");
  r->add_option("--out-dir", rep.out_dir, "Directory for trace, score and summary CSVs")->required();
  r->add_option("--config", rep.config, "JSON file with loop settings");
  r->add_option("--budget", rep.budget, "Label budget");
  r->add_option("--batch-size", rep.batch_size, "Queries per round");
  r->add_option("--delta", rep.delta, "Reference merge threshold for the full-supervision forest");
  r->add_flag("--no-segment", rep.no_segment, "Skip segmentation scoring");

  SegmentArgs seg;
  auto* s = app.add_subcommand("segment", "Agglomerate a graph and score it against its bodies");
  s->add_option("--graph", seg.graph, "Graph to segment")->required();
  auto* model_opt = s->add_option("--model", seg.model, "Forest model JSON");
  auto* truth_opt = s->add_flag("--truth", seg.truth, "Use the groundtruth boundary labels as predictor");
  model_opt->excludes(truth_opt);
  s->add_option("--delta", seg.delta, "Merge threshold");
  s->add_option("--out", seg.out, "Write node,segment CSV");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Find the threshold matching a reference model's false-merge VI");
  c->add_option("--graph", cal.graph, "Calibration graph with bodies")->required();
  c->add_option("--model", cal.model, "Candidate forest model JSON")->required();
  c->add_option("--reference", cal.reference, "Reference forest model JSON")->required();
  c->add_option("--ref-delta", cal.ref_delta, "Reference threshold");
  c->add_option("--band", cal.band, "Relative tolerance on false-merge VI");
  c->add_option("--max-steps", cal.max_steps, "Bisection step limit");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the full-supervision forest on every edge label");
  t->add_option("--graph", tr.graph, "Training graph")->required();
  t->add_option("--out", tr.out, "Model JSON path")->required();
  t->add_option("--seed", tr.seed, "Random seed");
  t->add_option("--config", tr.config, "JSON file with loop settings (forest section is used)");

  ServeArgs sv;
  if (const char* p = std::getenv("PORT")) sv.port = std::atoi(p);
  if (const char* d = std::getenv("DATA_DIR")) sv.data_dir = d;
  auto* v = app.add_subcommand("serve", "Start the HTTP session service");
  v->add_option("--host", sv.host, "Bind address");
  v->add_option("--port", sv.port, "Port (default: $PORT or 8080)");
  v->add_option("--data-dir", sv.data_dir, "Snapshot directory (default: $DATA_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (s->parsed() && seg.model.empty() && !seg.truth) {
    std::cerr << "segment: one of --model or --truth is required\n";
    return 2;
  }

  try {
    if (g->parsed()) return run_generate(gen);
    if (r->parsed()) return run_replay_cmd(rep);
    if (s->parsed()) return run_segment(seg);
    if (c->parsed()) return run_calibrate(cal);
    if (t->parsed()) return run_train(tr);
    if (v->parsed()) return serve(sv.host, sv.port, sv.data_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
