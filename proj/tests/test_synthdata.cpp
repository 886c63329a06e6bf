#include <doctest.h>

#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "activeseg/graph_io.hpp"
#include "activeseg/replay.hpp"
#include "activeseg/synthdata.hpp"

using namespace activeseg;

namespace {

std::string dump(const RegionGraph& g) {
  std::ostringstream out;
  write_region_graph(out, g, GraphFormat::jsonl);
  return out.str();
}

SynthConfig small_config() {
  SynthConfig c;
  c.n_superpixels = 400;
  c.lattice_dims = {20, 20};
  c.n_bodies = 12;
  return c;
}

double accuracy(const ForestModel& m, const RegionGraph& g, std::span<const EdgeId> ids) {
  std::size_t ok = 0;
  for (EdgeId id : ids) ok += sign_label(m.confidence(g.edge(id).x)) == *g.edge(id).true_label;
  return static_cast<double>(ok) / static_cast<double>(ids.size());
}

}  // namespace

TEST_CASE("single body gives only false boundaries") {
  auto c = small_config();
  c.n_bodies = 1;
  const auto g = generate(c);
  for (std::size_t e = 0; e < g.edge_count(); ++e) CHECK(*g.edge(static_cast<EdgeId>(e)).true_label == -1);
}

TEST_CASE("singleton bodies give only true boundaries") {
  auto c = small_config();
  c.n_bodies = c.n_superpixels;
  const auto g = generate(c);
  for (std::size_t e = 0; e < g.edge_count(); ++e) CHECK(*g.edge(static_cast<EdgeId>(e)).true_label == 1);
}

TEST_CASE("lattice structure and label rule") {
  for (auto dims : {std::vector<std::size_t>{20, 20}, std::vector<std::size_t>{6, 8, 10}}) {
    auto c = small_config();
    c.lattice_dims = dims;
    c.n_superpixels = std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    const auto g = generate(c);
    std::size_t expected_edges = 0;
    for (std::size_t i = 0; i < g.node_count(); ++i)
      for (std::size_t j : lattice_neighbors(dims, i)) expected_edges += j > i;
    CHECK(g.edge_count() == expected_edges);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      const auto& s = g.edge(static_cast<EdgeId>(e));
      const bool differ = *g.node(s.u).true_body != *g.node(s.v).true_body;
      CHECK(*s.true_label == (differ ? 1 : -1));
      CHECK(s.x.size() == c.feature_dim);
    }
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      CHECK(g.node(static_cast<NodeId>(i)).size >= c.min_node_size);
      CHECK(g.node(static_cast<NodeId>(i)).size <= c.max_node_size);
    }
  }
}

TEST_CASE("every body is a connected lattice region") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig c;  // default benchmark size
    c.rng_seed = seed;
    const auto g = generate(c);
    std::map<std::int64_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < g.node_count(); ++i) members[*g.node(static_cast<NodeId>(i)).true_body].push_back(i);
    CHECK(members.size() == c.n_bodies);
    for (const auto& [body, nodes] : members) {
      std::set<std::size_t> seen{nodes.front()};
      std::queue<std::size_t> q;
      q.push(nodes.front());
      while (!q.empty()) {
        const auto i = q.front();
        q.pop();
        for (std::size_t j : lattice_neighbors(c.lattice_dims, i))
          if (*g.node(static_cast<NodeId>(j)).true_body == body && seen.insert(j).second) q.push(j);
      }
      CHECK(seen.size() == nodes.size());
    }
  }
}

TEST_CASE("generation is deterministic") {
  const auto c = small_config();
  CHECK(dump(generate(c)) == dump(generate(c)));
  auto other = c;
  other.rng_seed = 1;
  CHECK(dump(generate(c)) != dump(generate(other)));
  const auto [a1, b1] = train_test_pair(c, 3, 4);
  const auto [a2, b2] = train_test_pair(c, 3, 4);
  CHECK(dump(a1) == dump(a2));
  CHECK(dump(b1) == dump(b2));
  CHECK(dump(a1) != dump(b1));
}

TEST_CASE("mixture geometry") {
  SynthConfig c;
  const auto m = make_mixture(c);
  REQUIRE(m.positive_means.size() == c.n_subclasses * c.feature_dim);
  for (std::size_t k = 0; k < m.components; ++k) {
    double norm = 0.0;
    for (std::size_t d = 0; d < m.dim; ++d) {
      norm += m.positive_means[k * m.dim + d] * m.positive_means[k * m.dim + d];
      CHECK(m.negative_means[k * m.dim + d] == -m.positive_means[k * m.dim + d]);
    }
    CHECK(std::sqrt(norm) == doctest::Approx(c.class_separation).epsilon(1e-12));
  }
}

TEST_CASE("invalid configurations are rejected") {
  auto c = small_config();
  c.n_superpixels = 401;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c = small_config();
  c.class_separation = 0.0;
  CHECK_THROWS_AS(generate(c), PreconditionError);
  c = small_config();
  c.label_noise = 0.5;
  CHECK_THROWS_AS(generate(c), PreconditionError);
  c = small_config();
  c.lattice_dims = {400};
  CHECK_THROWS_AS(generate(c), PreconditionError);
}

TEST_CASE("default benchmark difficulty and transfer") {
  SynthConfig c;
  const auto [train, test] = benchmark_pair(c);
  CHECK(train.edge_count() > 5800);
  CHECK(train.edge_count() < 6000);
  std::size_t positives = 0;
  for (std::size_t e = 0; e < train.edge_count(); ++e) positives += *train.edge(static_cast<EdgeId>(e)).true_label == 1;
  CHECK(positives * 4 < train.edge_count());  // imbalanced toward false boundaries

  // A single 30% holdout has a standard error near 0.007, so the holdout
  // and transfer figures are averaged over five random splits.
  std::vector<EdgeId> all(test.edge_count());
  std::iota(all.begin(), all.end(), EdgeId{0});
  double holdout_sum = 0.0, test_sum = 0.0;
  for (std::uint64_t split = 0; split < 5; ++split) {
    std::vector<EdgeId> ids(train.edge_count());
    std::iota(ids.begin(), ids.end(), EdgeId{0});
    std::mt19937_64 rng(split);
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto cut = static_cast<std::ptrdiff_t>(ids.size() * 7 / 10);
    const std::vector<EdgeId> fit(ids.begin(), ids.begin() + cut), holdout(ids.begin() + cut, ids.end());
    std::vector<Label> labels;
    for (EdgeId id : fit) labels.push_back(*train.edge(id).true_label);
    ForestConfig fc;
    fc.rng_seed = split;
    const auto model = train_forest(make_training_set(train, fit, labels), fc);
    holdout_sum += accuracy(model, train, holdout);
    test_sum += accuracy(model, test, all);
  }
  CHECK(holdout_sum / 5 >= 0.90);
  CHECK(std::abs(test_sum / 5 - holdout_sum / 5) <= 0.03);
}
