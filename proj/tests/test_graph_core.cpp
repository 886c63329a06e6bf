#include <doctest.h>

#include <sstream>

#include "activeseg/graph_io.hpp"
#include "activeseg/region_graph.hpp"
#include "activeseg/synthdata.hpp"
#include "helpers.hpp"

using namespace activeseg;

namespace {

RegionGraph read_jsonl(const std::string& text) {
  std::istringstream in(text);
  return read_region_graph(in, GraphFormat::jsonl);
}

RegionGraph read_csv(const std::string& text) {
  std::istringstream in(text);
  return read_region_graph(in, GraphFormat::csv);
}

const char* kThreeNodes =
    "{\"type\":\"header\",\"feature_dim\":2,\"n_nodes\":3}\n"
    "{\"type\":\"node\",\"id\":0,\"size\":10,\"true_body\":0}\n"
    "{\"type\":\"node\",\"id\":1,\"size\":20,\"true_body\":0}\n"
    "{\"type\":\"node\",\"id\":2,\"size\":30,\"true_body\":1}\n"
    "{\"type\":\"edge\",\"id\":0,\"u\":0,\"v\":1,\"x\":[0.5,1.5],\"true_label\":-1}\n"
    "{\"type\":\"edge\",\"id\":1,\"u\":2,\"v\":1,\"x\":[2.0,-1.0],\"true_label\":1}\n";

}  // namespace

TEST_CASE("three-node JSONL file loads") {
  const auto g = read_jsonl(kThreeNodes);
  CHECK(g.node_count() == 3);
  CHECK(g.edge_count() == 2);
  CHECK(g.feature_dim() == 2);
  CHECK(g.edge(1).u == 1);  // endpoints are stored with u < v
  CHECK(g.edge(1).v == 2);
  CHECK(g.features(1)[0] == 2.0);
  CHECK(g.has_edge_labels());
  CHECK(g.has_bodies());
  CHECK(g.incident(1) == std::vector<EdgeId>{0, 1});
}

TEST_CASE("dangling endpoint is rejected") {
  const std::string text =
      "{\"type\":\"header\",\"feature_dim\":1,\"n_nodes\":3}\n"
      "{\"type\":\"node\",\"id\":0,\"size\":1}\n"
      "{\"type\":\"node\",\"id\":1,\"size\":1}\n"
      "{\"type\":\"node\",\"id\":2,\"size\":1}\n"
      "{\"type\":\"edge\",\"id\":0,\"u\":0,\"v\":99,\"x\":[1]}\n";
  CHECK_THROWS_AS(read_jsonl(text), DanglingEndpoint);
}

TEST_CASE("mixed feature dimensions are rejected") {
  const std::string text =
      "{\"type\":\"header\",\"feature_dim\":4,\"n_nodes\":3}\n"
      "{\"type\":\"node\",\"id\":0,\"size\":1}\n"
      "{\"type\":\"node\",\"id\":1,\"size\":1}\n"
      "{\"type\":\"node\",\"id\":2,\"size\":1}\n"
      "{\"type\":\"edge\",\"id\":0,\"u\":0,\"v\":1,\"x\":[1,2,3,4]}\n"
      "{\"type\":\"edge\",\"id\":1,\"u\":1,\"v\":2,\"x\":[1,2,3,4,5]}\n";
  CHECK_THROWS_AS(read_jsonl(text), DimensionMismatch);
}

TEST_CASE("malformed input reports the line") {
  const std::string text = std::string(kThreeNodes) + "{not json\n";
  try {
    read_jsonl(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 7);
  }
}

TEST_CASE("structural validation") {
  std::vector<SuperpixelNode> nodes{{0, 1, {}}, {1, 1, {}}};
  SUBCASE("self loop") {
    std::vector<BoundarySample> edges{{0, 1, 1, {0.0}, {}}};
    CHECK_THROWS_AS(RegionGraph(nodes, edges), ValidationError);
  }
  SUBCASE("duplicate boundary") {
    std::vector<BoundarySample> edges{{0, 0, 1, {0.0}, {}}, {1, 1, 0, {0.0}, {}}};
    CHECK_THROWS_AS(RegionGraph(nodes, edges), ValidationError);
  }
  SUBCASE("label outside +-1") {
    std::vector<BoundarySample> edges{{0, 0, 1, {0.0}, 0}};
    CHECK_THROWS_AS(RegionGraph(nodes, edges), ValidationError);
  }
  SUBCASE("non-finite feature") {
    std::vector<BoundarySample> edges{{0, 0, 1, {std::nan("")}, {}}};
    CHECK_THROWS_AS(RegionGraph(nodes, edges), ValidationError);
  }
}

TEST_CASE("CSV and JSONL describe the same graph") {
  const std::string csv =
      "# comment\n"
      "header,2,3\n"
      "node,0,10,0\n"
      "node,1,20,0\n"
      "node,2,30,1\n"
      "\n"
      "edge,0,0,1,-1,0.5,1.5\n"
      "edge,1,2,1,1,2.0,-1.0\n";
  const auto a = read_csv(csv);
  const auto b = read_jsonl(kThreeNodes);
  REQUIRE(a.edge_count() == b.edge_count());
  for (EdgeId e = 0; e < 2; ++e) {
    CHECK(a.edge(e).u == b.edge(e).u);
    CHECK(a.edge(e).x == b.edge(e).x);
    CHECK(a.edge(e).true_label == b.edge(e).true_label);
  }
  CHECK(a.node(2).size == 30);
}

TEST_CASE("CSV header dimension must match edges") {
  const std::string csv = "header,3,2\nnode,0,1,\nnode,1,1,\nedge,0,0,1,,1.0,2.0\n";
  CHECK_THROWS_AS(read_csv(csv), DimensionMismatch);
}

TEST_CASE("write then read is bit-identical in both formats") {
  SynthConfig cfg;
  cfg.n_superpixels = 48;
  cfg.lattice_dims = {6, 8};
  cfg.n_bodies = 5;
  const auto g = generate(cfg);
  for (auto format : {GraphFormat::jsonl, GraphFormat::csv}) {
    std::stringstream ss;
    write_region_graph(ss, g, format);
    const auto back = read_region_graph(ss, format);
    REQUIRE(back.edge_count() == g.edge_count());
    for (EdgeId e = 0; e < static_cast<EdgeId>(g.edge_count()); ++e) {
      CHECK(back.edge(e).x == g.edge(e).x);
      CHECK(back.edge(e).true_label == g.edge(e).true_label);
    }
    for (NodeId n = 0; n < static_cast<NodeId>(g.node_count()); ++n) {
      CHECK(back.node(n).size == g.node(n).size);
      CHECK(back.node(n).true_body == g.node(n).true_body);
    }
  }
}

TEST_CASE("apply_labels moves ids between sets") {
  const LabelState empty(3);
  const auto s = apply_labels(empty, {{1, +1}});
  CHECK(s.labeled_ids() == std::vector<EdgeId>{1});
  CHECK(s.unlabeled_ids() == std::vector<EdgeId>{0, 2});
  CHECK(s.label(1) == 1);

  CHECK_THROWS_AS(apply_labels(s, {{1, -1}}), PreconditionError);
  CHECK_THROWS_AS(apply_labels(s, {{7, 1}}), PreconditionError);
  CHECK_THROWS_AS(apply_labels(s, {{0, 0}}), PreconditionError);
  CHECK(apply_labels(s, {}) == s);
}

TEST_CASE("zero confidence is a negative decision") {
  CHECK(sign_label(0.0) == -1);
  CHECK(sign_label(1e-300) == 1);
  CHECK(sign_label(-0.5) == -1);
}
