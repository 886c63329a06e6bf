#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "activeseg/active_loop.hpp"
#include "activeseg/laplace_solver.hpp"
#include "activeseg/sparse.hpp"
#include "activeseg/synthdata.hpp"
#include "helpers.hpp"

using namespace activeseg;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Dense oracle for the harmonic system on a connected-to-labels graph.
std::vector<double> dense_harmonic(std::size_t n, const std::vector<double>& w, const LabelState& state) {
  const auto u = state.unlabeled_ids();
  const auto l = state.labeled_ids();
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += w[i * n + j];
  std::vector<double> a(u.size() * u.size(), 0.0), b(u.size(), 0.0);
  for (std::size_t r = 0; r < u.size(); ++r) {
    const auto i = static_cast<std::size_t>(u[r]);
    for (std::size_t c = 0; c < u.size(); ++c) a[r * u.size() + c] = -w[i * n + static_cast<std::size_t>(u[c])];
    a[r * u.size() + r] += deg[i];
    for (auto j : l) b[r] += w[i * n + static_cast<std::size_t>(j)] * state.label(j);
  }
  return testutil::dense_solve(a, b);
}

/// Random graph with a spanning path so every node reaches a label.
std::vector<double> connected_weights(std::size_t n, std::mt19937_64& rng) {
  auto w = testutil::random_dense_weights(n, 3.0 / static_cast<double>(n), rng);
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (w[i * n + i + 1] == 0.0) w[i * n + i + 1] = w[(i + 1) * n + i] = 0.5;
  return w;
}

LabelState random_labels(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<EdgeId> ids(n);
  std::iota(ids.begin(), ids.end(), EdgeId{0});
  std::shuffle(ids.begin(), ids.end(), rng);
  std::map<EdgeId, Label> answers;
  for (std::size_t i = 0; i < count; ++i) answers[ids[i]] = (rng() & 1) ? 1 : -1;
  return testutil::labeled(n, answers);
}

}  // namespace

TEST_CASE("symmetric path gives zero in the middle") {
  const auto aff = affinity_from_dense(3, {0, 1, 0, 1, 0, 1, 0, 1, 0});
  const auto r = propagate_labels(aff, testutil::labeled(3, {{0, 1}, {2, -1}}));
  REQUIRE(r.y_u.size() == 1);
  CHECK(std::abs(r.y_u[0]) <= 1e-15);
  CHECK(r.converged);
}

TEST_CASE("star center with weights 2 and 1") {
  // 0 = center (unlabeled), 1 = a (+1, weight 2), 2 = b (-1, weight 1).
  const auto aff = affinity_from_dense(3, {0, 2, 1, 2, 0, 0, 1, 0, 0});
  const auto r = propagate_labels(aff, testutil::labeled(3, {{1, 1}, {2, -1}}));
  CHECK(r.y_u[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("five-point dense affinity matches numpy oracle") {
  const auto g = testutil::star_graph({{0.0, 0.0}, {1.0, 0.5}, {2.0, -0.5}, {0.5, 2.0}, {3.0, 1.0}});
  const auto aff = build_affinity(g, estimate_sigma(g));
  const auto r = propagate_labels(aff, testutil::labeled(5, {{0, 1}, {4, -1}}));
  REQUIRE(r.y_u.size() == 3);
  CHECK(r.y_u[0] == doctest::Approx(0.457284478411324).epsilon(1e-9));
  CHECK(r.y_u[1] == doctest::Approx(0.25745479093797424).epsilon(1e-9));
  CHECK(r.y_u[2] == doctest::Approx(0.3945940328968428).epsilon(1e-9));
}

TEST_CASE("unlabeled component without labels is isolated") {
  // 0-1 carries the labels; 2-3 is a separate component.
  const auto aff = affinity_from_dense(4, {0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0});
  const auto state = testutil::labeled(4, {{0, 1}});
  const auto r = propagate_labels(aff, state);
  CHECK(r.isolated_ids == std::vector<EdgeId>{2, 3});
  REQUIRE(r.y_u.size() == 3);
  CHECK(r.y_u[0] == doctest::Approx(1.0));
  CHECK(r.y_u[1] == 0.0);
  CHECK(r.y_u[2] == 0.0);
}

TEST_CASE("zero right-hand side solves to exactly zero") {
  // Unlabeled 0 and 3 hang off labels of opposite sign with equal weight.
  const auto aff = affinity_from_dense(4, {0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0});
  const auto r = propagate_labels(aff, testutil::labeled(4, {{1, 1}, {2, -1}}));
  REQUIRE(r.y_u.size() == 2);
  CHECK(r.rhs_norm == 0.0);
  CHECK(r.y_u[0] == 0.0);
  CHECK(r.y_u[1] == 0.0);
  CHECK(r.converged);
}

TEST_CASE("CG matches a dense direct solve on a 200-node graph") {
  std::mt19937_64 rng(200);
  const std::size_t n = 200;
  const auto w = connected_weights(n, rng);
  const auto state = random_labels(n, 20, rng);
  const auto r = propagate_labels(affinity_from_dense(n, w), state);
  CHECK(r.converged);
  CHECK(max_abs_diff(r.y_u, dense_harmonic(n, w, state)) <= 1e-6);
}

TEST_CASE("CG oracle equivalence on random graphs") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 10 + rng() % 291;
    const auto w = connected_weights(n, rng);
    const auto state = random_labels(n, 1 + rng() % (n / 4 + 1), rng);
    if (state.unlabeled().empty()) continue;
    const auto r = propagate_labels(affinity_from_dense(n, w), state);
    CHECK(max_abs_diff(r.y_u, dense_harmonic(n, w, state)) <= 1e-6);
  }
}

TEST_CASE("maximum principle") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 20 + rng() % 80;
    const auto aff = affinity_from_dense(n, testutil::random_dense_weights(n, 0.08, rng));
    const auto state = random_labels(n, 3 + rng() % 5, rng);
    const auto r = propagate_labels(aff, state);
    std::set<EdgeId> isolated(r.isolated_ids.begin(), r.isolated_ids.end());
    const auto ids = state.unlabeled_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (isolated.count(ids[i])) continue;
      CHECK(r.y_u[i] >= -1.0 - 1e-6);
      CHECK(r.y_u[i] <= 1.0 + 1e-6);
    }
  }
}

TEST_CASE("residual checkpoints never increase and solves are deterministic") {
  std::mt19937_64 rng(3);
  const std::size_t n = 300;
  const auto aff = affinity_from_dense(n, connected_weights(n, rng));
  const auto state = random_labels(n, 5, rng);
  SolverConfig cfg;
  cfg.checkpoint_every = 1;
  const auto a = propagate_labels(aff, state, cfg);
  const auto b = propagate_labels(aff, state, cfg);
  REQUIRE(a.residual_checkpoints.size() > 1);
  for (std::size_t i = 1; i < a.residual_checkpoints.size(); ++i)
    CHECK(a.residual_checkpoints[i] <= a.residual_checkpoints[i - 1]);
  CHECK(a.y_u == b.y_u);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("benchmark-scale system reaches the relative tolerance") {
  const auto g = generate(SynthConfig{});
  const auto aff = build_session_affinity(g, LoopConfig{});
  std::map<EdgeId, Label> answers;
  for (EdgeId e = 0; e < static_cast<EdgeId>(g.edge_count()); e += 33) answers[e] = *g.edge(e).true_label;
  const auto state = testutil::labeled(g.edge_count(), answers);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = propagate_labels(aff, state);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(r.converged);
  CHECK(r.residual_norm <= 1e-8 * r.rhs_norm);
  CHECK(seconds < 5.0);
}

TEST_CASE("parallel spmv is bit-identical to the serial kernel") {
  std::mt19937_64 rng(9);
  const auto g = generate(SynthConfig{});
  const auto aff = build_session_affinity(g, LoopConfig{});
  std::vector<double> x(aff.size());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : x) v = u(rng);
  std::vector<double> a(aff.size()), b(aff.size());
  kernels::spmv(aff.weights, x, a);
  kernels::spmv_reference(aff.weights, x, b);
  CHECK(a == b);
}
