#include <algorithm>
#include <cmath>
#include <numeric>

#include "activeseg/active_loop.hpp"
#include "activeseg/rng.hpp"

namespace activeseg {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionMismatch("score vector length differs from the pool size");
}

}  // namespace

std::vector<double> rank_disagreement(std::span<const double> h_c, std::span<const double> y_u) {
  check_aligned(h_c.size(), y_u.size());
  std::vector<double> r(h_c.size());
  for (std::size_t i = 0; i < h_c.size(); ++i) r[i] = 1.0 - h_c[i] * std::clamp(y_u[i], -1.0, 1.0);
  return r;
}

QueryBatch top_k_by_score(std::span<const EdgeId> pool, std::span<const double> scores, std::size_t k) {
  check_aligned(pool.size(), scores.size());
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t take = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return pool[a] < pool[b];
  });
  QueryBatch q;
  for (std::size_t r = 0; r < take; ++r) {
    q.ids.push_back(pool[idx[r]]);
    q.scores.push_back(scores[idx[r]]);
  }
  return q;
}

QueryBatch strategy_uncertain(std::span<const EdgeId> pool, std::span<const double> h_c, std::size_t k, double band) {
  check_aligned(pool.size(), h_c.size());
  auto by_certainty = [&](std::size_t a, std::size_t b) {
    const double fa = std::abs(h_c[a]), fb = std::abs(h_c[b]);
    if (fa != fb) return fa < fb;
    return pool[a] < pool[b];
  };
  std::vector<std::size_t> inside, outside;
  for (std::size_t i = 0; i < pool.size(); ++i) (std::abs(h_c[i]) <= band ? inside : outside).push_back(i);
  std::sort(inside.begin(), inside.end(), by_certainty);
  std::sort(outside.begin(), outside.end(), by_certainty);
  inside.insert(inside.end(), outside.begin(), outside.end());
  QueryBatch q;
  for (std::size_t r = 0; r < std::min(k, inside.size()); ++r) {
    q.ids.push_back(pool[inside[r]]);
    q.scores.push_back(std::abs(h_c[inside[r]]));
  }
  return q;
}

QueryBatch strategy_random(std::span<const EdgeId> pool, std::size_t k, std::uint64_t rng_seed) {
  std::vector<EdgeId> ids(pool.begin(), pool.end());
  Engine rng(rng_seed);
  const std::size_t take = std::min(k, ids.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + uniform_index(rng, ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(take);
  QueryBatch q;
  q.ids = std::move(ids);
  q.scores.assign(take, 0.0);
  return q;
}

QueryBatch select_cotrain(std::span<const EdgeId> pool, std::span<const double> h_a, std::span<const double> h_b,
                          std::size_t k) {
  check_aligned(pool.size(), h_a.size());
  check_aligned(pool.size(), h_b.size());
  std::vector<std::size_t> disagree, rest;
  for (std::size_t i = 0; i < pool.size(); ++i)
    (sign_label(h_a[i]) != sign_label(h_b[i]) ? disagree : rest).push_back(i);
  std::sort(disagree.begin(), disagree.end(), [&](std::size_t a, std::size_t b) { return pool[a] < pool[b]; });
  QueryBatch q;
  for (std::size_t i : disagree) {
    if (q.size() == k) break;
    q.ids.push_back(pool[i]);
    q.scores.push_back(std::abs(h_a[i] - h_b[i]));
  }
  if (q.size() < k) {
    std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
      const double da = std::abs(h_a[a] - h_b[a]), db = std::abs(h_a[b] - h_b[b]);
      if (da != db) return da > db;
      return pool[a] < pool[b];
    });
    for (std::size_t i : rest) {
      if (q.size() == k) break;
      q.ids.push_back(pool[i]);
      q.scores.push_back(std::abs(h_a[i] - h_b[i]));
    }
  }
  return q;
}

double iwal_query_probability(double spread, double p_min) {
  return p_min + (1.0 - p_min) * std::clamp(spread, 0.0, 1.0);
}

QueryBatch select_iwal(std::span<const EdgeId> pool, std::span<const double> spread, std::size_t k, double p_min,
                       std::uint64_t rng_seed) {
  check_aligned(pool.size(), spread.size());
  Engine rng(rng_seed);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);
  QueryBatch q;
  for (std::size_t i : order) {
    if (q.size() == k) break;
    const double p = iwal_query_probability(spread[i], p_min);
    if (uniform01(rng) < p) {
      q.ids.push_back(pool[i]);
      q.scores.push_back(p);
    }
  }
  return q;
}

}  // namespace activeseg
