#include "activeseg/laplace_solver.hpp"

#include <cmath>
#include <deque>

namespace activeseg {

namespace {

// Unlabeled rows reachable from a labeled datapoint.
std::vector<bool> reachable_rows(const LaplaceBlocks& b) {
  const std::size_t m = b.laplacian_uu.rows;
  std::vector<bool> seen(m, false);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < m; ++i) {
    if (b.weights_ul.row_ptr[i + 1] > b.weights_ul.row_ptr[i]) {
      seen[i] = true;
      queue.push_back(i);
    }
  }
  const auto& L = b.laplacian_uu;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (std::size_t p = L.row_ptr[i]; p < L.row_ptr[i + 1]; ++p) {
      const auto j = static_cast<std::size_t>(L.col[p]);
      if (!seen[j]) {
        seen[j] = true;
        queue.push_back(j);
      }
    }
  }
  return seen;
}

CsrMatrix restrict_rows(const CsrMatrix& a, const std::vector<std::int64_t>& new_index) {
  CsrMatrix out;
  out.row_ptr.assign(1, 0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    if (new_index[i] < 0) continue;
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      const auto j = new_index[static_cast<std::size_t>(a.col[p])];
      if (j < 0) continue;
      out.col.push_back(j);
      out.val.push_back(a.val[p]);
    }
    out.row_ptr.push_back(out.col.size());
  }
  out.rows = out.cols = out.row_ptr.size() - 1;
  return out;
}

double norm2(std::span<const double> v) { return std::sqrt(kernels::dot(v, v)); }

}  // namespace

PropagationResult solve_propagation(const LaplaceBlocks& blocks, std::span<const double> y_l, const SolverConfig& config) {
  const std::size_t m = blocks.laplacian_uu.rows;
  if (blocks.laplacian_uu.cols != m || blocks.weights_ul.rows != m)
    throw DimensionMismatch("L_uu and W_ul row counts disagree");
  if (blocks.weights_ul.cols != y_l.size()) throw DimensionMismatch("W_ul columns must match y_l length");
  if (y_l.empty()) throw PreconditionError("harmonic system needs at least one labeled datapoint");
  if (!(config.rel_tolerance > 0.0 && config.rel_tolerance < 1.0))
    throw PreconditionError("rel_tolerance must lie in (0, 1)");

  PropagationResult res;
  res.y_u.assign(m, 0.0);
  if (m == 0) {
    res.converged = true;
    return res;
  }

  const auto seen = reachable_rows(blocks);
  std::vector<std::int64_t> index(m, -1);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < m; ++i) {
    if (seen[i]) {
      index[i] = static_cast<std::int64_t>(active.size());
      active.push_back(i);
    } else {
      res.isolated_ids.push_back(blocks.unlabeled_ids.empty() ? static_cast<EdgeId>(i) : blocks.unlabeled_ids[i]);
    }
  }
  const std::size_t n = active.size();
  if (n == 0) {
    res.converged = true;
    return res;
  }

  const CsrMatrix A = n == m ? blocks.laplacian_uu : restrict_rows(blocks.laplacian_uu, index);
  std::vector<double> rhs_full(m);
  kernels::spmv(blocks.weights_ul, y_l, rhs_full);
  std::vector<double> b(n);
  for (std::size_t r = 0; r < n; ++r) b[r] = rhs_full[active[r]];

  std::vector<double> inv_diag(n, 1.0);
  if (config.preconditioner == Preconditioner::jacobi)
    for (std::size_t i = 0; i < n; ++i) inv_diag[i] = 1.0 / A.at(i, i);

  const std::size_t max_it = config.max_iterations ? config.max_iterations : 10 * n;
  const double bnorm = norm2(b);
  res.rhs_norm = bnorm;
  const double target = config.rel_tolerance * bnorm;

  std::vector<double> x(n, 0.0), r = b, z(n), p(n), q(n);
  std::vector<double> best = x;
  double best_norm = bnorm;
  std::size_t it = 0;
  double rnorm = bnorm;

  auto true_residual = [&](const std::vector<double>& xv) {
    std::vector<double> ax(n);
    kernels::spmv(A, xv, ax);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (b[i] - ax[i]) * (b[i] - ax[i]);
    return std::sqrt(s);
  };

  if (bnorm > 0.0) {
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = kernels::dot(r, z);
    while (it < max_it) {
      kernels::spmv(A, p, q);
      const double pq = kernels::dot(p, q);
      if (!(pq > 0.0)) break;
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++it;
      rnorm = norm2(r);
      if (rnorm < best_norm) {
        best_norm = rnorm;
        best = x;
      }
      if (config.checkpoint_every && it % config.checkpoint_every == 0) res.residual_checkpoints.push_back(best_norm);
      if (rnorm <= target) {
        // Guard against drift of the recurred residual.
        const double tr = true_residual(x);
        if (tr <= target) break;
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i];
        std::vector<double> ax(n);
        kernels::spmv(A, x, ax);
        for (std::size_t i = 0; i < n; ++i) r[i] -= ax[i];
        for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        p = z;
        rz = kernels::dot(r, z);
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_next = kernels::dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
  }

  const bool finished = rnorm <= target;
  const std::vector<double>& sol = finished ? x : best;
  res.residual_norm = true_residual(sol);
  res.converged = res.residual_norm <= target;
  res.iterations = it;
  for (std::size_t r2 = 0; r2 < n; ++r2) res.y_u[active[r2]] = sol[r2];
  return res;
}

PropagationResult propagate_labels(const AffinityGraph& aff, const LabelState& state, const SolverConfig& config) {
  const auto blocks = partition_blocks(aff, state);
  std::vector<double> y_l;
  y_l.reserve(blocks.labeled_ids.size());
  for (EdgeId id : blocks.labeled_ids) y_l.push_back(static_cast<double>(state.label(id)));
  return solve_propagation(blocks, y_l, config);
}

}  // namespace activeseg
