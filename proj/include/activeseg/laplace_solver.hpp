#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "activeseg/affinity.hpp"

namespace activeseg {

enum class Preconditioner { none, jacobi };

struct SolverConfig {
  double rel_tolerance = 1e-8;
  std::size_t max_iterations = 0;  // 0 means 10 * system size
  Preconditioner preconditioner = Preconditioner::jacobi;
  std::size_t checkpoint_every = 10;
};

struct PropagationResult {
  std::vector<double> y_u;             // aligned with LaplaceBlocks::unlabeled_ids
  double residual_norm = 0.0;          // ||W_ul y_l - L_uu y_u|| over the solved rows
  double rhs_norm = 0.0;               // ||W_ul y_l||
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<EdgeId> isolated_ids;    // unlabeled ids with no path to a label; y_u = 0
  std::vector<double> residual_checkpoints;  // best residual norm seen, every checkpoint_every iterations
};

/// Solves L_uu y_u = W_ul y_l by preconditioned conjugate gradients.
/// Unlabeled datapoints whose component holds no labeled datapoint are removed
/// from the system first and get the neutral value 0. On non-convergence the
/// best iterate is returned with converged = false.
PropagationResult solve_propagation(const LaplaceBlocks& blocks, std::span<const double> y_l,
                                    const SolverConfig& config = {});

/// Convenience: blocks + solve for a label state; y_l taken from the state.
PropagationResult propagate_labels(const AffinityGraph& aff, const LabelState& state, const SolverConfig& config = {});

}  // namespace activeseg
