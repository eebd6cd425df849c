#pragma once

#include <vector>

#include "kbandit/design_opt.hpp"
#include "kbandit/feature_space.hpp"

namespace kbandit {

// Discrete multiset of arm pulls.
struct Allocation {
  VectorXi counts;
  long total = 0;
};

// ceil(lambda_i T) pulls for every supported arm; overshoots T by at most the
// support size.
Allocation round_ceiling(const Design& lambda, long T);

// Support reduction preserving the second-moment matrix, iterated null-space
// elimination in symmetric-moment coordinates. Needs explicit features.
// Returns the input unchanged when the support is already at most
// d(d+1)/2 + 1.
Design caratheodory_reduce(const ArmSet& arms, const Design& lambda);

// Swap-based rounding to exactly T pulls. Starts from the ceiling allocation,
// strips the overshoot by smallest marginal damage to the max-direction
// objective max_v ||v||^2_{(sum_i x_i x_i^T + T gamma I)^{-1}}, then applies
// local remove/add swaps until no swap improves it (at most 50 T candidate
// evaluations). Requires T >= ceil(d_eff / eps).
Allocation round_swap(const DesignProblem& problem, const Design& lambda, long T, double eps);

struct PtrReport {
  Allocation allocation;
  int effective_dim = 0;
  int projection_rank = 0;
  double inflation_factor = 0.0;  // measured allocation/design objective ratio
};

// Project-then-round: factor the Gram matrix, diagonalize the weighted
// second-moment matrix, project every feature onto the top-d~ eigenvectors and
// round there with round_swap. `candidates` restricts which arms may receive
// pulls (empty = all).
PtrReport ptr_round(const ArmSet& arms, const std::vector<DualVector>& directions,
                    const Design& lambda, double gamma, long T, double eps,
                    const std::vector<int>& candidates = {});

}  // namespace kbandit
