#pragma once

#include <span>
#include <vector>

#include "sdgf/ops.hpp"

namespace sdgf {

/// Attention gate over graph branches: logit_i = q^T W_k h_i, where h_i is
/// branch i averaged over nodes.
struct FusionLayer {
  Var query;  ///< [D]
  Var key;    ///< [D x D]
};

struct FusionResult {
  Var output;   ///< B x D x N
  Var weights;  ///< B x branches; rows sum to 1
};

/// Softmax-gated convex combination of equally shaped B x D x N branches.
/// Summation is order-independent: permuting `branches` permutes the
/// weights and leaves the output bit-identical.
FusionResult fuse(std::span<const Var> branches, const FusionLayer& layer);

/// Static branch first, then the dynamic branches.
FusionResult fuse(const Var& h_static, std::span<const Var> h_dynamic, const FusionLayer& layer);

/// Unweighted branch mean (the gate removed).
FusionResult mean_fuse(std::span<const Var> branches);

/// sum_i weights[b, i] * stacked[b, i, ...] with per-element sorted summation.
/// stacked: B x M x ..., weights: B x M.
Var weighted_branch_sum(const Var& stacked, const Var& weights);

}  // namespace sdgf
