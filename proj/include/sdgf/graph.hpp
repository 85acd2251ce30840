#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sdgf/ops.hpp"

namespace sdgf {

/// Settings for K-hop residual propagation.
struct GraphPropagationConfig {
  double alpha = 0.5;     ///< residual weight, strictly inside (0, 1)
  std::size_t depth = 2;  ///< K; K + 1 hop maps are used
  /// Evaluate every hop term as alpha*H + (1-alpha)*A*H instead of the
  /// mix-hop recursion.
  bool literal = false;

  void validate() const;
};

/// Batch-averaged Pearson correlation matrix (N x N) of x (B x L x N),
/// computed over the time axis: cov / (sigma_n * sigma_m + eps).
Tensor pearson_correlation(const Tensor& x, double eps = 1e-9);

/// Static prior graph: row-wise softmax of ReLU(batch-mean PCC). Row-stochastic.
Tensor pearson_adjacency(const Tensor& x, double eps = 1e-9);

/// Learned per-scale embedding maps (L x d_e each).
struct DynamicGraphLayer {
  Var w1;
  Var w2;
};

/// softmax_rows(tanh(x^T W1) tanh(x^T W2)^T) for x_scale (B x L x N); returns B x N x N.
Var dynamic_adjacency(const Var& x_scale, const DynamicGraphLayer& layer);

/// Propagates node features h (B x D x N) over `adjacency` (N x N shared or
/// B x N x N per item) and sums the hop maps:
///   H0 = h,  Hk = alpha*H0 + (1-alpha) * A Hk-1,  out = sum_k theta[k] Hk
/// where A acts on the node axis and theta[k] (D x D) acts on the channel axis.
Var graph_propagate(const Var& h, const Var& adjacency, std::span<const Var> theta, const GraphPropagationConfig& cfg);

Var static_graph_conv(const Var& h, const Tensor& adjacency, std::span<const Var> theta,
                      const GraphPropagationConfig& cfg);
Var dynamic_graph_conv(const Var& h, const Var& adjacency, std::span<const Var> theta,
                       const GraphPropagationConfig& cfg);

}  // namespace sdgf
