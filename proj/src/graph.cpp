#include "sdgf/graph.hpp"

#include <cmath>

#include "sdgf/errors.hpp"

namespace sdgf {

void GraphPropagationConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("gcn.alpha must lie strictly inside (0, 1), got " + std::to_string(alpha));
  }
}

Tensor pearson_correlation(const Tensor& x, double eps) {
  if (x.rank() != 3) throw DimensionError("pearson_correlation expects B x L x N, got " + to_string(x.shape()));
  const std::size_t B = x.dim(0), L = x.dim(1), N = x.dim(2);
  if (L < 2) throw DimensionError("pearson_correlation needs at least 2 time steps, got " + std::to_string(L));

  RowMatrix total = RowMatrix::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  for (std::size_t b = 0; b < B; ++b) {
    ConstMatrixMap xb(x.data().data() + b * L * N, static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(N));
    const RowMatrix centered = xb.rowwise() - xb.colwise().mean();
    const RowMatrix cov = centered.transpose() * centered / static_cast<double>(L);
    const Eigen::VectorXd sigma = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    total.array() += cov.array() / ((sigma * sigma.transpose()).array() + eps);
  }
  return from_matrix(total / static_cast<double>(B));
}

Tensor pearson_adjacency(const Tensor& x, double eps) {
  NoGradGuard no_grad;
  return softmax(relu(constant(pearson_correlation(x, eps))), 1).value();
}

Var dynamic_adjacency(const Var& x_scale, const DynamicGraphLayer& layer) {
  if (x_scale.rank() != 3) throw DimensionError("dynamic_adjacency expects B x L x N, got " + to_string(x_scale.shape()));
  if (layer.w1.rank() != 2 || layer.w1.shape() != layer.w2.shape() || layer.w1.dim(0) != x_scale.dim(1)) {
    throw DimensionError("dynamic_adjacency: embedding maps " + to_string(layer.w1.shape()) + " / " +
                         to_string(layer.w2.shape()) + " do not fit input " + to_string(x_scale.shape()));
  }
  const Var profile = transpose(x_scale, 1, 2);  // B x N x L
  const Var e1 = tanh(matmul(profile, layer.w1));
  const Var e2 = tanh(matmul(profile, layer.w2));
  return softmax(matmul(e1, transpose(e2, 1, 2)), 2);
}

Var graph_propagate(const Var& h, const Var& adjacency, std::span<const Var> theta, const GraphPropagationConfig& cfg) {
  cfg.validate();
  if (h.rank() != 3) throw DimensionError("graph propagation expects H as B x D x N, got " + to_string(h.shape()));
  const std::size_t N = h.dim(2);
  const std::size_t D = h.dim(1);
  const bool shared = adjacency.rank() == 2;
  if (!(shared || adjacency.rank() == 3) || adjacency.dim(adjacency.rank() - 1) != N ||
      adjacency.dim(adjacency.rank() - 2) != N || (!shared && adjacency.dim(0) != h.dim(0))) {
    throw DimensionError("adjacency " + to_string(adjacency.shape()) + " does not match node axis of H " +
                         to_string(h.shape()));
  }
  if (theta.size() != cfg.depth + 1) {
    throw ConfigError("expected " + std::to_string(cfg.depth + 1) + " hop maps, got " + std::to_string(theta.size()));
  }
  for (const auto& t : theta) {
    if (t.shape() != Shape{D, D}) throw DimensionError("hop map must be D x D, got " + to_string(t.shape()));
  }

  // (A H)[b, d, n] = sum_m A[n, m] H[b, d, m]  ==  H A^T
  const Var a_t = shared ? transpose(adjacency, 0, 1) : transpose(adjacency, 1, 2);
  auto mix = [&](const Var& hk) { return add(scale(h, cfg.alpha), scale(matmul(hk, a_t), 1.0 - cfg.alpha)); };

  if (cfg.literal) {
    const Var mixed = mix(h);
    Var out = matmul(theta[0], mixed);
    for (std::size_t k = 1; k < theta.size(); ++k) out = add(out, matmul(theta[k], mixed));
    return out;
  }
  Var hop = h;
  Var out = matmul(theta[0], hop);
  for (std::size_t k = 1; k < theta.size(); ++k) {
    hop = mix(hop);
    out = add(out, matmul(theta[k], hop));
  }
  return out;
}

Var static_graph_conv(const Var& h, const Tensor& adjacency, std::span<const Var> theta,
                      const GraphPropagationConfig& cfg) {
  if (adjacency.rank() != 2) throw DimensionError("static adjacency must be N x N, got " + to_string(adjacency.shape()));
  return graph_propagate(h, constant(adjacency), theta, cfg);
}

Var dynamic_graph_conv(const Var& h, const Var& adjacency, std::span<const Var> theta,
                       const GraphPropagationConfig& cfg) {
  if (adjacency.rank() != 3) throw DimensionError("dynamic adjacency must be B x N x N, got " + to_string(adjacency.shape()));
  return graph_propagate(h, adjacency, theta, cfg);
}

}  // namespace sdgf
