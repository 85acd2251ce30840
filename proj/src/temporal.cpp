#include "sdgf/temporal.hpp"

#include "sdgf/errors.hpp"

namespace sdgf {

Var inception_pre_norm(const Var& h, const InceptionBlock& block) {
  if (h.rank() != 3) throw DimensionError("inception block expects B x C x L, got " + to_string(h.shape()));
  if (block.branches.empty()) throw ConfigError("inception block has no branches");
  std::vector<Var> outputs;
  outputs.reserve(block.branches.size());
  for (const auto& br : block.branches) outputs.push_back(conv1d(h, br.weight, br.bias, br.dilation));
  const Var merged = conv1d(concat(outputs, 1), block.merge_weight, block.merge_bias, 1);
  const Var residual = conv1d(h, block.residual_weight, block.residual_bias, 1);
  return add(merged, residual);
}

Var inception_forward(const Var& h, const InceptionBlock& block, double norm_eps) {
  return layer_norm(inception_pre_norm(h, block), 1, block.norm_gain, block.norm_bias, norm_eps);
}

}  // namespace sdgf
