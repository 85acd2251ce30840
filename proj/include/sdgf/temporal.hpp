#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "sdgf/ops.hpp"

namespace sdgf {

struct ConvBranch {
  std::size_t kernel = 3;
  std::size_t dilation = 1;
  Var weight;  ///< C_b x C x kernel
  Var bias;    ///< C_b
};

/// (kernel, dilation) of the parallel branches.
inline constexpr std::array<std::array<std::size_t, 2>, 4> kInceptionBranches{{{3, 1}, {3, 2}, {5, 1}, {5, 2}}};

/// Parallel dilated convolutions merged by a 1x1 convolution, plus a 1x1
/// residual projection of the input, followed by layer norm over channels.
struct InceptionBlock {
  std::vector<ConvBranch> branches;
  Var merge_weight;     ///< C x (branches * C_b) x 1
  Var merge_bias;       ///< C
  Var residual_weight;  ///< C x C x 1
  Var residual_bias;    ///< C
  Var norm_gain;        ///< C
  Var norm_bias;        ///< C
};

/// h: B x C x L, convolved along the last axis with "same" padding.
Var inception_forward(const Var& h, const InceptionBlock& block, double norm_eps = 1e-5);

/// Output before the layer norm (merge + residual).
Var inception_pre_norm(const Var& h, const InceptionBlock& block);

}  // namespace sdgf
