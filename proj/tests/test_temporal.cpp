#include <doctest.h>

#include "oracles.hpp"
#include "sdgf/temporal.hpp"
#include "support.hpp"

using namespace sdgf;
using sdgf::test::Gen;

namespace {

struct Block {
  oracle::InceptionWeights w;
  InceptionBlock block;
};

Block make_block(Gen& g, std::size_t C, std::size_t Cb, bool requires_grad = false) {
  Block b;
  auto var = [&](const Tensor& t) { return Var(t, requires_grad); };
  for (const auto& kd : kInceptionBranches) {
    b.w.kernels.push_back(kd[0]);
    b.w.dilations.push_back(kd[1]);
    b.w.branch_w.push_back(g.uniform({Cb, C, kd[0]}));
    b.w.branch_b.push_back(g.uniform({Cb}));
    b.block.branches.push_back({kd[0], kd[1], var(b.w.branch_w.back()), var(b.w.branch_b.back())});
  }
  b.w.merge_w = g.uniform({C, 4 * Cb, 1});
  b.w.merge_b = g.uniform({C});
  b.w.res_w = g.uniform({C, C, 1});
  b.w.res_b = g.uniform({C});
  b.w.gain = g.uniform({C}, 0.5, 1.5);
  b.w.bias = g.uniform({C});
  b.block.merge_weight = var(b.w.merge_w);
  b.block.merge_bias = var(b.w.merge_b);
  b.block.residual_weight = var(b.w.res_w);
  b.block.residual_bias = var(b.w.res_b);
  b.block.norm_gain = var(b.w.gain);
  b.block.norm_bias = var(b.w.bias);
  return b;
}

/// Zeroes every weight except a unit-identity residual and an affine (1, 0) norm.
void residual_only(Block& b, std::size_t C) {
  for (auto& br : b.block.branches) {
    br.weight.mutable_value().fill(0.0);
    br.bias.mutable_value().fill(0.0);
  }
  b.block.merge_weight.mutable_value().fill(0.0);
  b.block.merge_bias.mutable_value().fill(0.0);
  Tensor& r = b.block.residual_weight.mutable_value();
  r.fill(0.0);
  for (std::size_t c = 0; c < C; ++c) r[c * C + c] = 1.0;
  b.block.residual_bias.mutable_value().fill(0.0);
  b.block.norm_gain.mutable_value().fill(1.0);
  b.block.norm_bias.mutable_value().fill(0.0);
}

}  // namespace

TEST_SUITE("inception") {
  TEST_CASE("residual-only block is layer norm of the input") {
    Gen g(51);
    Block b = make_block(g, 4, 2);
    residual_only(b, 4);
    const Tensor h = g.normal({2, 4, 6});
    const Tensor y = inception_forward(constant(h), b.block).value();
    CHECK(max_abs_diff(y, oracle::layer_norm_channels(h, Tensor(Shape{4}, 1.0), Tensor(Shape{4}), 1e-5)) < 1e-14);
  }

  TEST_CASE("zero input with zero biases gives zero output") {
    Gen g(52);
    Block b = make_block(g, 3, 2);
    for (auto& br : b.block.branches) br.bias.mutable_value().fill(0.0);
    b.block.merge_bias.mutable_value().fill(0.0);
    b.block.residual_bias.mutable_value().fill(0.0);
    b.block.norm_bias.mutable_value().fill(0.0);
    const Tensor y = inception_forward(constant(Tensor(Shape{2, 3, 5})), b.block).value();
    CHECK(y.max_abs() == 0.0);
  }

  TEST_CASE("one channel on a ramp matches the nested-loop oracle") {
    Gen g(53);
    const Block b = make_block(g, 1, 1);
    const Tensor ramp(Shape{1, 1, 6}, {0, 1, 2, 3, 4, 5});
    CHECK(max_abs_diff(inception_pre_norm(constant(ramp), b.block).value(), oracle::inception_pre_norm(ramp, b.w)) < 1e-12);
    CHECK(max_abs_diff(inception_forward(constant(ramp), b.block).value(), oracle::inception(ramp, b.w)) < 1e-12);
  }

  TEST_CASE("random blocks match the oracle and preserve shape") {
    Gen g(54);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t B = g.integer(1, 3), C = g.integer(1, 5), L = g.integer(1, 9), Cb = g.integer(1, 3);
      const Block b = make_block(g, C, Cb);
      const Tensor h = g.normal({B, C, L});
      const Tensor y = inception_forward(constant(h), b.block).value();
      CHECK(y.shape() == h.shape());
      CHECK(max_abs_diff(y, oracle::inception(h, b.w)) < 1e-12);
    }
  }

  TEST_CASE("impulse response stays within four positions") {
    Gen g(55);
    Block b = make_block(g, 1, 1);
    // Identity-like branches: every tap 1, no biases, unit merge, no residual.
    for (auto& br : b.block.branches) {
      br.weight.mutable_value().fill(1.0);
      br.bias.mutable_value().fill(0.0);
    }
    b.block.merge_weight.mutable_value().fill(1.0);
    b.block.merge_bias.mutable_value().fill(0.0);
    b.block.residual_weight.mutable_value().fill(0.0);
    b.block.residual_bias.mutable_value().fill(0.0);
    const std::size_t L = 21, p = 10;
    Tensor impulse(Shape{1, 1, L});
    impulse[p] = 1.0;
    const Tensor y = inception_pre_norm(constant(impulse), b.block).value();
    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t dist = t > p ? t - p : p - t;
      if (dist > 4) CHECK(y[t] == 0.0);
    }
    CHECK(y[p - 4] != 0.0);
    CHECK(y[p + 4] != 0.0);
  }

  TEST_CASE("gradient check of the whole block") {
    Gen g(56);
    const Block b = make_block(g, 3, 2, true);
    const Var h(g.normal({2, 3, 7}), true);
    std::vector<Var> inputs{h, b.block.merge_weight, b.block.merge_bias, b.block.residual_weight,
                            b.block.residual_bias, b.block.norm_gain, b.block.norm_bias};
    for (const auto& br : b.block.branches) {
      inputs.push_back(br.weight);
      inputs.push_back(br.bias);
    }
    const auto res = test::check_gradients([&] { return test::weighted_sum(inception_forward(h, b.block)); }, inputs);
    CHECK(res.max_rel < 1e-4);
  }
}
