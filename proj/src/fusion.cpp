#include "sdgf/fusion.hpp"

#include "sdgf/errors.hpp"

namespace sdgf {

namespace {

void check_branches(std::span<const Var> branches) {
  if (branches.empty()) throw DimensionError("fusion needs at least one branch");
  const auto& ref = branches[0].shape();
  if (ref.size() != 3) throw DimensionError("fusion branches must be B x D x N, got " + to_string(ref));
  for (std::size_t i = 1; i < branches.size(); ++i) {
    if (branches[i].shape() != ref) {
      throw DimensionError("fusion branch " + std::to_string(i) + " has shape " + to_string(branches[i].shape()) +
                           ", expected " + to_string(ref));
    }
  }
}

}  // namespace

Var weighted_branch_sum(const Var& stacked, const Var& weights) {
  const auto& s = stacked.shape();
  if (s.size() < 2 || weights.shape() != Shape{s[0], s[1]}) {
    throw DimensionError("weighted_branch_sum: weights " + to_string(weights.shape()) + " do not match " + to_string(s));
  }
  const std::size_t B = s[0];
  const std::size_t M = s[1];
  const std::size_t inner = stacked.value().size() / (B * M);
  Shape out_shape(s.begin() + 2, s.end());
  out_shape.insert(out_shape.begin(), B);

  Tensor out(out_shape);
  const auto& x = stacked.value();
  const auto& w = weights.value();
  std::vector<double> terms(M);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t e = 0; e < inner; ++e) {
      for (std::size_t i = 0; i < M; ++i) terms[i] = w[b * M + i] * x[(b * M + i) * inner + e];
      out[b * inner + e] = sorted_sum(terms);
    }
  }
  return make_result(std::move(out), "weighted_branch_sum", {stacked, weights}, [B, M, inner](Node& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    const auto& g = self.grad;
    Tensor* gx = px.requires_grad ? &px.grad_buffer() : nullptr;
    Tensor* gw = pw.requires_grad ? &pw.grad_buffer() : nullptr;
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < M; ++i) {
        const double wi = pw.value[b * M + i];
        double acc = 0.0;
        for (std::size_t e = 0; e < inner; ++e) {
          const std::size_t idx = (b * M + i) * inner + e;
          if (gx) (*gx)[idx] += g[b * inner + e] * wi;
          acc += g[b * inner + e] * px.value[idx];
        }
        if (gw) (*gw)[b * M + i] += acc;
      }
    }
  });
}

FusionResult fuse(std::span<const Var> branches, const FusionLayer& layer) {
  check_branches(branches);
  const std::size_t B = branches[0].dim(0);
  const std::size_t D = branches[0].dim(1);
  if (layer.query.shape() != Shape{D} || layer.key.shape() != Shape{D, D}) {
    throw DimensionError("fusion parameters do not match channel width " + std::to_string(D));
  }
  const Var stacked = stack(std::vector<Var>(branches.begin(), branches.end()), 1);  // B x M x D x N
  const Var pooled = mean(stacked, 3);                                                 // B x M x D
  const Var keys = matmul(pooled, transpose(layer.key, 0, 1));                          // rows are W_k h_i
  const Var logits = matmul(keys, reshape(layer.query, Shape{D, 1}));                   // B x M x 1
  const Var weights = reshape(softmax(logits, 1), Shape{B, branches.size()});
  return FusionResult{weighted_branch_sum(stacked, weights), weights};
}

FusionResult fuse(const Var& h_static, std::span<const Var> h_dynamic, const FusionLayer& layer) {
  std::vector<Var> all{h_static};
  all.insert(all.end(), h_dynamic.begin(), h_dynamic.end());
  return fuse(all, layer);
}

FusionResult mean_fuse(std::span<const Var> branches) {
  check_branches(branches);
  const std::size_t B = branches[0].dim(0);
  const Var stacked = stack(std::vector<Var>(branches.begin(), branches.end()), 1);
  const Var weights = constant(Tensor(Shape{B, branches.size()}, 1.0 / static_cast<double>(branches.size())));
  return FusionResult{weighted_branch_sum(stacked, weights), weights};
}

}  // namespace sdgf
