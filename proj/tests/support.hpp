#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "sdgf/ops.hpp"
#include "sdgf/parameter.hpp"
#include "sdgf/tensor.hpp"

namespace sdgf::test {

/// Seeded generator for random test inputs.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double real(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  std::size_t integer(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  Tensor uniform(Shape shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = real(lo, hi);
    return t;
  }

  Tensor normal(Shape shape, double sigma = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = sigma * normal();
    return t;
  }

  /// Nonnegative N x N matrix with rows summing to 1.
  Tensor row_stochastic(std::size_t n) {
    Tensor a = uniform({n, n}, 0.05, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a[i * n + j];
      for (std::size_t j = 0; j < n; ++j) a[i * n + j] /= s;
    }
    return a;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is ~0 from dividing finite-difference rounding noise by ~0.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t entries = 0;
};

/// Compares backward() against central differences for every entry of
/// every tensor in `inputs`. `loss` must rebuild the graph on each call.
inline GradCheck check_gradients(const std::function<Var()>& loss, std::vector<Var> inputs, double h = 1e-5) {
  for (auto& v : inputs) v.zero_grad();
  const Var l = loss();
  backward(l);
  std::vector<Tensor> analytic;
  for (const auto& v : inputs) analytic.push_back(v.grad());
  GradCheck out;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    Tensor& w = inputs[p].mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double keep = w[i];
      double fp = 0.0;
      double fm = 0.0;
      {
        NoGradGuard guard;
        w[i] = keep + h;
        fp = loss().value().item();
        w[i] = keep - h;
        fm = loss().value().item();
      }
      w[i] = keep;
      const double numeric = (fp - fm) / (2.0 * h);
      out.max_rel = std::max(out.max_rel, relative_error(analytic[p][i], numeric));
      ++out.entries;
    }
  }
  return out;
}

inline std::vector<Var> trainable_vars(const ParameterStore& store) {
  std::vector<Var> vars;
  for (const auto& p : store.all()) {
    if (p.trainable) vars.push_back(p.var);
  }
  return vars;
}

/// Fixed random projection used to turn a tensor output into a scalar loss.
inline Var weighted_sum(const Var& y, std::uint64_t seed = 99) {
  Gen g(seed);
  return sum_all(mul(y, constant(g.uniform(y.shape()))));
}

}  // namespace sdgf::test
