#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sdgf/autodiff.hpp"

namespace sdgf {

/// Sum in ascending order, so the result does not depend on input order.
/// Sorts `values` in place.
double sorted_sum(std::vector<double>& values);

/// Wraps a tensor as a graph constant.
Var constant(Tensor value);

// Broadcasting element-wise arithmetic (numpy rules).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// Throws NumericError if any divisor element is exactly zero.
Var div(const Var& a, const Var& b);

Var scale(const Var& x, double factor);
Var add_scalar(const Var& x, double value);
Var neg(const Var& x);
Var square(const Var& x);
/// relu'(0) is taken as 0.
Var relu(const Var& x);
Var tanh(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator*(double s, const Var& x) { return scale(x, s); }

/// Matrix product over the last two axes; leading axes broadcast.
Var matmul(const Var& a, const Var& b);

Var permute(const Var& x, const std::vector<std::size_t>& order);
/// Swaps two axes.
Var transpose(const Var& x, std::size_t axis0, std::size_t axis1);
Var reshape(const Var& x, Shape shape);

/// Max-subtracted softmax along `axis`. The normalizer is an order-independent
/// sum, so permuting entries along `axis` permutes the output exactly.
Var softmax(const Var& x, std::size_t axis);

Var sum(const Var& x, std::size_t axis, bool keepdim = false);
Var mean(const Var& x, std::size_t axis, bool keepdim = false);
Var sum_all(const Var& x);
Var mean_all(const Var& x);

Var concat(const std::vector<Var>& parts, std::size_t axis);
/// Stacks equally shaped tensors along a new axis.
Var stack(const std::vector<Var>& parts, std::size_t axis);

/// Dilated cross-correlation with zero "same" padding.
///   x: B x C x L, kernel: C_out x C x k (k odd), bias: C_out.
/// out[b,o,t] = bias[o] + sum_{c,j} kernel[o,c,j] * x[b,c,t + j*d - d*(k-1)/2]
Var conv1d(const Var& x, const Var& kernel, const std::optional<Var>& bias, std::size_t dilation);

/// Normalizes along `axis` with population variance, then applies
/// gain/bias (both shaped [x.dim(axis)]).
Var layer_norm(const Var& x, std::size_t axis, const Var& gain, const Var& bias, double eps = 1e-5);

enum class Boundary { circular, symmetric };

/// Fixed linear filter along `axis`:
///   y[t] = sum_j taps[j] * x[wrap(t - j*dilation)]
/// where `wrap` is periodic (circular) or half-sample mirror (symmetric).
Var dilated_filter(const Var& x, std::span<const double> taps, std::size_t dilation, std::size_t axis,
                   Boundary boundary = Boundary::circular);

}  // namespace sdgf
