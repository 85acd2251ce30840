#include "sdgf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdgf/errors.hpp"

namespace sdgf {

namespace {

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  const std::size_t r = std::max(a.size(), b.size());
  Broadcast plan;
  plan.out.assign(r, 1);
  plan.stride_a.assign(r, 0);
  plan.stride_b.assign(r, 0);
  const auto sa = strides_of(a);
  const auto sb = strides_of(b);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ia = i + a.size() >= r ? i + a.size() - r : SIZE_MAX;
    const std::size_t ib = i + b.size() >= r ? i + b.size() - r : SIZE_MAX;
    const std::size_t da = ia == SIZE_MAX ? 1 : a[ia];
    const std::size_t db = ib == SIZE_MAX ? 1 : b[ib];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    plan.out[i] = std::max(da, db);
    if (da != 1) plan.stride_a[i] = sa[ia];
    if (db != 1) plan.stride_b[i] = sb[ib];
  }
  return plan;
}

template <class F>
void for_each_broadcast(const Broadcast& plan, F&& f) {
  const std::size_t n = numel(plan.out);
  const std::size_t r = plan.out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0;
  std::size_t ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, oa, ob);
    for (std::size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      oa += plan.stride_a[ax];
      ob += plan.stride_b[ax];
      if (idx[ax] < plan.out[ax]) break;
      oa -= plan.stride_a[ax] * plan.out[ax];
      ob -= plan.stride_b[ax] * plan.out[ax];
      idx[ax] = 0;
    }
  }
}

// Binary op with derivative callbacks da(a, b) and db(a, b).
template <class Fwd, class Da, class Db>
Var binary(const Var& a, const Var& b, const char* op, Fwd fwd, Da da, Db db) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() == bv.shape()) {
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    return make_result(std::move(out), op, {a, b}, [da, db](Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      const auto& g = self.grad;
      if (pa.requires_grad) {
        auto& ga = pa.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(pa.value[i], pb.value[i]);
      }
      if (pb.requires_grad) {
        auto& gb = pb.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(pa.value[i], pb.value[i]);
      }
    });
  }
  auto plan = plan_broadcast(av.shape(), bv.shape(), op);
  Tensor out(plan.out);
  for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = fwd(av[ia], bv[ib]); });
  return make_result(std::move(out), op, {a, b}, [plan, da, db](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const auto& g = self.grad;
    Tensor* ga = pa.requires_grad ? &pa.grad_buffer() : nullptr;
    Tensor* gb = pb.requires_grad ? &pb.grad_buffer() : nullptr;
    for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      const double x = pa.value[ia];
      const double y = pb.value[ib];
      if (ga) (*ga)[ia] += g[i] * da(x, y);
      if (gb) (*gb)[ib] += g[i] * db(x, y);
    });
  });
}

template <class Fwd, class Deriv>
Var unary(const Var& x, const char* op, Fwd fwd, Deriv deriv) {
  const auto& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return make_result(std::move(out), op, {x}, [deriv](Node& self) {
    auto& p = *self.parents[0];
    auto& gp = p.grad_buffer();
    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i] * deriv(p.value[i], self.value[i]);
  });
}

void check_axis(const Var& x, std::size_t axis, const char* op) {
  if (axis >= x.rank()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                         to_string(x.shape()));
  }
}

// Splits a shape around `axis` into (outer, n, inner).
struct AxisView {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisView view_around(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

Var constant(Tensor value) { return Var(std::move(value), false); }

Var add(const Var& a, const Var& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  for (double v : b.value().data()) {
    if (v == 0.0) throw NumericError("div: division by zero");
  }
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var scale(const Var& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var add_scalar(const Var& x, double value) {
  return unary(
      x, "add_scalar", [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Var neg(const Var& x) { return scale(x, -1.0); }

Var square(const Var& x) {
  return unary(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var relu(const Var& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var matmul(const Var& a, const Var& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + to_string(as) + " and " + to_string(bs));
  }
  const std::size_t m = as[as.size() - 2];
  const std::size_t k = as.back();
  const std::size_t k2 = bs[bs.size() - 2];
  const std::size_t n = bs.back();
  if (k != k2) throw DimensionError("matmul: inner dimensions differ for " + to_string(as) + " and " + to_string(bs));

  const Shape batch_a(as.begin(), as.end() - 2);
  const Shape batch_b(bs.begin(), bs.end() - 2);
  auto plan = plan_broadcast(batch_a, batch_b, "matmul");
  Shape out_shape = plan.out;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(out_shape);

  const auto M = static_cast<Eigen::Index>(m);
  const auto K = static_cast<Eigen::Index>(k);
  const auto N = static_cast<Eigen::Index>(n);
  const double* ad = a.value().data().data();
  const double* bd = b.value().data().data();
  double* od = out.data().data();
  for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    ConstMatrixMap am(ad + ia * m * k, M, K);
    ConstMatrixMap bm(bd + ib * k * n, K, N);
    MatrixMap(od + i * m * n, M, N).noalias() = am * bm;
  });

  return make_result(std::move(out), "matmul", {a, b}, [plan, m, k, n](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const auto M = static_cast<Eigen::Index>(m);
    const auto K = static_cast<Eigen::Index>(k);
    const auto N = static_cast<Eigen::Index>(n);
    const double* gd = self.grad.data().data();
    const double* ad = pa.value.data().data();
    const double* bd = pb.value.data().data();
    double* gad = pa.requires_grad ? pa.grad_buffer().data().data() : nullptr;
    double* gbd = pb.requires_grad ? pb.grad_buffer().data().data() : nullptr;
    for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      ConstMatrixMap g(gd + i * m * n, M, N);
      if (gad) MatrixMap(gad + ia * m * k, M, K).noalias() += g * ConstMatrixMap(bd + ib * k * n, K, N).transpose();
      if (gbd) MatrixMap(gbd + ib * k * n, K, N).noalias() += ConstMatrixMap(ad + ia * m * k, M, K).transpose() * g;
    });
  });
}

Var permute(const Var& x, const std::vector<std::size_t>& order) {
  const auto& s = x.shape();
  if (order.size() != s.size()) throw DimensionError("permute: order rank does not match " + to_string(s));
  std::vector<bool> seen(s.size(), false);
  for (auto ax : order) {
    if (ax >= s.size() || seen[ax]) throw DimensionError("permute: invalid axis order for " + to_string(s));
    seen[ax] = true;
  }
  Shape out_shape(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out_shape[i] = s[order[i]];
  const auto in_strides = strides_of(s);
  // Source strides laid out in output axis order; reuse the broadcast walker.
  Broadcast plan;
  plan.out = out_shape;
  plan.stride_a.resize(s.size());
  plan.stride_b.assign(s.size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) plan.stride_a[i] = in_strides[order[i]];

  Tensor out(out_shape);
  const auto& xv = x.value();
  for_each_broadcast(plan, [&](std::size_t i, std::size_t src, std::size_t) { out[i] = xv[src]; });
  return make_result(std::move(out), "permute", {x}, [plan](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for_each_broadcast(plan, [&](std::size_t i, std::size_t src, std::size_t) { gp[src] += self.grad[i]; });
  });
}

Var transpose(const Var& x, std::size_t axis0, std::size_t axis1) {
  check_axis(x, axis0, "transpose");
  check_axis(x, axis1, "transpose");
  std::vector<std::size_t> order(x.rank());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::swap(order[axis0], order[axis1]);
  return permute(x, order);
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), "reshape", {x}, [](Node& self) {
    auto& p = *self.parents[0];
    p.accumulate(self.grad.reshaped(p.value.shape()));
  });
}

Var softmax(const Var& x, std::size_t axis) {
  check_axis(x, axis, "softmax");
  const auto v = view_around(x.shape(), axis);
  const auto& xv = x.value();
  Tensor out(x.shape());
  std::vector<double> exps;
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.n * v.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < v.n; ++j) mx = std::max(mx, xv[base + j * v.inner]);
      exps.resize(v.n);
      for (std::size_t j = 0; j < v.n; ++j) {
        const double e = std::exp(xv[base + j * v.inner] - mx);
        out[base + j * v.inner] = e;
        exps[j] = e;
      }
      const double total = sorted_sum(exps);
      for (std::size_t j = 0; j < v.n; ++j) out[base + j * v.inner] /= total;
    }
  }
  return make_result(std::move(out), "softmax", {x}, [v](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t base = o * v.n * v.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < v.n; ++j) dot += g[base + j * v.inner] * y[base + j * v.inner];
        for (std::size_t j = 0; j < v.n; ++j) {
          const std::size_t idx = base + j * v.inner;
          gp[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

namespace {

Var reduce_axis(const Var& x, std::size_t axis, bool keepdim, bool average) {
  check_axis(x, axis, average ? "mean" : "sum");
  const auto v = view_around(x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  const double factor = average ? 1.0 / static_cast<double>(v.n) : 1.0;
  const auto& xv = x.value();
  Tensor out(out_shape);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t j = 0; j < v.n; ++j) {
      const std::size_t src = (o * v.n + j) * v.inner;
      const std::size_t dst = o * v.inner;
      for (std::size_t in = 0; in < v.inner; ++in) out[dst + in] += xv[src + in];
    }
  }
  if (average) {
    for (auto& e : out.data()) e *= factor;
  }
  return make_result(std::move(out), average ? "mean" : "sum", {x}, [v, factor](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t j = 0; j < v.n; ++j) {
        const std::size_t dst = (o * v.n + j) * v.inner;
        const std::size_t src = o * v.inner;
        for (std::size_t in = 0; in < v.inner; ++in) gp[dst + in] += self.grad[src + in] * factor;
      }
    }
  });
}

}  // namespace

Var sum(const Var& x, std::size_t axis, bool keepdim) { return reduce_axis(x, axis, keepdim, false); }
Var mean(const Var& x, std::size_t axis, bool keepdim) { return reduce_axis(x, axis, keepdim, true); }

Var sum_all(const Var& x) { return sum(reshape(x, Shape{x.value().size()}), 0); }
Var mean_all(const Var& x) { return mean(reshape(x, Shape{x.value().size()}), 0); }

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  check_axis(parts[0], axis, "concat");
  Shape out_shape = parts[0].shape();
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    Shape s = parts[p].shape();
    if (s.size() != out_shape.size()) throw DimensionError("concat: rank mismatch at input " + std::to_string(p));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != out_shape[i]) {
        throw DimensionError("concat: input " + std::to_string(p) + " has shape " + to_string(s) +
                             ", incompatible with " + to_string(parts[0].shape()));
      }
    }
    out_shape[axis] += s[axis];
    widths.push_back(s[axis]);
  }
  const auto v = view_around(out_shape, axis);
  Tensor out(out_shape);
  std::size_t start = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& pv = parts[p].value();
    const std::size_t chunk = widths[p] * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o) {
      std::copy_n(pv.data().begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.data().begin() + static_cast<std::ptrdiff_t>((o * v.n + start) * v.inner));
    }
    start += widths[p];
  }
  return make_result(std::move(out), "concat", parts, [v, widths](Node& self) {
    std::size_t start = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      auto& parent = *self.parents[p];
      const std::size_t chunk = widths[p] * v.inner;
      if (parent.requires_grad) {
        auto& gp = parent.grad_buffer();
        for (std::size_t o = 0; o < v.outer; ++o) {
          const std::size_t src = (o * v.n + start) * v.inner;
          for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += self.grad[src + i];
        }
      }
      start += widths[p];
    }
  });
}

Var stack(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  if (axis > parts[0].rank()) throw DimensionError("stack: axis out of range");
  std::vector<Var> expanded;
  expanded.reserve(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].shape() != parts[0].shape()) {
      throw DimensionError("stack: input " + std::to_string(p) + " has shape " + to_string(parts[p].shape()) +
                           ", expected " + to_string(parts[0].shape()));
    }
    Shape s = parts[p].shape();
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(axis), 1);
    expanded.push_back(reshape(parts[p], s));
  }
  return concat(expanded, axis);
}

Var conv1d(const Var& x, const Var& kernel, const std::optional<Var>& bias, std::size_t dilation) {
  const auto& xs = x.shape();
  const auto& ks = kernel.shape();
  if (xs.size() != 3 || ks.size() != 3) {
    throw DimensionError("conv1d expects x B x C x L and kernel C_out x C x k, got " + to_string(xs) + " and " +
                         to_string(ks));
  }
  if (ks[1] != xs[1]) throw DimensionError("conv1d: kernel " + to_string(ks) + " does not match input " + to_string(xs));
  if (ks[2] % 2 == 0) throw ConfigError("conv1d: even kernel size " + std::to_string(ks[2]) + " cannot use same padding");
  if (dilation == 0) throw ConfigError("conv1d: dilation must be positive");
  if (bias && bias->shape() != Shape{ks[0]}) throw DimensionError("conv1d: bias must have shape [C_out]");

  const std::size_t B = xs[0], C = xs[1], L = xs[2], O = ks[0], K = ks[2];
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(dilation * (K - 1) / 2);
  const std::size_t CK = C * K;

  // im2col per batch item: cols[c*K + j, t] = x[b, c, t + j*d - pad]
  auto build_cols = [=](const double* xb, RowMatrix& cols) {
    cols.setZero(static_cast<Eigen::Index>(CK), static_cast<Eigen::Index>(L));
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < K; ++j) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j * dilation) - pad;
        for (std::size_t t = 0; t < L; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + shift;
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(L)) {
            cols(static_cast<Eigen::Index>(c * K + j), static_cast<Eigen::Index>(t)) = xb[c * L + static_cast<std::size_t>(src)];
          }
        }
      }
    }
  };

  Tensor out(Shape{B, O, L});
  ConstMatrixMap w(kernel.value().data().data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(CK));
  RowMatrix cols;
  for (std::size_t b = 0; b < B; ++b) {
    build_cols(x.value().data().data() + b * C * L, cols);
    MatrixMap ob(out.data().data() + b * O * L, static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(L));
    ob.noalias() = w * cols;
    if (bias) {
      for (std::size_t o = 0; o < O; ++o) ob.row(static_cast<Eigen::Index>(o)).array() += bias->value()[o];
    }
  }

  std::vector<Var> parents{x, kernel};
  if (bias) parents.push_back(*bias);
  return make_result(std::move(out), "conv1d", parents, [=](Node& self) {
    auto& px = *self.parents[0];
    auto& pk = *self.parents[1];
    Node* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
    ConstMatrixMap w(pk.value.data().data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(CK));
    RowMatrix cols;
    RowMatrix gcols;
    for (std::size_t b = 0; b < B; ++b) {
      ConstMatrixMap g(self.grad.data().data() + b * O * L, static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(L));
      if (pk.requires_grad) {
        build_cols(px.value.data().data() + b * C * L, cols);
        MatrixMap(pk.grad_buffer().data().data(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(CK)).noalias() +=
            g * cols.transpose();
      }
      if (pb && pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        for (std::size_t o = 0; o < O; ++o) gb[o] += g.row(static_cast<Eigen::Index>(o)).sum();
      }
      if (px.requires_grad) {
        gcols.noalias() = w.transpose() * g;
        double* gx = px.grad_buffer().data().data() + b * C * L;
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t j = 0; j < K; ++j) {
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j * dilation) - pad;
            for (std::size_t t = 0; t < L; ++t) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + shift;
              if (src >= 0 && src < static_cast<std::ptrdiff_t>(L)) {
                gx[c * L + static_cast<std::size_t>(src)] +=
                    gcols(static_cast<Eigen::Index>(c * K + j), static_cast<Eigen::Index>(t));
              }
            }
          }
        }
      }
    }
  });
}

Var layer_norm(const Var& x, std::size_t axis, const Var& gain, const Var& bias, double eps) {
  check_axis(x, axis, "layer_norm");
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const auto v = view_around(x.shape(), axis);
  if (gain.shape() != Shape{v.n} || bias.shape() != Shape{v.n}) {
    throw DimensionError("layer_norm: gain/bias must have shape [" + std::to_string(v.n) + "]");
  }
  const auto& xv = x.value();
  Tensor out(x.shape());
  Tensor xhat(x.shape());
  std::vector<double> inv_std(v.outer * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.n * v.inner + in;
      double mu = 0.0;
      for (std::size_t j = 0; j < v.n; ++j) mu += xv[base + j * v.inner];
      mu /= static_cast<double>(v.n);
      double var = 0.0;
      for (std::size_t j = 0; j < v.n; ++j) {
        const double d = xv[base + j * v.inner] - mu;
        var += d * d;
      }
      var /= static_cast<double>(v.n);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[o * v.inner + in] = is;
      for (std::size_t j = 0; j < v.n; ++j) {
        const std::size_t idx = base + j * v.inner;
        xhat[idx] = (xv[idx] - mu) * is;
        out[idx] = gain.value()[j] * xhat[idx] + bias.value()[j];
      }
    }
  }
  return make_result(std::move(out), "layer_norm", {x, gain, bias},
                     [v, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       auto& px = *self.parents[0];
                       auto& pg = *self.parents[1];
                       auto& pb = *self.parents[2];
                       const auto& g = self.grad;
                       const double inv_n = 1.0 / static_cast<double>(v.n);
                       Tensor* gx = px.requires_grad ? &px.grad_buffer() : nullptr;
                       Tensor* gg = pg.requires_grad ? &pg.grad_buffer() : nullptr;
                       Tensor* gb = pb.requires_grad ? &pb.grad_buffer() : nullptr;
                       for (std::size_t o = 0; o < v.outer; ++o) {
                         for (std::size_t in = 0; in < v.inner; ++in) {
                           const std::size_t base = o * v.n * v.inner + in;
                           double mean_gh = 0.0;
                           double mean_ghx = 0.0;
                           for (std::size_t j = 0; j < v.n; ++j) {
                             const std::size_t idx = base + j * v.inner;
                             const double gh = g[idx] * pg.value[j];
                             mean_gh += gh;
                             mean_ghx += gh * xhat[idx];
                             if (gg) (*gg)[j] += g[idx] * xhat[idx];
                             if (gb) (*gb)[j] += g[idx];
                           }
                           if (!gx) continue;
                           mean_gh *= inv_n;
                           mean_ghx *= inv_n;
                           const double is = inv_std[o * v.inner + in];
                           for (std::size_t j = 0; j < v.n; ++j) {
                             const std::size_t idx = base + j * v.inner;
                             const double gh = g[idx] * pg.value[j];
                             (*gx)[idx] += is * (gh - mean_gh - xhat[idx] * mean_ghx);
                           }
                         }
                       }
                     });
}

namespace {

std::size_t wrap_index(std::ptrdiff_t t, std::size_t n, Boundary boundary) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  if (boundary == Boundary::circular) {
    std::ptrdiff_t m = t % len;
    return static_cast<std::size_t>(m < 0 ? m + len : m);
  }
  const std::ptrdiff_t period = 2 * len;
  std::ptrdiff_t m = t % period;
  if (m < 0) m += period;
  if (m >= len) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

Var dilated_filter(const Var& x, std::span<const double> taps, std::size_t dilation, std::size_t axis,
                   Boundary boundary) {
  check_axis(x, axis, "dilated_filter");
  if (taps.empty()) throw ConfigError("dilated_filter: no taps");
  const auto v = view_around(x.shape(), axis);
  // index table: src[t * K + j] = wrap(t - j*d)
  const std::size_t K = taps.size();
  std::vector<std::size_t> src(v.n * K);
  for (std::size_t t = 0; t < v.n; ++t) {
    for (std::size_t j = 0; j < K; ++j) {
      src[t * K + j] =
          wrap_index(static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(j * dilation), v.n, boundary);
    }
  }
  std::vector<double> h(taps.begin(), taps.end());
  const auto& xv = x.value();
  Tensor out(x.shape());
  for (std::size_t o = 0; o < v.outer; ++o) {
    const std::size_t base = o * v.n * v.inner;
    for (std::size_t t = 0; t < v.n; ++t) {
      double* dst = out.data().data() + base + t * v.inner;
      for (std::size_t j = 0; j < K; ++j) {
        const double* s = xv.data().data() + base + src[t * K + j] * v.inner;
        for (std::size_t in = 0; in < v.inner; ++in) dst[in] += h[j] * s[in];
      }
    }
  }
  return make_result(std::move(out), "dilated_filter", {x}, [v, K, src = std::move(src), h = std::move(h)](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o) {
      const std::size_t base = o * v.n * v.inner;
      for (std::size_t t = 0; t < v.n; ++t) {
        const double* g = self.grad.data().data() + base + t * v.inner;
        for (std::size_t j = 0; j < K; ++j) {
          double* d = gp.data().data() + base + src[t * K + j] * v.inner;
          for (std::size_t in = 0; in < v.inner; ++in) d[in] += h[j] * g[in];
        }
      }
    }
  });
}

}  // namespace sdgf
