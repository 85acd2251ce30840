#pragma once

// Naive nested-loop reference implementations, written independently of the
// library kernels. Layouts follow the library: row-major, B x C x L for
// convolutions, B x D x N for node features, B x L x N for series.

#include <cmath>
#include <vector>

#include "sdgf/tensor.hpp"

namespace sdgf::oracle {

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor c(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i * k + t] * b[t * m + j];
      c[i * m + j] = s;
    }
  return c;
}

/// Softmax of each row of an R x C matrix.
inline Tensor softmax_rows(const Tensor& x) {
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double mx = x[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(x[i * c + j] - mx);
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = std::exp(x[i * c + j] - mx) / z;
  }
  return y;
}

/// Zero-padded "same" dilated cross-correlation.
inline Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t d) {
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2), O = w.dim(0), k = w.dim(2);
  const long pad = static_cast<long>(d * (k - 1) / 2);
  Tensor y(Shape{B, O, L});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t t = 0; t < L; ++t) {
        double s = bias ? (*bias)[o] : 0.0;
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t j = 0; j < k; ++j) {
            const long src = static_cast<long>(t) + static_cast<long>(j * d) - pad;
            if (src < 0 || src >= static_cast<long>(L)) continue;
            s += w[(o * C + c) * k + j] * x[(b * C + c) * L + static_cast<std::size_t>(src)];
          }
        y[(b * O + o) * L + t] = s;
      }
  return y;
}

/// Layer norm over axis 1 of B x C x L.
inline Tensor layer_norm_channels(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  Tensor y(x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t) {
      double mu = 0.0;
      for (std::size_t c = 0; c < C; ++c) mu += x[(b * C + c) * L + t];
      mu /= static_cast<double>(C);
      double var = 0.0;
      for (std::size_t c = 0; c < C; ++c) var += std::pow(x[(b * C + c) * L + t] - mu, 2);
      var /= static_cast<double>(C);
      for (std::size_t c = 0; c < C; ++c)
        y[(b * C + c) * L + t] = (x[(b * C + c) * L + t] - mu) / std::sqrt(var + eps) * gain[c] + bias[c];
    }
  return y;
}

/// Circular moving average with `taps` at spacing `d`: y[t] = sum_j h[j] x[t - j d].
inline std::vector<double> circular_smooth(const std::vector<double>& x, const std::vector<double>& taps, std::size_t d) {
  const long L = static_cast<long>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (long t = 0; t < L; ++t)
    for (std::size_t j = 0; j < taps.size(); ++j) {
      long s = (t - static_cast<long>(j * d)) % L;
      if (s < 0) s += L;
      y[static_cast<std::size_t>(t)] += taps[j] * x[static_cast<std::size_t>(s)];
    }
  return y;
}

/// Detail components fine to coarse, then the approximation, for one series.
inline std::vector<std::vector<double>> atrous(const std::vector<double>& x, const std::vector<double>& taps,
                                               std::size_t levels) {
  std::vector<std::vector<double>> out;
  std::vector<double> prev = x;
  for (std::size_t l = 1; l <= levels; ++l) {
    auto next = circular_smooth(prev, taps, std::size_t{1} << (l - 1));
    std::vector<double> detail(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) detail[t] = prev[t] - next[t];
    out.push_back(detail);
    prev = next;
  }
  out.push_back(prev);
  return out;
}

/// Batch-averaged Pearson correlation of B x L x N.
inline Tensor pcc(const Tensor& x, double eps) {
  const std::size_t B = x.dim(0), L = x.dim(1), N = x.dim(2);
  Tensor r(Shape{N, N});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) {
        double mi = 0.0, mj = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
          mi += x[(b * L + t) * N + i];
          mj += x[(b * L + t) * N + j];
        }
        mi /= static_cast<double>(L);
        mj /= static_cast<double>(L);
        double cov = 0.0, vi = 0.0, vj = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
          const double a = x[(b * L + t) * N + i] - mi;
          const double c = x[(b * L + t) * N + j] - mj;
          cov += a * c;
          vi += a * a;
          vj += c * c;
        }
        const double n = static_cast<double>(L);
        r[i * N + j] += (cov / n) / (std::sqrt(vi / n) * std::sqrt(vj / n) + eps) / static_cast<double>(B);
      }
  return r;
}

inline Tensor pearson_adjacency(const Tensor& x, double eps) {
  Tensor r = pcc(x, eps);
  for (auto& v : r.data()) v = std::max(v, 0.0);
  return softmax_rows(r);
}

/// softmax_rows(tanh(x^T W1) tanh(x^T W2)^T) for each batch item of B x L x N.
inline Tensor dynamic_adjacency(const Tensor& x, const Tensor& w1, const Tensor& w2) {
  const std::size_t B = x.dim(0), L = x.dim(1), N = x.dim(2), E = w1.dim(1);
  Tensor out(Shape{B, N, N});
  for (std::size_t b = 0; b < B; ++b) {
    Tensor e1(Shape{N, E}), e2(Shape{N, E});
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t e = 0; e < E; ++e) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
          s1 += x[(b * L + t) * N + n] * w1[t * E + e];
          s2 += x[(b * L + t) * N + n] * w2[t * E + e];
        }
        e1[n * E + e] = std::tanh(s1);
        e2[n * E + e] = std::tanh(s2);
      }
    Tensor scores(Shape{N, N});
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t e = 0; e < E; ++e) scores[i * N + j] += e1[i * E + e] * e2[j * E + e];
    const Tensor a = softmax_rows(scores);
    for (std::size_t i = 0; i < N * N; ++i) out[b * N * N + i] = a[i];
  }
  return out;
}

/// Mix-hop propagation of B x D x N features. `adjacency` is N x N or
/// B x N x N. Hop k: H_k = alpha H_0 + (1 - alpha) A H_{k-1}; output sum_k Theta_k H_k.
inline Tensor propagate(const Tensor& h, const Tensor& adjacency, const std::vector<Tensor>& theta, double alpha,
                        bool literal = false) {
  const std::size_t B = h.dim(0), D = h.dim(1), N = h.dim(2);
  const bool shared = adjacency.rank() == 2;
  Tensor out(h.shape());
  for (std::size_t b = 0; b < B; ++b) {
    auto A = [&](std::size_t i, std::size_t j) { return adjacency[(shared ? 0 : b * N * N) + i * N + j]; };
    std::vector<double> h0(D * N), hk(D * N);
    for (std::size_t i = 0; i < D * N; ++i) h0[i] = hk[i] = h[b * D * N + i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      if (k > 0 || literal) {
        const std::vector<double>& src = literal ? h0 : hk;
        std::vector<double> next(D * N);
        for (std::size_t d = 0; d < D; ++d)
          for (std::size_t n = 0; n < N; ++n) {
            double agg = 0.0;
            for (std::size_t m = 0; m < N; ++m) agg += A(n, m) * src[d * N + m];
            next[d * N + n] = alpha * h0[d * N + n] + (1.0 - alpha) * agg;
          }
        hk = next;
      }
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t n = 0; n < N; ++n) {
          double s = 0.0;
          for (std::size_t e = 0; e < D; ++e) s += theta[k][d * D + e] * hk[e * N + n];
          out[(b * D + d) * N + n] += s;
        }
      if (literal) hk = h0;
    }
  }
  return out;
}

struct FusionOracle {
  Tensor weights;  ///< B x M
  Tensor output;   ///< B x D x N
};

inline FusionOracle fuse(const std::vector<Tensor>& branches, const Tensor& q, const Tensor& wk) {
  const std::size_t M = branches.size(), B = branches[0].dim(0), D = branches[0].dim(1), N = branches[0].dim(2);
  FusionOracle r{Tensor(Shape{B, M}), Tensor(Shape{B, D, N})};
  for (std::size_t b = 0; b < B; ++b) {
    Tensor logits(Shape{1, M});
    for (std::size_t i = 0; i < M; ++i) {
      std::vector<double> pooled(D, 0.0);
      for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t n = 0; n < N; ++n) pooled[d] += branches[i][(b * D + d) * N + n];
        pooled[d] /= static_cast<double>(N);
      }
      double s = 0.0;
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t e = 0; e < D; ++e) s += q[d] * wk[d * D + e] * pooled[e];
      logits[i] = s;
    }
    const Tensor a = softmax_rows(logits);
    for (std::size_t i = 0; i < M; ++i) r.weights[b * M + i] = a[i];
    for (std::size_t e = 0; e < D * N; ++e)
      for (std::size_t i = 0; i < M; ++i) r.output[b * D * N + e] += a[i] * branches[i][b * D * N + e];
  }
  return r;
}

struct InceptionWeights {
  std::vector<std::size_t> kernels, dilations;
  std::vector<Tensor> branch_w, branch_b;
  Tensor merge_w, merge_b, res_w, res_b, gain, bias;
};

inline Tensor inception_pre_norm(const Tensor& h, const InceptionWeights& w) {
  const std::size_t B = h.dim(0), L = h.dim(2);
  std::vector<Tensor> outs;
  std::size_t total = 0;
  for (std::size_t i = 0; i < w.kernels.size(); ++i) {
    outs.push_back(conv1d(h, w.branch_w[i], &w.branch_b[i], w.dilations[i]));
    total += outs.back().dim(1);
  }
  Tensor cat(Shape{B, total, L});
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t c0 = 0;
    for (const auto& o : outs) {
      const std::size_t C = o.dim(1);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < L; ++t) cat[(b * total + c0 + c) * L + t] = o[(b * C + c) * L + t];
      c0 += C;
    }
  }
  Tensor merged = conv1d(cat, w.merge_w, &w.merge_b, 1);
  const Tensor res = conv1d(h, w.res_w, &w.res_b, 1);
  for (std::size_t i = 0; i < merged.size(); ++i) merged[i] += res[i];
  return merged;
}

inline Tensor inception(const Tensor& h, const InceptionWeights& w, double eps = 1e-5) {
  return layer_norm_channels(inception_pre_norm(h, w), w.gain, w.bias, eps);
}

}  // namespace sdgf::oracle
