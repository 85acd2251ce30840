#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sdgf/ops.hpp"

namespace sdgf {

/// Orthonormal two-channel filter pair. `lowpass` sums to sqrt(2);
/// `highpass[k] = (-1)^(k+1) * lowpass[K-1-k]`.
struct WaveletFilter {
  std::string name;
  std::vector<double> lowpass;
  std::vector<double> highpass;

  static WaveletFilter haar();
  /// Daubechies, 4 vanishing moments (8 taps).
  static WaveletFilter db4();
  /// "haar" or "db4"; anything else is a ConfigError.
  static WaveletFilter from_name(const std::string& name);

  std::size_t support() const { return lowpass.size(); }

  /// Low-pass taps rescaled to unit DC gain, used by the additive
  /// multi-level decomposition.
  std::vector<double> smoothing_taps() const;
};

/// Additive multi-scale split: `components` holds `levels` detail bands
/// (finest first) followed by the final approximation. Every component has
/// the input's shape and the components sum to the input.
struct Decomposition {
  std::vector<Tensor> components;
  std::size_t levels = 0;

  const Tensor& approximation() const { return components.back(); }
  const Tensor& detail(std::size_t level) const { return components.at(level - 1); }
};

/// Largest level count such that support * 2^(level-1) <= length.
std::size_t max_levels(std::size_t length, const WaveletFilter& filter);

/// Undecimated (a trous) decomposition of `x` (B x L x N) along the time
/// axis. Level l smooths the previous approximation with the unit-gain
/// low-pass filter dilated by 2^(l-1); detail_l = smooth_{l-1} - smooth_l.
Decomposition decompose(const Tensor& x, const WaveletFilter& filter, std::size_t levels,
                        Boundary boundary = Boundary::circular);

/// Differentiable form of `decompose` along `axis`; returns levels + 1 components.
std::vector<Var> decompose(const Var& x, const WaveletFilter& filter, std::size_t levels,
                           Boundary boundary = Boundary::circular, std::size_t axis = 1);

/// One undecimated analysis stage with the orthonormal pair, circular boundary:
///   approx[t] = sum_j lowpass[j] x[t - j*d],  detail[t] = sum_j highpass[j] x[t - j*d].
struct Subbands {
  Tensor approx;
  Tensor detail;
};
Subbands analyze(const Tensor& x, const WaveletFilter& filter, std::size_t dilation, std::size_t axis);

/// Inverse of `analyze`: x[t] = 1/2 sum_j (lowpass[j] approx[t + j*d] + highpass[j] detail[t + j*d]).
Tensor synthesize(const Subbands& bands, const WaveletFilter& filter, std::size_t dilation, std::size_t axis);

}  // namespace sdgf
