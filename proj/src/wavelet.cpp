#include "sdgf/wavelet.hpp"

#include <cmath>

#include "sdgf/errors.hpp"

namespace sdgf {

namespace {

WaveletFilter from_lowpass(std::string name, std::vector<double> lowpass) {
  const std::size_t k = lowpass.size();
  std::vector<double> highpass(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double sign = (i % 2 == 0) ? -1.0 : 1.0;
    highpass[i] = sign * lowpass[k - 1 - i];
  }
  return WaveletFilter{std::move(name), std::move(lowpass), std::move(highpass)};
}

}  // namespace

WaveletFilter WaveletFilter::haar() {
  const double s = 1.0 / std::sqrt(2.0);
  return from_lowpass("haar", {s, s});
}

WaveletFilter WaveletFilter::db4() {
  return from_lowpass("db4", {-0.010597401784997278, 0.032883011666982945, 0.030841381835986965,
                              -0.18703481171888114, -0.02798376941698385, 0.6308807679295904,
                              0.7148465705525415, 0.23037781330885523});
}

WaveletFilter WaveletFilter::from_name(const std::string& name) {
  if (name == "haar") return haar();
  if (name == "db4") return db4();
  throw ConfigError("unknown wavelet family '" + name + "' (expected haar or db4)");
}

std::vector<double> WaveletFilter::smoothing_taps() const {
  double total = 0.0;
  for (double h : lowpass) total += h;
  std::vector<double> taps(lowpass);
  for (double& h : taps) h /= total;
  return taps;
}

std::size_t max_levels(std::size_t length, const WaveletFilter& filter) {
  if (length < filter.support()) {
    throw ConfigError("series length " + std::to_string(length) + " is shorter than the " + filter.name +
                      " support " + std::to_string(filter.support()));
  }
  std::size_t level = 1;
  while (filter.support() * (std::size_t{1} << level) <= length) ++level;
  return level;
}

std::vector<Var> decompose(const Var& x, const WaveletFilter& filter, std::size_t levels, Boundary boundary,
                           std::size_t axis) {
  if (levels == 0) throw ConfigError("wavelet levels must be >= 1");
  if (axis >= x.rank()) throw DimensionError("decompose: axis out of range for " + to_string(x.shape()));
  const std::size_t admissible = max_levels(x.dim(axis), filter);
  if (levels > admissible) {
    throw ConfigError("wavelet levels " + std::to_string(levels) + " too deep for length " +
                      std::to_string(x.dim(axis)) + "; maximum admissible level is " + std::to_string(admissible));
  }
  const auto taps = filter.smoothing_taps();
  std::vector<Var> components;
  components.reserve(levels + 1);
  Var smooth = x;
  for (std::size_t level = 1; level <= levels; ++level) {
    Var next = dilated_filter(smooth, taps, std::size_t{1} << (level - 1), axis, boundary);
    components.push_back(sub(smooth, next));
    smooth = next;
  }
  components.push_back(smooth);
  return components;
}

Decomposition decompose(const Tensor& x, const WaveletFilter& filter, std::size_t levels, Boundary boundary) {
  if (x.rank() != 3) throw DimensionError("decompose expects B x L x N, got " + to_string(x.shape()));
  NoGradGuard no_grad;
  Decomposition out;
  out.levels = levels;
  for (auto& c : decompose(constant(x), filter, levels, boundary, 1)) out.components.push_back(c.value());
  return out;
}

Subbands analyze(const Tensor& x, const WaveletFilter& filter, std::size_t dilation, std::size_t axis) {
  NoGradGuard no_grad;
  const Var xv = constant(x);
  return Subbands{dilated_filter(xv, filter.lowpass, dilation, axis).value(),
                  dilated_filter(xv, filter.highpass, dilation, axis).value()};
}

Tensor synthesize(const Subbands& bands, const WaveletFilter& filter, std::size_t dilation, std::size_t axis) {
  const auto& shape = bands.approx.shape();
  if (bands.detail.shape() != shape) throw DimensionError("synthesize: subband shapes differ");
  if (axis >= shape.size()) throw DimensionError("synthesize: axis out of range");
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  Tensor out(shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t j = 0; j < filter.support(); ++j) {
        const std::size_t src = (t + j * dilation) % n;
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t a = (o * n + src) * inner + in;
          out[(o * n + t) * inner + in] +=
              0.5 * (filter.lowpass[j] * bands.approx[a] + filter.highpass[j] * bands.detail[a]);
        }
      }
    }
  }
  return out;
}

}  // namespace sdgf
