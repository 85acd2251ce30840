#include "sdgf/model.hpp"

#include <cmath>
#include <random>

#include "sdgf/errors.hpp"

namespace sdgf {

Var revin_normalize(const Var& x, const RevinLayer& layer, RevinState& state) {
  if (x.rank() != 3) throw DimensionError("revin expects B x L x N, got " + to_string(x.shape()));
  const std::size_t B = x.dim(0), L = x.dim(1), N = x.dim(2);
  if (layer.gamma.shape() != Shape{N}) throw DimensionError("revin affine does not match " + std::to_string(N) + " variables");
  state.mean = Tensor(Shape{B, 1, N});
  state.stdev = Tensor(Shape{B, 1, N});
  const auto& xv = x.value();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t n = 0; n < N; ++n) {
      double mu = 0.0;
      for (std::size_t t = 0; t < L; ++t) mu += xv[(b * L + t) * N + n];
      mu /= static_cast<double>(L);
      double var = 0.0;
      for (std::size_t t = 0; t < L; ++t) {
        const double d = xv[(b * L + t) * N + n] - mu;
        var += d * d;
      }
      var /= static_cast<double>(L);
      state.mean[b * N + n] = mu;
      state.stdev[b * N + n] = std::sqrt(var + layer.eps);
    }
  }
  state.ready = true;
  const Var centered = div(sub(x, constant(state.mean)), constant(state.stdev));
  return add(mul(centered, layer.gamma), layer.beta);
}

Var revin_denormalize(const Var& y, const RevinLayer& layer, const RevinState& state) {
  if (!state.ready) throw StateError("revin_denormalize called before revin_normalize");
  const Var unscaled = div(sub(y, layer.beta), layer.gamma);
  return add(mul(unscaled, constant(state.stdev)), constant(state.mean));
}

Ablation parse_ablation(const std::string& name) {
  if (name == "none") return Ablation::none;
  if (name == "gsl") return Ablation::gsl;
  if (name == "gf") return Ablation::gf;
  if (name == "tfl") return Ablation::tfl;
  throw ConfigError("unknown ablation mode '" + name + "' (valid modes: gsl, gf, tfl)");
}

std::string to_string(Ablation mode) {
  switch (mode) {
    case Ablation::gsl: return "gsl";
    case Ablation::gf: return "gf";
    case Ablation::tfl: return "tfl";
    default: return "none";
  }
}

ConvAxis parse_conv_axis(const std::string& name) {
  if (name == "nodes") return ConvAxis::nodes;
  if (name == "channels") return ConvAxis::channels;
  throw ConfigError("unknown temporal.conv_axis '" + name + "' (expected nodes or channels)");
}

std::string to_string(ConvAxis axis) { return axis == ConvAxis::nodes ? "nodes" : "channels"; }

Boundary parse_boundary(const std::string& name) {
  if (name == "circular") return Boundary::circular;
  if (name == "symmetric") return Boundary::symmetric;
  throw ConfigError("unknown wavelet.boundary '" + name + "' (expected circular or symmetric)");
}

std::string to_string(Boundary boundary) { return boundary == Boundary::circular ? "circular" : "symmetric"; }

void ModelConfig::validate() const {
  if (lookback < 2) throw ConfigError("model.lookback must be >= 2");
  if (horizon == 0) throw ConfigError("model.horizon must be >= 1");
  if (variables == 0) throw ConfigError("model.variables must be >= 1");
  if (d_model == 0) throw ConfigError("model.d_model must be >= 1");
  if (embed_dim == 0) throw ConfigError("gcn.embed_dim must be >= 1");
  if (wavelet_levels == 0) throw ConfigError("wavelet.levels must be >= 1");
  gcn.validate();
  const auto filter = WaveletFilter::from_name(wavelet);
  const std::size_t admissible = max_levels(lookback, filter);
  if (wavelet_levels > admissible) {
    throw ConfigError("wavelet.levels " + std::to_string(wavelet_levels) + " too deep for lookback " +
                      std::to_string(lookback) + "; maximum admissible level is " + std::to_string(admissible));
  }
  if (!(revin_eps > 0.0)) throw ConfigError("model.revin_eps must be positive");
  if (!(pcc_eps > 0.0)) throw ConfigError("model.pcc_eps must be positive");
}

namespace {

std::size_t conv_channels(const ModelConfig& c) { return c.conv_axis == ConvAxis::nodes ? c.d_model : c.variables; }

std::size_t branch_width(const ModelConfig& c) {
  return c.branch_width ? c.branch_width : (conv_channels(c) + 1) / 2;
}

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor uniform(Shape shape, double bound) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data()) v = dist(rng_);
    return t;
  }

  Tensor fan_in(Shape shape, std::size_t fan) { return uniform(std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan))); }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::size_t SdgfModel::expected_parameter_count(const ModelConfig& c) {
  const std::size_t L = c.lookback, T = c.horizon, N = c.variables, D = c.d_model;
  const std::size_t K = c.gcn.depth, S = c.scale_count(), de = c.embed_dim;
  const std::size_t C = conv_channels(c), Cb = branch_width(c);
  std::size_t count = 2 * N;                          // revin
  count += L * D + D;                                 // input projection
  count += (K + 1) * D * D;                           // static hop maps
  count += (c.share_embeddings ? 1 : S) * 2 * L * de; // embeddings
  count += S * (K + 1) * D * D;                       // dynamic hop maps
  count += D + D * D;                                 // fusion
  std::size_t block = 0;
  for (const auto& kd : kInceptionBranches) block += Cb * C * kd[0] + Cb;
  block += C * kInceptionBranches.size() * Cb + C;    // merge
  block += C * C + C;                                 // residual
  block += 2 * C;                                     // norm
  count += c.temporal_blocks * block;
  count += D * 2 * D + 2 * D + 2 * D * T + T;         // head
  return count;
}

SdgfModel::SdgfModel(ModelConfig config) : config_(std::move(config)), filter_(WaveletFilter::haar()) {
  config_.validate();
  filter_ = WaveletFilter::from_name(config_.wavelet);
  build();
}

SdgfModel::SdgfModel(const SdgfModel& other) : config_(other.config_), filter_(other.filter_) {
  build();
  params_.copy_values_from(other.params_);
  static_adjacency_ = other.static_adjacency_;
}

SdgfModel& SdgfModel::operator=(const SdgfModel& other) {
  if (this != &other) {
    SdgfModel copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void SdgfModel::build() {
  params_ = ParameterStore();
  const auto& c = config_;
  const std::size_t L = c.lookback, T = c.horizon, N = c.variables, D = c.d_model;
  Initializer init(c.seed);

  revin_.gamma = params_.add("revin.gamma", Tensor(Shape{N}, 1.0));
  revin_.beta = params_.add("revin.beta", Tensor(Shape{N}, 0.0));
  revin_.eps = c.revin_eps;

  proj_weight_ = params_.add("input_proj.weight", init.fan_in({L, D}, L));
  proj_bias_ = params_.add("input_proj.bias", init.fan_in({D}, L));

  static_theta_.clear();
  for (std::size_t k = 0; k <= c.gcn.depth; ++k) {
    static_theta_.push_back(params_.add("static_gcn.theta." + std::to_string(k), init.fan_in({D, D}, D)));
  }

  dynamic_layers_.clear();
  if (c.share_embeddings) {
    DynamicGraphLayer shared{params_.add("dynamic.shared.w1", init.fan_in({L, c.embed_dim}, L)),
                             params_.add("dynamic.shared.w2", init.fan_in({L, c.embed_dim}, L))};
    dynamic_layers_.assign(c.scale_count(), shared);
  } else {
    for (std::size_t s = 0; s < c.scale_count(); ++s) {
      const std::string prefix = "dynamic." + std::to_string(s);
      dynamic_layers_.push_back(DynamicGraphLayer{params_.add(prefix + ".w1", init.fan_in({L, c.embed_dim}, L)),
                                                  params_.add(prefix + ".w2", init.fan_in({L, c.embed_dim}, L))});
    }
  }
  dynamic_theta_.assign(c.scale_count(), {});
  for (std::size_t s = 0; s < c.scale_count(); ++s) {
    for (std::size_t k = 0; k <= c.gcn.depth; ++k) {
      dynamic_theta_[s].push_back(params_.add("dynamic_gcn." + std::to_string(s) + ".theta." + std::to_string(k),
                                              init.fan_in({D, D}, D)));
    }
  }

  fusion_.query = params_.add("fusion.query", init.uniform({D}, 0.1));
  Tensor key = init.uniform({D, D}, 0.01);
  for (std::size_t i = 0; i < D; ++i) key[i * D + i] += 1.0;
  fusion_.key = params_.add("fusion.key", std::move(key));

  const std::size_t C = conv_channels(c);
  const std::size_t Cb = branch_width(c);
  blocks_.clear();
  for (std::size_t b = 0; b < c.temporal_blocks; ++b) {
    const std::string prefix = "temporal." + std::to_string(b);
    InceptionBlock block;
    for (const auto& kd : kInceptionBranches) {
      const std::string name = prefix + ".branch.k" + std::to_string(kd[0]) + "d" + std::to_string(kd[1]);
      ConvBranch br;
      br.kernel = kd[0];
      br.dilation = kd[1];
      br.weight = params_.add(name + ".weight", init.fan_in({Cb, C, kd[0]}, C * kd[0]));
      br.bias = params_.add(name + ".bias", init.fan_in({Cb}, C * kd[0]));
      block.branches.push_back(br);
    }
    const std::size_t merged = Cb * kInceptionBranches.size();
    block.merge_weight = params_.add(prefix + ".merge.weight", init.fan_in({C, merged, 1}, merged));
    block.merge_bias = params_.add(prefix + ".merge.bias", init.fan_in({C}, merged));
    block.residual_weight = params_.add(prefix + ".residual.weight", init.fan_in({C, C, 1}, C));
    block.residual_bias = params_.add(prefix + ".residual.bias", init.fan_in({C}, C));
    block.norm_gain = params_.add(prefix + ".norm.gain", Tensor(Shape{C}, 1.0));
    block.norm_bias = params_.add(prefix + ".norm.bias", Tensor(Shape{C}, 0.0));
    blocks_.push_back(std::move(block));
  }

  head_w1_ = params_.add("head.fc1.weight", init.fan_in({D, 2 * D}, D));
  head_b1_ = params_.add("head.fc1.bias", init.fan_in({2 * D}, D));
  head_w2_ = params_.add("head.fc2.weight", init.fan_in({2 * D, T}, 2 * D));
  head_b2_ = params_.add("head.fc2.bias", init.fan_in({T}, 2 * D));
}

void SdgfModel::set_static_adjacency(Tensor adjacency) {
  const std::size_t N = config_.variables;
  if (adjacency.shape() != Shape{N, N}) {
    throw DimensionError("static adjacency must be " + std::to_string(N) + " x " + std::to_string(N) + ", got " +
                         to_string(adjacency.shape()));
  }
  static_adjacency_ = std::move(adjacency);
}

Var SdgfModel::project(const Var& x) const {
  return transpose(add(matmul(transpose(x, 1, 2), proj_weight_), proj_bias_), 1, 2);
}

Var SdgfModel::head(const Var& h) const {
  const Var rows = transpose(h, 1, 2);  // B x N x D
  const Var hidden = tanh(add(matmul(rows, head_w1_), head_b1_));
  return transpose(add(matmul(hidden, head_w2_), head_b2_), 1, 2);
}

Var SdgfModel::forward(const Tensor& x) const { return forward_trace(x).prediction; }

ForwardTrace SdgfModel::forward_trace(const Tensor& x) const {
  const auto& c = config_;
  if (x.rank() != 3 || x.dim(1) != c.lookback || x.dim(2) != c.variables) {
    throw DimensionError("model expects B x " + std::to_string(c.lookback) + " x " + std::to_string(c.variables) +
                         " input, got " + to_string(x.shape()));
  }
  ForwardTrace trace;
  RevinState stats;
  const Var normalized = revin_normalize(constant(x), revin_, stats);
  const bool no_graphs = c.ablation == Ablation::gsl;
  const Tensor identity = Tensor::identity(c.variables);

  if (no_graphs) {
    trace.static_adjacency = identity;
  } else if (c.static_per_batch) {
    trace.static_adjacency = pearson_adjacency(normalized.value(), c.pcc_eps);
  } else {
    if (!static_adjacency_) throw StateError("static adjacency not set; compute it from the training split first");
    trace.static_adjacency = *static_adjacency_;
  }

  std::vector<Var> branches;
  branches.push_back(static_graph_conv(project(normalized), trace.static_adjacency, static_theta_, c.gcn));

  const auto components = decompose(normalized, filter_, c.wavelet_levels, c.boundary, 1);
  for (std::size_t s = 0; s < components.size(); ++s) {
    const Var features = project(components[s]);
    if (no_graphs) {
      branches.push_back(static_graph_conv(features, identity, dynamic_theta_[s], c.gcn));
      trace.dynamic_adjacency.push_back(identity);
    } else {
      const Var adjacency = dynamic_adjacency(components[s], dynamic_layers_[s]);
      branches.push_back(dynamic_graph_conv(features, adjacency, dynamic_theta_[s], c.gcn));
      trace.dynamic_adjacency.push_back(adjacency.value());
    }
  }

  const FusionResult fused = c.ablation == Ablation::gf ? mean_fuse(branches) : fuse(branches, fusion_);
  trace.fusion_weights = fused.weights.value();
  trace.fused = fused.output;

  Var h = fused.output;
  if (c.ablation != Ablation::tfl) {
    const bool along_channels = c.conv_axis == ConvAxis::channels;
    if (along_channels) h = transpose(h, 1, 2);
    for (const auto& block : blocks_) h = inception_forward(h, block);
    if (along_channels) h = transpose(h, 1, 2);
  }

  trace.prediction = revin_denormalize(head(h), revin_, stats);
  return trace;
}

std::size_t SdgfModel::effective_parameter_count() const {
  std::size_t count = 0;
  for (const auto& p : params_.all()) {
    const auto& n = p.name;
    if (config_.ablation == Ablation::gsl && n.rfind("dynamic.", 0) == 0) continue;
    if (config_.ablation == Ablation::gf && n.rfind("fusion.", 0) == 0) continue;
    if (config_.ablation == Ablation::tfl && n.rfind("temporal.", 0) == 0) continue;
    count += p.var.value().size();
  }
  return count;
}

SdgfModel ablate(const SdgfModel& model, Ablation mode) {
  SdgfModel copy(model);
  copy.set_ablation(mode);
  return copy;
}

}  // namespace sdgf
