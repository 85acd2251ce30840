#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdgf/fusion.hpp"
#include "sdgf/graph.hpp"
#include "sdgf/parameter.hpp"
#include "sdgf/temporal.hpp"
#include "sdgf/wavelet.hpp"

namespace sdgf {

// ---------------------------------------------------------------------------
// Reversible instance normalization

struct RevinLayer {
  Var gamma;  ///< [N]
  Var beta;   ///< [N]
  double eps = 1e-5;
};

/// Per-instance statistics captured by `revin_normalize`.
struct RevinState {
  Tensor mean;   ///< B x 1 x N
  Tensor stdev;  ///< B x 1 x N, sqrt(population variance + eps)
  bool ready = false;
};

/// (x - mean) / stdev * gamma + beta, statistics over the time axis of B x L x N.
Var revin_normalize(const Var& x, const RevinLayer& layer, RevinState& state);

/// (y - beta) / gamma * stdev + mean. Throws StateError if `state` is not ready.
Var revin_denormalize(const Var& y, const RevinLayer& layer, const RevinState& state);

// ---------------------------------------------------------------------------

enum class Ablation { none, gsl, gf, tfl };
enum class ConvAxis { nodes, channels };

Ablation parse_ablation(const std::string& name);
std::string to_string(Ablation mode);
ConvAxis parse_conv_axis(const std::string& name);
std::string to_string(ConvAxis axis);
Boundary parse_boundary(const std::string& name);
std::string to_string(Boundary boundary);

struct ModelConfig {
  std::size_t lookback = 96;  ///< L
  std::size_t horizon = 96;   ///< T
  std::size_t variables = 7;  ///< N
  std::size_t d_model = 64;   ///< D

  std::string wavelet = "haar";
  std::size_t wavelet_levels = 3;
  Boundary boundary = Boundary::circular;

  GraphPropagationConfig gcn;
  std::size_t embed_dim = 16;
  bool share_embeddings = false;
  bool static_per_batch = false;

  std::size_t temporal_blocks = 1;
  std::size_t branch_width = 0;  ///< 0: ceil(channels / 2)
  ConvAxis conv_axis = ConvAxis::nodes;

  double revin_eps = 1e-5;
  double pcc_eps = 1e-9;
  std::uint64_t seed = 2024;
  Ablation ablation = Ablation::none;

  void validate() const;
  /// Number of wavelet components (details + approximation).
  std::size_t scale_count() const { return wavelet_levels + 1; }
  /// Static branch plus one branch per wavelet component.
  std::size_t branch_count() const { return scale_count() + 1; }
};

/// Inspection data captured during a forward pass.
struct ForwardTrace {
  Var prediction;                       ///< B x T x N
  Tensor fusion_weights;                ///< B x branches
  Tensor static_adjacency;              ///< N x N
  std::vector<Tensor> dynamic_adjacency;  ///< per scale, B x N x N
  Var fused;                            ///< B x D x N, before the temporal block
};

/// Static-dynamic graph fusion forecaster.
///
/// forward: RevIN -> { static PCC graph propagation | wavelet components ->
/// learned per-scale graphs -> propagation } -> attention fusion ->
/// inception block(s) -> per-variable MLP head -> RevIN inverse.
class SdgfModel {
 public:
  explicit SdgfModel(ModelConfig config);
  SdgfModel(const SdgfModel& other);
  SdgfModel& operator=(const SdgfModel& other);
  SdgfModel(SdgfModel&&) = default;
  SdgfModel& operator=(SdgfModel&&) = default;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }

  /// Frozen prior graph used when the config does not ask for per-batch PCC.
  void set_static_adjacency(Tensor adjacency);
  const std::optional<Tensor>& static_adjacency() const { return static_adjacency_; }

  Var forward(const Tensor& x) const;
  ForwardTrace forward_trace(const Tensor& x) const;

  /// Head applied to a B x D x N representation, in normalized units.
  Var head(const Var& h) const;
  /// Shared L -> D projection of a B x L x N input into B x D x N.
  Var project(const Var& x) const;

  /// Parameters that influence the output under the current ablation.
  std::size_t effective_parameter_count() const;

  /// Closed-form parameter count for `config`.
  static std::size_t expected_parameter_count(const ModelConfig& config);

  const RevinLayer& revin() const { return revin_; }
  const FusionLayer& fusion() const { return fusion_; }
  const std::vector<InceptionBlock>& temporal_blocks() const { return blocks_; }

  void set_ablation(Ablation mode) { config_.ablation = mode; }

 private:
  void build();

  ModelConfig config_;
  WaveletFilter filter_;
  ParameterStore params_;
  std::optional<Tensor> static_adjacency_;

  RevinLayer revin_;
  Var proj_weight_;
  Var proj_bias_;
  std::vector<Var> static_theta_;
  std::vector<DynamicGraphLayer> dynamic_layers_;
  std::vector<std::vector<Var>> dynamic_theta_;
  FusionLayer fusion_;
  std::vector<InceptionBlock> blocks_;
  Var head_w1_;
  Var head_b1_;
  Var head_w2_;
  Var head_b2_;
};

/// Copy of `model` with one component removed:
///   gsl - every adjacency replaced by the identity (no cross-series mixing)
///   gf  - attention fusion replaced by the unweighted branch mean
///   tfl - inception block(s) replaced by the identity
SdgfModel ablate(const SdgfModel& model, Ablation mode);

}  // namespace sdgf
