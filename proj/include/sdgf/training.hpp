#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sdgf/config.hpp"
#include "sdgf/data.hpp"
#include "sdgf/model.hpp"

namespace sdgf {

double mse(const Tensor& pred, const Tensor& target);
double mae(const Tensor& pred, const Tensor& target);
/// Differentiable mean squared error.
Var mse_loss(const Var& pred, const Var& target);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

/// Bias-corrected Adam update of every trainable parameter. Throws
/// ConfigError naming any trainable parameter missing from `grads`.
void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state);

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
double clip_grad_norm(GradientMap& grads, double max_norm);

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;  ///< number of scalar predictions
};

/// Optional outputs collected by `evaluate`.
struct EvalCapture {
  bool predictions = false;
  bool attention = false;
  bool graphs = false;

  std::vector<std::size_t> window_starts;
  std::vector<Tensor> predicted;  ///< per window, T x N
  std::vector<Tensor> actual;     ///< per window, T x N
  std::vector<std::vector<double>> fusion_weights;  ///< per window
  Tensor static_adjacency;
  std::vector<Tensor> mean_dynamic_adjacency;  ///< per scale, N x N, averaged over windows
};

Metrics evaluate(const SdgfModel& model, const WindowDataset& data, Split split, std::size_t batch = 32,
                 EvalCapture* capture = nullptr);

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_mse;
  std::vector<double> val_mae;
  std::size_t best_epoch = 0;  ///< 1-based
  double best_val_mse = 0.0;
  bool early_stopped = false;
  std::size_t steps = 0;
  double wall_seconds = 0.0;

  std::string to_json() const;
};

/// Called after every epoch with (epoch, train loss, val metrics).
using EpochCallback = std::function<void(std::size_t, double, const Metrics&)>;

/// Freezes the static graph from the training rows (unless per-batch mode).
void prepare_static_graph(SdgfModel& model, const WindowDataset& data);

/// Mini-batch Adam on MSE of denormalized predictions, early stopping on
/// validation MSE. On return `model` holds the best-validation parameters.
TrainReport train(SdgfModel& model, const WindowDataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace sdgf
