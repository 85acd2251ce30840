#include "sdgf/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>
#include "sdgf/errors.hpp"

namespace sdgf {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": prediction " + to_string(a.shape()) + " vs target " +
                         to_string(b.shape()));
  }
}

}  // namespace

double mse(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

double mae(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

Var mse_loss(const Var& pred, const Var& target) {
  check_same_shape(pred.value(), target.value(), "mse_loss");
  return mean_all(square(sub(pred, target)));
}

void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state) {
  for (const auto& p : params.all()) {
    if (p.trainable && !grads.count(p.name)) throw ConfigError("missing gradient for parameter '" + p.name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& p : params.all()) {
    if (!p.trainable) continue;
    const Tensor& g = grads.at(p.name);
    Tensor& w = p.var.mutable_value();
    if (g.shape() != w.shape()) throw DimensionError("gradient shape mismatch for '" + p.name + "'");
    auto [m_it, m_new] = state.first_moment.try_emplace(p.name, Tensor(w.shape()));
    auto [v_it, v_new] = state.second_moment.try_emplace(p.name, Tensor(w.shape()));
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double clip_grad_norm(GradientMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (double v : g.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& [name, g] : grads) {
      for (double& v : g.data()) v *= factor;
    }
  }
  return norm;
}

Metrics evaluate(const SdgfModel& model, const WindowDataset& data, Split split, std::size_t batch,
                 EvalCapture* capture) {
  const auto& starts = data.starts(split);
  if (starts.empty()) throw DataError("the " + to_string(split) + " split has no windows");
  if (batch == 0) throw ConfigError("evaluation batch must be >= 1");
  NoGradGuard no_grad;
  const std::size_t T = data.horizon();
  const std::size_t N = data.variables();
  double sq = 0.0;
  double ab = 0.0;
  std::size_t count = 0;
  for (std::size_t begin = 0; begin < starts.size(); begin += batch) {
    const std::vector<std::size_t> idx(starts.begin() + static_cast<std::ptrdiff_t>(begin),
                                       starts.begin() + static_cast<std::ptrdiff_t>(std::min(begin + batch, starts.size())));
    const auto [x, y] = data.batch(idx);
    const ForwardTrace trace = model.forward_trace(x);
    const Tensor& pred = trace.prediction.value();
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - y[i];
      sq += d * d;
      ab += std::abs(d);
    }
    count += pred.size();
    if (!capture) continue;
    const std::size_t B = idx.size();
    const std::size_t branches = trace.fusion_weights.dim(1);
    for (std::size_t b = 0; b < B; ++b) {
      if (capture->predictions) {
        capture->window_starts.push_back(idx[b]);
        const auto off = static_cast<std::ptrdiff_t>(b * T * N);
        capture->predicted.emplace_back(Shape{T, N}, std::vector<double>(pred.data().begin() + off,
                                                                          pred.data().begin() + off + static_cast<std::ptrdiff_t>(T * N)));
        capture->actual.emplace_back(Shape{T, N}, std::vector<double>(y.data().begin() + off,
                                                                       y.data().begin() + off + static_cast<std::ptrdiff_t>(T * N)));
      }
      if (capture->attention) {
        const auto& w = trace.fusion_weights;
        capture->fusion_weights.emplace_back(w.data().begin() + static_cast<std::ptrdiff_t>(b * branches),
                                             w.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * branches));
      }
    }
    if (capture->graphs) {
      capture->static_adjacency = trace.static_adjacency;
      if (capture->mean_dynamic_adjacency.empty()) {
        capture->mean_dynamic_adjacency.assign(trace.dynamic_adjacency.size(), Tensor(Shape{N, N}));
      }
      const double share = 1.0 / static_cast<double>(starts.size());
      for (std::size_t s = 0; s < trace.dynamic_adjacency.size(); ++s) {
        const Tensor& a = trace.dynamic_adjacency[s];
        const std::size_t items = a.rank() == 3 ? a.dim(0) : 1;
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t src = items == 1 ? 0 : b;
          for (std::size_t e = 0; e < N * N; ++e) capture->mean_dynamic_adjacency[s][e] += share * a[src * N * N + e];
        }
      }
    }
  }
  return Metrics{sq / static_cast<double>(count), ab / static_cast<double>(count), count};
}

std::string TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["train_loss"] = train_loss;
  j["val_mse"] = val_mse;
  j["val_mae"] = val_mae;
  j["best_epoch"] = best_epoch;
  j["best_val_mse"] = best_val_mse;
  j["early_stopped"] = early_stopped;
  j["steps"] = steps;
  j["wall_seconds"] = wall_seconds;
  return j.dump(2);
}

void prepare_static_graph(SdgfModel& model, const WindowDataset& data) {
  if (model.config().static_per_batch) return;
  const auto& table = data.table();
  const std::size_t rows = data.bounds().train_end;
  if (rows < 2) throw DataError("training split too short to estimate the static graph");
  const std::size_t N = table.variables();
  Tensor train_rows(Shape{1, rows, N},
                    std::vector<double>(table.values.data().begin(),
                                        table.values.data().begin() + static_cast<std::ptrdiff_t>(rows * N)));
  model.set_static_adjacency(pearson_adjacency(train_rows, model.config().pcc_eps));
}

TrainReport train(SdgfModel& model, const WindowDataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (data.starts(Split::train).empty()) throw DataError("the train split has no windows");
  if (data.starts(Split::val).empty()) throw DataError("the val split has no windows");
  if (data.variables() != model.config().variables || data.lookback() != model.config().lookback ||
      data.horizon() != model.config().horizon) {
    throw DimensionError("dataset dimensions (L=" + std::to_string(data.lookback()) + ", T=" +
                         std::to_string(data.horizon()) + ", N=" + std::to_string(data.variables()) +
                         ") do not match the model");
  }
  const auto started = std::chrono::steady_clock::now();
  prepare_static_graph(model, data);

  TrainReport report;
  AdamState adam;
  adam.lr = cfg.lr;
  std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order = data.starts(Split::train);
  ParameterStore& params = model.parameters();
  std::vector<Tensor> best_values;
  auto snapshot = [&] {
    best_values.clear();
    for (const auto& p : params.all()) best_values.push_back(p.var.value());
  };
  snapshot();
  double best_mse = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(begin + cfg.batch, order.size())));
      const auto [x, y] = data.batch(idx);
      params.zero_grad();
      const Var loss = mse_loss(model.forward(x), constant(y));
      GradientMap grads = backward(loss, params);
      if (cfg.clip > 0.0) clip_grad_norm(grads, cfg.clip);
      adam_step(params, grads, adam);
      ++report.steps;
      loss_sum += loss.value().item() * static_cast<double>(idx.size());
      seen += idx.size();
    }
    params.zero_grad();
    const double train_loss = loss_sum / static_cast<double>(seen);
    const Metrics val = evaluate(model, data, Split::val, cfg.batch);
    report.train_loss.push_back(train_loss);
    report.val_mse.push_back(val.mse);
    report.val_mae.push_back(val.mae);
    if (on_epoch) on_epoch(epoch, train_loss, val);

    if (val.mse < best_mse) {
      best_mse = val.mse;
      report.best_epoch = epoch;
      since_best = 0;
      snapshot();
    } else if (++since_best >= cfg.patience) {
      report.early_stopped = true;
      break;
    }
  }

  auto& all = params.all();
  for (std::size_t i = 0; i < all.size(); ++i) all[i].var.mutable_value() = best_values[i];
  report.best_val_mse = best_mse;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace sdgf
