#include <doctest.h>

#include <cmath>

#include "sdgf/errors.hpp"
#include "sdgf/training.hpp"
#include "support.hpp"

using namespace sdgf;
using sdgf::test::Gen;

namespace {

ModelConfig small_config(std::size_t n) {
  ModelConfig c;
  c.lookback = 24;
  c.horizon = 12;
  c.variables = n;
  c.d_model = 16;
  c.wavelet_levels = 2;
  c.gcn.depth = 1;
  c.embed_dim = 4;
  return c;
}

WindowDataset synthetic_windows(double noise, std::size_t rows = 600) {
  SynthSpec spec;
  spec.rows = rows;
  spec.noise = noise;
  return make_windows(std::make_shared<const SeriesTable>(synthesize(spec)), 24, 12);
}

/// MSE of predicting every target step with the last observed value.
double repeat_last_mse(const WindowDataset& w, Split split) {
  const auto [x, y] = w.batch(w.starts(split));
  const std::size_t B = x.dim(0), L = x.dim(1), T = y.dim(1), N = x.dim(2);
  Tensor pred(y.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t n = 0; n < N; ++n) pred[(b * T + t) * N + n] = x[(b * L + L - 1) * N + n];
  return mse(pred, y);
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("examples") {
    const Tensor a = Tensor::vector({1, -2, 3});
    CHECK(mse(a, a) == 0.0);
    CHECK(mae(a, a) == 0.0);
    CHECK(mse(Tensor::vector({0, 0}), Tensor::vector({1, 3})) == 5.0);
    CHECK(mae(Tensor::vector({0, 0}), Tensor::vector({1, 3})) == 2.0);
    CHECK_THROWS_AS(mse(Tensor::vector({0, 0}), Tensor::vector({1, 3, 4})), DimensionError);
    CHECK_THROWS_AS(mae(Tensor::vector({0, 0}), Tensor::vector({1, 3, 4})), DimensionError);
  }

  TEST_CASE("MSE is at least MAE squared") {
    Gen g(101);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = g.integer(1, 30);
      const Tensor p = g.normal({n}, g.real(0.01, 10.0)), t = g.normal({n});
      const double m = mae(p, t);
      CHECK(mse(p, t) >= m * m * (1.0 - 1e-12));
    }
  }

  TEST_CASE("differentiable loss agrees with the metric") {
    Gen g(102);
    const Tensor p = g.normal({3, 4}), t = g.normal({3, 4});
    CHECK(std::abs(mse_loss(constant(p), constant(t)).value().item() - mse(p, t)) < 1e-15);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("first step on w^2 with lr 0.1") {
    ParameterStore store;
    store.add("w", Tensor::scalar(1.0));
    AdamState st;
    st.lr = 0.1;
    adam_step(store, {{"w", Tensor::scalar(2.0)}}, st);
    CHECK(std::abs(store.get("w").var.value().item() - 0.9) < 1e-8);
    CHECK(st.step == 1);
  }

  TEST_CASE("zero gradients leave parameters unchanged") {
    ParameterStore store;
    store.add("w", Tensor::vector({1.5, -2.0}));
    AdamState st;
    for (int i = 0; i < 5; ++i) adam_step(store, {{"w", Tensor(Shape{2})}}, st);
    CHECK(max_abs_diff(store.get("w").var.value(), Tensor::vector({1.5, -2.0})) == 0.0);
  }

  TEST_CASE("descends (w - 3)^2") {
    ParameterStore store;
    const Var w = store.add("w", Tensor::scalar(0.0));
    AdamState st;
    st.lr = 0.1;
    for (int i = 0; i < 200; ++i) {
      const Var loss = square(add_scalar(w, -3.0));
      adam_step(store, backward(loss, store), st);
    }
    CHECK(std::abs(w.value().item() - 3.0) < 0.05);
  }

  TEST_CASE("missing gradient names the parameter") {
    ParameterStore store;
    store.add("a", Tensor::scalar(0.0));
    store.add("head.fc1.weight", Tensor::scalar(0.0));
    AdamState st;
    CHECK_THROWS_WITH_AS(adam_step(store, {{"a", Tensor::scalar(1.0)}}, st), doctest::Contains("head.fc1.weight"),
                         ConfigError);
  }

  TEST_CASE("gradient clipping rescales to the limit") {
    GradientMap g{{"a", Tensor::vector({3, 0})}, {"b", Tensor::vector({0, 4})}};
    CHECK(clip_grad_norm(g, 1.0) == 5.0);
    CHECK(std::abs(g["a"][0] - 0.6) < 1e-15);
    CHECK(std::abs(g["b"][1] - 0.8) < 1e-15);
    GradientMap small{{"a", Tensor::vector({0.3})}};
    clip_grad_norm(small, 1.0);
    CHECK(small["a"][0] == 0.3);
  }
}

TEST_SUITE("train") {
  TEST_CASE("beats a tenth of the repeat-last baseline on noise-free synthetic data") {
    const auto data = synthetic_windows(0.0);
    SdgfModel model(small_config(4));
    TrainConfig tc;
    tc.epochs = 15;
    const auto report = train(model, data, tc);
    const double baseline = repeat_last_mse(data, Split::val);
    CAPTURE(baseline);
    CAPTURE(report.best_val_mse);
    CHECK(report.best_val_mse < 0.1 * baseline);
    CHECK(evaluate(model, data, Split::val).mse == report.best_val_mse);
  }

  TEST_CASE("zero learning rate changes nothing") {
    const auto data = synthetic_windows(0.3, 300);
    SdgfModel model(small_config(4));
    const SdgfModel before(model);
    TrainConfig tc;
    tc.lr = 0.0;
    tc.epochs = 2;
    const auto report = train(model, data, tc);
    for (std::size_t i = 0; i < model.parameters().size(); ++i) {
      CHECK(max_abs_diff(model.parameters().all()[i].var.value(), before.parameters().all()[i].var.value()) == 0.0);
    }
    CHECK(report.val_mse[0] == report.val_mse[1]);
    CHECK(std::abs(report.train_loss[0] - report.train_loss[1]) < 1e-12);
  }

  TEST_CASE("one Adam step lowers the loss on the same batch") {
    Gen g(103);
    ModelConfig c = small_config(3);
    c.lookback = 8;
    c.horizon = 4;
    c.d_model = 8;
    SdgfModel model(c);
    const Tensor x = g.normal({4, 8, 3});
    const Tensor y = g.normal({4, 4, 3});
    model.set_static_adjacency(pearson_adjacency(x));
    AdamState st;
    const Var before = mse_loss(model.forward(x), constant(y));
    adam_step(model.parameters(), backward(before, model.parameters()), st);
    const double after = mse_loss(model.forward(x), constant(y)).value().item();
    CHECK(after < before.value().item());
  }

  TEST_CASE("same seed, bit-identical report") {
    const auto data = synthetic_windows(0.3, 300);
    TrainConfig tc;
    tc.epochs = 2;
    SdgfModel a(small_config(4)), b(small_config(4));
    const auto ra = train(a, data, tc);
    const auto rb = train(b, data, tc);
    CHECK(ra.train_loss == rb.train_loss);
    CHECK(ra.val_mse == rb.val_mse);
    CHECK(ra.val_mae == rb.val_mae);
  }

  TEST_CASE("best validation MSE bounds every later epoch within patience") {
    const auto data = synthetic_windows(0.3, 300);
    TrainConfig tc;
    tc.epochs = 6;
    tc.patience = 2;
    tc.lr = 5e-3;
    SdgfModel m(small_config(4));
    const auto r = train(m, data, tc);
    REQUIRE(r.best_epoch >= 1);
    for (std::size_t e = r.best_epoch; e <= r.val_mse.size(); ++e) CHECK(r.best_val_mse <= r.val_mse[e - 1]);
    if (r.early_stopped) CHECK(r.val_mse.size() - r.best_epoch == tc.patience);
  }

  TEST_CASE("empty splits are errors") {
    // 40 rows at L=24, T=12: the validation split cannot hold a full target.
    const auto data = synthetic_windows(0.3, 40);
    SdgfModel m(small_config(4));
    CHECK_THROWS_AS(train(m, data, TrainConfig{}), DataError);
  }

  TEST_CASE("report serializes to JSON") {
    TrainReport r;
    r.train_loss = {1.0, 0.5};
    r.best_epoch = 2;
    const std::string js = r.to_json();
    CHECK(js.find("\"train_loss\"") != std::string::npos);
    CHECK(js.find("\"early_stopped\": false") != std::string::npos);
  }
}
