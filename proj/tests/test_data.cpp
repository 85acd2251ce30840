#include <doctest.h>

#include <bit>
#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "sdgf/data.hpp"
#include "sdgf/errors.hpp"
#include "sdgf/graph.hpp"
#include "support.hpp"

using namespace sdgf;
using sdgf::test::Gen;

namespace {

SeriesTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in, "test.csv");
}

std::shared_ptr<const SeriesTable> ramp_table(std::size_t rows, std::size_t n = 1) {
  SeriesTable t;
  t.values = Tensor(Shape{rows, n});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) t.values[r * n + j] = static_cast<double>(r);
  for (std::size_t j = 0; j < n; ++j) t.names.push_back("v" + std::to_string(j));
  return std::make_shared<const SeriesTable>(std::move(t));
}

/// Pearson correlation of two equal-length vectors.
double corr(const std::vector<double>& a, const std::vector<double>& b) {
  Tensor x(Shape{1, a.size(), 2});
  for (std::size_t t = 0; t < a.size(); ++t) {
    x[2 * t] = a[t];
    x[2 * t + 1] = b[t];
  }
  return oracle::pcc(x, 0.0).at({0, 1});
}

std::vector<double> column(const SeriesTable& t, std::size_t j, std::size_t from, std::size_t to) {
  std::vector<double> v;
  for (std::size_t r = from; r < to; ++r) v.push_back(t.at(r, j));
  return v;
}

}  // namespace

TEST_SUITE("csv") {
  TEST_CASE("three rows, two variables") {
    const auto t = parse("date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n2020-01-03,5,6e-1\n");
    CHECK(t.rows() == 3);
    CHECK(t.variables() == 2);
    CHECK(t.names == std::vector<std::string>{"a", "b"});
    CHECK(t.at(2, 1) == 0.6);
    CHECK(t.timestamps.size() == 3);
  }

  TEST_CASE("no date column") {
    const auto t = parse("x,y\n1,2\n");
    CHECK(t.timestamps.empty());
    CHECK(t.variables() == 2);
  }

  TEST_CASE("blank cell names row and column") {
    CHECK_THROWS_WITH_AS(parse("date,HUFL,HULL\n2016-07-01 00:00:00,5.8,2.0\n2016-07-01 01:00:00,,2.1\n"),
                         doctest::Contains("row 2, column \"HUFL\""), DataError);
  }

  TEST_CASE("structural errors") {
    CHECK_THROWS_AS(parse(""), DataError);
    CHECK_THROWS_AS(parse("a,b\n"), DataError);
    CHECK_THROWS_WITH_AS(parse("a,b\n1,2\n3\n"), doctest::Contains("row 2"), DataError);
    CHECK_THROWS_WITH_AS(parse("a,b\n1,2\n3,x\n"), doctest::Contains("non-numeric"), DataError);
    CHECK_THROWS_WITH_AS(parse("date,a\n2,1\n1,2\n"), doctest::Contains("increasing"), DataError);
    CHECK_THROWS_WITH_AS(load_csv("/no/such/file.csv"), doctest::Contains("/no/such/file.csv"), DataError);
  }

  TEST_CASE("round trip is bit-exact") {
    Gen g(91);
    SeriesTable t;
    t.values = g.normal({50, 3}, 1e3);
    t.values[0] = 1.0 / 3.0;
    t.values[1] = -0.0;
    t.values[2] = 5e-310;
    t.names = {"a", "b", "c"};
    for (std::size_t r = 0; r < 50; ++r) t.timestamps.push_back("t" + std::to_string(1000 + r));
    std::ostringstream out;
    write_csv(out, t);
    const auto back = parse(out.str());
    REQUIRE(back.values.shape() == t.values.shape());
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      CHECK(std::bit_cast<std::uint64_t>(back.values[i]) == std::bit_cast<std::uint64_t>(t.values[i]));
    }
    CHECK(back.timestamps == t.timestamps);
    CHECK(back.names == t.names);
  }

  TEST_CASE("public ETTh1 file has the expected shape") {
    const std::filesystem::path path = std::filesystem::path(SDGF_SOURCE_DIR) / "data" / "ETTh1.csv";
    if (!std::filesystem::exists(path)) {
      MESSAGE("data/ETTh1.csv not present; run tools/fetch_etth1.sh");
      return;
    }
    const auto t = load_csv(path);
    CHECK(t.rows() == 17420);
    CHECK(t.variables() == 7);
    CHECK(t.names.front() == "HUFL");
    CHECK(t.names.back() == "OT");
  }
}

TEST_SUITE("windows") {
  TEST_CASE("enumeration on ten rows") {
    const WindowDataset w(ramp_table(10), 3, 2, split_bounds(10));
    CHECK(w.total_windows() == 6);
    const auto [x, y] = w.batch({0});
    CHECK(x.shape() == Shape{1, 3, 1});
    CHECK(x[0] == 0.0);
    CHECK(x[2] == 2.0);
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 4.0);
  }

  TEST_CASE("exactly one window when rows = L + T") {
    CHECK(WindowDataset(ramp_table(7), 4, 3, split_bounds(7)).total_windows() == 1);
  }

  TEST_CASE("too few rows reports the minimum length") {
    CHECK_THROWS_WITH_AS(WindowDataset(ramp_table(6), 4, 3, split_bounds(6)), doctest::Contains("7"), DataError);
  }

  TEST_CASE("7:2:1 split of 100 rows") {
    const auto b = split_bounds(100);
    CHECK(b.train_end == 70);
    CHECK(b.val_end == 90);
  }

  TEST_CASE("window count and exhaustive leakage check") {
    Gen g(92);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t L = g.integer(1, 20), T = g.integer(1, 20);
      const std::size_t rows = g.integer(L + T, 400);
      const auto table = ramp_table(rows);
      const auto w = make_windows(table, L, T);
      CHECK(w.total_windows() == rows - L - T + 1);
      const auto& b = w.bounds();
      // Values equal row indices, so targets reveal which rows a window touches.
      auto check_split = [&](Split s, std::size_t lo, std::size_t hi) {
        for (std::size_t start : w.starts(s)) {
          const auto [x, y] = w.batch({start});
          CHECK(y[0] >= static_cast<double>(lo));
          CHECK(y[T - 1] < static_cast<double>(hi));
        }
      };
      check_split(Split::train, 0, b.train_end);
      check_split(Split::val, b.train_end, b.val_end);
      check_split(Split::test, b.val_end, rows);
      const std::size_t assigned = w.starts(Split::train).size() + w.starts(Split::val).size() + w.starts(Split::test).size();
      CHECK(assigned <= w.total_windows());
    }
  }

  TEST_CASE("standardizer uses only the rows it is fitted on") {
    const auto table = ramp_table(10);
    const auto s = Standardizer::fit(*table, 4);  // rows 0..3: mean 1.5, population std sqrt(1.25)
    CHECK(s.mean[0] == 1.5);
    CHECK(std::abs(s.stdev[0] - std::sqrt(1.25)) < 1e-15);
    const auto z = s.apply(*table);
    CHECK(std::abs(z.at(9, 0) - (9 - 1.5) / std::sqrt(1.25)) < 1e-14);
  }
}

TEST_SUITE("synthesize") {
  TEST_CASE("noise-free lag copy correlates perfectly after realignment") {
    SynthSpec spec;
    spec.variables = 2;
    spec.rows = 200;
    spec.periods = {24};
    spec.pairs = {{0, 1}};
    spec.lag = 3;
    spec.noise = 0.0;
    const auto t = synthesize(spec);
    for (std::size_t r = 3; r < 200; ++r) CHECK(t.at(r, 1) == t.at(r - 3, 0));
    CHECK(std::abs(corr(column(t, 0, 0, 197), column(t, 1, 3, 200)) - 1.0) < 1e-12);
  }

  TEST_CASE("same seed, same table") {
    SynthSpec spec;
    const auto a = synthesize(spec);
    const auto b = synthesize(spec);
    CHECK(max_abs_diff(a.values, b.values) == 0.0);
    spec.seed = 8;
    CHECK(max_abs_diff(a.values, synthesize(spec).values) > 0.0);
  }

  TEST_CASE("lag at least rows is an error") {
    SynthSpec spec;
    spec.rows = 10;
    spec.lag = 10;
    CHECK_THROWS_AS(synthesize(spec), DataError);
  }

  TEST_CASE("paired variables carry the largest off-diagonal correlation") {
    SynthSpec spec;
    spec.lag = 3;
    const auto t = synthesize(spec);
    Tensor x(Shape{1, t.rows(), t.variables()}, t.values.storage());
    const Tensor r = pearson_correlation(x);
    const std::size_t N = 4;
    for (std::size_t i = 0; i < N; ++i) {
      std::size_t best = i == 0 ? 1 : 0;
      for (std::size_t j = 0; j < N; ++j)
        if (j != i && r[i * N + j] > r[i * N + best]) best = j;
      const std::size_t partner = i ^ 1u;  // pairs (0,1) and (2,3)
      CHECK(best == partner);
    }
  }
}
