#include "sdgf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "sdgf/errors.hpp"

namespace sdgf {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

SeriesTable parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || split_line(line).empty()) throw DataError(source + ": empty file");
  auto header = split_line(line);
  const bool has_date = lower(header.front()) == "date";
  SeriesTable table;
  table.names.assign(header.begin() + (has_date ? 1 : 0), header.end());
  const std::size_t N = table.names.size();
  if (N == 0) throw DataError(source + ": header has no value columns");

  std::vector<double> values;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError(source + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) + ") has " +
                      std::to_string(cells.size()) + " cells, header has " + std::to_string(header.size()));
    }
    if (has_date) {
      if (cells[0].empty()) throw DataError(source + ": row " + std::to_string(row) + " has an empty date");
      if (!table.timestamps.empty() && !(table.timestamps.back() < cells[0])) {
        throw DataError(source + ": timestamps not strictly increasing at row " + std::to_string(row));
      }
      table.timestamps.push_back(cells[0]);
    }
    for (std::size_t j = 0; j < N; ++j) {
      const auto& cell = cells[j + (has_date ? 1 : 0)];
      double v = 0.0;
      if (cell.empty()) {
        throw DataError(source + ": missing value at row " + std::to_string(row) + ", column \"" + table.names[j] + "\"");
      }
      if (!parse_double(cell, v) || !std::isfinite(v)) {
        throw DataError(source + ": non-numeric value '" + cell + "' at row " + std::to_string(row) + ", column \"" +
                        table.names[j] + "\"");
      }
      values.push_back(v);
    }
  }
  if (row == 0) throw DataError(source + ": no data rows");
  table.values = Tensor(Shape{row, N}, std::move(values));
  return table;
}

SeriesTable load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return parse_csv(in, path.string());
}

void write_csv(std::ostream& out, const SeriesTable& table) {
  const bool has_date = !table.timestamps.empty();
  if (has_date) out << "date,";
  for (std::size_t j = 0; j < table.names.size(); ++j) out << (j ? "," : "") << table.names[j];
  out << '\n';
  char buf[64];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    if (has_date) out << table.timestamps[r] << ',';
    for (std::size_t j = 0; j < table.variables(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), table.at(r, j), std::chars_format::general, 17);
      if (j) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const SeriesTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(out, table);
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

SplitBounds split_bounds(std::size_t rows, double train_ratio, double val_ratio) {
  if (!(train_ratio > 0.0 && val_ratio >= 0.0 && train_ratio + val_ratio < 1.0)) {
    throw ConfigError("split ratios must satisfy 0 < train, 0 <= val, train + val < 1");
  }
  SplitBounds b;
  b.rows = rows;
  // Tolerance absorbs binary representation error, e.g. 100 * 0.7 = 70.000000000000006.
  b.train_end = static_cast<std::size_t>(std::floor(static_cast<double>(rows) * train_ratio + 1e-9));
  b.val_end = static_cast<std::size_t>(std::floor(static_cast<double>(rows) * (train_ratio + val_ratio) + 1e-9));
  return b;
}

Standardizer Standardizer::fit(const SeriesTable& table, std::size_t rows) {
  if (rows == 0 || rows > table.rows()) throw DataError("standardizer needs 1.." + std::to_string(table.rows()) + " rows");
  Standardizer s;
  const std::size_t N = table.variables();
  s.mean.assign(N, 0.0);
  s.stdev.assign(N, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    double mu = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mu += table.at(r, j);
    mu /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) var += (table.at(r, j) - mu) * (table.at(r, j) - mu);
    var /= static_cast<double>(rows);
    s.mean[j] = mu;
    s.stdev[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

SeriesTable Standardizer::apply(const SeriesTable& table) const {
  if (table.variables() != mean.size()) throw DimensionError("standardizer fitted on a different variable count");
  SeriesTable out = table;
  const std::size_t N = table.variables();
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t j = 0; j < N; ++j) out.values[r * N + j] = (table.at(r, j) - mean[j]) / stdev[j];
  }
  return out;
}

WindowDataset::WindowDataset(std::shared_ptr<const SeriesTable> table, std::size_t lookback, std::size_t horizon,
                             SplitBounds bounds)
    : table_(std::move(table)), lookback_(lookback), horizon_(horizon), bounds_(bounds) {
  if (lookback == 0 || horizon == 0) throw ConfigError("lookback and horizon must be >= 1");
  const std::size_t rows = table_->rows();
  if (rows < lookback + horizon) {
    throw DataError("series has " + std::to_string(rows) + " rows; at least " + std::to_string(lookback + horizon) +
                    " (lookback + horizon) are required");
  }
  total_ = rows - lookback - horizon + 1;
  for (std::size_t i = 0; i < total_; ++i) {
    const std::size_t first = i + lookback;
    const std::size_t last = first + horizon - 1;
    if (last < bounds_.train_end) {
      train_.push_back(i);
    } else if (first >= bounds_.train_end && last < bounds_.val_end) {
      val_.push_back(i);
    } else if (first >= bounds_.val_end) {
      test_.push_back(i);
    }
  }
}

const std::vector<std::size_t>& WindowDataset::starts(Split split) const {
  switch (split) {
    case Split::train: return train_;
    case Split::val: return val_;
    default: return test_;
  }
}

std::pair<Tensor, Tensor> WindowDataset::batch(const std::vector<std::size_t>& window_starts) const {
  const std::size_t B = window_starts.size();
  const std::size_t N = variables();
  if (B == 0) throw DataError("empty batch");
  Tensor x(Shape{B, lookback_, N});
  Tensor y(Shape{B, horizon_, N});
  const auto& v = table_->values;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t s = window_starts[b];
    if (s >= total_) throw DataError("window start " + std::to_string(s) + " out of range");
    std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(s * N), lookback_ * N,
                x.data().begin() + static_cast<std::ptrdiff_t>(b * lookback_ * N));
    std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>((s + lookback_) * N), horizon_ * N,
                y.data().begin() + static_cast<std::ptrdiff_t>(b * horizon_ * N));
  }
  return {std::move(x), std::move(y)};
}

WindowDataset make_windows(std::shared_ptr<const SeriesTable> table, std::size_t lookback, std::size_t horizon,
                           double train_ratio, double val_ratio) {
  const auto bounds = split_bounds(table->rows(), train_ratio, val_ratio);
  return WindowDataset(std::move(table), lookback, horizon, bounds);
}

SeriesTable synthesize(const SynthSpec& spec) {
  const std::size_t N = spec.variables;
  if (N == 0 || spec.rows == 0) throw ConfigError("synthetic spec needs variables >= 1 and rows >= 1");
  if (spec.periods.empty()) throw ConfigError("synthetic spec needs at least one period");
  for (double p : spec.periods) {
    if (!(p > 0.0)) throw ConfigError("synthetic periods must be positive");
  }
  if (!spec.pairs.empty() && spec.lag >= spec.rows) {
    throw DataError("lag " + std::to_string(spec.lag) + " must be smaller than rows " + std::to_string(spec.rows));
  }
  for (const auto& [src, dst] : spec.pairs) {
    if (src >= N || dst >= N || src == dst) {
      throw ConfigError("invalid lag pair " + std::to_string(src) + ">" + std::to_string(dst));
    }
  }
  if (spec.noise < 0.0) throw ConfigError("synthetic noise must be nonnegative");

  // Series are generated on an extended range so chained pairs have history.
  const std::size_t pre = spec.lag * spec.pairs.size();
  const std::size_t len = pre + spec.rows;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> series(N, std::vector<double>(len));
  for (std::size_t j = 0; j < N; ++j) {
    const double period = spec.periods[j % spec.periods.size()];
    for (std::size_t t = 0; t < len; ++t) {
      const double time = static_cast<double>(t) - static_cast<double>(pre);
      series[j][t] = std::sin(2.0 * std::numbers::pi * time / period) + spec.noise * gauss(rng);
    }
  }
  for (const auto& [src, dst] : spec.pairs) {
    for (std::size_t t = spec.lag; t < len; ++t) series[dst][t] = series[src][t - spec.lag] + spec.noise * gauss(rng);
  }

  SeriesTable table;
  table.values = Tensor(Shape{spec.rows, N});
  for (std::size_t j = 0; j < N; ++j) {
    table.names.push_back("x" + std::to_string(j));
    for (std::size_t r = 0; r < spec.rows; ++r) table.values[r * N + j] = series[j][pre + r];
  }
  return table;
}

}  // namespace sdgf
