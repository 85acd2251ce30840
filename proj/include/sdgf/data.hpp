#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sdgf/tensor.hpp"

namespace sdgf {

/// rows x N table of observations with optional timestamps.
struct SeriesTable {
  std::vector<std::string> timestamps;  ///< empty when the file has no date column
  Tensor values;                        ///< rows x N
  std::vector<std::string> names;       ///< N variable names

  std::size_t rows() const { return values.dim(0); }
  std::size_t variables() const { return values.dim(1); }
  double at(std::size_t row, std::size_t var) const { return values[row * variables() + var]; }
};

/// Parses CSV with a header row. A first column named "date" (any case) is
/// kept as timestamps, which must be strictly increasing as strings.
SeriesTable parse_csv(std::istream& in, const std::string& source = "<stream>");
SeriesTable load_csv(const std::filesystem::path& path);

/// Values written with 17 significant digits, so parse_csv reproduces them bit-exact.
void write_csv(std::ostream& out, const SeriesTable& table);
void save_csv(const std::filesystem::path& path, const SeriesTable& table);

enum class Split { train, val, test };
std::string to_string(Split split);

/// Row ranges of a chronological split: train [0, train_end),
/// val [train_end, val_end), test [val_end, rows).
struct SplitBounds {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t rows = 0;
};

/// Boundaries at floor(rows * train_ratio) and floor(rows * (train_ratio + val_ratio)).
SplitBounds split_bounds(std::size_t rows, double train_ratio = 0.7, double val_ratio = 0.2);

/// Per-variable z-scoring with statistics taken from the training rows.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stdev;

  static Standardizer fit(const SeriesTable& table, std::size_t rows);
  SeriesTable apply(const SeriesTable& table) const;
};

/// Stride-1 sliding windows: window starting at row i reads inputs
/// [i, i+L) and targets [i+L, i+L+T). A window belongs to the split that
/// contains all of its target rows; windows whose targets cross a split
/// boundary are dropped.
class WindowDataset {
 public:
  WindowDataset(std::shared_ptr<const SeriesTable> table, std::size_t lookback, std::size_t horizon,
                SplitBounds bounds);

  std::size_t lookback() const { return lookback_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t variables() const { return table_->variables(); }
  const SplitBounds& bounds() const { return bounds_; }
  const SeriesTable& table() const { return *table_; }

  /// Number of stride-1 windows over the whole table (rows - L - T + 1).
  std::size_t total_windows() const { return total_; }
  /// Start rows of the windows in `split`, ascending.
  const std::vector<std::size_t>& starts(Split split) const;

  /// Gathers B x L x N inputs and B x T x N targets for the given start rows.
  std::pair<Tensor, Tensor> batch(const std::vector<std::size_t>& window_starts) const;

 private:
  std::shared_ptr<const SeriesTable> table_;
  std::size_t lookback_;
  std::size_t horizon_;
  SplitBounds bounds_;
  std::size_t total_ = 0;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> val_;
  std::vector<std::size_t> test_;
};

/// Throws DataError naming the minimum row count when the table is too short.
WindowDataset make_windows(std::shared_ptr<const SeriesTable> table, std::size_t lookback, std::size_t horizon,
                           double train_ratio = 0.7, double val_ratio = 0.2);

/// Synthetic multivariate series with known lag dependencies.
struct SynthSpec {
  std::size_t variables = 4;
  std::size_t rows = 2000;
  std::vector<double> periods{24, 36, 48, 60};  ///< cycled across variables
  /// (src, dst): dst(t) = src(t - lag) + noise, applied in order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {2, 3}};
  std::size_t lag = 12;
  double noise = 0.3;
  std::uint64_t seed = 7;
};

/// x_i(t) = sin(2 pi t / period_i) + noise * e_i(t), with every pair's
/// destination replaced by its source delayed by `lag` plus fresh noise.
SeriesTable synthesize(const SynthSpec& spec);

}  // namespace sdgf
