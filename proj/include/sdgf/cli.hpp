#pragma once

#include <memory>
#include <optional>
#include <ostream>

#include "sdgf/config.hpp"
#include "sdgf/data.hpp"

namespace sdgf {

SynthSpec synth_spec(const RunConfig& cfg);

/// Dataset resolved from `data.*` keys, scaled with train-split statistics
/// when `data.scale` is set.
struct LoadedData {
  std::shared_ptr<const SeriesTable> table;
  std::optional<Standardizer> scaler;
  WindowDataset windows;
};

LoadedData load_dataset(const RunConfig& cfg);

/// Entry point of the `sdgf` tool. Exit codes: 0 success, 1 usage or
/// configuration error, 2 data error, 3 numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdgf
