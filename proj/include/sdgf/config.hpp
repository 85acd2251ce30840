#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sdgf/model.hpp"

namespace sdgf {

using KeyValues = std::map<std::string, std::string>;

/// Flat `key=value` run configuration. Every key has a default; unknown
/// keys are rejected.
class RunConfig {
 public:
  RunConfig();

  /// Parses `key=value` lines; blank lines and `#` comments are ignored.
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Applies a `key=value` override.
  void apply(std::string_view assignment);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const KeyValues& values() const { return values_; }
  /// Sorted `key=value` lines.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  /// Known keys with their defaults.
  static const KeyValues& defaults();

 private:
  KeyValues values_;
};

ModelConfig model_config(const RunConfig& cfg);
/// Writes `model` back into the `model.*`, `wavelet.*`, `gcn.*`, `static_graph.*`,
/// `temporal.*` and `train.seed` keys.
void store_model_config(RunConfig& cfg, const ModelConfig& model);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 30;
  std::size_t patience = 5;
  std::size_t batch = 32;
  std::uint64_t seed = 2024;
  double clip = 5.0;  ///< global gradient-norm limit; 0 disables
};
TrainConfig train_config(const RunConfig& cfg);

/// Comma-separated reals, e.g. "24,36".
std::vector<double> parse_real_list(const std::string& text);
/// Comma-separated `src>dst` pairs, e.g. "0>1,2>3".
std::vector<std::pair<std::size_t, std::size_t>> parse_pairs(const std::string& text);

}  // namespace sdgf
