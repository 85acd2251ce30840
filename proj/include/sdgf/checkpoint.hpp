#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sdgf/config.hpp"
#include "sdgf/model.hpp"

namespace sdgf {

inline constexpr std::string_view kCheckpointMagic = "SDGFCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (all integers and reals little-endian):
///   magic[8] | u32 version | u32 n + n bytes of config text (key=value lines)
///   | u32 branch count | u32 parameter count
///   | per parameter: u32 name length, name, u32 rank, u64 dims[rank], f64 values
///   | u8 has static adjacency [| u32 N, f64 values[N*N]]
std::string save_checkpoint(const SdgfModel& model, const RunConfig& run);

struct LoadedCheckpoint {
  SdgfModel model;
  RunConfig run;
};

/// Throws CheckpointError on bad magic, version, truncation, or a parameter
/// table that does not match the stored hyperparameters.
LoadedCheckpoint load_checkpoint(std::string_view bytes);

void save_checkpoint_file(const std::filesystem::path& path, const SdgfModel& model, const RunConfig& run);
LoadedCheckpoint load_checkpoint_file(const std::filesystem::path& path);

}  // namespace sdgf
