#pragma once

#include "nbrenc/models/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace nbrenc::training {

inline constexpr char kCheckpointMagic[4] = {'N', 'B', 'R', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian layout: magic, u32 version, u64 config length, config JSON,
// then per parameter in name order: u64 name length, name, u64 rows,
// u64 cols, rows*cols float32 values in row-major order.
std::string serialize_checkpoint(const models::Model<float>& model);

// Throws FormatError on a bad magic, version, config or parameter set and
// IoError when the bytes end early.
models::Model<float> deserialize_checkpoint(const std::string& bytes);

// Writes through a temporary file and renames, so a failed save never leaves
// a partial checkpoint at `path`.
void save_checkpoint(const models::Model<float>& model, const std::filesystem::path& path);
models::Model<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace nbrenc::training
