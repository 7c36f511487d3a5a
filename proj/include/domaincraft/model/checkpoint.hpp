#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "domaincraft/model/transformer.hpp"

namespace domaincraft {

// Binary container: "DCRFTCKP", u32 version, config block, named tensor
// blocks (name, rows, cols, little-endian f64 data) and a trailing FNV-1a
// checksum over everything before it.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const ModelParams& params);
ModelParams deserialize_checkpoint(std::string_view bytes);

// Writes via a temporary file and rename.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace domaincraft
