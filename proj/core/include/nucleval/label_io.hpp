#pragma once

#include <filesystem>

#include "nucleval/mask.hpp"

namespace nucleval {

inline constexpr InstanceId kMaxStoredId = 65535;

// Single-channel grayscale PNG, 8- or 16-bit; value = instance id.
InstanceMap read_label_png(const std::filesystem::path& path);

// Always written as 16-bit grayscale. Throws DataError for ids above 65535.
void write_label_png(const std::filesystem::path& path, const InstanceMap& map);

}  // namespace nucleval
