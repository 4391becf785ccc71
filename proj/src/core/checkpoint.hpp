#pragma once

#include <cstdint>
#include <filesystem>

#include "core/net.hpp"

namespace faceqr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Parameters& params, const std::filesystem::path& path);
Parameters load_checkpoint(const std::filesystem::path& path);

}  // namespace faceqr
