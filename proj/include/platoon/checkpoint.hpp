#pragma once

#include <filesystem>

#include "platoon/noisy_net.hpp"

namespace platoon {

inline constexpr int kCheckpointFormatVersion = 1;

// Single JSON document: format version plus per-layer names, shapes and
// row-major flattened mu/sigma arrays.
void save_checkpoint(const QNetworkParams& net, const std::filesystem::path& path);

// Throws std::runtime_error naming the offending layer when the stored
// shapes or noisy flags do not match `arch`.
QNetworkParams load_checkpoint(const std::filesystem::path& path, const NetArch& arch);

}  // namespace platoon
