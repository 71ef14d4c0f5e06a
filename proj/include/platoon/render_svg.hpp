#pragma once

#include <filesystem>
#include <vector>

#include "platoon/trace.hpp"

namespace platoon {

// Renders one x-t schematic per episode found in the trace: one panel per
// lane, AVs blue / HDVs green, collisions marked with a red cross at the
// recorded step. Returns the paths of the written SVG files.
std::vector<std::filesystem::path> render_trace(const std::filesystem::path& trace_path,
                                                const std::filesystem::path& out_dir);

}  // namespace platoon
