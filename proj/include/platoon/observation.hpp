#pragma once

#include <array>

namespace platoon {

inline constexpr int kObsRows = 5;      // ego + up to 4 neighbours
inline constexpr int kObsFeatures = 5;  // is_present, dx, dy, dvx, dvy

// Ego-relative neighbour feature matrix, row 0 = ego. dx is normalized by the
// sensing range, dy by the road width band, dvx/dvy by the speed cap. The ego
// row stores its own absolute speed in dvx so the value net can see it.
struct Observation {
    std::array<double, kObsRows * kObsFeatures> data{};

    double& at(int row, int feature) { return data[row * kObsFeatures + feature]; }
    double at(int row, int feature) const { return data[row * kObsFeatures + feature]; }

    bool operator==(const Observation&) const = default;
};

}  // namespace platoon
