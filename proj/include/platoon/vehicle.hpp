#pragma once

namespace platoon {

enum class VehicleKind { AV, HDV };

inline constexpr double kLaneWidth = 4.0;      // m; centerlines at y = 0 and y = 4
inline constexpr double kRoadLength = 2000.0;  // m; reference extent for rendering
inline constexpr double kVehicleLength = 5.0;  // m
inline constexpr double kVehicleWidth = 2.0;   // m

inline constexpr double kAvSpeedMin = 20.0;  // m/s, AV target band
inline constexpr double kAvSpeedMax = 30.0;
inline constexpr double kHdvSpeedMin = 20.0;  // m/s, HDV desired-speed band
inline constexpr double kHdvSpeedMax = 25.0;

struct VehicleState {
    int id = 0;
    VehicleKind kind = VehicleKind::HDV;
    double x = 0.0;  // longitudinal position, m
    int lane = 0;    // nearest lane index, {0, 1}
    double y = 0.0;  // lateral position, m; continuous during lane changes
    double v = 0.0;  // longitudinal speed, m/s
    double target_speed = 0.0;  // AV: meta-action target; HDV: sampled desired speed
    int target_lane = 0;
    bool crashed = false;
    double length = kVehicleLength;
    double width = kVehicleWidth;

    bool operator==(const VehicleState&) const = default;
};

inline double lane_center(int lane) { return kLaneWidth * lane; }

}  // namespace platoon
