#pragma once

#include <filesystem>
#include <fstream>
#include <vector>

#include "platoon/highway_env.hpp"

namespace platoon {

// JSON-lines step traces: one object per decision step with the step index,
// every vehicle's (id, kind, x, y, lane, v, crashed), the acting AVs'
// (action, raw_reward, shared_reward) and the new collision pairs.
class TraceWriter {
public:
    explicit TraceWriter(const std::filesystem::path& path);

    void write_step(int episode, int step, const StepResult& result,
                    const std::vector<int>& actions, const std::vector<bool>& acted);

private:
    std::ofstream out_;
};

struct TraceVehicle {
    int id = 0;
    bool is_av = false;
    double x = 0.0;
    double y = 0.0;
    int lane = 0;
    double v = 0.0;
    bool crashed = false;
};

struct TraceAv {
    int id = 0;
    int action = 0;
    double raw_reward = 0.0;
    double shared_reward = 0.0;
};

struct TraceStep {
    int episode = 0;
    int step = 0;
    std::vector<TraceVehicle> vehicles;
    std::vector<TraceAv> avs;
    std::vector<CollisionEvent> collisions;
};

// Parses a whole trace file; throws std::runtime_error naming the 1-based
// line number on malformed input.
std::vector<TraceStep> read_trace(const std::filesystem::path& path);

}  // namespace platoon
