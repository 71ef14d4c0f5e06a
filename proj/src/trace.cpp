#include "platoon/trace.hpp"

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace platoon {

using nlohmann::json;

TraceWriter::TraceWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open trace file: " + path.string());
}

void TraceWriter::write_step(int episode, int step, const StepResult& result,
                             const std::vector<int>& actions,
                             const std::vector<bool>& acted) {
    json j;
    j["episode"] = episode;
    j["step"] = step;
    json vehicles = json::array();
    for (const auto& v : result.vehicles) {
        vehicles.push_back({{"id", v.id},
                            {"kind", v.kind == VehicleKind::AV ? "AV" : "HDV"},
                            {"x", v.x},
                            {"y", v.y},
                            {"lane", v.lane},
                            {"v", v.v},
                            {"crashed", v.crashed}});
    }
    j["vehicles"] = std::move(vehicles);
    json avs = json::array();
    for (std::size_t i = 0; i < acted.size(); ++i) {
        if (!acted[i]) continue;
        avs.push_back({{"id", static_cast<int>(i) + 1},
                       {"action", actions[i]},
                       {"raw_reward", result.raw_rewards[i]},
                       {"shared_reward", result.shared_rewards[i]}});
    }
    j["avs"] = std::move(avs);
    json collisions = json::array();
    for (const auto& c : result.collisions) {
        collisions.push_back({c.a, c.b});
    }
    j["collisions"] = std::move(collisions);
    out_ << j.dump() << '\n';
}

std::vector<TraceStep> read_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path.string());
    std::vector<TraceStep> steps;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            TraceStep step;
            step.episode = j.at("episode").get<int>();
            step.step = j.at("step").get<int>();
            for (const auto& v : j.at("vehicles")) {
                TraceVehicle tv;
                tv.id = v.at("id").get<int>();
                tv.is_av = v.at("kind").get<std::string>() == "AV";
                tv.x = v.at("x").get<double>();
                tv.y = v.at("y").get<double>();
                tv.lane = v.at("lane").get<int>();
                tv.v = v.at("v").get<double>();
                tv.crashed = v.at("crashed").get<bool>();
                step.vehicles.push_back(tv);
            }
            for (const auto& a : j.at("avs")) {
                TraceAv ta;
                ta.id = a.at("id").get<int>();
                ta.action = a.at("action").get<int>();
                ta.raw_reward = a.at("raw_reward").get<double>();
                ta.shared_reward = a.at("shared_reward").get<double>();
                step.avs.push_back(ta);
            }
            for (const auto& c : j.at("collisions")) {
                step.collisions.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
            }
            steps.push_back(std::move(step));
        } catch (const json::exception& e) {
            throw std::runtime_error(path.string() + ": trace parse error at line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
    }
    return steps;
}

}  // namespace platoon
