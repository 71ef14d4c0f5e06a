#include "platoon/highway_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace platoon {
namespace {

// Longitudinal proportional speed controller.
constexpr double kSpeedGain = 1.0;  // 1/s
constexpr double kAccelCap = 5.0;   // m/s^2

// Lateral proportional controller; saturation plus snap completes a 4 m lane
// change in roughly 2 s.
constexpr double kLateralGain = 4.0;      // 1/s
constexpr double kLateralSpeedCap = 2.0;  // m/s
constexpr double kLaneSnap = 0.05;        // m

// Initial placement.
constexpr double kLeaderStartX = 200.0;  // m
constexpr double kPlatoonGapMin = 36.0;  // m, safety band
constexpr double kPlatoonGapMax = 60.0;
constexpr double kHdvAheadMin = 80.0;  // m ahead of the platoon leader
constexpr double kHdvAheadMax = 200.0;
constexpr double kHdvMinGap = 25.0;  // m between same-lane HDVs
constexpr int kPlacementRetries = 100;

constexpr double kHeadwayFloor = 0.1;  // m, keeps the log reward finite

constexpr double kLateralNorm = 8.0;  // m, two lane widths
constexpr double kSpeedNorm = 30.0;   // m/s

double clamp_mag(double v, double mag) { return std::clamp(v, -mag, mag); }

}  // namespace

std::pair<int, int> hdv_count_range(int density_level) {
    switch (density_level) {
        case 1: return {1, 2};
        case 2: return {2, 3};
        case 3: return {3, 4};
        default: throw std::invalid_argument("density_level must be 1, 2, or 3");
    }
}

void EnvConfig::validate() const {
    hdv_count_range(density_level);
    if (n_avs < 1 || n_avs > 8) {
        throw std::invalid_argument("n_avs must be in [1, 8]");
    }
    if (n_hdvs >= 0) {
        const auto [lo, hi] = hdv_count_range(density_level);
        if (n_hdvs != 0 && (n_hdvs < lo || n_hdvs > hi)) {
            throw std::invalid_argument("n_hdvs outside the density range (or 0)");
        }
    }
    if (episode_steps < 1) throw std::invalid_argument("episode_steps must be >= 1");
    if (decision_dt <= 0.0) throw std::invalid_argument("decision_dt must be > 0");
    if (physics_substeps < 1) throw std::invalid_argument("physics_substeps must be >= 1");
    if (sensing_range <= 0.0) throw std::invalid_argument("sensing_range must be > 0");
    if (lanes != 2) throw std::invalid_argument("lanes must be 2");
}

bool HighwayEnv::rectangles_overlap(const VehicleState& a, const VehicleState& b) {
    return std::abs(a.x - b.x) < 0.5 * (a.length + b.length) &&
           std::abs(a.y - b.y) < 0.5 * (a.width + b.width);
}

std::vector<Observation> HighwayEnv::reset(const EnvConfig& config, std::uint64_t seed) {
    config.validate();
    config_ = config;
    config_.seed = seed;
    rng_.reseed(seed);
    vehicles_.clear();
    step_count_ = 0;

    int n_hdvs = config_.n_hdvs;
    if (n_hdvs < 0) {
        const auto [lo, hi] = hdv_count_range(config_.density_level);
        n_hdvs = lo + static_cast<int>(rng_.uniform_int(static_cast<std::uint32_t>(hi - lo + 1)));
    }

    const int platoon_lane = static_cast<int>(rng_.uniform_int(2));

    // Platoon, leader first; followers trail at gaps inside the safety band.
    double x = kLeaderStartX;
    for (int i = 0; i < config_.n_avs; ++i) {
        if (i > 0) x -= rng_.uniform(kPlatoonGapMin, kPlatoonGapMax);
        VehicleState av;
        av.id = i + 1;
        av.kind = VehicleKind::AV;
        av.x = x;
        av.lane = platoon_lane;
        av.target_lane = platoon_lane;
        av.y = lane_center(platoon_lane);
        av.v = rng_.uniform(kAvSpeedMin, kAvSpeedMax);
        av.target_speed = av.v;
        vehicles_.push_back(av);
    }

    // HDV traffic ahead of the platoon leader, same-lane gaps >= 25 m.
    const double leader_x = vehicles_.front().x;
    for (int h = 0; h < n_hdvs; ++h) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
            const int lane = static_cast<int>(rng_.uniform_int(static_cast<std::uint32_t>(config_.lanes)));
            const double hx = leader_x + rng_.uniform(kHdvAheadMin, kHdvAheadMax);
            const double speed = rng_.uniform(kHdvSpeedMin, kHdvSpeedMax);
            bool free = true;
            for (const auto& other : vehicles_) {
                if (other.kind == VehicleKind::HDV && other.lane == lane &&
                    std::abs(other.x - hx) < kHdvMinGap) {
                    free = false;
                    break;
                }
            }
            if (!free) continue;
            VehicleState hdv;
            hdv.id = config_.n_avs + h + 1;
            hdv.kind = VehicleKind::HDV;
            hdv.x = hx;
            hdv.lane = lane;
            hdv.target_lane = lane;
            hdv.y = lane_center(lane);
            hdv.v = speed;
            hdv.target_speed = speed;  // desired IDM free speed
            vehicles_.push_back(hdv);
            placed = true;
        }
        if (!placed) {
            throw std::runtime_error("highway_env: could not place HDV " +
                                     std::to_string(h + 1) + " after " +
                                     std::to_string(kPlacementRetries) + " attempts");
        }
    }

    agent_done_.assign(config_.n_avs, false);
    std::vector<Observation> obs(config_.n_avs);
    for (int i = 0; i < config_.n_avs; ++i) obs[i] = observe(i);
    return obs;
}

void HighwayEnv::apply_meta_action(VehicleState& av, int action) const {
    switch (action) {
        case kLaneLeft:
            av.target_lane = std::max(0, av.target_lane - 1);
            break;
        case kLaneRight:
            av.target_lane = std::min(config_.lanes - 1, av.target_lane + 1);
            break;
        case kFaster:
            av.target_speed = std::clamp(av.target_speed + 5.0, kAvSpeedMin, kAvSpeedMax);
            break;
        case kSlower:
            av.target_speed = std::clamp(av.target_speed - 5.0, kAvSpeedMin, kAvSpeedMax);
            break;
        case kIdle:
        default:
            break;
    }
}

double HighwayEnv::lateral_speed(const VehicleState& vehicle) const {
    if (vehicle.crashed) return 0.0;
    const double err = lane_center(vehicle.target_lane) - vehicle.y;
    if (std::abs(err) < kLaneSnap) return 0.0;
    return clamp_mag(kLateralGain * err, kLateralSpeedCap);
}

double idm_free_acceleration(const IdmParams& p, double v, double desired_speed) {
    const double v0 = std::max(desired_speed, 1e-6);
    return p.max_accel * (1.0 - std::pow(v / v0, p.exponent));
}

double idm_acceleration(const IdmParams& p, double v, double desired_speed,
                        double center_gap, double leader_speed) {
    const double gap = std::max(kHeadwayFloor, center_gap - kVehicleLength);
    const double closing = v - leader_speed;
    const double desired_gap =
        p.jam_distance +
        std::max(0.0, v * p.time_gap +
                          v * closing / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    return idm_free_acceleration(p, v, desired_speed) -
           p.max_accel * (desired_gap / gap) * (desired_gap / gap);
}

double HighwayEnv::hdv_acceleration(const VehicleState& hdv) const {
    // Nearest same-lane leader within sensing range.
    const VehicleState* leader = nullptr;
    for (const auto& other : vehicles_) {
        if (other.id == hdv.id || other.lane != hdv.lane) continue;
        const double dx = other.x - hdv.x;
        if (dx <= 0.0 || dx > config_.sensing_range) continue;
        if (!leader || dx < leader->x - hdv.x) leader = &other;
    }
    if (!leader) return idm_free_acceleration(idm_, hdv.v, hdv.target_speed);
    return idm_acceleration(idm_, hdv.v, hdv.target_speed, leader->x - hdv.x, leader->v);
}

void HighwayEnv::run_substeps(std::vector<CollisionEvent>& new_collisions) {
    const double dt = config_.decision_dt / config_.physics_substeps;
    const std::size_t n = vehicles_.size();
    std::vector<double> accel(n, 0.0);
    std::vector<double> lat(n, 0.0);

    for (int s = 0; s < config_.physics_substeps; ++s) {
        // Accelerations from the synchronous pre-substep state.
        for (std::size_t k = 0; k < n; ++k) {
            const auto& veh = vehicles_[k];
            if (veh.crashed) {
                accel[k] = 0.0;
                lat[k] = 0.0;
                continue;
            }
            accel[k] = veh.kind == VehicleKind::HDV
                           ? hdv_acceleration(veh)
                           : clamp_mag(kSpeedGain * (veh.target_speed - veh.v), kAccelCap);
            lat[k] = lateral_speed(veh);
        }
        for (std::size_t k = 0; k < n; ++k) {
            auto& veh = vehicles_[k];
            if (veh.crashed) continue;
            veh.v = std::max(0.0, veh.v + accel[k] * dt);
            veh.x += veh.v * dt;
            veh.y += lat[k] * dt;
            if (std::abs(lane_center(veh.target_lane) - veh.y) < kLaneSnap) {
                veh.y = lane_center(veh.target_lane);
            }
            veh.lane = veh.y < 0.5 * kLaneWidth ? 0 : 1;
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                auto& a = vehicles_[i];
                auto& b = vehicles_[j];
                if (a.crashed && b.crashed) continue;  // frozen wreck pair
                if (!rectangles_overlap(a, b)) continue;
                new_collisions.push_back({std::min(a.id, b.id), std::max(a.id, b.id)});
                a.crashed = true;
                b.crashed = true;
            }
        }
    }
}

double HighwayEnv::headway_distance(int ego_index) const {
    const auto& ego = vehicles_[ego_index];
    double best = config_.sensing_range;
    for (const auto& other : vehicles_) {
        if (other.id == ego.id || other.lane != ego.lane) continue;
        const double dx = other.x - ego.x;
        if (dx <= 0.0 || dx > config_.sensing_range) continue;
        best = std::min(best, dx);
    }
    return std::max(kHeadwayFloor, best);
}

StepResult HighwayEnv::step(const std::vector<int>& joint_actions) {
    if (vehicles_.empty()) throw std::logic_error("step() before reset()");
    if (static_cast<int>(joint_actions.size()) != config_.n_avs) {
        throw std::invalid_argument("expected one action per AV");
    }
    if (step_count_ >= config_.episode_steps) {
        throw std::logic_error("episode is over; call reset()");
    }

    std::vector<bool> acted(config_.n_avs, false);
    for (int i = 0; i < config_.n_avs; ++i) {
        if (agent_done_[i]) continue;
        const int action = joint_actions[i];
        if (action < 0 || action >= kNumActions) {
            throw std::invalid_argument("action index " + std::to_string(action) +
                                        " outside {0..4}");
        }
        acted[i] = true;
        apply_meta_action(vehicles_[i], action);
    }

    StepResult result;
    run_substeps(result.collisions);
    ++step_count_;

    result.raw_rewards.assign(config_.n_avs, 0.0);
    std::vector<std::vector<int>> neighbor_sets(config_.n_avs);
    for (int i = 0; i < config_.n_avs; ++i) {
        neighbor_sets[i] = {i};
        if (!acted[i]) continue;
        const auto& ego = vehicles_[i];
        const double r_c = collision_penalty(ego.crashed);
        const double r_os = overtake_speed_reward(ego.v, weights_);
        const double r_h = headway_reward(headway_distance(i), ego.v, weights_);
        const double r_f = i == 0 ? 0.0 : following_reward(ego, vehicles_[i - 1], weights_);
        result.raw_rewards[i] = vehicle_reward(r_c, r_os, r_h, r_f, weights_);
        // Close neighbours for reward sharing: observed AVs that acted this step.
        for (int idx : neighbor_indices(i)) {
            if (vehicles_[idx].kind == VehicleKind::AV && idx < config_.n_avs && acted[idx]) {
                neighbor_sets[i].push_back(idx);
            }
        }
    }
    result.shared_rewards = local_shared_reward(result.raw_rewards, neighbor_sets);
    for (int i = 0; i < config_.n_avs; ++i) {
        if (!acted[i]) result.shared_rewards[i] = 0.0;
    }

    result.done.assign(config_.n_avs, false);
    for (int i = 0; i < config_.n_avs; ++i) {
        agent_done_[i] = agent_done_[i] || vehicles_[i].crashed ||
                         step_count_ >= config_.episode_steps;
        result.done[i] = agent_done_[i];
    }

    result.observations.resize(config_.n_avs);
    for (int i = 0; i < config_.n_avs; ++i) result.observations[i] = observe(i);
    result.vehicles = vehicles_;
    return result;
}

std::vector<int> HighwayEnv::neighbor_indices(int ego_index) const {
    struct Candidate {
        double abs_dx;
        double dx;
        int id;
        int index;
    };
    const auto& ego = vehicles_[ego_index];
    std::vector<Candidate> candidates;
    for (std::size_t k = 0; k < vehicles_.size(); ++k) {
        if (static_cast<int>(k) == ego_index) continue;
        const double dx = vehicles_[k].x - ego.x;
        if (std::abs(dx) > config_.sensing_range) continue;
        candidates.push_back({std::abs(dx), dx, vehicles_[k].id, static_cast<int>(k)});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.abs_dx != b.abs_dx) return a.abs_dx < b.abs_dx;
        if (a.dx != b.dx) return a.dx < b.dx;
        return a.id < b.id;
    });
    const std::size_t cap = kObsRows - 1;
    std::vector<int> indices;
    for (std::size_t k = 0; k < candidates.size() && k < cap; ++k) {
        indices.push_back(candidates[k].index);
    }
    return indices;
}

Observation HighwayEnv::observe(int agent) const {
    if (agent < 0 || agent >= config_.n_avs) {
        throw std::invalid_argument("observe: bad agent index");
    }
    const auto& ego = vehicles_[agent];
    Observation obs;
    obs.at(0, 0) = 1.0;
    obs.at(0, 3) = ego.v / kSpeedNorm;
    obs.at(0, 4) = lateral_speed(ego) / kSpeedNorm;

    int row = 1;
    for (int idx : neighbor_indices(agent)) {
        const auto& other = vehicles_[idx];
        obs.at(row, 0) = 1.0;
        obs.at(row, 1) = (other.x - ego.x) / config_.sensing_range;
        obs.at(row, 2) = (other.y - ego.y) / kLateralNorm;
        obs.at(row, 3) = (other.v - ego.v) / kSpeedNorm;
        obs.at(row, 4) = (lateral_speed(other) - lateral_speed(ego)) / kSpeedNorm;
        ++row;
    }
    return obs;
}

std::vector<CollisionEvent> HighwayEnv::check_collisions() const {
    std::vector<CollisionEvent> pairs;
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
        for (std::size_t j = i + 1; j < vehicles_.size(); ++j) {
            if (rectangles_overlap(vehicles_[i], vehicles_[j])) {
                pairs.push_back({std::min(vehicles_[i].id, vehicles_[j].id),
                                 std::max(vehicles_[i].id, vehicles_[j].id)});
            }
        }
    }
    return pairs;
}

bool HighwayEnv::all_done() const {
    for (bool d : agent_done_) {
        if (!d) return false;
    }
    return true;
}

}  // namespace platoon
