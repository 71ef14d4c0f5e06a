#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "platoon/observation.hpp"
#include "platoon/reward.hpp"
#include "platoon/rng.hpp"
#include "platoon/vehicle.hpp"

namespace platoon {

// Discrete meta-actions executed by the low-level controllers.
enum MetaAction : int {
    kLaneLeft = 0,
    kIdle = 1,
    kLaneRight = 2,
    kFaster = 3,
    kSlower = 4,
};
inline constexpr int kNumActions = 5;

// Traffic density mode -> inclusive [min, max] HDV count.
std::pair<int, int> hdv_count_range(int density_level);

struct EnvConfig {
    int density_level = 1;  // {1, 2, 3}: low / middle / high traffic
    int n_avs = 4;
    int n_hdvs = -1;  // -1: drawn from the density range at reset; >= 0: fixed
    int episode_steps = 100;
    double decision_dt = 1.0;  // s per meta-action
    int physics_substeps = 15;
    double sensing_range = 150.0;  // m, longitudinal observability limit
    int lanes = 2;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument
};

// IDM car-following parameters for the scripted HDVs.
struct IdmParams {
    double max_accel = 3.0;      // m/s^2
    double comfort_decel = 2.0;  // m/s^2
    double jam_distance = 2.0;   // m
    double time_gap = 1.0;       // s
    double exponent = 4.0;
};

// IDM acceleration with no leader in range.
double idm_free_acceleration(const IdmParams& p, double v, double desired_speed);

// IDM acceleration behind a leader `center_gap` metres ahead (centre to
// centre, ego length subtracted internally) moving at leader_speed.
double idm_acceleration(const IdmParams& p, double v, double desired_speed,
                        double center_gap, double leader_speed);

struct CollisionEvent {
    int a = 0;  // vehicle ids, a < b
    int b = 0;
    bool operator==(const CollisionEvent&) const = default;
};

struct StepResult {
    std::vector<Observation> observations;   // per agent
    std::vector<double> raw_rewards;         // per agent; 0 once done before the step
    std::vector<double> shared_rewards;      // neighbourhood mean of raw rewards
    std::vector<bool> done;                  // per agent, post-step
    std::vector<CollisionEvent> collisions;  // new collisions this step
    std::vector<VehicleState> vehicles;      // post-step snapshot
};

// Deterministic two-lane straight-highway simulator. All randomness is drawn
// at reset(); stepping is a pure function of state and actions.
class HighwayEnv {
public:
    std::vector<Observation> reset(const EnvConfig& config, std::uint64_t seed);
    StepResult step(const std::vector<int>& joint_actions);
    Observation observe(int agent) const;

    // All currently overlapping axis-aligned rectangle pairs, ids ordered a < b.
    std::vector<CollisionEvent> check_collisions() const;

    // IDM acceleration toward the vehicle's desired speed, braking for the
    // nearest same-lane leader. HDVs never change lanes.
    double hdv_acceleration(const VehicleState& hdv) const;

    // Lateral speed commanded by the lane-change controller (0 when settled
    // on the target centerline or crashed).
    double lateral_speed(const VehicleState& vehicle) const;

    static bool rectangles_overlap(const VehicleState& a, const VehicleState& b);

    const std::vector<VehicleState>& vehicles() const { return vehicles_; }
    const EnvConfig& config() const { return config_; }
    const RewardWeights& reward_weights() const { return weights_; }
    int step_count() const { return step_count_; }
    int num_agents() const { return config_.n_avs; }
    bool agent_done(int agent) const { return agent_done_.at(agent); }
    bool all_done() const;

private:
    void apply_meta_action(VehicleState& av, int action) const;
    void run_substeps(std::vector<CollisionEvent>& new_collisions);
    // Vehicle indices of the <= kObsRows-1 nearest neighbours within sensing
    // range, ordered by (|dx|, dx, id).
    std::vector<int> neighbor_indices(int ego_index) const;
    // Distance to the nearest same-lane vehicle ahead, floored and capped.
    double headway_distance(int ego_index) const;

    EnvConfig config_{};
    RewardWeights weights_{};
    IdmParams idm_{};
    std::vector<VehicleState> vehicles_;
    std::vector<bool> agent_done_;
    Rng rng_;
    int step_count_ = 0;
};

}  // namespace platoon
