#pragma once

#include <vector>

#include "platoon/vehicle.hpp"

namespace platoon {

// Weight scalars and thresholds of the per-vehicle reward terms.
struct RewardWeights {
    double w_c = 200.0;   // collision
    double w_os = 1.0;    // overtake / speed
    double w_h = 4.0;     // time headway
    double w_f = 5.0;     // platoon following
    double k1 = 0.25;     // gap-keeping damping factor
    double k2 = 0.3;      // lane-keeping damping factor
    double t_h = 1.2;     // time-headway threshold, s
    double v_min = 20.0;  // m/s
    double v_max = 30.0;  // m/s

    // Largest gap the following term still rewards: 2 * v_max = 60 m.
    double follow_gap_limit() const { return 2.0 * v_max; }
    // Headway distance with zero log-reward at v_max: t_h * v_max = 36 m.
    double danger_distance() const { return t_h * v_max; }
};

// (v - v_min) / (v_max - v_min), clipped to [0, 1].
double overtake_speed_reward(double v, const RewardWeights& w = {});

// -1 on collision, 0 otherwise.
double collision_penalty(bool collided);

// ln(d_headway / (t_h * v)). Negative below the threshold headway, positive
// above it. Caller guarantees d_headway > 0 and v > 0.
double headway_reward(double d_headway, double v, const RewardWeights& w = {});

// Sum of a gap component (0.3 * k1 * |dx| / (t_h * v_max) while |dx| <= 2 v_max)
// and a lane component (0.7 * k2 when ego and predecessor share a lane).
double following_reward(double gap_dx, bool same_lane, const RewardWeights& w = {});
double following_reward(const VehicleState& ego, const VehicleState& predecessor,
                        const RewardWeights& w = {});

// w_c*r_c + w_os*r_os + w_h*r_h + w_f*r_f.
double vehicle_reward(double r_c, double r_os, double r_h, double r_f,
                      const RewardWeights& w = {});

// Neighbourhood-averaged reward sharing: shared_i = mean of raw_j over the
// ego's neighbour set V_i. Every neighbor_sets[i] must contain i itself.
std::vector<double> local_shared_reward(
    const std::vector<double>& raw_rewards,
    const std::vector<std::vector<int>>& neighbor_sets);

}  // namespace platoon
