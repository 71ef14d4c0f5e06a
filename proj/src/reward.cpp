#include "platoon/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace platoon {

double overtake_speed_reward(double v, const RewardWeights& w) {
    const double r = (v - w.v_min) / (w.v_max - w.v_min);
    return std::clamp(r, 0.0, 1.0);
}

double collision_penalty(bool collided) { return collided ? -1.0 : 0.0; }

double headway_reward(double d_headway, double v, const RewardWeights& w) {
    return std::log(d_headway / (w.t_h * v));
}

double following_reward(double gap_dx, bool same_lane, const RewardWeights& w) {
    const double gap = std::abs(gap_dx);
    double r = 0.0;
    if (gap <= w.follow_gap_limit()) {
        r += 0.3 * w.k1 * gap / (w.t_h * w.v_max);
    }
    if (same_lane) {
        r += 0.7 * w.k2;
    }
    return r;
}

double following_reward(const VehicleState& ego, const VehicleState& predecessor,
                        const RewardWeights& w) {
    return following_reward(predecessor.x - ego.x, ego.lane == predecessor.lane, w);
}

double vehicle_reward(double r_c, double r_os, double r_h, double r_f,
                      const RewardWeights& w) {
    return w.w_c * r_c + w.w_os * r_os + w.w_h * r_h + w.w_f * r_f;
}

std::vector<double> local_shared_reward(
    const std::vector<double>& raw_rewards,
    const std::vector<std::vector<int>>& neighbor_sets) {
    if (raw_rewards.size() != neighbor_sets.size()) {
        throw std::invalid_argument("local_shared_reward: size mismatch");
    }
    const int n = static_cast<int>(raw_rewards.size());
    std::vector<double> shared(raw_rewards.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& set = neighbor_sets[i];
        if (std::find(set.begin(), set.end(), i) == set.end()) {
            throw std::invalid_argument(
                "local_shared_reward: neighbor set must contain the ego agent");
        }
        double sum = 0.0;
        for (int j : set) {
            if (j < 0 || j >= n) {
                throw std::invalid_argument("local_shared_reward: agent index out of range");
            }
            sum += raw_rewards[j];
        }
        shared[i] = sum / static_cast<double>(set.size());
    }
    return shared;
}

}  // namespace platoon
