#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "platoon/batch_kernels.hpp"
#include "platoon/highway_env.hpp"
#include "platoon/noisy_net.hpp"
#include "platoon/replay.hpp"

namespace platoon {

class TraceWriter;

enum class Algo { NoisyMadqn, Madqn };

std::string algo_name(Algo algo);
Algo algo_from_name(const std::string& name);

// Linear anneal over the first decay_episodes episodes, then constant.
struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    int decay_episodes = 150;

    double value(int episode) const {
        if (episode >= decay_episodes) return end;
        return start + (end - start) * static_cast<double>(episode) /
                           static_cast<double>(decay_episodes);
    }
};

struct TrainerConfig {
    double gamma = 0.99;
    double lr = 5e-4;
    int batch_size = 32;          // N_T per agent buffer
    int target_sync_every = 200;  // gradient steps
    int episodes = 200;           // M
    int steps_per_episode = 100;  // T
    int buffer_capacity = 10000;  // per agent
    int warmup_per_buffer = 500;  // stored transitions before training starts
    Algo algo = Algo::NoisyMadqn;
    EpsilonSchedule epsilon;  // baseline only
    double sigma0 = 0.5;
    double reward_scale = 200.0;  // stored r = shared / reward_scale
    bool noisy_encoders = false;
    bool untied_networks = false;
    bool use_openmp = true;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

// Bias-corrected first/second moment running averages.
struct AdamState {
    QGradients m;
    QGradients v;
    long t = 0;
};

void adam_update(QNetworkParams& net, const QGradients& grads, AdamState& state,
                 const TrainerConfig& cfg);

// Online/target pair plus optimizer state for one parameter set.
struct QLearner {
    QNetworkParams online;
    QNetworkParams target;
    AdamState adam;
};

QLearner make_qlearner(const NetArch& arch, double sigma0, Rng& rng);

// Resamples all noisy-layer noise, evaluates Q and takes the greedy action
// (ties -> lowest index). No epsilon branch in this path.
int select_action(const QNetworkParams& net, const Observation& obs, Rng& rng);

// Baseline: uniform with probability epsilon, otherwise greedy over the
// noise-free (mu-only) network.
int select_action_baseline(const QNetworkParams& net, const Observation& obs,
                           double epsilon, Rng& rng);

// y = r for terminal transitions, else r + gamma * max_a Q_target(s', a) under
// the single target-noise sample of this training step.
std::vector<double> td_targets(const QNetworkParams& target_net, const NetNoise& target_noise,
                               std::span<const Transition* const> batch, double gamma,
                               bool use_openmp);

// Copies online -> target when step_count is a positive multiple of `every`.
// Returns true when a copy happened.
bool maybe_sync_target(const QNetworkParams& online, QNetworkParams& target,
                       long step_count, int every);

// One gradient update: samples batch_size transitions from every buffer,
// resamples online and target noise (zero in Madqn mode), minimizes the mean
// squared TD error, applies one Adam step. Returns the pre-update loss, or
// nullopt while any buffer is below the warm-up threshold.
std::optional<double> dqn_train_step(QLearner& learner,
                                     std::span<const ReplayBuffer* const> buffers,
                                     const TrainerConfig& cfg, Rng& rng);

struct EpisodeRecord {
    int episode = 0;  // 1-based
    std::vector<double> agent_return;
    double mean_return = 0.0;
    double loss_mean = 0.0;
    int collisions = 0;
    double avg_speed = 0.0;
};

struct TrainingRecord {
    std::vector<EpisodeRecord> episodes;
    std::vector<QNetworkParams> final_nets;  // 1 entry (shared) or n_avs (untied)
};

// Algorithm: per environment step, every live agent picks an action through
// the shared network with its own fresh noise sample, the transition goes to
// its own buffer, one train step runs, and the target syncs on schedule.
TrainingRecord run_training(const EnvConfig& env_cfg, const TrainerConfig& cfg,
                            std::uint64_t seed, TraceWriter* trace = nullptr);

// Run CSV: one row per episode.
std::string training_csv(const TrainingRecord& record, std::uint64_t seed, int density,
                         Algo algo);

}  // namespace platoon
