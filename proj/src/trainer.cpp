#include "platoon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "platoon/trace.hpp"

namespace platoon {
namespace {

constexpr std::uint64_t kEpisodeSeedSalt = 0x9e3779b97f4a7c15ULL;

std::uint64_t episode_seed(std::uint64_t run_seed, int episode) {
    return splitmix64(splitmix64(run_seed ^ kEpisodeSeedSalt) +
                      static_cast<std::uint64_t>(episode));
}

void adam_update_array(std::span<double> param, std::span<const double> grad,
                       std::span<double> m, std::span<double> v, double lr_t,
                       double beta1, double beta2, double eps) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        param[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps);
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

std::string algo_name(Algo algo) {
    return algo == Algo::NoisyMadqn ? "noisy-madqn" : "madqn";
}

Algo algo_from_name(const std::string& name) {
    if (name == "noisy-madqn") return Algo::NoisyMadqn;
    if (name == "madqn") return Algo::Madqn;
    throw std::invalid_argument("unknown algo '" + name + "' (use noisy-madqn or madqn)");
}

void TrainerConfig::validate() const {
    if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must be in (0, 1]");
    if (lr <= 0.0) throw std::invalid_argument("lr must be > 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (target_sync_every < 1) throw std::invalid_argument("target_sync_every must be >= 1");
    if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    if (steps_per_episode < 1) throw std::invalid_argument("steps_per_episode must be >= 1");
    if (buffer_capacity < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
    if (warmup_per_buffer < 1) throw std::invalid_argument("warmup_per_buffer must be >= 1");
    if (sigma0 < 0.0) throw std::invalid_argument("sigma0 must be >= 0");
    if (reward_scale <= 0.0) throw std::invalid_argument("reward_scale must be > 0");
}

void adam_update(QNetworkParams& net, const QGradients& grads, AdamState& state,
                 const TrainerConfig& cfg) {
    ++state.t;
    const double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
    const double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
    const double lr_t = cfg.lr * std::sqrt(bias2) / bias1;

    const auto params = net.layers();
    const auto gs = grads.layers();
    const auto ms = state.m.layers();
    const auto vs = state.v.layers();
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam_update_array(params[i]->mu_w.a, gs[i]->mu_w.a, ms[i]->mu_w.a, vs[i]->mu_w.a,
                          lr_t, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        adam_update_array(params[i]->mu_b, gs[i]->mu_b, ms[i]->mu_b, vs[i]->mu_b, lr_t,
                          cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        if (params[i]->noisy) {
            adam_update_array(params[i]->sigma_w.a, gs[i]->sigma_w.a, ms[i]->sigma_w.a,
                              vs[i]->sigma_w.a, lr_t, cfg.adam_beta1, cfg.adam_beta2,
                              cfg.adam_eps);
            adam_update_array(params[i]->sigma_b, gs[i]->sigma_b, ms[i]->sigma_b,
                              vs[i]->sigma_b, lr_t, cfg.adam_beta1, cfg.adam_beta2,
                              cfg.adam_eps);
        }
    }
}

QLearner make_qlearner(const NetArch& arch, double sigma0, Rng& rng) {
    QLearner learner;
    learner.online = init_network(arch, sigma0, rng);
    learner.target = learner.online;
    learner.adam.m = make_gradients(learner.online);
    learner.adam.v = make_gradients(learner.online);
    return learner;
}

int select_action(const QNetworkParams& net, const Observation& obs, Rng& rng) {
    const NetNoise noise = sample_net_noise(net, rng);
    return argmax_action(q_forward(net, noise, obs));
}

int select_action_baseline(const QNetworkParams& net, const Observation& obs,
                           double epsilon, Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) {
        throw std::invalid_argument("epsilon must be in [0, 1]");
    }
    if (rng.uniform() < epsilon) {
        return static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(net.arch.actions)));
    }
    return argmax_action(q_forward(net, NetNoise::zero(net), obs));
}

std::vector<double> td_targets(const QNetworkParams& target_net, const NetNoise& target_noise,
                               std::span<const Transition* const> batch, double gamma,
                               bool use_openmp) {
    const EffectiveNet eff = materialize(target_net, target_noise);
    std::vector<const Observation*> next_obs(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) next_obs[i] = &batch[i]->s_next;
    std::vector<double> max_q(batch.size(), 0.0);
    if (use_openmp) {
        batch_max_q_omp(eff, next_obs, max_q);
    } else {
        batch_max_q_serial(eff, next_obs, max_q);
    }
    std::vector<double> targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        targets[i] = batch[i]->done ? batch[i]->r : batch[i]->r + gamma * max_q[i];
    }
    return targets;
}

bool maybe_sync_target(const QNetworkParams& online, QNetworkParams& target,
                       long step_count, int every) {
    if (step_count > 0 && step_count % every == 0) {
        target = online;
        return true;
    }
    return false;
}

std::optional<double> dqn_train_step(QLearner& learner,
                                     std::span<const ReplayBuffer* const> buffers,
                                     const TrainerConfig& cfg, Rng& rng) {
    for (const ReplayBuffer* buffer : buffers) {
        if (static_cast<int>(buffer->size()) < cfg.warmup_per_buffer) return std::nullopt;
    }

    std::vector<const Transition*> batch;
    batch.reserve(buffers.size() * cfg.batch_size);
    for (const ReplayBuffer* buffer : buffers) {
        for (int j = 0; j < cfg.batch_size; ++j) batch.push_back(&buffer->sample(rng));
    }

    const bool noisy = cfg.algo == Algo::NoisyMadqn;
    const NetNoise online_noise = noisy ? sample_net_noise(learner.online, rng)
                                        : NetNoise::zero(learner.online);
    const NetNoise target_noise = noisy ? sample_net_noise(learner.target, rng)
                                        : NetNoise::zero(learner.target);

    const std::vector<double> targets =
        td_targets(learner.target, target_noise, batch, cfg.gamma, cfg.use_openmp);

    std::vector<TdSample> samples(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        samples[i] = {&batch[i]->s, batch[i]->a, targets[i]};
    }

    const EffectiveNet eff = materialize(learner.online, online_noise);
    QGradients grads = make_gradients(learner.online);
    const double loss =
        cfg.use_openmp
            ? batch_td_backward_omp(learner.online, online_noise, eff, samples, grads)
            : batch_td_backward_serial(learner.online, online_noise, eff, samples, grads);

    adam_update(learner.online, grads, learner.adam, cfg);
    return loss;
}

TrainingRecord run_training(const EnvConfig& env_cfg, const TrainerConfig& cfg,
                            std::uint64_t seed, TraceWriter* trace) {
    env_cfg.validate();
    cfg.validate();

    const int n = env_cfg.n_avs;
    Rng rng(splitmix64(seed ^ 0x747261696e6572ULL));  // trainer stream

    NetArch arch;
    arch.noisy_encoders = cfg.noisy_encoders;
    const int n_learners = cfg.untied_networks ? n : 1;
    std::vector<QLearner> learners;
    learners.reserve(n_learners);
    for (int g = 0; g < n_learners; ++g) {
        learners.push_back(make_qlearner(arch, cfg.sigma0, rng));
    }
    auto learner_for = [&](int agent) -> QLearner& {
        return learners[cfg.untied_networks ? agent : 0];
    };

    std::vector<ReplayBuffer> buffers(n, ReplayBuffer(cfg.buffer_capacity));
    HighwayEnv env;
    long grad_steps = 0;

    TrainingRecord record;
    record.episodes.reserve(cfg.episodes);
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        std::vector<Observation> obs = env.reset(env_cfg, episode_seed(seed, ep));
        const double epsilon = cfg.epsilon.value(ep);

        std::vector<double> returns(n, 0.0);
        double loss_sum = 0.0;
        long loss_count = 0;
        double speed_sum = 0.0;
        long speed_count = 0;
        int collisions = 0;

        for (int t = 0; t < cfg.steps_per_episode && !env.all_done(); ++t) {
            std::vector<int> actions(n, kIdle);
            std::vector<bool> acted(n, false);
            for (int i = 0; i < n; ++i) {
                if (env.agent_done(i)) continue;
                acted[i] = true;
                actions[i] = cfg.algo == Algo::NoisyMadqn
                                 ? select_action(learner_for(i).online, obs[i], rng)
                                 : select_action_baseline(learner_for(i).online, obs[i],
                                                          epsilon, rng);
            }

            const StepResult sr = env.step(actions);
            for (int i = 0; i < n; ++i) {
                if (!acted[i]) continue;
                buffers[i].push({obs[i], actions[i], sr.shared_rewards[i] / cfg.reward_scale,
                                 sr.observations[i], sr.done[i]});
                returns[i] += sr.shared_rewards[i];
                speed_sum += sr.vehicles[i].v;
                ++speed_count;
                if (sr.vehicles[i].crashed) ++collisions;
            }

            bool stepped = false;
            if (cfg.untied_networks) {
                double sum = 0.0;
                int cnt = 0;
                for (int i = 0; i < n; ++i) {
                    const ReplayBuffer* own[] = {&buffers[i]};
                    if (auto loss = dqn_train_step(learners[i], own, cfg, rng)) {
                        sum += *loss;
                        ++cnt;
                    }
                }
                if (cnt > 0) {
                    stepped = true;
                    loss_sum += sum / cnt;
                    ++loss_count;
                }
            } else {
                std::vector<const ReplayBuffer*> all(n);
                for (int i = 0; i < n; ++i) all[i] = &buffers[i];
                if (auto loss = dqn_train_step(learners[0], all, cfg, rng)) {
                    stepped = true;
                    loss_sum += *loss;
                    ++loss_count;
                }
            }
            if (stepped) {
                ++grad_steps;
                for (auto& learner : learners) {
                    maybe_sync_target(learner.online, learner.target, grad_steps,
                                      cfg.target_sync_every);
                }
            }

            if (trace) trace->write_step(ep, t, sr, actions, acted);
            obs = sr.observations;
        }

        EpisodeRecord er;
        er.episode = ep + 1;
        er.agent_return = returns;
        double sum = 0.0;
        for (double r : returns) sum += r;
        er.mean_return = sum / n;
        er.loss_mean = loss_count > 0 ? loss_sum / loss_count : 0.0;
        er.collisions = collisions;
        er.avg_speed = speed_count > 0 ? speed_sum / speed_count : 0.0;
        record.episodes.push_back(std::move(er));
    }

    record.final_nets.reserve(learners.size());
    for (auto& learner : learners) record.final_nets.push_back(std::move(learner.online));
    return record;
}

std::string training_csv(const TrainingRecord& record, std::uint64_t seed, int density,
                         Algo algo) {
    std::string csv =
        "episode,seed,density,algo,return_agent_1,return_agent_2,return_agent_3,"
        "return_agent_4,mean_return,loss_mean,collisions,avg_speed\n";
    for (const auto& ep : record.episodes) {
        csv += std::to_string(ep.episode);
        csv += ',';
        csv += std::to_string(seed);
        csv += ',';
        csv += std::to_string(density);
        csv += ',';
        csv += algo_name(algo);
        for (int i = 0; i < 4; ++i) {
            csv += ',';
            csv += i < static_cast<int>(ep.agent_return.size())
                       ? format_double(ep.agent_return[i])
                       : "nan";
        }
        csv += ',';
        csv += format_double(ep.mean_return);
        csv += ',';
        csv += format_double(ep.loss_mean);
        csv += ',';
        csv += std::to_string(ep.collisions);
        csv += ',';
        csv += format_double(ep.avg_speed);
        csv += '\n';
    }
    return csv;
}

}  // namespace platoon
