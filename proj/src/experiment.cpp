#include "platoon/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "platoon/trace.hpp"

#ifndef PLATOON_GIT_REV
#define PLATOON_GIT_REV "unknown"
#endif

namespace platoon {
namespace {

using nlohmann::json;

constexpr const char* kCodeVersion = "0.1.0+" PLATOON_GIT_REV;

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& context) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.contains(key)) {
            throw std::invalid_argument("unknown key '" + key + "' in " + context);
        }
    }
}

void apply_env_overrides(const json& j, EnvConfig& env) {
    reject_unknown_keys(
        j, {"episode_steps", "decision_dt", "physics_substeps", "sensing_range", "n_hdvs"},
        "env config");
    if (j.contains("episode_steps")) env.episode_steps = j.at("episode_steps").get<int>();
    if (j.contains("decision_dt")) env.decision_dt = j.at("decision_dt").get<double>();
    if (j.contains("physics_substeps")) {
        env.physics_substeps = j.at("physics_substeps").get<int>();
    }
    if (j.contains("sensing_range")) env.sensing_range = j.at("sensing_range").get<double>();
    if (j.contains("n_hdvs")) env.n_hdvs = j.at("n_hdvs").get<int>();
}

void apply_trainer_overrides(const json& j, TrainerConfig& trainer) {
    reject_unknown_keys(j,
                        {"gamma", "lr", "batch_size", "target_sync_every", "buffer_capacity",
                         "warmup", "sigma0", "reward_scale", "noisy_encoders",
                         "untied_networks", "use_openmp", "epsilon_start", "epsilon_end",
                         "epsilon_decay_episodes"},
                        "trainer config");
    if (j.contains("gamma")) trainer.gamma = j.at("gamma").get<double>();
    if (j.contains("lr")) trainer.lr = j.at("lr").get<double>();
    if (j.contains("batch_size")) trainer.batch_size = j.at("batch_size").get<int>();
    if (j.contains("target_sync_every")) {
        trainer.target_sync_every = j.at("target_sync_every").get<int>();
    }
    if (j.contains("buffer_capacity")) {
        trainer.buffer_capacity = j.at("buffer_capacity").get<int>();
    }
    if (j.contains("warmup")) trainer.warmup_per_buffer = j.at("warmup").get<int>();
    if (j.contains("sigma0")) trainer.sigma0 = j.at("sigma0").get<double>();
    if (j.contains("reward_scale")) trainer.reward_scale = j.at("reward_scale").get<double>();
    if (j.contains("noisy_encoders")) {
        trainer.noisy_encoders = j.at("noisy_encoders").get<bool>();
    }
    if (j.contains("untied_networks")) {
        trainer.untied_networks = j.at("untied_networks").get<bool>();
    }
    if (j.contains("use_openmp")) trainer.use_openmp = j.at("use_openmp").get<bool>();
    if (j.contains("epsilon_start")) trainer.epsilon.start = j.at("epsilon_start").get<double>();
    if (j.contains("epsilon_end")) trainer.epsilon.end = j.at("epsilon_end").get<double>();
    if (j.contains("epsilon_decay_episodes")) {
        trainer.epsilon.decay_episodes = j.at("epsilon_decay_episodes").get<int>();
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (densities.empty()) throw std::invalid_argument("densities must not be empty");
    for (int d : densities) hdv_count_range(d);
    if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
    if (algos.empty()) throw std::invalid_argument("algos must not be empty");
    if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    env.validate();
    trainer.validate();
}

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed config JSON: ") + e.what());
    }
    reject_unknown_keys(
        j, {"densities", "seeds", "algos", "episodes", "out", "workers", "env", "trainer"},
        "experiment config");
    ExperimentConfig cfg;
    if (j.contains("densities")) cfg.densities = j.at("densities").get<std::vector<int>>();
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("algos")) {
        cfg.algos.clear();
        for (const auto& a : j.at("algos")) {
            cfg.algos.push_back(algo_from_name(a.get<std::string>()));
        }
    }
    if (j.contains("episodes")) cfg.episodes = j.at("episodes").get<int>();
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
    if (j.contains("env")) apply_env_overrides(j.at("env"), cfg.env);
    if (j.contains("trainer")) apply_trainer_overrides(j.at("trainer"), cfg.trainer);
    return cfg;
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["densities"] = densities;
    j["seeds"] = seeds;
    json algo_names = json::array();
    for (Algo a : algos) algo_names.push_back(algo_name(a));
    j["algos"] = algo_names;
    j["episodes"] = episodes;
    j["out"] = out_dir;
    j["workers"] = workers;
    j["env"] = {{"episode_steps", env.episode_steps},
                {"decision_dt", env.decision_dt},
                {"physics_substeps", env.physics_substeps},
                {"sensing_range", env.sensing_range},
                {"n_hdvs", env.n_hdvs}};
    j["trainer"] = {{"gamma", trainer.gamma},
                    {"lr", trainer.lr},
                    {"batch_size", trainer.batch_size},
                    {"target_sync_every", trainer.target_sync_every},
                    {"buffer_capacity", trainer.buffer_capacity},
                    {"warmup", trainer.warmup_per_buffer},
                    {"sigma0", trainer.sigma0},
                    {"reward_scale", trainer.reward_scale},
                    {"noisy_encoders", trainer.noisy_encoders},
                    {"untied_networks", trainer.untied_networks},
                    {"use_openmp", trainer.use_openmp},
                    {"epsilon_start", trainer.epsilon.start},
                    {"epsilon_end", trainer.epsilon.end},
                    {"epsilon_decay_episodes", trainer.epsilon.decay_episodes}};
    return j.dump(2);
}

std::string run_id(int density, std::uint64_t seed, Algo algo) {
    return "d" + std::to_string(density) + "_s" + std::to_string(seed) + "_" +
           algo_name(algo);
}

std::string file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot checksum " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::filesystem::path out_dir(config.out_dir);
    std::filesystem::create_directories(out_dir);

    std::vector<RunOutcome> runs;
    for (int density : config.densities) {
        for (std::uint64_t seed : config.seeds) {
            for (Algo algo : config.algos) {
                RunOutcome run;
                run.density = density;
                run.seed = seed;
                run.algo = algo;
                run.id = run_id(density, seed, algo);
                run.dir = out_dir / run.id;
                runs.push_back(std::move(run));
            }
        }
    }

    auto execute = [&config](RunOutcome& run) {
        try {
            std::filesystem::create_directories(run.dir);
            EnvConfig env_cfg = config.env;
            env_cfg.density_level = run.density;
            TrainerConfig trainer_cfg = config.trainer;
            trainer_cfg.algo = run.algo;
            trainer_cfg.episodes = config.episodes;
            trainer_cfg.steps_per_episode = env_cfg.episode_steps;

            TraceWriter trace(run.dir / "trace.jsonl");
            const TrainingRecord record = run_training(env_cfg, trainer_cfg, run.seed, &trace);

            std::ofstream csv(run.dir / "train.csv");
            if (!csv) throw std::runtime_error("cannot write train.csv");
            csv << training_csv(record, run.seed, run.density, run.algo);
            csv.close();

            save_checkpoint(record.final_nets.front(), run.dir / "checkpoint.json");
            run.ok = true;
        } catch (const std::exception& e) {
            run.ok = false;
            run.error = e.what();
        }
    };

    if (config.workers <= 1 || runs.size() <= 1) {
        for (auto& run : runs) execute(run);
    } else {
        std::atomic<std::size_t> next{0};
        const int n_workers = std::min<int>(config.workers, static_cast<int>(runs.size()));
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back([&runs, &next, &execute] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= runs.size()) return;
                    execute(runs[i]);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    // Manifest: config echo, code version, every artifact with a checksum.
    json manifest;
    manifest["code_version"] = kCodeVersion;
    manifest["config"] = json::parse(config.to_json());
    json jruns = json::array();
    for (const auto& run : runs) {
        json jr;
        jr["id"] = run.id;
        jr["density"] = run.density;
        jr["seed"] = run.seed;
        jr["algo"] = algo_name(run.algo);
        jr["status"] = run.ok ? "ok" : "failed";
        if (!run.ok) jr["error"] = run.error;
        json files = json::object();
        for (const char* name : {"train.csv", "trace.jsonl", "checkpoint.json"}) {
            const auto path = run.dir / name;
            if (std::filesystem::exists(path)) {
                files[name] = {{"path", path.string()}, {"fnv1a64", file_checksum(path)}};
            }
        }
        jr["files"] = std::move(files);
        jruns.push_back(std::move(jr));
    }
    manifest["runs"] = std::move(jruns);

    ExperimentResult result;
    result.runs = std::move(runs);
    result.manifest_path = out_dir / "manifest.json";
    std::ofstream mf(result.manifest_path);
    if (!mf) throw std::runtime_error("cannot write manifest.json");
    mf << manifest.dump(2) << "\n";
    result.all_ok =
        std::all_of(result.runs.begin(), result.runs.end(), [](const auto& r) { return r.ok; });
    return result;
}

RunCsv read_run_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read run CSV: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty run CSV: " + path.string());
    const auto header = split_csv_line(line);
    const auto col = [&header, &path](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw std::runtime_error(path.string() + ": missing column " + name);
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_episode = col("episode");
    const std::size_t c_seed = col("seed");
    const std::size_t c_density = col("density");
    const std::size_t c_algo = col("algo");
    const std::size_t c_mean = col("mean_return");

    RunCsv run;
    run.path = path;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < header.size()) {
            throw std::runtime_error(path.string() + ": short row at line " +
                                     std::to_string(line_no));
        }
        const int episode = std::stoi(fields[c_episode]);
        if (episode != static_cast<int>(run.mean_return.size()) + 1) {
            throw std::runtime_error(path.string() + ": episodes not contiguous at line " +
                                     std::to_string(line_no));
        }
        run.density = std::stoi(fields[c_density]);
        run.seed = std::stoull(fields[c_seed]);
        run.algo = fields[c_algo];
        run.mean_return.push_back(std::stod(fields[c_mean]));
    }
    if (run.mean_return.empty()) {
        throw std::runtime_error(path.string() + ": no episode rows");
    }
    return run;
}

BinnedSummary summarize(const std::vector<RunCsv>& runs) {
    if (runs.empty()) throw std::invalid_argument("summarize: no runs");
    const int episodes = static_cast<int>(runs.front().mean_return.size());
    for (const auto& run : runs) {
        if (static_cast<int>(run.mean_return.size()) != episodes) {
            throw std::invalid_argument("summarize: runs cover different episode counts");
        }
    }
    if (episodes % 5 != 0) {
        throw std::invalid_argument("summarize: episode count must be divisible by 5");
    }
    const int bin_len = episodes / 5;

    BinnedSummary summary;
    summary.episodes = episodes;
    for (int b = 0; b < 5; ++b) {
        summary.bins[b] = {b * bin_len + 1, (b + 1) * bin_len};
    }

    // (density, algo) -> flat list of per-(episode, seed) mean returns per bin.
    std::map<std::pair<int, std::string>, std::array<std::pair<double, long>, 5>> acc;
    for (const auto& run : runs) {
        auto& bins = acc[{run.density, run.algo}];
        for (int e = 0; e < episodes; ++e) {
            auto& [sum, count] = bins[e / bin_len];
            sum += run.mean_return[e];
            ++count;
        }
    }

    for (const auto& [key, bins] : acc) {
        BinnedSummary::Row row;
        row.density = key.first;
        row.algo = key.second;
        for (int b = 0; b < 5; ++b) {
            row.bin_mean[b] = bins[b].first / static_cast<double>(bins[b].second);
        }
        summary.rows.push_back(std::move(row));
    }
    // Table-2 ordering: density ascending, noisy-madqn before madqn.
    std::sort(summary.rows.begin(), summary.rows.end(), [](const auto& a, const auto& b) {
        if (a.density != b.density) return a.density < b.density;
        return a.algo > b.algo;  // "noisy-madqn" > "madqn" lexicographically
    });
    // Flag the winner per (density, bin).
    for (auto& row : summary.rows) {
        for (int b = 0; b < 5; ++b) {
            bool best = true;
            for (const auto& other : summary.rows) {
                if (other.density == row.density && other.bin_mean[b] > row.bin_mean[b]) {
                    best = false;
                    break;
                }
            }
            row.best[b] = best;
        }
    }
    return summary;
}

std::string summary_to_csv(const BinnedSummary& summary) {
    std::string csv = "density,algo";
    for (const auto& [lo, hi] : summary.bins) {
        csv += ",ep" + std::to_string(lo) + "_" + std::to_string(hi);
    }
    for (int b = 1; b <= 5; ++b) csv += ",best_bin" + std::to_string(b);
    csv += "\n";
    for (const auto& row : summary.rows) {
        csv += std::to_string(row.density) + "," + row.algo;
        for (double v : row.bin_mean) csv += "," + format_double(v);
        for (bool b : row.best) csv += b ? ",1" : ",0";
        csv += "\n";
    }
    return csv;
}

std::string summary_to_text(const BinnedSummary& summary) {
    std::string text =
        "# episode reward = mean over agents of the episode sum of shared (unscaled) "
        "per-step rewards; bins average episodes across seeds; '*' marks the higher "
        "value per (density, bin)\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-8s %-14s", "density", "algo");
    text += buf;
    for (const auto& [lo, hi] : summary.bins) {
        const std::string head = std::to_string(lo) + "-" + std::to_string(hi);
        std::snprintf(buf, sizeof(buf), " %12s", head.c_str());
        text += buf;
    }
    text += "\n";
    for (const auto& row : summary.rows) {
        std::snprintf(buf, sizeof(buf), "%-8d %-14s", row.density, row.algo.c_str());
        text += buf;
        for (int b = 0; b < 5; ++b) {
            std::snprintf(buf, sizeof(buf), "%11.2f%s", row.bin_mean[b],
                          row.best[b] ? "*" : " ");
            text += buf;
            text += " ";
        }
        text += "\n";
    }
    return text;
}

std::vector<std::filesystem::path> manifest_run_csvs(const std::filesystem::path& out_dir) {
    const auto manifest_path = out_dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("cannot read " + manifest_path.string());
    json manifest;
    in >> manifest;
    std::vector<std::filesystem::path> csvs;
    for (const auto& run : manifest.at("runs")) {
        if (run.at("status").get<std::string>() != "ok") continue;
        csvs.push_back(run.at("files").at("train.csv").at("path").get<std::string>());
    }
    return csvs;
}

EvalMetrics evaluate(const QNetworkParams& net, const EnvConfig& env_cfg, int episodes,
                     std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
    EvalMetrics metrics;
    metrics.episodes = episodes;
    const NetNoise noise = NetNoise::zero(net);
    HighwayEnv env;
    double return_sum = 0.0;
    double speed_sum = 0.0;
    long speed_count = 0;
    long crashed_avs = 0;

    for (int ep = 0; ep < episodes; ++ep) {
        std::vector<Observation> obs =
            env.reset(env_cfg, splitmix64(splitmix64(seed ^ 0x6576616cULL) +
                                          static_cast<std::uint64_t>(ep)));
        const int n = env.num_agents();
        // HDVs ahead of the leader at reset; count each one that falls behind.
        std::vector<bool> was_ahead;
        std::vector<bool> counted;
        for (const auto& v : env.vehicles()) {
            if (v.kind == VehicleKind::HDV) {
                was_ahead.push_back(v.x > env.vehicles().front().x);
                counted.push_back(false);
            }
        }
        std::vector<double> returns(n, 0.0);
        for (int t = 0; t < env_cfg.episode_steps && !env.all_done(); ++t) {
            std::vector<int> actions(n, kIdle);
            std::vector<bool> acted(n, false);
            for (int i = 0; i < n; ++i) {
                if (env.agent_done(i)) continue;
                acted[i] = true;
                actions[i] = argmax_action(q_forward(net, noise, obs[i]));
            }
            const StepResult sr = env.step(actions);
            for (int i = 0; i < n; ++i) {
                if (!acted[i]) continue;
                returns[i] += sr.shared_rewards[i];
                speed_sum += sr.vehicles[i].v;
                ++speed_count;
            }
            const double leader_x = sr.vehicles.front().x;
            int h = 0;
            for (const auto& v : sr.vehicles) {
                if (v.kind != VehicleKind::HDV) continue;
                if (was_ahead[h] && !counted[h] && v.x < leader_x) {
                    counted[h] = true;
                    ++metrics.overtakes;
                }
                ++h;
            }
            obs = sr.observations;
        }
        for (const auto& v : env.vehicles()) {
            if (v.kind == VehicleKind::AV && v.crashed) ++crashed_avs;
        }
        double sum = 0.0;
        for (double r : returns) sum += r;
        return_sum += sum / n;
    }

    metrics.mean_return = return_sum / episodes;
    metrics.collision_rate = static_cast<double>(crashed_avs) /
                             (static_cast<double>(env_cfg.n_avs) * episodes);
    metrics.mean_speed = speed_count > 0 ? speed_sum / speed_count : 0.0;
    return metrics;
}

std::string eval_to_json(const EvalMetrics& metrics) {
    json j;
    j["episodes"] = metrics.episodes;
    j["mean_return"] = metrics.mean_return;
    j["collision_rate"] = metrics.collision_rate;
    j["mean_speed"] = metrics.mean_speed;
    j["overtakes"] = metrics.overtakes;
    return j.dump(2);
}

AuditResult audit_trace(const std::filesystem::path& trace_path, double bound) {
    AuditResult result;
    const auto steps = read_trace(trace_path);
    for (const auto& step : steps) {
        ++result.steps_checked;
        for (const auto& c : step.collisions) {
            for (const int id : {c.a, c.b}) {
                const auto av = std::find_if(step.avs.begin(), step.avs.end(),
                                             [id](const TraceAv& a) { return a.id == id; });
                if (av == step.avs.end()) continue;  // HDV or already-done AV
                ++result.collision_av_steps;
                if (!(av->raw_reward < bound)) {
                    result.violations.push_back(
                        trace_path.string() + ": episode " + std::to_string(step.episode) +
                        " step " + std::to_string(step.step) + " AV " + std::to_string(id) +
                        " collided with raw_reward " + std::to_string(av->raw_reward) +
                        " >= " + std::to_string(bound));
                }
            }
        }
    }
    return result;
}

}  // namespace platoon
