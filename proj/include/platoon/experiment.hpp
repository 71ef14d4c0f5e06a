#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "platoon/checkpoint.hpp"
#include "platoon/trainer.hpp"

namespace platoon {

// The experiment grid: densities x seeds x algos, each trained for
// `episodes` episodes. env/trainer carry the (possibly overridden) defaults.
struct ExperimentConfig {
    std::vector<int> densities = {1, 2, 3};
    std::vector<std::uint64_t> seeds = {0, 1};
    std::vector<Algo> algos = {Algo::NoisyMadqn, Algo::Madqn};
    int episodes = 200;
    std::string out_dir = "runs";
    int workers = 1;
    EnvConfig env;
    TrainerConfig trainer;

    void validate() const;

    // Strict parse: unknown keys anywhere are rejected.
    static ExperimentConfig from_json_file(const std::filesystem::path& path);
    static ExperimentConfig from_json_text(const std::string& text);
    std::string to_json() const;
};

struct RunOutcome {
    int density = 0;
    std::uint64_t seed = 0;
    Algo algo = Algo::NoisyMadqn;
    std::string id;
    std::filesystem::path dir;
    bool ok = false;
    std::string error;
};

struct ExperimentResult {
    std::vector<RunOutcome> runs;
    std::filesystem::path manifest_path;
    bool all_ok = false;
};

std::string run_id(int density, std::uint64_t seed, Algo algo);

// Runs the whole grid (possibly with worker threads), writing per-run
// train.csv / trace.jsonl / checkpoint.json plus a manifest listing every
// artifact with a content checksum. Failed runs are recorded and skipped.
ExperimentResult run_experiment(const ExperimentConfig& config);

// FNV-1a 64-bit over the file bytes, hex-encoded.
std::string file_checksum(const std::filesystem::path& path);

struct RunCsv {
    int density = 0;
    std::uint64_t seed = 0;
    std::string algo;
    std::vector<double> mean_return;  // indexed by episode - 1
    std::filesystem::path path;
};

RunCsv read_run_csv(const std::filesystem::path& path);

// Five equal episode bins per (density, algo), averaged across seeds.
struct BinnedSummary {
    int episodes = 0;
    std::array<std::pair<int, int>, 5> bins{};  // 1-based inclusive ranges
    struct Row {
        int density = 0;
        std::string algo;
        std::array<double, 5> bin_mean{};
        std::array<bool, 5> best{};  // highest value per (density, bin)
    };
    std::vector<Row> rows;
};

BinnedSummary summarize(const std::vector<RunCsv>& runs);
std::string summary_to_csv(const BinnedSummary& summary);
std::string summary_to_text(const BinnedSummary& summary);

// Finds every runs' train.csv through the manifest.
std::vector<std::filesystem::path> manifest_run_csvs(const std::filesystem::path& out_dir);

struct EvalMetrics {
    int episodes = 0;
    double mean_return = 0.0;
    double collision_rate = 0.0;  // crashed AVs / (n_avs * episodes)
    double mean_speed = 0.0;
    long overtakes = 0;  // HDVs that fell behind the platoon leader
};

// Greedy noise-free rollout of a checkpointed policy.
EvalMetrics evaluate(const QNetworkParams& net, const EnvConfig& env_cfg, int episodes,
                     std::uint64_t seed);
std::string eval_to_json(const EvalMetrics& metrics);

struct AuditResult {
    long steps_checked = 0;
    long collision_av_steps = 0;
    std::vector<std::string> violations;
};

// Checks that every acting AV flagged in a collision pair received a
// vehicle-level reward below `bound` on that step.
AuditResult audit_trace(const std::filesystem::path& trace_path, double bound = -180.0);

}  // namespace platoon
