#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "platoon/experiment.hpp"
#include "platoon/render_svg.hpp"

namespace fs = std::filesystem;
using namespace platoon;

namespace {

int cmd_train(const std::string& config_path, int density, const std::string& algo,
              int episodes, const std::vector<std::uint64_t>& seeds, const std::string& out,
              int workers) {
    ExperimentConfig cfg = config_path.empty()
                               ? ExperimentConfig{}
                               : ExperimentConfig::from_json_file(config_path);
    if (density != 0) cfg.densities = {density};
    if (!algo.empty()) cfg.algos = {algo_from_name(algo)};
    if (episodes != 0) cfg.episodes = episodes;
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!out.empty()) cfg.out_dir = out;
    if (workers != 0) cfg.workers = workers;

    const ExperimentResult result = run_experiment(cfg);
    for (const auto& run : result.runs) {
        std::cout << (run.ok ? "[ok]     " : "[failed] ") << run.id;
        if (!run.ok) std::cout << "  " << run.error;
        std::cout << "\n";
    }
    std::cout << "manifest: " << result.manifest_path.string() << "\n";
    return result.all_ok ? 0 : 1;
}

int cmd_summarize(const std::vector<std::string>& csvs, const std::string& out) {
    std::vector<RunCsv> runs;
    fs::path out_dir = out.empty() ? fs::path(".") : fs::path(out);
    if (csvs.empty()) {
        if (out.empty()) {
            throw std::invalid_argument("summarize needs CSV paths or --out with a manifest");
        }
        for (const auto& path : manifest_run_csvs(out_dir)) {
            runs.push_back(read_run_csv(path));
        }
    } else {
        for (const auto& path : csvs) runs.push_back(read_run_csv(path));
    }
    const BinnedSummary summary = summarize(runs);
    std::ofstream csv_out(out_dir / "summary.csv");
    csv_out << summary_to_csv(summary);
    std::ofstream text_out(out_dir / "summary.txt");
    const std::string text = summary_to_text(summary);
    text_out << text;
    std::cout << text;
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, int density, int episodes,
                 std::uint64_t seed, const std::string& out) {
    NetArch arch;
    const QNetworkParams net = load_checkpoint(checkpoint, arch);
    EnvConfig env_cfg;
    env_cfg.density_level = density;
    const EvalMetrics metrics = evaluate(net, env_cfg, episodes, seed);
    const std::string text = eval_to_json(metrics);
    std::cout << text << "\n";
    if (!out.empty()) {
        std::ofstream o(out);
        o << text << "\n";
    }
    return 0;
}

int cmd_render(const std::string& trace, const std::string& out) {
    const auto written = render_trace(trace, out);
    for (const auto& path : written) std::cout << path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NoisyNet-MADQN platoon overtaking testbed"};
    app.require_subcommand(1);

    std::string config_path;
    int density = 0;
    std::string algo;
    int episodes = 0;
    std::vector<std::uint64_t> seeds;
    std::string out;
    int workers = 0;

    auto* train = app.add_subcommand("train", "run the experiment grid (or a single run)");
    train->add_option("--config", config_path, "experiment config JSON");
    train->add_option("--density", density, "restrict to one density level")
        ->check(CLI::IsMember({1, 2, 3}));
    train->add_option("--algo", algo, "restrict to one algorithm")
        ->check(CLI::IsMember({"noisy-madqn", "madqn"}));
    train->add_option("--episodes", episodes, "episodes per run");
    train->add_option("--seed", seeds, "seed (repeatable)");
    train->add_option("--out", out, "output directory");
    train->add_option("--workers", workers, "parallel runs");

    std::vector<std::string> csvs;
    auto* summ = app.add_subcommand("summarize", "binned reward table from run CSVs");
    summ->add_option("csv", csvs, "run CSV files");
    summ->add_option("--out", out, "directory with manifest.json; summary written here");

    std::string checkpoint;
    std::uint64_t eval_seed = 0;
    int eval_episodes = 10;
    auto* eval = app.add_subcommand("evaluate", "greedy noise-free rollout of a checkpoint");
    eval->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
    eval->add_option("--density", density, "density level")
        ->check(CLI::IsMember({1, 2, 3}))
        ->required();
    eval->add_option("--episodes", eval_episodes, "evaluation episodes");
    eval->add_option("--seed", eval_seed, "evaluation seed");
    eval->add_option("--out", out, "also write metrics JSON here");

    std::string trace;
    auto* render = app.add_subcommand("render", "x-t SVG schematics from a step trace");
    render->add_option("--trace", trace, "trace.jsonl file")->required();
    render->add_option("--out", out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            return cmd_train(config_path, density, algo, episodes, seeds, out, workers);
        }
        if (summ->parsed()) return cmd_summarize(csvs, out);
        if (eval->parsed()) {
            return cmd_evaluate(checkpoint, density, eval_episodes, eval_seed, out);
        }
        if (render->parsed()) return cmd_render(trace, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
