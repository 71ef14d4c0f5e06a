// Acceptance suite. Runs every gate end to end, one pass/fail line per
// criterion, nonzero exit on any failure. Criteria 6-9 train the full
// 3 densities x 2 seeds x 2 algorithms grid at 200 episodes, so a complete
// run takes on the order of ten minutes of CPU time.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "gradcheck_util.hpp"
#include "platoon/experiment.hpp"

using namespace platoon;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

bool near(double actual, double expected, double tol = 1e-9) {
    return std::abs(actual - expected) <= tol;
}

void criterion_1() {
    const RewardWeights w;
    int checked = 0;
    bool ok = true;
    auto expect = [&](double actual, double expected) {
        ++checked;
        if (!near(actual, expected)) ok = false;
    };
    // overtake / speed
    expect(overtake_speed_reward(20.0), 0.0);
    expect(overtake_speed_reward(30.0), 1.0);
    expect(overtake_speed_reward(25.0), 0.5);
    // collision
    expect(collision_penalty(true), -1.0);
    expect(collision_penalty(false), 0.0);
    expect(collision_penalty(true), collision_penalty(true));
    // headway
    expect(headway_reward(36.0, 30.0, w), 0.0);
    expect(headway_reward(60.0, 25.0, w), std::log(2.0));
    expect(headway_reward(10.0, 20.0, w), std::log(10.0 / 24.0));
    // following
    expect(following_reward(36.0, true, w), 0.285);
    expect(following_reward(70.0, true, w), 0.21);
    expect(following_reward(60.0, false, w), 0.125);
    // total
    expect(vehicle_reward(0.0, 1.0, 0.0, 0.285, w), 2.425);
    expect(vehicle_reward(-1.0, 0.0, std::log(10.0 / 24.0), 0.0, w),
           -200.0 + 4.0 * std::log(10.0 / 24.0));
    expect(vehicle_reward(0.0, 0.0, 0.0, 0.0, w), 0.0);
    // sharing
    expect(local_shared_reward({5.0}, {{0}})[0], 5.0);
    expect(local_shared_reward({4.0, 2.0}, {{0, 1}, {1}})[0], 3.0);
    {
        const auto shared = local_shared_reward(
            {1.0, 2.0, 3.0, 4.0},
            {{0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2, 3}, {0, 1, 2, 3}});
        for (double s : shared) expect(s, 2.5);
    }
    report(1, "reward-function exactness (abs tol 1e-9)", ok,
           std::to_string(checked) + " worked examples checked");
}

// ---------------------------------------------------------------- criterion 2

void criterion_2() {
    Rng rng(2024);
    int cases = 0;
    bool ok = true;
    for (int rep = 0; rep < 1000; ++rep) {
        const int p = 1 + static_cast<int>(rng.uniform_int(32));
        const int q = 1 + static_cast<int>(rng.uniform_int(32));
        LayerParams noisy;
        noisy.noisy = true;
        noisy.mu_w = Matrix(q, p);
        noisy.mu_b.assign(q, 0.0);
        noisy.sigma_w = Matrix(q, p);
        noisy.sigma_b.assign(q, 0.0);
        for (auto& v : noisy.mu_w.a) v = rng.uniform(-1.0, 1.0);
        for (auto& v : noisy.mu_b) v = rng.uniform(-1.0, 1.0);
        for (auto& v : noisy.sigma_w.a) v = rng.uniform(0.0, 1.0);
        for (auto& v : noisy.sigma_b) v = rng.uniform(0.0, 1.0);
        LayerParams plain;
        plain.noisy = false;
        plain.mu_w = noisy.mu_w;
        plain.mu_b = noisy.mu_b;
        Vector x(p);
        for (auto& v : x) v = rng.uniform(-2.0, 2.0);
        const Vector reference = noisy_layer_forward(plain, NoiseSample{}, x);

        const NoiseSample noise = sample_factorised_noise(p, q, rng);
        LayerParams zero_sigma = noisy;
        std::fill(zero_sigma.sigma_w.a.begin(), zero_sigma.sigma_w.a.end(), 0.0);
        std::fill(zero_sigma.sigma_b.begin(), zero_sigma.sigma_b.end(), 0.0);
        if (noisy_layer_forward(zero_sigma, noise, x) != reference) ok = false;
        ++cases;

        NoiseSample zero_eps;
        zero_eps.eps_in.assign(p, 0.0);
        zero_eps.eps_out.assign(q, 0.0);
        if (noisy_layer_forward(noisy, zero_eps, x) != reference) ok = false;
        ++cases;
    }
    report(2, "noisy-layer reduction (sigma = 0 and eps = 0, bit-for-bit)", ok,
           std::to_string(cases) + " random cases");
}

// ---------------------------------------------------------------- criterion 3

// The rank-1 identity eps_w[j,k] * eps_w[j',k'] = eps_w[j,k'] * eps_w[j',k]
// holds exactly over the stored factor representation; it is checked in
// exact rational arithmetic because rounded double re-evaluation would blur
// the two sides by an ulp.
bool minor_identity_exact(double oj, double oj2, double ik, double ik2) {
    using boost::multiprecision::cpp_rational;
    const cpp_rational lhs =
        (cpp_rational(oj) * cpp_rational(ik)) * (cpp_rational(oj2) * cpp_rational(ik2));
    const cpp_rational rhs =
        (cpp_rational(oj) * cpp_rational(ik2)) * (cpp_rational(oj2) * cpp_rational(ik));
    return lhs == rhs;
}

bool noise_statistics_for_shape(int p, int q, std::uint64_t seed, std::string& detail) {
    const int m = 100000;
    Rng rng(seed);
    Rng twin(seed);

    std::vector<double> w_sum(static_cast<std::size_t>(p) * q, 0.0);
    std::vector<double> w_sq(static_cast<std::size_t>(p) * q, 0.0);
    std::vector<double> b_sum(q, 0.0);
    std::vector<double> b_sq(q, 0.0);
    Rng minor_picker(seed ^ 0xabcdefULL);
    bool rank1_ok = true;
    bool accessor_ok = true;

    for (int s = 0; s < m; ++s) {
        const NoiseSample sample = sample_factorised_noise(p, q, rng);
        for (int j = 0; j < q; ++j) {
            const double eps_b = sample.eps_out[j];
            b_sum[j] += eps_b;
            b_sq[j] += eps_b * eps_b;
            for (int k = 0; k < p; ++k) {
                const double eps_w = sample.eps_w(j, k);
                if (eps_w != sample.eps_out[j] * sample.eps_in[k]) accessor_ok = false;
                w_sum[static_cast<std::size_t>(j) * p + k] += eps_w;
                w_sq[static_cast<std::size_t>(j) * p + k] += eps_w * eps_w;
            }
        }
        // exact rank-1 minors on every sample: all of them for the tiny
        // shape, a deterministic selection for the big one
        if (p <= 4 && q <= 4) {
            for (int j = 0; j < q; ++j) {
                for (int j2 = j + 1; j2 < q; ++j2) {
                    for (int k = 0; k < p; ++k) {
                        for (int k2 = k + 1; k2 < p; ++k2) {
                            if (!minor_identity_exact(sample.eps_out[j], sample.eps_out[j2],
                                                      sample.eps_in[k], sample.eps_in[k2])) {
                                rank1_ok = false;
                            }
                        }
                    }
                }
            }
        } else {
            for (int r = 0; r < 8; ++r) {
                const int j = static_cast<int>(minor_picker.uniform_int(q));
                const int j2 = static_cast<int>(minor_picker.uniform_int(q));
                const int k = static_cast<int>(minor_picker.uniform_int(p));
                const int k2 = static_cast<int>(minor_picker.uniform_int(p));
                if (!minor_identity_exact(sample.eps_out[j], sample.eps_out[j2],
                                          sample.eps_in[k], sample.eps_in[k2])) {
                    rank1_ok = false;
                }
            }
        }
    }

    // draw budget: exactly m * (p + q) normals were consumed overall
    for (long d = 0; d < static_cast<long>(m) * (p + q); ++d) (void)twin.normal();
    bool budget_ok = true;
    for (int i = 0; i < 4; ++i) {
        if (rng.next_u64() != twin.next_u64()) budget_ok = false;
    }

    double worst_z = 0.0;
    auto scan = [&](const std::vector<double>& sum, const std::vector<double>& sq) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            const double mean = sum[i] / m;
            const double var = std::max(sq[i] / m - mean * mean, 1e-30);
            const double se = std::sqrt(var / m);
            worst_z = std::max(worst_z, std::abs(mean) / se);
        }
    };
    scan(w_sum, w_sq);
    scan(b_sum, b_sq);

    detail += "(" + std::to_string(p) + "," + std::to_string(q) +
              "): worst |mean|/SE = " + fmt(worst_z) +
              (rank1_ok && accessor_ok ? ", rank-1 exact" : ", RANK-1 BROKEN") +
              (budget_ok ? ", draw budget exact; " : ", DRAW BUDGET BROKEN; ");
    return worst_z <= 5.0 && rank1_ok && accessor_ok && budget_ok;
}

void criterion_3() {
    std::string detail;
    const bool small_ok = noise_statistics_for_shape(3, 2, 900, detail);
    const bool big_ok = noise_statistics_for_shape(25, 64, 901, detail);
    report(3, "factorised-noise statistics and exact rank-1 structure", small_ok && big_ok,
           detail + "100000 samples each");
}

// ---------------------------------------------------------------- criterion 4

void criterion_4() {
    using namespace platoon::testing;
    double worst = 0.0;
    long params = 0;
    bool ok = true;
    for (int rep = 0; rep < 20; ++rep) {
        Rng rng(4000 + rep);
        const NetArch arch = small_arch(rep % 3 == 0);
        const QNetworkParams net = init_network(arch, 0.4, rng);
        const NetNoise noise = sample_net_noise(net, rng);
        const Vector x_pos = random_vector(arch.pos_inputs, rng);
        const Vector x_vel = random_vector(arch.vel_inputs, rng);
        const Vector g = random_vector(arch.actions, rng);
        const GradCheckStats stats = gradient_check(net, noise, x_pos, x_vel, g, 1e-5);
        worst = std::max(worst, stats.max_rel_err);
        params += stats.params;
        if (stats.max_rel_err > 1e-4) ok = false;
    }
    report(4, "gradient exactness vs central differences (h = 1e-5, rel tol 1e-4)", ok,
           std::to_string(params) + " parameters over 20 nets, worst rel err " + fmt(worst));
}

// ---------------------------------------------------------------- criterion 5

void criterion_5() {
    bool ok = true;
    std::string detail;

    {  // overfit-one-transition oracle, noise-free learner
        Rng rng(17);
        QLearner learner = make_qlearner(NetArch{}, 0.5, rng);
        TrainerConfig cfg;
        cfg.gamma = 0.0;
        cfg.warmup_per_buffer = 1;
        cfg.batch_size = 8;
        cfg.algo = Algo::Madqn;
        ReplayBuffer buffer(4);
        Transition t;
        Rng obs_rng(18);
        for (auto& v : t.s.data) v = obs_rng.uniform(-1.0, 1.0);
        t.a = 2;
        t.r = 0.7;
        t.done = true;
        const Transition frozen = t;
        buffer.push(std::move(t));
        const ReplayBuffer* buffers[] = {&buffer};
        int first_below = -1;
        for (int step = 1; step <= 500 && first_below < 0; ++step) {
            if (!dqn_train_step(learner, buffers, cfg, rng)) break;
            const Vector q =
                q_forward(learner.online, NetNoise::zero(learner.online), frozen.s);
            const double err = frozen.r - q[frozen.a];
            if (err * err < 1e-4) first_below = step;
        }
        if (first_below < 0) ok = false;
        detail += "TD^2 < 1e-4 after " + std::to_string(first_below) + " updates; ";
    }

    {  // target sync bitwise copy
        Rng rng(19);
        QLearner learner = make_qlearner(NetArch{}, 0.5, rng);
        learner.online.trunk.mu_w.a[7] += 0.125;
        bool sync_ok = !maybe_sync_target(learner.online, learner.target, 199, 200);
        sync_ok = sync_ok && maybe_sync_target(learner.online, learner.target, 200, 200);
        sync_ok = sync_ok && learner.target == learner.online;
        if (!sync_ok) ok = false;
        detail += std::string("target sync bitwise ") + (sync_ok ? "ok" : "BROKEN") + "; ";
    }

    {  // replay eviction
        ReplayBuffer buffer(3);
        Transition t;
        bool evict_ok = true;
        for (int i = 0; i < 7; ++i) {
            t.a = i;
            buffer.push(t);
            if (buffer.size() > 3) evict_ok = false;
        }
        for (int i = 0; i < 3; ++i) {
            if (buffer.oldest_first(i).a != 4 + i) evict_ok = false;
        }
        if (!evict_ok) ok = false;
        detail += std::string("replay eviction ") + (evict_ok ? "ok" : "BROKEN");
    }

    report(5, "trainer sanity (overfit oracle, target sync, replay eviction)", ok, detail);
}

// ------------------------------------------------------------- criteria 6-9

struct RunBins {
    std::array<double, 5> bins{};
    double final_bin() const { return bins[4]; }
    double first_bin() const { return bins[0]; }
};

RunBins bins_of(const fs::path& csv) {
    const RunCsv run = read_run_csv(csv);
    if (run.mean_return.size() % 5 != 0) {
        throw std::runtime_error("episode count not divisible by 5 in " + csv.string());
    }
    const std::size_t len = run.mean_return.size() / 5;
    RunBins out;
    for (std::size_t b = 0; b < 5; ++b) {
        double sum = 0.0;
        for (std::size_t e = b * len; e < (b + 1) * len; ++e) sum += run.mean_return[e];
        out.bins[b] = sum / static_cast<double>(len);
    }
    return out;
}

int grid_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return std::max(1, static_cast<int>(std::min(hw, 4u)));
}

ExperimentResult run_grid(const fs::path& out, const std::vector<std::uint64_t>& seeds) {
    ExperimentConfig cfg;
    cfg.seeds = seeds;
    cfg.out_dir = out.string();
    cfg.workers = grid_workers();
    return run_experiment(cfg);
}

void criteria_6_to_9(const fs::path& work_dir) {
    fs::remove_all(work_dir);
    fs::create_directories(work_dir);

    std::printf("-- training the 3x2x2 grid (200 episodes per run, %d workers)...\n",
                grid_workers());
    std::fflush(stdout);
    const ExperimentResult grid = run_grid(work_dir / "grid", {0, 1});
    if (!grid.all_ok) {
        std::string failed;
        for (const auto& run : grid.runs) {
            if (!run.ok) failed += run.id + " (" + run.error + ") ";
        }
        report(6, "end-to-end trend", false, "grid runs failed: " + failed);
        report(7, "baseline comparison", false, "grid runs failed");
        report(8, "collision-penalty dominance", false, "grid runs failed");
        report(9, "determinism", false, "grid runs failed");
        return;
    }

    std::map<std::string, RunBins> bins;
    for (const auto& run : grid.runs) bins[run.id] = bins_of(run.dir / "train.csv");

    {  // criterion 6: density-1 NoisyNet trend, both seeds
        bool ok = true;
        std::string detail;
        for (std::uint64_t seed : {0ULL, 1ULL}) {
            const RunBins& b = bins.at(run_id(1, seed, Algo::NoisyMadqn));
            const double delta = b.final_bin() - b.first_bin();
            detail += "seed " + std::to_string(seed) + ": " + fmt(b.first_bin()) + " -> " +
                      fmt(b.final_bin()) + " (delta " + fmt(delta) + "); ";
            if (!(delta >= 10.0)) ok = false;
        }
        report(6, "end-to-end trend (density 1, episodes 161-200 vs 1-40, >= +10 per seed)",
               ok, detail);
    }

    {  // criterion 7: final-bin comparison, soft with a 2-seed extension
        auto count_wins = [](const std::map<std::string, RunBins>& all,
                             const std::vector<std::uint64_t>& seeds, std::string& detail) {
            int wins = 0;
            int total = 0;
            for (int density : {1, 2, 3}) {
                for (std::uint64_t seed : seeds) {
                    const double noisy =
                        all.at(run_id(density, seed, Algo::NoisyMadqn)).final_bin();
                    const double base = all.at(run_id(density, seed, Algo::Madqn)).final_bin();
                    ++total;
                    if (noisy >= base) ++wins;
                    detail += "d" + std::to_string(density) + "/s" + std::to_string(seed) +
                              ": " + fmt(noisy) + (noisy >= base ? " >= " : " < ") +
                              fmt(base) + "; ";
                }
            }
            detail += std::to_string(wins) + "/" + std::to_string(total) + " wins";
            return std::pair<int, int>{wins, total};
        };

        std::string detail;
        auto [wins, total] = count_wins(bins, {0, 1}, detail);
        bool ok = wins >= 4;
        if (!ok) {
            // soft criterion: re-run with two additional seeds before judgment
            std::printf("-- criterion 7 below threshold (%d/%d); re-running with seeds "
                        "{2, 3}...\n",
                        wins, total);
            std::fflush(stdout);
            const ExperimentResult extra = run_grid(work_dir / "grid_extra", {2, 3});
            if (extra.all_ok) {
                std::map<std::string, RunBins> all = bins;
                for (const auto& run : extra.runs) {
                    all[run.id] = bins_of(run.dir / "train.csv");
                }
                detail += " | extended: ";
                auto [wins2, total2] = count_wins(all, {0, 1, 2, 3}, detail);
                ok = wins2 * 3 >= total2 * 2;  // same 2/3 proportion on 12 runs
            } else {
                detail += " | extension grid failed";
            }
        }
        report(7, "baseline comparison (NoisyNet final bin >= MADQN in >= 2/3 of runs)", ok,
               detail);
    }

    {  // criterion 8: trace audit over every run
        bool ok = true;
        long steps = 0;
        long collision_steps = 0;
        long violations = 0;
        for (const auto& run : grid.runs) {
            const AuditResult audit = audit_trace(run.dir / "trace.jsonl");
            steps += audit.steps_checked;
            collision_steps += audit.collision_av_steps;
            violations += static_cast<long>(audit.violations.size());
            for (const auto& v : audit.violations) std::printf("   %s\n", v.c_str());
        }
        if (violations > 0 || collision_steps == 0) ok = false;
        report(8, "collision-penalty dominance (every flagged AV step < -180)", ok,
               std::to_string(steps) + " steps, " + std::to_string(collision_steps) +
                   " AV collision steps, " + std::to_string(violations) + " violations");
    }

    {  // criterion 9: byte-identical re-run of a full run
        ExperimentConfig cfg;
        cfg.densities = {1};
        cfg.seeds = {0};
        cfg.algos = {Algo::NoisyMadqn};
        cfg.out_dir = (work_dir / "rerun").string();
        cfg.workers = 1;
        const ExperimentResult rerun = run_experiment(cfg);
        bool ok = rerun.all_ok;
        std::string detail = "d1_s0_noisy-madqn retrained: ";
        if (ok) {
            auto slurp = [](const fs::path& p) {
                std::ifstream in(p, std::ios::binary);
                std::stringstream ss;
                ss << in.rdbuf();
                return ss.str();
            };
            const fs::path original =
                work_dir / "grid" / run_id(1, 0, Algo::NoisyMadqn) / "train.csv";
            const fs::path repeated = rerun.runs[0].dir / "train.csv";
            ok = slurp(original) == slurp(repeated);
            detail += ok ? "train.csv byte-identical" : "train.csv BYTES DIFFER";
        } else {
            detail += "re-run failed";
        }
        report(9, "determinism (identical config and seed reproduce the CSV)", ok, detail);
    }
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work_dir = "acceptance_artifacts";
    if (argc > 1) work_dir = argv[1];

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criteria_6_to_9(work_dir);

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", g_failures);
    return 1;
}
