// Times the serial vs OpenMP batch kernels on the training-shaped workload.
// Both paths share the fixed-chunk reduction, so speedup costs no accuracy:
// results are bit-identical.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "platoon/batch_kernels.hpp"
#include "platoon/rng.hpp"

using namespace platoon;

namespace {

Observation random_obs(Rng& rng) {
    Observation obs;
    for (auto& v : obs.data) v = rng.uniform(-1.0, 1.0);
    return obs;
}

double time_ms(const std::function<void()>& fn, int reps) {
    std::vector<double> times;
    times.reserve(reps);
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace

int main() {
    Rng rng(12345);
    NetArch arch;
    const QNetworkParams net = init_network(arch, 0.5, rng);
    const NetNoise noise = sample_net_noise(net, rng);
    const EffectiveNet eff = materialize(net, noise);

#if defined(_OPENMP)
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP: not enabled\n");
#endif
    std::printf("%-24s %8s %12s %12s %9s\n", "kernel", "batch", "serial ms", "openmp ms",
                "speedup");

    for (const int batch_size : {32, 128, 512}) {
        std::vector<Observation> obs(batch_size);
        std::vector<TdSample> batch(batch_size);
        for (int i = 0; i < batch_size; ++i) {
            obs[i] = random_obs(rng);
            batch[i] = {&obs[i], static_cast<int>(rng.uniform_int(arch.actions)),
                        rng.uniform(-1.0, 1.0)};
        }
        QGradients grads = make_gradients(net);
        const int reps = 2048 / batch_size + 5;

        const double serial = time_ms(
            [&] { batch_td_backward_serial(net, noise, eff, batch, grads); }, reps);
        const double parallel =
            time_ms([&] { batch_td_backward_omp(net, noise, eff, batch, grads); }, reps);
        std::printf("%-24s %8d %12.3f %12.3f %8.2fx\n", "batch_td_backward", batch_size,
                    serial, parallel, serial / parallel);

        std::vector<const Observation*> ptrs(batch_size);
        for (int i = 0; i < batch_size; ++i) ptrs[i] = &obs[i];
        std::vector<double> out(batch_size);
        const double mq_serial =
            time_ms([&] { batch_max_q_serial(eff, ptrs, out); }, reps * 2);
        const double mq_parallel =
            time_ms([&] { batch_max_q_omp(eff, ptrs, out); }, reps * 2);
        std::printf("%-24s %8d %12.3f %12.3f %8.2fx\n", "batch_max_q", batch_size, mq_serial,
                    mq_parallel, mq_serial / mq_parallel);
    }
    return 0;
}
