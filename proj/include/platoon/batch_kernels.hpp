#pragma once

#include <span>

#include "platoon/noisy_net.hpp"

namespace platoon {

// Gradient accumulation granularity. Chunk boundaries are fixed by this
// constant, not by the thread count, so the serial and OpenMP paths produce
// bit-identical sums and reruns reproduce byte-for-byte at any thread count.
inline constexpr int kGradChunk = 8;

// Weights with the current noise sample folded in: w = mu_w + sigma_w . eps_w,
// b = mu_b + sigma_b . eps_out. wT is kept for cache-friendly input gradients.
struct EffectiveLayer {
    Matrix w;
    Matrix wT;
    Vector b;
};

struct EffectiveNet {
    EffectiveLayer enc_pos;
    EffectiveLayer enc_vel;
    EffectiveLayer trunk;
    EffectiveLayer head;
};

// Materialized once per gradient step; the noise is shared across the batch.
EffectiveNet materialize(const QNetworkParams& net, const NetNoise& noise);

// One TD regression sample: the squared-error target for Q(s, a).
struct TdSample {
    const Observation* s = nullptr;
    int action = 0;
    double target = 0.0;
};

// Mean squared TD error over the batch; accumulates d(mean loss)/d(params)
// into grads (which must be zero-shaped for net). The per-sample parameter
// gradients need the factor decomposition, hence both eff and (net, noise).
double batch_td_backward_serial(const QNetworkParams& net, const NetNoise& noise,
                                const EffectiveNet& eff, std::span<const TdSample> batch,
                                QGradients& grads);
double batch_td_backward_omp(const QNetworkParams& net, const NetNoise& noise,
                             const EffectiveNet& eff, std::span<const TdSample> batch,
                             QGradients& grads);

// out[i] = max_a Q(obs[i], a) under the materialized noise.
void batch_max_q_serial(const EffectiveNet& eff, std::span<const Observation* const> obs,
                        std::span<double> out);
void batch_max_q_omp(const EffectiveNet& eff, std::span<const Observation* const> obs,
                     std::span<double> out);

// Single forward pass through the materialized network (used by both kernels
// and exposed for the equivalence tests).
void effective_forward(const EffectiveNet& eff, const Observation& obs,
                       ForwardWorkspace& ws);

}  // namespace platoon
