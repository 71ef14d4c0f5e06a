#include "platoon/batch_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace platoon {
namespace {

EffectiveLayer materialize_layer(const LayerParams& layer, const NoiseSample& noise) {
    const int q = layer.out();
    const int p = layer.in();
    EffectiveLayer eff;
    eff.w = Matrix(q, p);
    eff.b.assign(q, 0.0);
    for (int j = 0; j < q; ++j) {
        const double* mu_row = layer.mu_w.row(j);
        double* w_row = eff.w.row(j);
        if (layer.noisy) {
            const double oj = noise.eps_out[j];
            const double* sig_row = layer.sigma_w.row(j);
            for (int k = 0; k < p; ++k) {
                w_row[k] = mu_row[k] + sig_row[k] * (oj * noise.eps_in[k]);
            }
            eff.b[j] = layer.mu_b[j] + layer.sigma_b[j] * oj;
        } else {
            for (int k = 0; k < p; ++k) w_row[k] = mu_row[k];
            eff.b[j] = layer.mu_b[j];
        }
    }
    eff.wT = Matrix(p, q);
    for (int j = 0; j < q; ++j) {
        for (int k = 0; k < p; ++k) eff.wT.at(k, j) = eff.w.at(j, k);
    }
    return eff;
}

void forward_layer(const EffectiveLayer& eff, const Vector& x, Vector& y) {
    const int q = eff.w.rows;
    const int p = eff.w.cols;
    y.resize(q);
    for (int j = 0; j < q; ++j) {
        const double* row = eff.w.row(j);
        double acc = 0.0;
        for (int k = 0; k < p; ++k) acc += row[k] * x[k];
        y[j] = acc + eff.b[j];
    }
}

// x-gradient through the materialized weights: dx = w^T dz.
void input_grad(const EffectiveLayer& eff, const Vector& dz, Vector& dx) {
    const int p = eff.wT.rows;
    const int q = eff.wT.cols;
    dx.resize(p);
    for (int k = 0; k < p; ++k) {
        const double* row = eff.wT.row(k);
        double acc = 0.0;
        for (int j = 0; j < q; ++j) acc += row[j] * dz[j];
        dx[k] = acc;
    }
}

// Dense-dz parameter gradients for one layer. x_eps caches x . eps_in.
void param_grads(const LayerParams& layer, const NoiseSample& noise, const Vector& x,
                 const Vector& dz, Vector& x_eps, LayerGrads& grads) {
    const int q = layer.out();
    const int p = layer.in();
    if (layer.noisy) {
        x_eps.resize(p);
        for (int k = 0; k < p; ++k) x_eps[k] = x[k] * noise.eps_in[k];
    }
    for (int j = 0; j < q; ++j) {
        const double g = dz[j];
        if (g == 0.0) continue;
        grads.mu_b[j] += g;
        double* gmu_row = grads.mu_w.row(j);
        if (layer.noisy) {
            const double g_o = g * noise.eps_out[j];
            grads.sigma_b[j] += g_o;
            double* gsig_row = grads.sigma_w.row(j);
            for (int k = 0; k < p; ++k) {
                gmu_row[k] += g * x[k];
                gsig_row[k] += g_o * x_eps[k];
            }
        } else {
            for (int k = 0; k < p; ++k) gmu_row[k] += g * x[k];
        }
    }
}

struct KernelScratch {
    ForwardWorkspace ws;
    Vector da2, dhead, x_eps;
};

// Forward + backward for one TD sample, accumulating into grads.
double td_sample_backward(const QNetworkParams& net, const NetNoise& noise,
                          const EffectiveNet& eff, const TdSample& sample,
                          double inv_batch, KernelScratch& s, QGradients& grads) {
    effective_forward(eff, *sample.s, s.ws);
    const double err = sample.target - s.ws.q[sample.action];
    const double g = -2.0 * err * inv_batch;

    // Head: dz is nonzero only at the chosen action.
    const int a = sample.action;
    grads.head.mu_b[a] += g;
    {
        const int p = net.head.in();
        double* gmu_row = grads.head.mu_w.row(a);
        const double oa = noise.head.eps_out[a];
        grads.head.sigma_b[a] += g * oa;
        double* gsig_row = grads.head.sigma_w.row(a);
        const double g_o = g * oa;
        const double* w_row = eff.head.w.row(a);
        s.da2.resize(p);
        for (int k = 0; k < p; ++k) {
            gmu_row[k] += g * s.ws.a2[k];
            gsig_row[k] += g_o * s.ws.a2[k] * noise.head.eps_in[k];
            s.da2[k] = g * w_row[k];
        }
    }

    auto& ws = s.ws;
    ws.dz2.resize(s.da2.size());
    for (std::size_t i = 0; i < s.da2.size(); ++i) {
        ws.dz2[i] = ws.z2[i] > 0.0 ? s.da2[i] : 0.0;
    }
    param_grads(net.trunk, noise.trunk, ws.a1, ws.dz2, s.x_eps, grads.trunk);
    input_grad(eff.trunk, ws.dz2, ws.da1);

    const std::size_t enc_out = ws.z_pos.size();
    ws.dz_pos.resize(enc_out);
    ws.dz_vel.resize(ws.z_vel.size());
    for (std::size_t i = 0; i < enc_out; ++i) {
        ws.dz_pos[i] = ws.z_pos[i] > 0.0 ? ws.da1[i] : 0.0;
    }
    for (std::size_t i = 0; i < ws.z_vel.size(); ++i) {
        ws.dz_vel[i] = ws.z_vel[i] > 0.0 ? ws.da1[enc_out + i] : 0.0;
    }
    param_grads(net.enc_pos, noise.enc_pos, ws.x_pos, ws.dz_pos, s.x_eps, grads.enc_pos);
    param_grads(net.enc_vel, noise.enc_vel, ws.x_vel, ws.dz_vel, s.x_eps, grads.enc_vel);
    return err * err;
}

double combine_chunks(std::span<const TdSample> batch, std::vector<QGradients>& partials,
                      const std::vector<double>& partial_sse, QGradients& grads) {
    double sse = 0.0;
    for (std::size_t c = 0; c < partials.size(); ++c) {
        grads.add(partials[c]);
        sse += partial_sse[c];
    }
    return sse / static_cast<double>(batch.size());
}

}  // namespace

EffectiveNet materialize(const QNetworkParams& net, const NetNoise& noise) {
    EffectiveNet eff;
    eff.enc_pos = materialize_layer(net.enc_pos, noise.enc_pos);
    eff.enc_vel = materialize_layer(net.enc_vel, noise.enc_vel);
    eff.trunk = materialize_layer(net.trunk, noise.trunk);
    eff.head = materialize_layer(net.head, noise.head);
    return eff;
}

void effective_forward(const EffectiveNet& eff, const Observation& obs,
                       ForwardWorkspace& ws) {
    split_observation(obs, ws.x_pos, ws.x_vel);
    forward_layer(eff.enc_pos, ws.x_pos, ws.z_pos);
    forward_layer(eff.enc_vel, ws.x_vel, ws.z_vel);
    ws.a1.resize(ws.z_pos.size() + ws.z_vel.size());
    for (std::size_t i = 0; i < ws.z_pos.size(); ++i) {
        ws.a1[i] = ws.z_pos[i] > 0.0 ? ws.z_pos[i] : 0.0;
    }
    for (std::size_t i = 0; i < ws.z_vel.size(); ++i) {
        ws.a1[ws.z_pos.size() + i] = ws.z_vel[i] > 0.0 ? ws.z_vel[i] : 0.0;
    }
    forward_layer(eff.trunk, ws.a1, ws.z2);
    ws.a2.resize(ws.z2.size());
    for (std::size_t i = 0; i < ws.z2.size(); ++i) {
        ws.a2[i] = ws.z2[i] > 0.0 ? ws.z2[i] : 0.0;
    }
    forward_layer(eff.head, ws.a2, ws.q);
}

double batch_td_backward_serial(const QNetworkParams& net, const NetNoise& noise,
                                const EffectiveNet& eff, std::span<const TdSample> batch,
                                QGradients& grads) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    grads.set_zero();
    const int n_chunks = (static_cast<int>(batch.size()) + kGradChunk - 1) / kGradChunk;
    std::vector<QGradients> partials;
    partials.reserve(n_chunks);
    for (int c = 0; c < n_chunks; ++c) partials.push_back(make_gradients(net));
    std::vector<double> partial_sse(n_chunks, 0.0);

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    KernelScratch scratch;
    for (int c = 0; c < n_chunks; ++c) {
        const int lo = c * kGradChunk;
        const int hi = std::min<int>(lo + kGradChunk, static_cast<int>(batch.size()));
        for (int i = lo; i < hi; ++i) {
            partial_sse[c] +=
                td_sample_backward(net, noise, eff, batch[i], inv_batch, scratch, partials[c]);
        }
    }
    return combine_chunks(batch, partials, partial_sse, grads);
}

double batch_td_backward_omp(const QNetworkParams& net, const NetNoise& noise,
                             const EffectiveNet& eff, std::span<const TdSample> batch,
                             QGradients& grads) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    grads.set_zero();
    const int n_chunks = (static_cast<int>(batch.size()) + kGradChunk - 1) / kGradChunk;
    std::vector<QGradients> partials;
    partials.reserve(n_chunks);
    for (int c = 0; c < n_chunks; ++c) partials.push_back(make_gradients(net));
    std::vector<double> partial_sse(n_chunks, 0.0);

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
#pragma omp parallel
    {
        KernelScratch scratch;
#pragma omp for schedule(static)
        for (int c = 0; c < n_chunks; ++c) {
            const int lo = c * kGradChunk;
            const int hi = std::min<int>(lo + kGradChunk, static_cast<int>(batch.size()));
            for (int i = lo; i < hi; ++i) {
                partial_sse[c] += td_sample_backward(net, noise, eff, batch[i], inv_batch,
                                                     scratch, partials[c]);
            }
        }
    }
    return combine_chunks(batch, partials, partial_sse, grads);
}

void batch_max_q_serial(const EffectiveNet& eff, std::span<const Observation* const> obs,
                        std::span<double> out) {
    ForwardWorkspace ws;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        effective_forward(eff, *obs[i], ws);
        out[i] = *std::max_element(ws.q.begin(), ws.q.end());
    }
}

void batch_max_q_omp(const EffectiveNet& eff, std::span<const Observation* const> obs,
                     std::span<double> out) {
    const int n = static_cast<int>(obs.size());
#pragma omp parallel
    {
        ForwardWorkspace ws;
#pragma omp for schedule(static)
        for (int i = 0; i < n; ++i) {
            effective_forward(eff, *obs[i], ws);
            out[i] = *std::max_element(ws.q.begin(), ws.q.end());
        }
    }
}

}  // namespace platoon
