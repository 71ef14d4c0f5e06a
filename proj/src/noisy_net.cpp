#include "platoon/noisy_net.hpp"

#include <cmath>
#include <stdexcept>

namespace platoon {
namespace {

void check_shapes(const LayerParams& layer, const NoiseSample& noise, std::size_t x_size) {
    if (static_cast<int>(x_size) != layer.in()) {
        throw std::invalid_argument("layer input size mismatch");
    }
    if (layer.noisy &&
        (static_cast<int>(noise.eps_in.size()) != layer.in() ||
         static_cast<int>(noise.eps_out.size()) != layer.out())) {
        throw std::invalid_argument("noise sample shape mismatch");
    }
}

// y = W_eff x + b_eff. The sigma path adds exact zeros when sigma or eps is
// zero, so the noisy and plain branches agree bit-for-bit in those cases.
void layer_forward_into(const LayerParams& layer, const NoiseSample& noise,
                        const Vector& x, Vector& y) {
    check_shapes(layer, noise, x.size());
    const int q = layer.out();
    const int p = layer.in();
    y.assign(q, 0.0);
    for (int j = 0; j < q; ++j) {
        const double* mu_row = layer.mu_w.row(j);
        double acc = 0.0;
        for (int k = 0; k < p; ++k) acc += mu_row[k] * x[k];
        acc += layer.mu_b[j];
        if (layer.noisy) {
            const double* sig_row = layer.sigma_w.row(j);
            double noisy_acc = 0.0;
            for (int k = 0; k < p; ++k) noisy_acc += sig_row[k] * noise.eps_in[k] * x[k];
            acc += noise.eps_out[j] * noisy_acc + layer.sigma_b[j] * noise.eps_out[j];
        }
        y[j] = acc;
    }
}

}  // namespace

// Accumulates layer gradients and (optionally) the gradient w.r.t. the input.
void noisy_layer_backward(const LayerParams& layer, const NoiseSample& noise,
                          const Vector& x, const Vector& dz, LayerGrads& grads,
                          Vector* dx) {
    const int q = layer.out();
    const int p = layer.in();
    if (dx) dx->assign(p, 0.0);
    for (int j = 0; j < q; ++j) {
        const double g = dz[j];
        grads.mu_b[j] += g;
        double* gmu_row = grads.mu_w.row(j);
        const double* mu_row = layer.mu_w.row(j);
        if (layer.noisy) {
            const double oj = noise.eps_out[j];
            grads.sigma_b[j] += g * oj;
            double* gsig_row = grads.sigma_w.row(j);
            const double* sig_row = layer.sigma_w.row(j);
            const double g_o = g * oj;
            for (int k = 0; k < p; ++k) {
                gmu_row[k] += g * x[k];
                gsig_row[k] += g_o * x[k] * noise.eps_in[k];
                if (dx) (*dx)[k] += g * (mu_row[k] + sig_row[k] * oj * noise.eps_in[k]);
            }
        } else {
            for (int k = 0; k < p; ++k) {
                gmu_row[k] += g * x[k];
                if (dx) (*dx)[k] += g * mu_row[k];
            }
        }
    }
}

LayerGrads make_layer_grads(const LayerParams& layer) {
    LayerGrads g;
    g.mu_w = Matrix(layer.out(), layer.in());
    g.mu_b.assign(layer.out(), 0.0);
    if (layer.noisy) {
        g.sigma_w = Matrix(layer.out(), layer.in());
        g.sigma_b.assign(layer.out(), 0.0);
    }
    return g;
}

namespace {

void relu_into(const Vector& z, Vector& a) {
    a.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

LayerParams init_layer(int out, int in, bool noisy, double sigma0, Rng& rng) {
    LayerParams layer;
    layer.noisy = noisy;
    layer.mu_w = Matrix(out, in);
    layer.mu_b.assign(out, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : layer.mu_w.a) w = rng.uniform(-bound, bound);
    for (auto& b : layer.mu_b) b = rng.uniform(-bound, bound);
    if (noisy) {
        layer.sigma_w = Matrix(out, in);
        layer.sigma_b.assign(out, 0.0);
        const double sigma = sigma0 / std::sqrt(static_cast<double>(in));
        for (auto& s : layer.sigma_w.a) s = sigma;
        for (auto& s : layer.sigma_b) s = sigma;
    }
    return layer;
}

}  // namespace

double scale_noise(double x) {
    return x >= 0.0 ? std::sqrt(x) : -std::sqrt(-x);
}

NoiseSample sample_factorised_noise(int p, int q, Rng& rng) {
    NoiseSample sample;
    sample.eps_in.resize(p);
    sample.eps_out.resize(q);
    for (int k = 0; k < p; ++k) sample.eps_in[k] = scale_noise(rng.normal());
    for (int j = 0; j < q; ++j) sample.eps_out[j] = scale_noise(rng.normal());
    return sample;
}

Vector noisy_layer_forward(const LayerParams& layer, const NoiseSample& noise,
                           const Vector& x) {
    Vector y;
    layer_forward_into(layer, noise, x, y);
    return y;
}

NetNoise NetNoise::zero(const QNetworkParams& net) {
    NetNoise noise;
    const std::array<const LayerParams*, 4> layers = net.layers();
    std::array<NoiseSample*, 4> samples = {&noise.enc_pos, &noise.enc_vel, &noise.trunk,
                                           &noise.head};
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i]->noisy) {
            samples[i]->eps_in.assign(layers[i]->in(), 0.0);
            samples[i]->eps_out.assign(layers[i]->out(), 0.0);
        }
    }
    return noise;
}

NetNoise sample_net_noise(const QNetworkParams& net, Rng& rng) {
    NetNoise noise;
    const std::array<const LayerParams*, 4> layers = net.layers();
    std::array<NoiseSample*, 4> samples = {&noise.enc_pos, &noise.enc_vel, &noise.trunk,
                                           &noise.head};
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i]->noisy) {
            *samples[i] = sample_factorised_noise(layers[i]->in(), layers[i]->out(), rng);
        }
    }
    return noise;
}

void QGradients::set_zero() {
    for (LayerGrads* g : layers()) {
        std::fill(g->mu_w.a.begin(), g->mu_w.a.end(), 0.0);
        std::fill(g->mu_b.begin(), g->mu_b.end(), 0.0);
        std::fill(g->sigma_w.a.begin(), g->sigma_w.a.end(), 0.0);
        std::fill(g->sigma_b.begin(), g->sigma_b.end(), 0.0);
    }
}

void QGradients::add(const QGradients& other) {
    const std::array<LayerGrads*, 4> mine = layers();
    const std::array<const LayerGrads*, 4> theirs = other.layers();
    for (std::size_t i = 0; i < mine.size(); ++i) {
        for (std::size_t k = 0; k < mine[i]->mu_w.a.size(); ++k) {
            mine[i]->mu_w.a[k] += theirs[i]->mu_w.a[k];
        }
        for (std::size_t k = 0; k < mine[i]->mu_b.size(); ++k) {
            mine[i]->mu_b[k] += theirs[i]->mu_b[k];
        }
        for (std::size_t k = 0; k < mine[i]->sigma_w.a.size(); ++k) {
            mine[i]->sigma_w.a[k] += theirs[i]->sigma_w.a[k];
        }
        for (std::size_t k = 0; k < mine[i]->sigma_b.size(); ++k) {
            mine[i]->sigma_b[k] += theirs[i]->sigma_b[k];
        }
    }
}

QGradients make_gradients(const QNetworkParams& net) {
    QGradients g;
    g.enc_pos = make_layer_grads(net.enc_pos);
    g.enc_vel = make_layer_grads(net.enc_vel);
    g.trunk = make_layer_grads(net.trunk);
    g.head = make_layer_grads(net.head);
    return g;
}

void split_observation(const Observation& obs, Vector& x_pos, Vector& x_vel) {
    x_pos.resize(3 * kObsRows);
    x_vel.resize(2 * kObsRows);
    for (int r = 0; r < kObsRows; ++r) {
        x_pos[3 * r + 0] = obs.at(r, 0);
        x_pos[3 * r + 1] = obs.at(r, 1);
        x_pos[3 * r + 2] = obs.at(r, 2);
        x_vel[2 * r + 0] = obs.at(r, 3);
        x_vel[2 * r + 1] = obs.at(r, 4);
    }
}

void q_forward_ws(const QNetworkParams& net, const NetNoise& noise, ForwardWorkspace& ws) {
    for (const double v : ws.x_pos) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite network input");
    }
    for (const double v : ws.x_vel) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite network input");
    }
    layer_forward_into(net.enc_pos, noise.enc_pos, ws.x_pos, ws.z_pos);
    layer_forward_into(net.enc_vel, noise.enc_vel, ws.x_vel, ws.z_vel);
    ws.a1.resize(ws.z_pos.size() + ws.z_vel.size());
    for (std::size_t i = 0; i < ws.z_pos.size(); ++i) {
        ws.a1[i] = ws.z_pos[i] > 0.0 ? ws.z_pos[i] : 0.0;
    }
    for (std::size_t i = 0; i < ws.z_vel.size(); ++i) {
        ws.a1[ws.z_pos.size() + i] = ws.z_vel[i] > 0.0 ? ws.z_vel[i] : 0.0;
    }
    layer_forward_into(net.trunk, noise.trunk, ws.a1, ws.z2);
    relu_into(ws.z2, ws.a2);
    layer_forward_into(net.head, noise.head, ws.a2, ws.q);
}

Vector q_forward(const QNetworkParams& net, const NetNoise& noise, const Observation& obs) {
    ForwardWorkspace ws;
    split_observation(obs, ws.x_pos, ws.x_vel);
    q_forward_ws(net, noise, ws);
    return ws.q;
}

void q_backward_ws(const QNetworkParams& net, const NetNoise& noise, ForwardWorkspace& ws,
                   const Vector& dL_dq, QGradients& grads) {
    if (dL_dq.size() != ws.q.size()) {
        throw std::invalid_argument("dL_dq size mismatch");
    }
    Vector da2;
    noisy_layer_backward(net.head, noise.head, ws.a2, dL_dq, grads.head, &da2);
    ws.dz2.resize(da2.size());
    for (std::size_t i = 0; i < da2.size(); ++i) {
        ws.dz2[i] = ws.z2[i] > 0.0 ? da2[i] : 0.0;
    }
    noisy_layer_backward(net.trunk, noise.trunk, ws.a1, ws.dz2, grads.trunk, &ws.da1);
    const std::size_t enc_out = ws.z_pos.size();
    ws.dz_pos.resize(enc_out);
    ws.dz_vel.resize(ws.z_vel.size());
    for (std::size_t i = 0; i < enc_out; ++i) {
        ws.dz_pos[i] = ws.z_pos[i] > 0.0 ? ws.da1[i] : 0.0;
    }
    for (std::size_t i = 0; i < ws.z_vel.size(); ++i) {
        ws.dz_vel[i] = ws.z_vel[i] > 0.0 ? ws.da1[enc_out + i] : 0.0;
    }
    noisy_layer_backward(net.enc_pos, noise.enc_pos, ws.x_pos, ws.dz_pos, grads.enc_pos, nullptr);
    noisy_layer_backward(net.enc_vel, noise.enc_vel, ws.x_vel, ws.dz_vel, grads.enc_vel, nullptr);
}

QGradients q_backward(const QNetworkParams& net, const NetNoise& noise,
                      const Observation& obs, const Vector& dL_dq) {
    ForwardWorkspace ws;
    split_observation(obs, ws.x_pos, ws.x_vel);
    q_forward_ws(net, noise, ws);
    QGradients grads = make_gradients(net);
    q_backward_ws(net, noise, ws, dL_dq, grads);
    return grads;
}

QNetworkParams init_network(const NetArch& arch, double sigma0, Rng& rng) {
    if (sigma0 < 0.0) throw std::invalid_argument("sigma0 must be >= 0");
    QNetworkParams net;
    net.arch = arch;
    net.enc_pos = init_layer(arch.encoder_width, arch.pos_inputs, arch.noisy_encoders,
                             sigma0, rng);
    net.enc_vel = init_layer(arch.encoder_width, arch.vel_inputs, arch.noisy_encoders,
                             sigma0, rng);
    net.trunk = init_layer(arch.trunk_width, 2 * arch.encoder_width, true, sigma0, rng);
    net.head = init_layer(arch.actions, arch.trunk_width, true, sigma0, rng);
    return net;
}

int argmax_action(const Vector& q) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(q.size()); ++i) {
        if (q[i] > q[best]) best = i;
    }
    return best;
}

}  // namespace platoon
