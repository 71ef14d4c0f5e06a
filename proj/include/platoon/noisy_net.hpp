#pragma once

#include <array>
#include <vector>

#include "platoon/observation.hpp"
#include "platoon/rng.hpp"

namespace platoon {

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;  // row-major

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
    double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }

    bool operator==(const Matrix&) const = default;
};

using Vector = std::vector<double>;

// One linear layer. Noisy layers carry learnable (mu, sigma) pairs for both
// weights and biases; plain layers leave the sigma arrays empty.
struct LayerParams {
    Matrix mu_w;
    Vector mu_b;
    Matrix sigma_w;
    Vector sigma_b;
    bool noisy = false;

    int in() const { return mu_w.cols; }
    int out() const { return mu_w.rows; }

    bool operator==(const LayerParams&) const = default;
};

// Factorised layer noise: p + q scalars with f(x) = sgn(x) sqrt(|x|) already
// applied. The induced weight noise is the outer product eps_out (x) eps_in;
// the bias noise is eps_out.
struct NoiseSample {
    Vector eps_in;
    Vector eps_out;

    bool empty() const { return eps_in.empty() && eps_out.empty(); }
    double eps_w(int j, int k) const { return eps_out[j] * eps_in[k]; }
};

// f(x) = sgn(x) * sqrt(|x|).
double scale_noise(double x);

// Draws exactly p + q standard normals (inputs first, then outputs) and
// stores them with scale_noise applied.
NoiseSample sample_factorised_noise(int p, int q, Rng& rng);

// y = (mu_w + sigma_w . eps_w) x + mu_b + sigma_b . eps_out for a noisy
// layer; plain layers ignore the noise argument entirely.
Vector noisy_layer_forward(const LayerParams& layer, const NoiseSample& noise,
                           const Vector& x);

struct LayerGrads;

// Accumulates dL/d(layer params) given dz = dL/dy at the recorded input x;
// writes dL/dx when dx is non-null.
void noisy_layer_backward(const LayerParams& layer, const NoiseSample& noise,
                          const Vector& x, const Vector& dz, LayerGrads& grads,
                          Vector* dx);

LayerGrads make_layer_grads(const LayerParams& layer);

// Network shape. The observation splits into a position block (is_present,
// dx, dy per row) and a velocity block (dvx, dvy per row), each with its own
// encoder; encoders are plain unless noisy_encoders is set.
struct NetArch {
    int pos_inputs = 3 * kObsRows;
    int vel_inputs = 2 * kObsRows;
    int encoder_width = 64;
    int trunk_width = 128;
    int actions = 5;
    bool noisy_encoders = false;

    bool operator==(const NetArch&) const = default;
};

struct QNetworkParams {
    NetArch arch;
    LayerParams enc_pos;
    LayerParams enc_vel;
    LayerParams trunk;
    LayerParams head;

    std::array<LayerParams*, 4> layers() { return {&enc_pos, &enc_vel, &trunk, &head}; }
    std::array<const LayerParams*, 4> layers() const {
        return {&enc_pos, &enc_vel, &trunk, &head};
    }

    bool operator==(const QNetworkParams&) const = default;
};

// Per-evaluation noise: one sample per noisy layer, empty for plain layers.
// Held fixed across a forward pass and its matching backward pass.
struct NetNoise {
    NoiseSample enc_pos;
    NoiseSample enc_vel;
    NoiseSample trunk;
    NoiseSample head;

    // All-zero eps vectors: forward reduces exactly to the mu network.
    static NetNoise zero(const QNetworkParams& net);
};

// Fresh factorised samples for every noisy layer, in fixed layer order.
NetNoise sample_net_noise(const QNetworkParams& net, Rng& rng);

struct LayerGrads {
    Matrix mu_w;
    Vector mu_b;
    Matrix sigma_w;  // empty for plain layers
    Vector sigma_b;
};

struct QGradients {
    LayerGrads enc_pos;
    LayerGrads enc_vel;
    LayerGrads trunk;
    LayerGrads head;

    std::array<LayerGrads*, 4> layers() { return {&enc_pos, &enc_vel, &trunk, &head}; }
    std::array<const LayerGrads*, 4> layers() const {
        return {&enc_pos, &enc_vel, &trunk, &head};
    }

    void set_zero();
    void add(const QGradients& other);  // elementwise +=
};

QGradients make_gradients(const QNetworkParams& net);

// Activations kept for the backward pass.
struct ForwardWorkspace {
    Vector x_pos, x_vel;
    Vector z_pos, z_vel;  // encoder pre-activations (z1 = concat, pre-relu)
    Vector a1;            // relu(concat)
    Vector z2, a2;        // trunk pre/post relu
    Vector q;
    // backward scratch
    Vector dz2, da1, dz_pos, dz_vel;
};

void split_observation(const Observation& obs, Vector& x_pos, Vector& x_vel);

// Forward pass using inputs already placed in ws.x_pos / ws.x_vel.
void q_forward_ws(const QNetworkParams& net, const NetNoise& noise, ForwardWorkspace& ws);

Vector q_forward(const QNetworkParams& net, const NetNoise& noise, const Observation& obs);

// Accumulates exact gradients of L into grads, where dL_dq is the gradient of
// the scalar loss with respect to the q output of the forward pass recorded
// in ws. Must be called with the same (net, noise) as the forward.
void q_backward_ws(const QNetworkParams& net, const NetNoise& noise, ForwardWorkspace& ws,
                   const Vector& dL_dq, QGradients& grads);

QGradients q_backward(const QNetworkParams& net, const NetNoise& noise,
                      const Observation& obs, const Vector& dL_dq);

// Per layer with fan-in p: mu ~ U[-1/sqrt(p), 1/sqrt(p)], sigma = sigma0/sqrt(p)
// on noisy layers. Draw order: enc_pos, enc_vel, trunk, head; weights row-major
// then biases.
QNetworkParams init_network(const NetArch& arch, double sigma0, Rng& rng);

int argmax_action(const Vector& q);  // ties -> lowest index

}  // namespace platoon
