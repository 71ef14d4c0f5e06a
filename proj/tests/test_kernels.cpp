#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "platoon/batch_kernels.hpp"

using namespace platoon;

namespace {

Observation random_obs(Rng& rng) {
    Observation obs;
    for (auto& v : obs.data) v = rng.uniform(-1.0, 1.0);
    return obs;
}

struct Case {
    QNetworkParams net;
    NetNoise noise;
    EffectiveNet eff;
    std::vector<Observation> obs;
    std::vector<TdSample> batch;
};

Case make_case(int batch_size, std::uint64_t seed, bool zero_noise = false) {
    Case c;
    Rng rng(seed);
    c.net = init_network(NetArch{}, 0.5, rng);
    c.noise = zero_noise ? NetNoise::zero(c.net) : sample_net_noise(c.net, rng);
    c.eff = materialize(c.net, c.noise);
    c.obs.resize(batch_size);
    c.batch.resize(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        c.obs[i] = random_obs(rng);
        c.batch[i] = {&c.obs[i], static_cast<int>(rng.uniform_int(5)),
                      rng.uniform(-2.0, 2.0)};
    }
    return c;
}

bool grads_bitwise_equal(const QGradients& a, const QGradients& b) {
    const auto la = a.layers();
    const auto lb = b.layers();
    for (std::size_t i = 0; i < la.size(); ++i) {
        if (la[i]->mu_w.a != lb[i]->mu_w.a) return false;
        if (la[i]->mu_b != lb[i]->mu_b) return false;
        if (la[i]->sigma_w.a != lb[i]->sigma_w.a) return false;
        if (la[i]->sigma_b != lb[i]->sigma_b) return false;
    }
    return true;
}

void check_grads_close(const QGradients& a, const QGradients& b, double rel_tol) {
    const auto la = a.layers();
    const auto lb = b.layers();
    for (std::size_t i = 0; i < la.size(); ++i) {
        auto close = [&](const std::vector<double>& x, const std::vector<double>& y) {
            REQUIRE(x.size() == y.size());
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double scale = std::max({1.0, std::abs(x[k]), std::abs(y[k])});
                CHECK(std::abs(x[k] - y[k]) <= rel_tol * scale);
            }
        };
        close(la[i]->mu_w.a, lb[i]->mu_w.a);
        close(la[i]->mu_b, lb[i]->mu_b);
        close(la[i]->sigma_w.a, lb[i]->sigma_w.a);
        close(la[i]->sigma_b, lb[i]->sigma_b);
    }
}

}  // namespace

TEST_CASE("serial and OpenMP TD kernels are bit-identical") {
    // batch sizes straddle chunk boundaries, including a non-multiple
    for (const int batch_size : {1, 7, 8, 9, 64, 128, 130}) {
        Case c = make_case(batch_size, 100 + batch_size);
        QGradients g_serial = make_gradients(c.net);
        QGradients g_omp = make_gradients(c.net);
        const double loss_serial =
            batch_td_backward_serial(c.net, c.noise, c.eff, c.batch, g_serial);
        const double loss_omp = batch_td_backward_omp(c.net, c.noise, c.eff, c.batch, g_omp);
        CHECK(loss_serial == loss_omp);
        CHECK(grads_bitwise_equal(g_serial, g_omp));
    }
}

TEST_CASE("serial and OpenMP max-Q kernels are bit-identical") {
    Case c = make_case(130, 7);
    std::vector<const Observation*> ptrs(c.obs.size());
    for (std::size_t i = 0; i < c.obs.size(); ++i) ptrs[i] = &c.obs[i];
    std::vector<double> serial(ptrs.size());
    std::vector<double> parallel(ptrs.size());
    batch_max_q_serial(c.eff, ptrs, serial);
    batch_max_q_omp(c.eff, ptrs, parallel);
    CHECK(serial == parallel);
}

TEST_CASE("batch kernel gradients match summed per-sample q_backward") {
    Case c = make_case(24, 9);
    QGradients batch_grads = make_gradients(c.net);
    const double loss =
        batch_td_backward_serial(c.net, c.noise, c.eff, c.batch, batch_grads);

    QGradients reference = make_gradients(c.net);
    double sse = 0.0;
    const double inv_b = 1.0 / static_cast<double>(c.batch.size());
    for (const TdSample& sample : c.batch) {
        const Vector q = q_forward(c.net, c.noise, *sample.s);
        const double err = sample.target - q[sample.action];
        sse += err * err;
        Vector dq(q.size(), 0.0);
        dq[sample.action] = -2.0 * err * inv_b;
        reference.add(q_backward(c.net, c.noise, *sample.s, dq));
    }
    CHECK(loss == doctest::Approx(sse * inv_b).epsilon(1e-12));
    check_grads_close(batch_grads, reference, 1e-9);
}

TEST_CASE("materialized forward matches the per-sample forward") {
    Case c = make_case(16, 17);
    ForwardWorkspace ws;
    for (const auto& obs : c.obs) {
        effective_forward(c.eff, obs, ws);
        const Vector direct = q_forward(c.net, c.noise, obs);
        REQUIRE(ws.q.size() == direct.size());
        for (std::size_t i = 0; i < direct.size(); ++i) {
            CHECK(ws.q[i] == doctest::Approx(direct[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("materialized forward with zero noise is bitwise the mu network") {
    Case c = make_case(4, 23, /*zero_noise=*/true);
    ForwardWorkspace ws;
    for (const auto& obs : c.obs) {
        effective_forward(c.eff, obs, ws);
        const Vector direct = q_forward(c.net, NetNoise::zero(c.net), obs);
        CHECK(ws.q == direct);
    }
}

TEST_CASE("loss equals the mean squared TD error on a hand-checked batch") {
    Case c = make_case(3, 31);
    // overwrite targets with q + known errors
    ForwardWorkspace ws;
    const double errs[3] = {0.5, -1.5, 2.0};
    for (int i = 0; i < 3; ++i) {
        effective_forward(c.eff, c.obs[i], ws);
        c.batch[i].target = ws.q[c.batch[i].action] + errs[i];
    }
    QGradients grads = make_gradients(c.net);
    const double loss = batch_td_backward_serial(c.net, c.noise, c.eff, c.batch, grads);
    const double expected = (0.25 + 2.25 + 4.0) / 3.0;
    CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("kernels reject an empty batch") {
    Case c = make_case(1, 37);
    QGradients grads = make_gradients(c.net);
    CHECK_THROWS_AS(
        batch_td_backward_serial(c.net, c.noise, c.eff, std::span<const TdSample>{}, grads),
        std::invalid_argument);
}
