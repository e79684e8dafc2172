#include <doctest.h>

#include <cmath>

#include "harmon/nn.hpp"

using namespace harmon;
using nn::Tensor;

namespace {

Tensor random_tensor(int n, int c, int h, int w, Rng& rng) {
    Tensor t(n, c, h, w);
    for (auto& v : t.v) v = static_cast<float>(rng.normal());
    return t;
}

// Projection loss L = sum_i coeff_i * y_i, so dL/dy = coeff.
struct Probe {
    std::vector<float> coeff;
    explicit Probe(size_t n, Rng& rng) : coeff(n) {
        for (auto& c : coeff) c = static_cast<float>(rng.normal());
    }
    double loss(const Tensor& y) const {
        double acc = 0.0;
        for (size_t i = 0; i < y.size(); ++i) acc += static_cast<double>(coeff[i]) * y.v[i];
        return acc;
    }
    Tensor grad(const Tensor& y) const {
        Tensor g(y.n, y.c, y.h, y.w);
        std::copy(coeff.begin(), coeff.end(), g.v.begin());
        return g;
    }
};

// Central-difference check of input gradients for a layer functor.
template <typename Fwd>
void check_input_grad(Fwd&& fwd, Tensor x, const Tensor& dx_analytic, const Probe& probe,
                      double tol = 2e-2) {
    const float h = 1e-2f;
    double worst = 0.0;
    Rng pick(99);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t i = pick.next_below(x.size());
        const float orig = x.v[i];
        x.v[i] = orig + h;
        const double lp = probe.loss(fwd(x));
        x.v[i] = orig - h;
        const double lm = probe.loss(fwd(x));
        x.v[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = dx_analytic.v[i];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
        worst = std::max(worst, rel);
    }
    CHECK(worst < tol);
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(1);
    nn::Conv2d conv(2, 3, 3);
    conv.init(rng);
    Tensor x = random_tensor(2, 2, 6, 6, rng);
    const Tensor y = conv.forward(x);
    CHECK(y.c == 3);
    CHECK(y.h == 6);
    Probe probe(y.size(), rng);
    conv.weight.zero_grad();
    conv.bias.zero_grad();
    const Tensor dx = conv.backward(probe.grad(y));
    check_input_grad([&](const Tensor& t) { return conv.forward(t); }, x, dx, probe);

    // weight gradient spot check
    const float h = 1e-2f;
    Rng pick(5);
    for (int trial = 0; trial < 10; ++trial) {
        const size_t i = pick.next_below(conv.weight.size());
        const float orig = conv.weight.w[i];
        conv.weight.w[i] = orig + h;
        const double lp = probe.loss(conv.forward(x));
        conv.weight.w[i] = orig - h;
        const double lm = probe.loss(conv.forward(x));
        conv.weight.w[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        CHECK(std::abs(fd - conv.weight.g[i]) / std::max({std::abs(fd), 1e-3}) < 2e-2);
    }
}

TEST_CASE("strided conv halves resolution") {
    Rng rng(2);
    nn::Conv2d conv(1, 4, 3, 2);
    conv.init(rng);
    const Tensor y = conv.forward(random_tensor(1, 1, 8, 8, rng));
    CHECK(y.h == 4);
    CHECK(y.w == 4);
}

TEST_CASE("linear gradients match finite differences") {
    Rng rng(3);
    nn::Linear lin(5, 4);
    lin.init(rng);
    Tensor x = random_tensor(3, 5, 1, 1, rng);
    const Tensor y = lin.forward(x);
    Probe probe(y.size(), rng);
    lin.weight.zero_grad();
    lin.bias.zero_grad();
    const Tensor dx = lin.backward(probe.grad(y));
    check_input_grad([&](const Tensor& t) { return lin.forward(t); }, x, dx, probe);
}

TEST_CASE("groupnorm normalizes and backprops") {
    Rng rng(4);
    nn::GroupNorm gn(8, 4);
    Tensor x = random_tensor(2, 8, 4, 4, rng);
    const Tensor y = gn.forward(x);
    // per-(sample, group) statistics: mean ~0, var ~1
    for (int ni = 0; ni < 2; ++ni) {
        double mean = 0.0;
        for (int ci = 0; ci < 2; ++ci)
            for (int yy = 0; yy < 4; ++yy)
                for (int xx = 0; xx < 4; ++xx) mean += y.at(ni, ci, yy, xx);
        CHECK(std::abs(mean / 32.0) < 1e-4);
    }
    Probe probe(y.size(), rng);
    gn.gamma.zero_grad();
    gn.beta.zero_grad();
    const Tensor dx = gn.backward(probe.grad(y));
    check_input_grad([&](const Tensor& t) { return gn.forward(t); }, x, dx, probe, 5e-2);
}

TEST_CASE("silu and leaky relu derivatives") {
    Rng rng(5);
    nn::SiLU act;
    Tensor x = random_tensor(1, 2, 3, 3, rng);
    const Tensor y = act.forward(x);
    Probe probe(y.size(), rng);
    const Tensor dx = act.backward(probe.grad(y));
    check_input_grad([&](const Tensor& t) { return act.forward(t); }, x, dx, probe);

    nn::LeakyReLU lrelu(0.2f);
    const Tensor y2 = lrelu.forward(x);
    for (size_t i = 0; i < x.size(); ++i)
        CHECK(y2.v[i] == doctest::Approx(x.v[i] > 0 ? x.v[i] : 0.2f * x.v[i]));
}

TEST_CASE("global average pool and upsample round shapes") {
    Rng rng(6);
    nn::GlobalAvgPool gap;
    Tensor x = random_tensor(2, 3, 4, 4, rng);
    const Tensor y = gap.forward(x);
    CHECK(y.h == 1);
    CHECK(y.w == 1);
    CHECK(y.at(0, 0, 0, 0) ==
          doctest::Approx(std::accumulate(x.sample(0), x.sample(0) + 16, 0.f) / 16.f));

    nn::Upsample2x up;
    const Tensor u = up.forward(x);
    CHECK(u.h == 8);
    CHECK(u.at(0, 0, 1, 1) == x.at(0, 0, 0, 0));
    // backward sums the 2x2 blocks
    Tensor du(2, 3, 8, 8);
    for (auto& v : du.v) v = 1.f;
    const Tensor dd = up.backward(du);
    CHECK(dd.at(0, 0, 0, 0) == 4.f);
}

TEST_CASE("concat and split are inverse") {
    Rng rng(7);
    const Tensor a = random_tensor(2, 3, 2, 2, rng);
    const Tensor b = random_tensor(2, 5, 2, 2, rng);
    const Tensor c = nn::concat_channels(a, b);
    CHECK(c.c == 8);
    Tensor ra(2, 3, 2, 2), rb(2, 5, 2, 2);
    nn::split_channels(c, 3, ra, rb);
    CHECK(ra.v == a.v);
    CHECK(rb.v == b.v);
}

TEST_CASE("adam reduces a quadratic") {
    nn::Param p;
    p.resize(4);
    for (int i = 0; i < 4; ++i) p.w[i] = 2.f + i;
    nn::Adam opt;
    opt.lr = 0.1f;
    std::vector<nn::Param*> params = {&p};
    auto loss = [&] {
        double l = 0.0;
        for (float w : p.w) l += 0.5 * w * w;
        return l;
    };
    const double l0 = loss();
    for (int it = 0; it < 200; ++it) {
        p.zero_grad();
        for (int i = 0; i < 4; ++i) p.g[i] = p.w[i];
        opt.update(params);
    }
    CHECK(loss() < 0.05 * l0);
    CHECK(opt.step == 200);
}

TEST_CASE("sinusoidal embedding shape and range") {
    const Tensor e = nn::sinusoidal_embedding({0.f, 10.f, 500.f}, 64);
    CHECK(e.n == 3);
    CHECK(e.c == 64);
    for (float v : e.v) {
        CHECK(v >= -1.f);
        CHECK(v <= 1.f);
    }
    // distinct timesteps embed differently
    double diff = 0.0;
    for (int i = 0; i < 64; ++i) diff += std::abs(e.at(0, i, 0, 0) - e.at(1, i, 0, 0));
    CHECK(diff > 0.1);
}
