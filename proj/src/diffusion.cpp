#include "harmon/diffusion.hpp"

#include <cmath>

namespace harmon {

DiffusionSchedule DiffusionSchedule::linear_beta(int T, double beta_start, double beta_end) {
    DiffusionSchedule s;
    s.T = T;
    s.alpha_bar.resize(T + 1);
    s.alpha_bar[0] = 1.0;
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double beta = beta_start + (beta_end - beta_start) * (t - 1) / std::max(1, T - 1);
        prod *= 1.0 - beta;
        s.alpha_bar[t] = prod;
    }
    return s;
}

std::vector<int> DiffusionSchedule::sampling_times(int n_steps) const {
    if (n_steps < 1) throw InvalidArgument("sampling_times: need n_steps >= 1");
    std::vector<int> ts(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i)
        ts[i] = static_cast<int>(std::llround(static_cast<double>(T) * (n_steps - i) / n_steps));
    return ts;  // descending, ts[0]=T, ts[n_steps]=0
}

void DiffusionSchedule::validate() const {
    if (static_cast<int>(alpha_bar.size()) != T + 1)
        throw InvalidArgument("schedule: alpha_bar length mismatch");
    if (alpha_bar[0] != 1.0) throw InvalidArgument("schedule: alpha_bar[0] must be 1");
    for (int t = 1; t <= T; ++t) {
        if (!(alpha_bar[t] > 0.0 && alpha_bar[t] < alpha_bar[t - 1]))
            throw InvalidArgument("schedule: alpha_bar must be strictly decreasing in (0,1)");
    }
}

nn::Tensor q_sample(const nn::Tensor& x0, const std::vector<int>& t, const nn::Tensor& eps,
                    const DiffusionSchedule& schedule) {
    if (!x0.same_shape(eps)) throw InvalidArgument("q_sample: shape mismatch");
    if (t.size() != static_cast<size_t>(x0.n)) throw InvalidArgument("q_sample: t length mismatch");
    nn::Tensor y(x0.n, x0.c, x0.h, x0.w);
    for (int i = 0; i < x0.n; ++i) {
        if (t[i] < 0 || t[i] > schedule.T) throw InvalidArgument("q_sample: t out of range");
        const float sa = static_cast<float>(std::sqrt(schedule.alpha_bar[t[i]]));
        const float sb = static_cast<float>(std::sqrt(1.0 - schedule.alpha_bar[t[i]]));
        const float* xs = x0.sample(i);
        const float* es = eps.sample(i);
        float* ys = y.sample(i);
        for (size_t j = 0; j < x0.sample_size(); ++j) ys[j] = sa * xs[j] + sb * es[j];
    }
    return y;
}

nn::Tensor ddim_step(const nn::Tensor& x_t, const nn::Tensor& eps_hat, int t, int t_prev,
                     const DiffusionSchedule& schedule) {
    if (!x_t.same_shape(eps_hat)) throw InvalidArgument("ddim_step: shape mismatch");
    const double at = schedule.alpha_bar[t];
    const double ap = schedule.alpha_bar[t_prev];
    const float sa_t = static_cast<float>(std::sqrt(at));
    const float sb_t = static_cast<float>(std::sqrt(1.0 - at));
    const float sa_p = static_cast<float>(std::sqrt(ap));
    const float sb_p = static_cast<float>(std::sqrt(1.0 - ap));
    nn::Tensor y(x_t.n, x_t.c, x_t.h, x_t.w);
    for (size_t j = 0; j < x_t.size(); ++j) {
        const float x0_hat = (x_t.v[j] - sb_t * eps_hat.v[j]) / sa_t;
        y.v[j] = sa_p * x0_hat + sb_p * eps_hat.v[j];
    }
    return y;
}

double ddim_mse_loss(const nn::Tensor& eps_hat, const nn::Tensor& eps) {
    if (!eps_hat.same_shape(eps)) throw InvalidArgument("ddim_mse_loss: shape mismatch");
    double acc = 0.0;
    for (size_t j = 0; j < eps.size(); ++j) {
        const double d = static_cast<double>(eps_hat.v[j]) - eps.v[j];
        acc += d * d;
    }
    return acc / static_cast<double>(eps.size());
}

std::vector<double> ddim_mse_loss_with_grad(const nn::Tensor& eps_hat, const nn::Tensor& eps,
                                            nn::Tensor& deps_hat) {
    if (!eps_hat.same_shape(eps)) throw InvalidArgument("ddim_mse_loss: shape mismatch");
    deps_hat = nn::Tensor(eps.n, eps.c, eps.h, eps.w);
    std::vector<double> per_sample(eps.n, 0.0);
    const double m = static_cast<double>(eps.sample_size());
    for (int i = 0; i < eps.n; ++i) {
        const float* a = eps_hat.sample(i);
        const float* b = eps.sample(i);
        float* g = deps_hat.sample(i);
        double acc = 0.0;
        for (size_t j = 0; j < eps.sample_size(); ++j) {
            const double d = static_cast<double>(a[j]) - b[j];
            acc += d * d;
            // gradient of mean-over-views of per-view MSE
            g[j] = static_cast<float>(2.0 * d / (m * eps.n));
        }
        per_sample[i] = acc / m;
    }
    return per_sample;
}

// ---- ResBlock ----

ResBlock::ResBlock(int cin_, int cout_, int emb_dim)
    : cin(cin_),
      cout(cout_),
      gn1(cin_),
      conv1(cin_, cout_, 3),
      emb_lin(emb_dim, 2 * cout_),
      gn2(cout_),
      conv2(cout_, cout_, 3) {
    if (cin != cout) skip.emplace(cin, cout, 1, 1, 0);
}

void ResBlock::init(Rng& rng) {
    conv1.init(rng);
    emb_lin.init(rng, 0.1f);
    conv2.init(rng, 0.f);  // zero-init: block starts as identity
    if (skip) skip->init(rng);
}

nn::Tensor ResBlock::forward(const nn::Tensor& x, const nn::Tensor& emb) {
    nn::Tensor h = conv1.forward(a1.forward(gn1.forward(x)));
    sb_cache = emb_lin.forward(emb);
    g_cache = gn2.forward(h);
    nn::Tensor g = g_cache;
    const size_t plane = static_cast<size_t>(g.h) * g.w;
    for (int i = 0; i < g.n; ++i) {
        const float* sb = sb_cache.sample(i);
        float* gs = g.sample(i);
        for (int c0 = 0; c0 < cout; ++c0) {
            const float s = 1.f + sb[c0];
            const float b = sb[cout + c0];
            for (size_t j = 0; j < plane; ++j) gs[c0 * plane + j] = gs[c0 * plane + j] * s + b;
        }
    }
    nn::Tensor h2 = conv2.forward(a2.forward(g));
    nn::Tensor sk = skip ? skip->forward(x) : x;
    for (size_t j = 0; j < h2.size(); ++j) h2.v[j] += sk.v[j];
    return h2;
}

nn::Tensor ResBlock::backward(const nn::Tensor& dy, nn::Tensor& demb_accum) {
    nn::Tensor dg = a2.backward(conv2.backward(dy));
    // FiLM backward
    nn::Tensor dsb(sb_cache.n, sb_cache.c, 1, 1);
    const size_t plane = static_cast<size_t>(dg.h) * dg.w;
    for (int i = 0; i < dg.n; ++i) {
        const float* sb = sb_cache.sample(i);
        const float* gs = g_cache.sample(i);
        float* dgs = dg.sample(i);
        float* dsbs = dsb.sample(i);
        for (int c0 = 0; c0 < cout; ++c0) {
            const float s = 1.f + sb[c0];
            double dscale = 0.0, dshift = 0.0;
            for (size_t j = 0; j < plane; ++j) {
                const float d = dgs[c0 * plane + j];
                dscale += static_cast<double>(d) * gs[c0 * plane + j];
                dshift += d;
                dgs[c0 * plane + j] = d * s;
            }
            dsbs[c0] = static_cast<float>(dscale);
            dsbs[cout + c0] = static_cast<float>(dshift);
        }
    }
    nn::Tensor demb = emb_lin.backward(dsb);
    for (size_t j = 0; j < demb.size(); ++j) demb_accum.v[j] += demb.v[j];
    nn::Tensor dh = gn2.backward(dg);
    nn::Tensor dx = gn1.backward(a1.backward(conv1.backward(dh)));
    if (skip) {
        nn::Tensor dsk = skip->backward(dy);
        for (size_t j = 0; j < dx.size(); ++j) dx.v[j] += dsk.v[j];
    } else {
        for (size_t j = 0; j < dx.size(); ++j) dx.v[j] += dy.v[j];
    }
    return dx;
}

void ResBlock::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
    gn1.visit(prefix + ".gn1", fn);
    conv1.visit(prefix + ".conv1", fn);
    emb_lin.visit(prefix + ".emb", fn);
    gn2.visit(prefix + ".gn2", fn);
    conv2.visit(prefix + ".conv2", fn);
    if (skip) skip->visit(prefix + ".skip", fn);
}

// ---- UNet ----

UNet::UNet(const UNetConfig& cfg)
    : cfg_(cfg),
      stem_(1, cfg.widths[0], 3),
      enc0_(cfg.widths[0], cfg.widths[0], cfg.emb_dim),
      enc1_(cfg.widths[0], cfg.widths[1], cfg.emb_dim),
      enc2_(cfg.widths[1], cfg.widths[2], cfg.emb_dim),
      down0_(cfg.widths[0], cfg.widths[0], 3, 2),
      down1_(cfg.widths[1], cfg.widths[1], 3, 2),
      mid_(cfg.widths[2], cfg.widths[2], cfg.emb_dim),
      dec2_(2 * cfg.widths[2], cfg.widths[1], cfg.emb_dim),
      dec1_(2 * cfg.widths[1], cfg.widths[0], cfg.emb_dim),
      dec0_(2 * cfg.widths[0], cfg.widths[0], cfg.emb_dim),
      out_norm_(cfg.widths[0]),
      out_conv_(cfg.widths[0], 1, 3),
      t_mlp1_(cfg.time_dim, cfg.emb_dim),
      t_mlp2_(cfg.emb_dim, cfg.emb_dim),
      z_proj_(cfg.cond_dim, cfg.emb_dim) {}

void UNet::init(Rng& rng) {
    stem_.init(rng);
    enc0_.init(rng);
    enc1_.init(rng);
    enc2_.init(rng);
    down0_.init(rng);
    down1_.init(rng);
    mid_.init(rng);
    dec2_.init(rng);
    dec1_.init(rng);
    dec0_.init(rng);
    out_conv_.init(rng, 0.f);  // eps_hat starts at 0
    t_mlp1_.init(rng);
    t_mlp2_.init(rng);
    z_proj_.init(rng);
}

nn::Tensor UNet::forward(const nn::Tensor& x, const std::vector<int>& t, const nn::Tensor& z) {
    if (z.c != cfg_.cond_dim) throw InvalidArgument("unet: condition dim mismatch");
    if (x.n != z.n || t.size() != static_cast<size_t>(x.n))
        throw InvalidArgument("unet: batch size mismatch");
    cached_n_ = x.n;
    std::vector<float> tf(t.size());
    for (size_t i = 0; i < t.size(); ++i) tf[i] = static_cast<float>(t[i]);
    nn::Tensor temb = nn::sinusoidal_embedding(tf, cfg_.time_dim);
    temb = t_mlp2_.forward(t_act_.forward(t_mlp1_.forward(temb)));
    nn::Tensor zemb = z_proj_.forward(z);
    nn::Tensor emb = temb;
    for (size_t j = 0; j < emb.size(); ++j) emb.v[j] += zemb.v[j];

    nn::Tensor h = stem_.forward(x);
    s0_ = enc0_.forward(h, emb);
    h = down0_.forward(s0_);
    s1_ = enc1_.forward(h, emb);
    h = down1_.forward(s1_);
    s2_ = enc2_.forward(h, emb);
    h = mid_.forward(s2_, emb);
    h = dec2_.forward(nn::concat_channels(h, s2_), emb);
    h = up1_.forward(h);
    h = dec1_.forward(nn::concat_channels(h, s1_), emb);
    h = up0_.forward(h);
    h = dec0_.forward(nn::concat_channels(h, s0_), emb);
    return out_conv_.forward(out_act_.forward(out_norm_.forward(h)));
}

nn::Tensor UNet::backward(const nn::Tensor& deps) {
    nn::Tensor demb(cached_n_, cfg_.emb_dim, 1, 1);

    nn::Tensor dh = out_norm_.backward(out_act_.backward(out_conv_.backward(deps)));
    nn::Tensor dcat = dec0_.backward(dh, demb);
    nn::Tensor dup, ds0;
    nn::split_channels(dcat, cfg_.widths[0], dup, ds0);
    dh = up0_.backward(dup);
    dcat = dec1_.backward(dh, demb);
    nn::Tensor ds1;
    nn::split_channels(dcat, cfg_.widths[1], dup, ds1);
    dh = up1_.backward(dup);
    dcat = dec2_.backward(dh, demb);
    nn::Tensor dmid, ds2;
    nn::split_channels(dcat, cfg_.widths[2], dmid, ds2);
    dh = mid_.backward(dmid, demb);
    for (size_t j = 0; j < dh.size(); ++j) dh.v[j] += ds2.v[j];
    dh = enc2_.backward(dh, demb);
    dh = down1_.backward(dh);
    for (size_t j = 0; j < dh.size(); ++j) dh.v[j] += ds1.v[j];
    dh = enc1_.backward(dh, demb);
    dh = down0_.backward(dh);
    for (size_t j = 0; j < dh.size(); ++j) dh.v[j] += ds0.v[j];
    dh = enc0_.backward(dh, demb);
    stem_.backward(dh);

    // embedding backward: time branch (params only) and condition branch
    t_mlp1_.backward(t_act_.backward(t_mlp2_.backward(demb)));
    return z_proj_.backward(demb);
}

void UNet::visit(const std::string& prefix, const nn::ParamVisitor& fn) {
    stem_.visit(prefix + ".stem", fn);
    enc0_.visit(prefix + ".enc0", fn);
    down0_.visit(prefix + ".down0", fn);
    enc1_.visit(prefix + ".enc1", fn);
    down1_.visit(prefix + ".down1", fn);
    enc2_.visit(prefix + ".enc2", fn);
    mid_.visit(prefix + ".mid", fn);
    dec2_.visit(prefix + ".dec2", fn);
    dec1_.visit(prefix + ".dec1", fn);
    dec0_.visit(prefix + ".dec0", fn);
    out_norm_.visit(prefix + ".out_norm", fn);
    out_conv_.visit(prefix + ".out_conv", fn);
    t_mlp1_.visit(prefix + ".t_mlp1", fn);
    t_mlp2_.visit(prefix + ".t_mlp2", fn);
    z_proj_.visit(prefix + ".z_proj", fn);
}

void UNet::collect(std::vector<nn::Param*>& out) {
    visit("unet", [&](const std::string&, nn::Param& p) { out.push_back(&p); });
}

void UNet::zero_grad() {
    visit("unet", [](const std::string&, nn::Param& p) { p.zero_grad(); });
}

}  // namespace harmon
