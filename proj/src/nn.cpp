#include "harmon/nn.hpp"

#include <cmath>
#include <cstring>

namespace harmon::nn {

// ---- Conv2d ----

Conv2d::Conv2d(int cin_, int cout_, int k_, int stride_, int pad_)
    : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_ < 0 ? k_ / 2 : pad_) {
    weight.resize(static_cast<size_t>(cout) * cin * k * k);
    bias.resize(cout);
}

void Conv2d::init(Rng& rng, float scale) {
    const float std = scale * std::sqrt(2.f / static_cast<float>(cin * k * k));
    for (auto& x : weight.w) x = static_cast<float>(rng.normal()) * std;
    std::fill(bias.w.begin(), bias.w.end(), 0.f);
}

void Conv2d::im2col(const float* x, int ih, int iw) {
    // col layout: (cin*k*k, oh*ow)
    const size_t cols = static_cast<size_t>(oh) * ow;
    col_.assign(static_cast<size_t>(cin) * k * k * cols, 0.f);
    for (int c0 = 0; c0 < cin; ++c0) {
        const float* xc = x + static_cast<size_t>(c0) * ih * iw;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* row = col_.data() + (static_cast<size_t>(c0) * k * k + ky * k + kx) * cols;
                for (int y = 0; y < oh; ++y) {
                    const int sy = y * stride + ky - pad;
                    if (sy < 0 || sy >= ih) continue;
                    for (int x0 = 0; x0 < ow; ++x0) {
                        const int sx = x0 * stride + kx - pad;
                        if (sx < 0 || sx >= iw) continue;
                        row[static_cast<size_t>(y) * ow + x0] = xc[static_cast<size_t>(sy) * iw + sx];
                    }
                }
            }
        }
    }
}

Tensor Conv2d::forward(const Tensor& x) {
    oh = (x.h + 2 * pad - k) / stride + 1;
    ow = (x.w + 2 * pad - k) / stride + 1;
    x_cache = x;
    Tensor y(x.n, cout, oh, ow);
    const size_t cols = static_cast<size_t>(oh) * ow;
    CMapM W(weight.w.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
    for (int i = 0; i < x.n; ++i) {
        im2col(x.sample(i), x.h, x.w);
        CMapM C(col_.data(), static_cast<Eigen::Index>(cin) * k * k, static_cast<Eigen::Index>(cols));
        MapM Y(y.sample(i), cout, static_cast<Eigen::Index>(cols));
        Y.noalias() = W * C;
        for (int c0 = 0; c0 < cout; ++c0) Y.row(c0).array() += bias.w[c0];
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    const Tensor& x = x_cache;
    Tensor dx(x.n, x.c, x.h, x.w);
    const size_t cols = static_cast<size_t>(oh) * ow;
    CMapM W(weight.w.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
    MapM dW(weight.g.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
    std::vector<float> dcol(static_cast<size_t>(cin) * k * k * cols);
    for (int i = 0; i < x.n; ++i) {
        im2col(x.sample(i), x.h, x.w);
        CMapM C(col_.data(), static_cast<Eigen::Index>(cin) * k * k, static_cast<Eigen::Index>(cols));
        CMapM dY(dy.sample(i), cout, static_cast<Eigen::Index>(cols));
        dW.noalias() += dY * C.transpose();
        // fixed-order reduction: Eigen's vectorized sum() groups terms by the
        // buffer's alignment, which varies between heap instances
        for (int c0 = 0; c0 < cout; ++c0) {
            const float* row = dy.sample(i) + static_cast<size_t>(c0) * cols;
            double s = 0.0;
            for (size_t j = 0; j < cols; ++j) s += row[j];
            bias.g[c0] += static_cast<float>(s);
        }
        MapM dC(dcol.data(), static_cast<Eigen::Index>(cin) * k * k, static_cast<Eigen::Index>(cols));
        dC.noalias() = W.transpose() * dY;
        // col2im (accumulate)
        float* dxs = dx.sample(i);
        for (int c0 = 0; c0 < cin; ++c0) {
            float* dxc = dxs + static_cast<size_t>(c0) * x.h * x.w;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const float* row =
                        dcol.data() + (static_cast<size_t>(c0) * k * k + ky * k + kx) * cols;
                    for (int y = 0; y < oh; ++y) {
                        const int sy = y * stride + ky - pad;
                        if (sy < 0 || sy >= x.h) continue;
                        for (int x0 = 0; x0 < ow; ++x0) {
                            const int sx = x0 * stride + kx - pad;
                            if (sx < 0 || sx >= x.w) continue;
                            dxc[static_cast<size_t>(sy) * x.w + sx] +=
                                row[static_cast<size_t>(y) * ow + x0];
                        }
                    }
                }
            }
        }
    }
    return dx;
}

// ---- Linear ----

Linear::Linear(int in_, int out_) : in(in_), out(out_) {
    weight.resize(static_cast<size_t>(out) * in);
    bias.resize(out);
}

void Linear::init(Rng& rng, float scale) {
    const float std = scale * std::sqrt(2.f / static_cast<float>(in));
    for (auto& x : weight.w) x = static_cast<float>(rng.normal()) * std;
    std::fill(bias.w.begin(), bias.w.end(), 0.f);
}

Tensor Linear::forward(const Tensor& x) {
    x_cache = x;
    Tensor y(x.n, out, 1, 1);
    CMapM X(x.v.data(), x.n, in);
    CMapM W(weight.w.data(), out, in);
    MapM Y(y.v.data(), x.n, out);
    Y.noalias() = X * W.transpose();
    for (int j = 0; j < out; ++j) Y.col(j).array() += bias.w[j];
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    const Tensor& x = x_cache;
    Tensor dx(x.n, in, 1, 1);
    CMapM X(x.v.data(), x.n, in);
    CMapM dY(dy.v.data(), x.n, out);
    MapM dW(weight.g.data(), out, in);
    dW.noalias() += dY.transpose() * X;
    // fixed-order reduction (see Conv2d::backward)
    for (int j = 0; j < out; ++j) {
        double s = 0.0;
        for (int i = 0; i < x.n; ++i) s += dy.v[static_cast<size_t>(i) * out + j];
        bias.g[j] += static_cast<float>(s);
    }
    CMapM W(weight.w.data(), out, in);
    MapM dX(dx.v.data(), x.n, in);
    dX.noalias() = dY * W;
    return dx;
}

// ---- GroupNorm ----

GroupNorm::GroupNorm(int c_, int groups_) : c(c_), groups(std::min(groups_, c_)) {
    while (c % groups != 0) --groups;  // largest divisor <= requested
    gamma.resize(c);
    beta.resize(c);
    std::fill(gamma.w.begin(), gamma.w.end(), 1.f);
}

Tensor GroupNorm::forward(const Tensor& x) {
    x_cache = x;
    Tensor y(x.n, x.c, x.h, x.w);
    const int cg = c / groups;
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    const size_t m = cg * plane;
    mean_.assign(static_cast<size_t>(x.n) * groups, 0.f);
    rstd_.assign(static_cast<size_t>(x.n) * groups, 0.f);
    for (int i = 0; i < x.n; ++i) {
        for (int g = 0; g < groups; ++g) {
            const float* xs = x.sample(i) + static_cast<size_t>(g) * cg * plane;
            double mu = 0.0;
            for (size_t j = 0; j < m; ++j) mu += xs[j];
            mu /= static_cast<double>(m);
            double var = 0.0;
            for (size_t j = 0; j < m; ++j) {
                const double d = xs[j] - mu;
                var += d * d;
            }
            var /= static_cast<double>(m);
            const float rs = 1.f / std::sqrt(static_cast<float>(var) + eps);
            mean_[static_cast<size_t>(i) * groups + g] = static_cast<float>(mu);
            rstd_[static_cast<size_t>(i) * groups + g] = rs;
            float* ys = y.sample(i) + static_cast<size_t>(g) * cg * plane;
            for (int cc = 0; cc < cg; ++cc) {
                const int ch = g * cg + cc;
                const float a = gamma.w[ch] * rs;
                const float b = beta.w[ch] - a * static_cast<float>(mu);
                for (size_t j = 0; j < plane; ++j)
                    ys[cc * plane + j] = a * xs[cc * plane + j] + b;
            }
        }
    }
    return y;
}

Tensor GroupNorm::backward(const Tensor& dy) {
    const Tensor& x = x_cache;
    Tensor dx(x.n, x.c, x.h, x.w);
    const int cg = c / groups;
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    const size_t m = cg * plane;
    for (int i = 0; i < x.n; ++i) {
        for (int g = 0; g < groups; ++g) {
            const float mu = mean_[static_cast<size_t>(i) * groups + g];
            const float rs = rstd_[static_cast<size_t>(i) * groups + g];
            const float* xs = x.sample(i) + static_cast<size_t>(g) * cg * plane;
            const float* dys = dy.sample(i) + static_cast<size_t>(g) * cg * plane;
            float* dxs = dx.sample(i) + static_cast<size_t>(g) * cg * plane;
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int cc = 0; cc < cg; ++cc) {
                const int ch = g * cg + cc;
                for (size_t j = 0; j < plane; ++j) {
                    const float xhat = (xs[cc * plane + j] - mu) * rs;
                    const float d = dys[cc * plane + j];
                    const float dxhat = d * gamma.w[ch];
                    gamma.g[ch] += d * xhat;
                    beta.g[ch] += d;
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += static_cast<double>(dxhat) * xhat;
                }
            }
            const float mean_dxhat = static_cast<float>(sum_dxhat / static_cast<double>(m));
            const float mean_dxx = static_cast<float>(sum_dxhat_xhat / static_cast<double>(m));
            for (int cc = 0; cc < cg; ++cc) {
                const int ch = g * cg + cc;
                for (size_t j = 0; j < plane; ++j) {
                    const float xhat = (xs[cc * plane + j] - mu) * rs;
                    const float dxhat = dys[cc * plane + j] * gamma.w[ch];
                    dxs[cc * plane + j] = rs * (dxhat - mean_dxhat - xhat * mean_dxx);
                }
            }
        }
    }
    return dx;
}

// ---- activations ----

Tensor SiLU::forward(const Tensor& x) {
    x_cache = x;
    Tensor y = x;
    for (auto& v : y.v) {
        const float s = 1.f / (1.f + std::exp(-v));
        v = v * s;
    }
    return y;
}

Tensor SiLU::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t j = 0; j < dx.size(); ++j) {
        const float v = x_cache.v[j];
        const float s = 1.f / (1.f + std::exp(-v));
        dx.v[j] *= s * (1.f + v * (1.f - s));
    }
    return dx;
}

Tensor LeakyReLU::forward(const Tensor& x) {
    x_cache = x;
    Tensor y = x;
    for (auto& v : y.v)
        if (v < 0.f) v *= slope;
    return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t j = 0; j < dx.size(); ++j)
        if (x_cache.v[j] < 0.f) dx.v[j] *= slope;
    return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    h_ = x.h;
    w_ = x.w;
    Tensor y(x.n, x.c, 1, 1);
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    for (int i = 0; i < x.n; ++i) {
        for (int c0 = 0; c0 < x.c; ++c0) {
            const float* p = x.sample(i) + c0 * plane;
            double acc = 0.0;
            for (size_t j = 0; j < plane; ++j) acc += p[j];
            y.at(i, c0, 0, 0) = static_cast<float>(acc / static_cast<double>(plane));
        }
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, h_, w_);
    const size_t plane = static_cast<size_t>(h_) * w_;
    const float inv = 1.f / static_cast<float>(plane);
    for (int i = 0; i < dy.n; ++i)
        for (int c0 = 0; c0 < dy.c; ++c0) {
            const float g = dy.at(i, c0, 0, 0) * inv;
            float* p = dx.sample(i) + c0 * plane;
            for (size_t j = 0; j < plane; ++j) p[j] = g;
        }
    return dx;
}

Tensor Upsample2x::forward(const Tensor& x) {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int i = 0; i < x.n; ++i)
        for (int c0 = 0; c0 < x.c; ++c0)
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx)
                    y.at(i, c0, yy, xx) = x.at(i, c0, yy / 2, xx / 2);
    return y;
}

Tensor Upsample2x::backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int i = 0; i < dy.n; ++i)
        for (int c0 = 0; c0 < dy.c; ++c0)
            for (int yy = 0; yy < dy.h; ++yy)
                for (int xx = 0; xx < dy.w; ++xx)
                    dx.at(i, c0, yy / 2, xx / 2) += dy.at(i, c0, yy, xx);
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    Tensor y(a.n, a.c + b.c, a.h, a.w);
    const size_t pa = a.sample_size(), pb = b.sample_size();
    for (int i = 0; i < a.n; ++i) {
        std::memcpy(y.sample(i), a.sample(i), pa * sizeof(float));
        std::memcpy(y.sample(i) + pa, b.sample(i), pb * sizeof(float));
    }
    return y;
}

void split_channels(const Tensor& d, int ca, Tensor& da, Tensor& db) {
    da = Tensor(d.n, ca, d.h, d.w);
    db = Tensor(d.n, d.c - ca, d.h, d.w);
    const size_t pa = da.sample_size(), pb = db.sample_size();
    for (int i = 0; i < d.n; ++i) {
        std::memcpy(da.sample(i), d.sample(i), pa * sizeof(float));
        std::memcpy(db.sample(i), d.sample(i) + pa, pb * sizeof(float));
    }
}

// ---- Adam ----

void Adam::update(const std::vector<Param*>& params) {
    if (m_.size() != params.size()) {
        m_.assign(params.size(), {});
        v_.assign(params.size(), {});
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i]->size(), 0.f);
            v_[i].assign(params[i]->size(), 0.f);
        }
    }
    ++step;
    const float bc1 = 1.f - std::pow(beta1, static_cast<float>(step));
    const float bc2 = 1.f - std::pow(beta2, static_cast<float>(step));
    for (size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        for (size_t j = 0; j < p.size(); ++j) {
            const float g = p.g[j];
            m_[i][j] = beta1 * m_[i][j] + (1.f - beta1) * g;
            v_[i][j] = beta2 * v_[i][j] + (1.f - beta2) * g * g;
            const float mhat = m_[i][j] / bc1;
            const float vhat = v_[i][j] / bc2;
            p.w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

Tensor sinusoidal_embedding(const std::vector<float>& t, int dim) {
    Tensor y(static_cast<int>(t.size()), dim, 1, 1);
    const int half = dim / 2;
    for (size_t i = 0; i < t.size(); ++i) {
        for (int j = 0; j < half; ++j) {
            const double freq = std::exp(-std::log(10000.0) * j / std::max(1, half - 1));
            y.at(static_cast<int>(i), j, 0, 0) = static_cast<float>(std::sin(t[i] * freq));
            y.at(static_cast<int>(i), half + j, 0, 0) = static_cast<float>(std::cos(t[i] * freq));
        }
    }
    return y;
}

}  // namespace harmon::nn
