#pragma once

// Minimal trainable NN stack: NCHW tensors, im2col convolutions on Eigen GEMM,
// hand-written backward passes. Sized for 64x64 single-channel images on CPU.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "harmon/core.hpp"

namespace harmon::nn {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;

struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.f) {}

    size_t size() const { return v.size(); }
    size_t sample_size() const { return static_cast<size_t>(c) * h * w; }
    float* sample(int i) { return v.data() + static_cast<size_t>(i) * sample_size(); }
    const float* sample(int i) const { return v.data() + static_cast<size_t>(i) * sample_size(); }
    float& at(int ni, int ci, int yi, int xi) {
        return v[((static_cast<size_t>(ni) * c + ci) * h + yi) * w + xi];
    }
    float at(int ni, int ci, int yi, int xi) const {
        return v[((static_cast<size_t>(ni) * c + ci) * h + yi) * w + xi];
    }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

struct Param {
    std::vector<float> w;  // values
    std::vector<float> g;  // gradient accumulator

    void resize(size_t nelem) {
        w.assign(nelem, 0.f);
        g.assign(nelem, 0.f);
    }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.f); }
    size_t size() const { return w.size(); }
};

using ParamVisitor = std::function<void(const std::string&, Param&)>;

// ---- layers ----

struct Conv2d {
    int cin, cout, k, stride, pad;
    Param weight;  // (cout, cin*k*k)
    Param bias;    // (cout)
    Tensor x_cache;
    int oh = 0, ow = 0;

    Conv2d(int cin_, int cout_, int k_, int stride_ = 1, int pad_ = -1);
    void init(Rng& rng, float scale = 1.f);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void visit(const std::string& prefix, const ParamVisitor& fn) {
        fn(prefix + ".weight", weight);
        fn(prefix + ".bias", bias);
    }

private:
    std::vector<float> col_;  // scratch (cin*k*k, oh*ow)
    void im2col(const float* x, int ih, int iw);
};

struct Linear {
    int in, out;
    Param weight;  // (out, in)
    Param bias;    // (out)
    Tensor x_cache;

    Linear(int in_, int out_);
    void init(Rng& rng, float scale = 1.f);
    /// x is (N, in) flattened as a tensor with c=in, h=w=1.
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void visit(const std::string& prefix, const ParamVisitor& fn) {
        fn(prefix + ".weight", weight);
        fn(prefix + ".bias", bias);
    }
};

struct GroupNorm {
    int c, groups;
    float eps = 1e-5f;
    Param gamma, beta;
    Tensor x_cache;
    std::vector<float> mean_, rstd_;  // per (n, group)

    GroupNorm(int c_, int groups_ = 8);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    void visit(const std::string& prefix, const ParamVisitor& fn) {
        fn(prefix + ".gamma", gamma);
        fn(prefix + ".beta", beta);
    }
};

struct SiLU {
    Tensor x_cache;
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
};

struct LeakyReLU {
    float slope;
    Tensor x_cache;
    explicit LeakyReLU(float slope_ = 0.2f) : slope(slope_) {}
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
};

/// (N,C,H,W) -> (N,C,1,1) spatial mean.
struct GlobalAvgPool {
    int h_ = 0, w_ = 0;
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
};

/// Nearest-neighbour 2x upsample.
struct Upsample2x {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
};

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, int ca, Tensor& da, Tensor& db);

// ---- optimizer ----

struct Adam {
    float lr = 1e-4f;
    float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
    long step = 0;
    std::vector<std::vector<float>> m_, v_;

    void update(const std::vector<Param*>& params);
    void reset() {
        step = 0;
        m_.clear();
        v_.clear();
    }
};

/// Sinusoidal embedding of a scalar per sample; output (N, dim).
Tensor sinusoidal_embedding(const std::vector<float>& t, int dim);

}  // namespace harmon::nn
