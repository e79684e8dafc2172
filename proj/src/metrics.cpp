#include "harmon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace harmon {

double psnr(const Slice& a, const Slice& b) {
    if (!a.pixels.same_shape(b.pixels)) throw InvalidArgument("psnr: shape mismatch");
    double mse = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        if (a.mask[i] || b.mask[i]) {  // union brainmask
            const double d = static_cast<double>(a.pixels.v[i]) - b.pixels.v[i];
            mse += d * d;
            ++n;
        }
    }
    if (n == 0) return kPsnrCap;
    mse /= static_cast<double>(n);
    if (mse <= 0.0) return kPsnrCap;
    const double range = 2.0;
    return std::min(kPsnrCap, 10.0 * std::log10(range * range / mse));
}

namespace {

// 11x11 Gaussian, sigma 1.5, separable, reflecting edges
std::vector<double> gaussian_kernel() {
    std::vector<double> k(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

Image2D gauss_filter(const Image2D& x) {
    static const std::vector<double> k = gaussian_kernel();
    Image2D tmp(x.h, x.w), out(x.h, x.w);
    auto reflect = [](int i, int n) {
        if (i < 0) return -i - 1;
        if (i >= n) return 2 * n - i - 1;
        return i;
    };
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) {
            double acc = 0.0;
            for (int j = 0; j < 11; ++j) acc += k[j] * x.at(y, reflect(xx + j - 5, x.w));
            tmp.at(y, xx) = static_cast<float>(acc);
        }
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) {
            double acc = 0.0;
            for (int j = 0; j < 11; ++j) acc += k[j] * tmp.at(reflect(y + j - 5, x.h), xx);
            out.at(y, xx) = static_cast<float>(acc);
        }
    return out;
}

Image2D downsample2(const Image2D& x) {
    Image2D out(x.h / 2, x.w / 2);
    for (int y = 0; y < out.h; ++y)
        for (int xx = 0; xx < out.w; ++xx)
            out.at(y, xx) = 0.25f * (x.at(2 * y, 2 * xx) + x.at(2 * y, 2 * xx + 1) +
                                     x.at(2 * y + 1, 2 * xx) + x.at(2 * y + 1, 2 * xx + 1));
    return out;
}

struct SsimTerms {
    double luminance;
    double cs;
};

SsimTerms ssim_terms(const Image2D& a, const Image2D& b) {
    const double L = 2.0;
    const double C1 = (0.01 * L) * (0.01 * L);
    const double C2 = (0.03 * L) * (0.03 * L);
    Image2D mu_a = gauss_filter(a), mu_b = gauss_filter(b);
    Image2D aa = a, bb = b, ab = a;
    for (size_t i = 0; i < a.size(); ++i) {
        aa.v[i] = a.v[i] * a.v[i];
        bb.v[i] = b.v[i] * b.v[i];
        ab.v[i] = a.v[i] * b.v[i];
    }
    Image2D s_aa = gauss_filter(aa), s_bb = gauss_filter(bb), s_ab = gauss_filter(ab);
    double lum = 0.0, cs = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double ma = mu_a.v[i], mb = mu_b.v[i];
        const double va = s_aa.v[i] - ma * ma;
        const double vb = s_bb.v[i] - mb * mb;
        const double cov = s_ab.v[i] - ma * mb;
        lum += (2.0 * ma * mb + C1) / (ma * ma + mb * mb + C1);
        cs += (2.0 * cov + C2) / (va + vb + C2);
    }
    const double n = static_cast<double>(a.size());
    return {lum / n, cs / n};
}

}  // namespace

double ms_ssim(const Slice& a, const Slice& b, int scales) {
    if (!a.pixels.same_shape(b.pixels)) throw InvalidArgument("ms_ssim: shape mismatch");
    const int min_side = std::min(a.h(), a.w());
    if (min_side >> (scales - 1) < 16)
        throw InvalidArgument("ms_ssim: image too small for requested scales");
    // canonical 5-scale exponents, truncated and renormalized to sum 1
    static const double canonical[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    std::vector<double> w(canonical, canonical + scales);
    const double ws = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= ws;

    // shift to the non-negative range [0, 2]
    Image2D ia = a.pixels, ib = b.pixels;
    for (auto& v : ia.v) v += 1.f;
    for (auto& v : ib.v) v += 1.f;

    double result = 1.0;
    for (int s = 0; s < scales; ++s) {
        const SsimTerms t = ssim_terms(ia, ib);
        const double cs = std::max(t.cs, 0.0);
        if (s + 1 < scales) {
            result *= std::pow(cs, w[s]);
            ia = downsample2(ia);
            ib = downsample2(ib);
        } else {
            result *= std::pow(std::max(t.luminance, 0.0) * cs, w[s]);
        }
    }
    return std::clamp(result, 0.0, 1.0);
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidArgument("wilcoxon: length mismatch");
    std::vector<double> d;
    for (size_t i = 0; i < x.size(); ++i) {
        const double v = x[i] - y[i];
        if (v != 0.0) d.push_back(v);
    }
    WilcoxonResult r;
    r.n_effective = static_cast<int>(d.size());
    if (d.size() < 2) return r;

    std::vector<size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t i, size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
    std::vector<double> rank(d.size());
    double tie_correction = 0.0;
    for (size_t i = 0; i < d.size();) {
        size_t j = i;
        while (j + 1 < d.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const double avg_rank = 0.5 * (i + j) + 1.0;
        const double t = static_cast<double>(j - i + 1);
        tie_correction += t * t * t - t;
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg_rank;
        i = j + 1;
    }
    double w_plus = 0.0;
    for (size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0) w_plus += rank[i];
    const double n = static_cast<double>(d.size());
    const double mean = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_correction / 48.0;
    r.statistic = w_plus;
    if (var <= 0.0) return r;
    const double diff = w_plus - mean;
    const double cc = diff > 0 ? -0.5 : (diff < 0 ? 0.5 : 0.0);  // continuity correction
    r.z = (diff + cc) / std::sqrt(var);
    r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));  // two-sided
    return r;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr(std::vector<double> v) {
    if (v.size() < 2) return 0.0;
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * (v.size() - 1);
        const size_t i = static_cast<size_t>(pos);
        const double f = pos - i;
        return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v[i];
    };
    return quantile(0.75) - quantile(0.25);
}

}  // namespace harmon
