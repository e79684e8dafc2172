#include "harmon/features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace harmon {

namespace {

constexpr int kGlcmLevels = 16;
constexpr int kHistBins = 32;

int quantize(float v, int levels) {
    const double t = (static_cast<double>(v) + 1.0) / 2.0;  // [-1,1] -> [0,1]
    return std::clamp(static_cast<int>(t * levels), 0, levels - 1);
}

struct GlcmStats {
    double contrast = 0.0;
    double homogeneity = 0.0;
    double energy = 0.0;
};

GlcmStats glcm(const Slice& s, int dy, int dx) {
    std::vector<double> p(kGlcmLevels * kGlcmLevels, 0.0);
    double total = 0.0;
    for (int y = 0; y < s.h(); ++y) {
        for (int x = 0; x < s.w(); ++x) {
            const int y2 = y + dy, x2 = x + dx;
            if (y2 < 0 || y2 >= s.h() || x2 < 0 || x2 >= s.w()) continue;
            if (!s.in_mask(y, x) || !s.in_mask(y2, x2)) continue;
            const int a = quantize(s.pixels.at(y, x), kGlcmLevels);
            const int b = quantize(s.pixels.at(y2, x2), kGlcmLevels);
            p[a * kGlcmLevels + b] += 1.0;  // symmetric
            p[b * kGlcmLevels + a] += 1.0;
            total += 2.0;
        }
    }
    GlcmStats g;
    if (total <= 0.0) return g;
    for (int i = 0; i < kGlcmLevels; ++i)
        for (int j = 0; j < kGlcmLevels; ++j) {
            const double pij = p[i * kGlcmLevels + j] / total;
            g.contrast += pij * (i - j) * (i - j);
            g.homogeneity += pij / (1.0 + std::abs(i - j));
            g.energy += pij * pij;
        }
    return g;
}

}  // namespace

std::vector<double> feature_vector(const Slice& s) {
    std::vector<double> in_mask;
    for (size_t i = 0; i < s.pixels.size(); ++i)
        if (s.mask[i]) in_mask.push_back(s.pixels.v[i]);
    if (in_mask.empty()) return std::vector<double>(kFeatureDim, 0.0);

    const double n = static_cast<double>(in_mask.size());
    double mean = 0.0;
    for (double v : in_mask) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : in_mask) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double variance = m2;
    const double sd = std::sqrt(std::max(m2, 1e-12));
    const double skewness = m3 / (sd * sd * sd);
    const double kurtosis = m4 / (m2 * m2 > 1e-12 ? m2 * m2 : 1e-12);

    std::vector<double> hist(kHistBins, 0.0);
    for (double v : in_mask)
        hist[std::clamp(static_cast<int>((v + 1.0) / 2.0 * kHistBins), 0, kHistBins - 1)] += 1.0;
    double entropy = 0.0;
    for (double h : hist) {
        const double p = h / n;
        if (p > 0.0) entropy -= p * std::log2(p);
    }

    std::sort(in_mask.begin(), in_mask.end());
    auto pct = [&](double q) {
        const double pos = q * (in_mask.size() - 1);
        const size_t i = static_cast<size_t>(pos);
        const double f = pos - i;
        return i + 1 < in_mask.size() ? in_mask[i] * (1 - f) + in_mask[i + 1] * f : in_mask[i];
    };

    const GlcmStats gh = glcm(s, 0, 1);
    const GlcmStats gv = glcm(s, 1, 0);

    return {mean,        variance,       skewness,    kurtosis,       entropy,
            pct(0.10),   pct(0.50),      pct(0.90),   gh.contrast,    gh.homogeneity,
            gv.contrast, gv.homogeneity, gh.energy};
}

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "mean",           "variance",        "skewness",        "kurtosis",
        "entropy",        "p10",             "p50",             "p90",
        "glcm_contrast_h", "glcm_homogeneity_h", "glcm_contrast_v", "glcm_homogeneity_v",
        "glcm_energy_h"};
    return names;
}

namespace {

void standardize_stats(const std::vector<std::vector<double>>& x, std::vector<double>& mean,
                       std::vector<double>& std) {
    const size_t d = x[0].size();
    mean.assign(d, 0.0);
    std.assign(d, 0.0);
    for (const auto& row : x)
        for (size_t j = 0; j < d; ++j) mean[j] += row[j];
    for (auto& m : mean) m /= static_cast<double>(x.size());
    for (const auto& row : x)
        for (size_t j = 0; j < d; ++j) {
            const double v = row[j] - mean[j];
            std[j] += v * v;
        }
    for (auto& s : std) s = std::max(std::sqrt(s / static_cast<double>(x.size())), 1e-9);
}

std::vector<double> standardized(const std::vector<double>& row, const std::vector<double>& mean,
                                 const std::vector<double>& std) {
    std::vector<double> out(row.size());
    for (size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / std[j];
    return out;
}

}  // namespace

void SoftmaxClassifier::fit(const std::vector<std::vector<double>>& x,
                            const std::vector<int>& labels, int n_classes, int iters, double lr,
                            double l2) {
    if (x.empty() || x.size() != labels.size())
        throw InvalidArgument("classifier: bad training data");
    std::vector<bool> present(n_classes, false);
    for (int l : labels) present.at(l) = true;
    if (std::count(present.begin(), present.end(), true) < 2)
        throw InvalidArgument("classifier: degenerate single-class training set");
    n_classes_ = n_classes;
    standardize_stats(x, mean_, std_);
    const size_t d = x[0].size();
    w_.assign(n_classes, std::vector<double>(d + 1, 0.0));

    std::vector<std::vector<double>> xs;
    xs.reserve(x.size());
    for (const auto& row : x) xs.push_back(standardized(row, mean_, std_));

    const double inv_n = 1.0 / static_cast<double>(x.size());
    std::vector<std::vector<double>> grad(n_classes, std::vector<double>(d + 1));
    for (int it = 0; it < iters; ++it) {
        for (auto& g : grad) std::fill(g.begin(), g.end(), 0.0);
        for (size_t i = 0; i < xs.size(); ++i) {
            std::vector<double> logits(n_classes, 0.0);
            double mx = -1e300;
            for (int k = 0; k < n_classes; ++k) {
                double acc = w_[k][d];
                for (size_t j = 0; j < d; ++j) acc += w_[k][j] * xs[i][j];
                logits[k] = acc;
                mx = std::max(mx, acc);
            }
            double z = 0.0;
            for (auto& l : logits) {
                l = std::exp(l - mx);
                z += l;
            }
            for (int k = 0; k < n_classes; ++k) {
                const double p = logits[k] / z - (labels[i] == k ? 1.0 : 0.0);
                for (size_t j = 0; j < d; ++j) grad[k][j] += p * xs[i][j];
                grad[k][d] += p;
            }
        }
        for (int k = 0; k < n_classes; ++k)
            for (size_t j = 0; j <= d; ++j) {
                const double reg = j < d ? l2 * w_[k][j] : 0.0;
                w_[k][j] -= lr * (grad[k][j] * inv_n + reg);
            }
    }
}

std::vector<double> SoftmaxClassifier::scores(const std::vector<double>& x) const {
    const auto xs = standardized(x, mean_, std_);
    std::vector<double> out(n_classes_);
    for (int k = 0; k < n_classes_; ++k) {
        double acc = w_[k].back();
        for (size_t j = 0; j < xs.size(); ++j) acc += w_[k][j] * xs[j];
        out[k] = acc;
    }
    return out;
}

int SoftmaxClassifier::predict(const std::vector<double>& x) const {
    const auto s = scores(x);
    return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

std::vector<int> SoftmaxClassifier::predict(const std::vector<std::vector<double>>& x) const {
    std::vector<int> out;
    out.reserve(x.size());
    for (const auto& row : x) out.push_back(predict(row));
    return out;
}

void RidgeRegressor::fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                         double lambda) {
    if (x.size() < 2 || x.size() != y.size()) throw InvalidArgument("ridge: bad training data");
    standardize_stats(x, mean_, std_);
    const size_t d = x[0].size();
    Eigen::MatrixXd X(x.size(), d + 1);
    Eigen::VectorXd Y(y.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const auto xs = standardized(x[i], mean_, std_);
        for (size_t j = 0; j < d; ++j) X(i, j) = xs[j];
        X(i, d) = 1.0;
        Y(i) = y[i];
    }
    Eigen::MatrixXd reg = lambda * Eigen::MatrixXd::Identity(d + 1, d + 1);
    reg(d, d) = 0.0;  // bias unpenalized
    Eigen::VectorXd w = (X.transpose() * X + reg).ldlt().solve(X.transpose() * Y);
    w_.assign(w.data(), w.data() + d + 1);
}

double RidgeRegressor::predict(const std::vector<double>& x) const {
    const auto xs = standardized(x, mean_, std_);
    double acc = w_.back();
    for (size_t j = 0; j < xs.size(); ++j) acc += w_[j] * xs[j];
    return acc;
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred, int n_classes) {
    double f1_sum = 0.0;
    for (int k = 0; k < n_classes; ++k) {
        int tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < truth.size(); ++i) {
            if (pred[i] == k && truth[i] == k) ++tp;
            else if (pred[i] == k) ++fp;
            else if (truth[i] == k) ++fn;
        }
        const double denom = 2.0 * tp + fp + fn;
        f1_sum += denom > 0.0 ? 2.0 * tp / denom : 0.0;
    }
    return f1_sum / n_classes;
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
    if (truth.empty()) return 0.0;
    int hits = 0;
    for (size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == pred[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double r_squared(const std::vector<double>& truth, const std::vector<double>& pred) {
    double mean = 0.0;
    for (double v : truth) mean += v;
    mean /= static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
}

}  // namespace harmon
