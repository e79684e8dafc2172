#pragma once

// Radiomics-lite: 13 first-order + gray-level co-occurrence features, plus the
// deliberately simple linear models (softmax classifier, ridge regression)
// used by the evaluation protocols.

#include <string>
#include <vector>

#include "harmon/core.hpp"

namespace harmon {

inline constexpr int kFeatureDim = 13;

/// Fixed order: mean, variance, skewness, kurtosis, entropy, p10, p50, p90,
/// glcm_contrast_h, glcm_homogeneity_h, glcm_contrast_v, glcm_homogeneity_v,
/// glcm_energy_h.
std::vector<double> feature_vector(const Slice& s);
const std::vector<std::string>& feature_names();

/// Multinomial logistic regression on standardized features (full-batch
/// gradient descent, deterministic).
class SoftmaxClassifier {
public:
    void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
             int n_classes, int iters = 2000, double lr = 0.1, double l2 = 1e-3);
    int predict(const std::vector<double>& x) const;
    std::vector<int> predict(const std::vector<std::vector<double>>& x) const;
    int n_classes() const { return n_classes_; }

private:
    int n_classes_ = 0;
    std::vector<double> mean_, std_;
    std::vector<std::vector<double>> w_;  // (K, D+1), last column is bias
    std::vector<double> scores(const std::vector<double>& x) const;
};

/// Ridge regression on standardized features, closed form.
class RidgeRegressor {
public:
    void fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
             double lambda = 1.0);
    double predict(const std::vector<double>& x) const;

private:
    std::vector<double> mean_, std_;
    std::vector<double> w_;  // D+1 with bias
};

double macro_f1(const std::vector<int>& truth, const std::vector<int>& pred, int n_classes);
double accuracy(const std::vector<int>& truth, const std::vector<int>& pred);
double r_squared(const std::vector<double>& truth, const std::vector<double>& pred);

}  // namespace harmon
