#pragma once

// Image fidelity metrics and the paired statistical test used by the
// traveling-subject evaluation.

#include <vector>

#include "harmon/core.hpp"

namespace harmon {

/// PSNR in dB over the union brainmask, data range fixed at 2.0 (symmetric
/// range). Identical images return the capped sentinel 100 dB.
double psnr(const Slice& a, const Slice& b);

inline constexpr double kPsnrCap = 100.0;

/// Multi-scale SSIM, 3 scales at 64x64 (canonical exponents renormalized over
/// the scales used). Inputs are shifted from [-1,1] to [0,2] internally.
double ms_ssim(const Slice& a, const Slice& b, int scales = 3);

/// Two-sided Wilcoxon signed-rank test on paired differences (normal
/// approximation with tie correction; zero differences dropped).
struct WilcoxonResult {
    double statistic = 0.0;  // W+ (sum of positive ranks)
    double z = 0.0;
    double p_value = 1.0;
    int n_effective = 0;
};
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> v);
/// Interquartile range (linear-interpolated quartiles).
double iqr(std::vector<double> v);

}  // namespace harmon
