#include <doctest.h>

#include <cmath>

#include "harmon/config.hpp"
#include "harmon/metrics.hpp"
#include "harmon/phantom.hpp"

using namespace harmon;

namespace {

Slice phantom_slice(std::uint64_t seed = 3) {
    return render_scan(generate_phantom(seed, 64), profile_by_id("site_b"), seed);
}

// Naive in-line PSNR reference over the union mask with range 2.
double psnr_ref(const Slice& a, const Slice& b) {
    double mse = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < a.pixels.size(); ++i)
        if (a.mask[i] || b.mask[i]) {
            const double d = static_cast<double>(a.pixels.v[i]) - b.pixels.v[i];
            mse += d * d;
            ++n;
        }
    mse /= static_cast<double>(n);
    return 10.0 * std::log10(4.0 / mse);
}

}  // namespace

TEST_CASE("psnr closed-form and sentinel cases") {
    const Slice a = phantom_slice();
    CHECK(psnr(a, a) == kPsnrCap);  // identical -> capped sentinel

    Slice b = a;
    for (size_t i = 0; i < b.pixels.size(); ++i)
        if (b.mask[i]) b.pixels.v[i] += 0.5f;
    // constant difference 0.5 -> MSE 0.25 -> 10*log10(4/0.25) = 12.0412
    CHECK(psnr(a, b) == doctest::Approx(12.0412).epsilon(1e-4));
    CHECK(psnr(a, b) == psnr(b, a));
}

TEST_CASE("psnr matches the naive reference on random pairs") {
    Rng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        Slice a = phantom_slice(trial + 1);
        Slice b = a;
        for (size_t i = 0; i < b.pixels.size(); ++i)
            b.pixels.v[i] += static_cast<float>(0.1 * rng.normal());
        CHECK(psnr(a, b) == doctest::Approx(psnr_ref(a, b)).epsilon(1e-6));
    }
}

TEST_CASE("psnr shape mismatch throws") {
    Slice a = phantom_slice();
    Slice b;
    b.pixels = Image2D(32, 32);
    b.mask.assign(32 * 32, 1);
    CHECK_THROWS_AS(psnr(a, b), InvalidArgument);
}

TEST_CASE("ms_ssim identity, inversion and blur ordering") {
    const Slice a = phantom_slice();
    CHECK(ms_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

    Slice inv = a;
    for (auto& v : inv.pixels.v) v = -v;  // contrast inversion
    const double s_inv = ms_ssim(a, inv);
    CHECK(s_inv < 0.5);

    Slice blur = a;
    const Image2D down = resize_bilinear(a.pixels, 16, 16);
    blur.pixels = resize_bilinear(down, a.h(), a.w());
    const double s_blur = ms_ssim(a, blur);
    CHECK(s_blur > s_inv);
    CHECK(s_blur < 1.0);
}

TEST_CASE("ms_ssim range and size guard") {
    const Slice a = phantom_slice(5);
    const Slice b = phantom_slice(6);
    const double v = ms_ssim(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    Slice small;
    small.pixels = Image2D(32, 32);
    small.mask.assign(32 * 32, 1);
    CHECK_THROWS_AS(ms_ssim(small, small, 3), InvalidArgument);  // 32>>2 = 8 < 16
}

TEST_CASE("wilcoxon signed rank on a hand-computed case") {
    // all 10 differences positive: W+ = 55, z = (55-27.5-0.5)/sqrt(96.25)
    std::vector<double> x(10), y(10, 0.0);
    for (int i = 0; i < 10; ++i) x[i] = i + 1.0;
    const WilcoxonResult r = wilcoxon_signed_rank(x, y);
    CHECK(r.n_effective == 10);
    CHECK(r.statistic == doctest::Approx(55.0));
    CHECK(r.z == doctest::Approx(27.0 / std::sqrt(96.25)).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(0.00593).epsilon(2e-2));
}

TEST_CASE("wilcoxon drops zero differences and detects no effect") {
    std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    std::vector<double> y = {1.0, 2.0, 3.0, 4.0};
    const WilcoxonResult same = wilcoxon_signed_rank(x, y);
    CHECK(same.n_effective == 0);

    // symmetric differences -> statistic near the mean, large p
    std::vector<double> a = {1.0, -1.0, 2.0, -2.0, 3.0, -3.0};
    std::vector<double> zero(6, 0.0);
    const WilcoxonResult sym = wilcoxon_signed_rank(a, zero);
    CHECK(sym.p_value > 0.5);
    CHECK_THROWS_AS(wilcoxon_signed_rank(x, zero), InvalidArgument);
}

TEST_CASE("median and iqr") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(iqr({1.0, 2.0, 3.0, 4.0, 5.0}) == doctest::Approx(2.0));
}

TEST_CASE("noise monotonicity: more scanner noise lowers psnr") {
    const Phantom p = generate_phantom(9, 64);
    ScannerProfile clean = profile_by_id("site_b");
    clean.noise_sigma = 0.0;
    ScannerProfile noisy = clean;
    noisy.noise_sigma = 0.05;
    const Slice ref = render_scan(p, profile_by_id("site_a"), 1);
    const double p_clean = psnr(ref, render_scan(p, clean, 1));
    const double p_noisy = psnr(ref, render_scan(p, noisy, 1));
    CHECK(p_noisy < p_clean);
}
