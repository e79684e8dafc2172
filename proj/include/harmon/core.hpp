#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace harmon {

/// Deterministic RNG. Wraps mt19937_64 but draws uniforms and normals with
/// fixed algorithms so streams are bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (no cached spare).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // modulo bias is negligible for the small n used here
        return gen_() % n;
    }

    std::uint64_t raw() { return gen_(); }

    /// Derive an independent child seed from this stream.
    std::uint64_t fork_seed() { return gen_() ^ 0x9e3779b97f4a7c15ull; }

private:
    std::mt19937_64 gen_;
};

/// Row-major 2D float image.
struct Image2D {
    int h = 0;
    int w = 0;
    std::vector<float> v;

    Image2D() = default;
    Image2D(int h_, int w_, float fill = 0.f) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

    float& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    float at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }
    bool same_shape(const Image2D& o) const { return h == o.h && w == o.w; }
};

using Mask = std::vector<std::uint8_t>;  // 1 = in brainmask, row-major

enum class ValueRange { raw, unit, symmetric };

std::string to_string(ValueRange r);
ValueRange value_range_from_string(const std::string& s);

/// 2D image slice with brainmask; the unit of anatomy everywhere in this codebase.
struct Slice {
    Image2D pixels;
    Mask mask;  // same shape as pixels
    ValueRange value_range = ValueRange::raw;

    int h() const { return pixels.h; }
    int w() const { return pixels.w; }
    bool in_mask(int y, int x) const { return mask[static_cast<size_t>(y) * pixels.w + x] != 0; }
};

/// Rescale in-mask pixels affinely so min/max over the mask are exactly [-1, 1].
/// Constant slices map to 0 in-mask. Out-of-mask pixels are set to -1.
void normalize_symmetric(Slice& s);

/// Copy with out-of-mask pixels forced to the background value (-1).
Image2D masked_pixels(const Slice& s, float background = -1.f);

float min_in_mask(const Slice& s);
float max_in_mask(const Slice& s);
double mean_abs_diff_in_mask(const Slice& a, const Slice& b);

/// Bilinear resample to (oh, ow). Edge-clamped.
Image2D resize_bilinear(const Image2D& src, int oh, int ow);
/// Nearest-neighbour resample for masks.
Mask resize_mask_nearest(const Mask& src, int ih, int iw, int oh, int ow);

// ---- persistence: raw little-endian float32 + JSON sidecar ----

struct SliceMeta {
    std::string subject_id;
    std::string profile_id;
};

/// Writes <path> (float32 raw), <path>.json (sidecar) and the mask file
/// referenced by the sidecar.
void save_slice(const Slice& s, const std::filesystem::path& path, const SliceMeta& meta = {});
Slice load_slice(const std::filesystem::path& path);

/// FNV-1a over a byte buffer, for reproducibility checks.
std::uint64_t fnv1a(const void* data, size_t n);
std::uint64_t hash_file(const std::filesystem::path& path);

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace harmon
