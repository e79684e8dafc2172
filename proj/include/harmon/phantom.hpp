#pragma once

// Synthetic brain-like phantoms and simulated scanner rendering. Provides exact
// traveling-subject ground truth: the same anatomy imaged under any number of
// scanner profiles.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "harmon/core.hpp"

namespace harmon {

// Tissue classes in the anatomy label map.
inline constexpr int kBackground = 0;
inline constexpr int kCortex = 1;      // gray-matter band
inline constexpr int kWhiteMatter = 2;
inline constexpr int kVentricle = 3;   // CSF
inline constexpr int kDeepGray = 4;
inline constexpr int kNumTissueClasses = 4;  // excluding background

struct ShapeParams {
    double ventricle_fraction;   // [0.05, 0.35]; drives age_proxy
    double cortical_thickness;   // [0.12, 0.20] of outer radius
    double global_scale;         // [0.85, 1.00]
    double aspect;               // [0.85, 1.10] vertical/horizontal radius ratio
    std::vector<double> ripple_amp;    // radial perturbation amplitudes, harmonics 2..5
    std::vector<double> ripple_phase;
};

struct Phantom {
    std::vector<int> anatomy_map;  // row-major label image, size*size
    int size = 0;
    ShapeParams shape;
    std::string subject_id;
    double age_proxy = 0.0;
    Image2D texture;      // smooth anatomy-borne intensity modulation, zero-mean
    double texture_amp = 0.06;

    int label(int y, int x) const { return anatomy_map[static_cast<size_t>(y) * size + x]; }
};

/// age_proxy = 20 + 60 * (ventricle_fraction - 0.05) / 0.30, ages spanning [20, 80].
double age_from_ventricle_fraction(double vfrac);

/// Deterministic phantom from a subject seed. size >= 32.
Phantom generate_phantom(std::uint64_t subject_seed, int size);

struct ScannerProfile {
    std::string profile_id;
    /// y-values of a piecewise-linear intensity transfer at uniform x knots on
    /// [0,1]; must map into [0,1].
    std::vector<double> transfer_knots;
    /// Coefficients of a cosine-expansion bias exponent; field = exp(sum c_ij
    /// cos(i*pi*x)cos(j*pi*y)), strictly positive.
    std::vector<double> bias_coeffs;  // (i,j) in {(0,1),(1,0),(1,1),(0,2),(2,0)}
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    double transfer(double v) const;
    double bias_at(double x01, double y01) const;
    void validate() const;
};

ScannerProfile identity_profile(const std::string& id = "identity");

/// Render a phantom under a scanner profile: per-class base intensity (with
/// anatomy texture) -> transfer function -> multiplicative bias -> additive
/// Gaussian noise -> symmetric normalization inside the brainmask.
Slice render_scan(const Phantom& phantom, const ScannerProfile& profile, std::uint64_t noise_seed);

/// Per-class base intensities on the [0,1] raw scale (index = tissue class).
const std::vector<double>& tissue_base_intensities();

enum class SliceMode { train, eval };

/// Middle-section slice sampling: eval returns index floor(n/2); train draws
/// uniformly from [mid-10, mid+10], clamped to valid indices.
int sample_slice_index(size_t stack_size, SliceMode mode, std::uint64_t rng_seed);
Slice sample_slice(const std::vector<Slice>& stack, SliceMode mode, std::uint64_t rng_seed);

struct ManifestEntry {
    std::string subject_id;
    std::string profile_id;
    std::string image_path;  // relative to the manifest directory
    std::string mask_path;
    double age_proxy = 0.0;
};

struct CohortManifest {
    std::vector<ManifestEntry> entries;
    std::filesystem::path root;

    std::vector<std::string> subject_ids() const;
    std::vector<std::string> profile_ids() const;
    const ManifestEntry* find(const std::string& subject, const std::string& profile) const;
    Slice load(const ManifestEntry& e) const;
    /// Entries restricted to the given subjects (for train/eval splits).
    CohortManifest subset(const std::vector<std::string>& subjects) const;
    /// Entries restricted to the given scanner profiles.
    CohortManifest subset_profiles(const std::vector<std::string>& profiles) const;
};

/// Render every subject under every profile into out_dir and write
/// manifest.jsonl. Deterministic under seed.
CohortManifest make_traveling_cohort(int n_subjects, const std::vector<ScannerProfile>& profiles,
                                     std::uint64_t seed, int size,
                                     const std::filesystem::path& out_dir);

CohortManifest load_manifest(const std::filesystem::path& manifest_path);

}  // namespace harmon
