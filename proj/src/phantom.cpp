#include "harmon/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace harmon {

double age_from_ventricle_fraction(double vfrac) {
    return 20.0 + 60.0 * (vfrac - 0.05) / 0.30;
}

namespace {

double ripple_at(const ShapeParams& sp, double theta) {
    double r = 0.0;
    for (size_t k = 0; k < sp.ripple_amp.size(); ++k)
        r += sp.ripple_amp[k] * std::sin((2.0 + static_cast<double>(k)) * theta + sp.ripple_phase[k]);
    return r;
}

Image2D make_texture(std::uint64_t seed, int size) {
    // Sum of low-frequency random cosines, normalized to zero mean, max |t| = 1.
    Rng rng(seed ^ 0x7458f1d2c3a9b801ull);
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    for (int i = 0; i < 8; ++i)
        waves.push_back({rng.uniform(1.0, 5.0), rng.uniform(1.0, 5.0), rng.uniform(0.0, 2.0 * M_PI),
                         rng.uniform(0.5, 1.0)});
    Image2D t(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = static_cast<double>(x) / size;
            const double v = static_cast<double>(y) / size;
            double acc = 0.0;
            for (const auto& wv : waves)
                acc += wv.amp * std::cos(2.0 * M_PI * (wv.fx * u + wv.fy * v) + wv.phase);
            t.at(y, x) = static_cast<float>(acc);
        }
    double mean = 0.0;
    for (float p : t.v) mean += p;
    mean /= static_cast<double>(t.v.size());
    double mx = 1e-12;
    for (auto& p : t.v) {
        p -= static_cast<float>(mean);
        mx = std::max(mx, static_cast<double>(std::abs(p)));
    }
    for (auto& p : t.v) p = static_cast<float>(p / mx);
    return t;
}

}  // namespace

Phantom generate_phantom(std::uint64_t subject_seed, int size) {
    if (size < 32) throw InvalidArgument("generate_phantom: size must be >= 32");
    Rng rng(subject_seed);
    ShapeParams sp;
    sp.ventricle_fraction = rng.uniform(0.05, 0.35);
    sp.cortical_thickness = rng.uniform(0.12, 0.20);
    sp.global_scale = rng.uniform(0.85, 1.00);
    sp.aspect = rng.uniform(0.85, 1.10);
    for (int k = 0; k < 4; ++k) {
        sp.ripple_amp.push_back(rng.uniform(0.0, 0.03));
        sp.ripple_phase.push_back(rng.uniform(0.0, 2.0 * M_PI));
    }

    Phantom ph;
    ph.size = size;
    ph.shape = sp;
    ph.subject_id = "sub-" + std::to_string(subject_seed);
    ph.age_proxy = age_from_ventricle_fraction(sp.ventricle_fraction);
    ph.anatomy_map.assign(static_cast<size_t>(size) * size, kBackground);
    ph.texture = make_texture(subject_seed, size);

    const double cx = 0.5 * (size - 1);
    const double cy = 0.5 * (size - 1);
    const double rx = 0.44 * size * sp.global_scale;
    const double ry = rx * sp.aspect;
    // deep gray-matter blobs flank the ventricle
    const double dgm_off = 0.42;
    const double dgm_rad = 0.13;

    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = (x - cx) / rx;
            const double dy = (y - cy) / ry;
            const double rho = std::sqrt(dx * dx + dy * dy);
            const double theta = std::atan2(dy, dx);
            const double boundary = 1.0 + ripple_at(sp, theta);
            const double rho_n = rho / boundary;
            if (rho_n >= 1.0) continue;  // background
            int cls = kWhiteMatter;
            if (rho_n > 1.0 - sp.cortical_thickness) {
                cls = kCortex;
            } else {
                // ventricle: taller-than-wide central ellipse
                const double vx = dx / sp.ventricle_fraction;
                const double vy = dy / (1.55 * sp.ventricle_fraction);
                if (vx * vx + vy * vy < 1.0) {
                    cls = kVentricle;
                } else {
                    for (int s = -1; s <= 1; s += 2) {
                        const double bx = (dx - s * dgm_off) / dgm_rad;
                        const double by = dy / (1.6 * dgm_rad);
                        if (bx * bx + by * by < 1.0) cls = kDeepGray;
                    }
                }
            }
            ph.anatomy_map[static_cast<size_t>(y) * size + x] = cls;
        }
    }
    return ph;
}

const std::vector<double>& tissue_base_intensities() {
    static const std::vector<double> base = {0.0, 0.45, 0.80, 0.15, 0.62};
    return base;
}

double ScannerProfile::transfer(double v) const {
    const auto& k = transfer_knots;
    const int n = static_cast<int>(k.size());
    const double t = std::clamp(v, 0.0, 1.0) * (n - 1);
    const int i = std::min(static_cast<int>(t), n - 2);
    const double f = t - i;
    return k[i] * (1.0 - f) + k[i + 1] * f;
}

double ScannerProfile::bias_at(double x01, double y01) const {
    static const int idx[5][2] = {{0, 1}, {1, 0}, {1, 1}, {0, 2}, {2, 0}};
    double e = 0.0;
    for (size_t m = 0; m < bias_coeffs.size() && m < 5; ++m)
        e += bias_coeffs[m] * std::cos(idx[m][0] * M_PI * x01) * std::cos(idx[m][1] * M_PI * y01);
    return std::exp(e);
}

void ScannerProfile::validate() const {
    if (transfer_knots.size() < 2) throw InvalidArgument("profile: need >= 2 transfer knots");
    for (double k : transfer_knots)
        if (!std::isfinite(k) || k < 0.0 || k > 1.0)
            throw InvalidArgument("profile: transfer knots must be finite in [0,1]");
    if (noise_sigma < 0.0) throw InvalidArgument("profile: negative noise sigma");
}

ScannerProfile identity_profile(const std::string& id) {
    ScannerProfile p;
    p.profile_id = id;
    p.transfer_knots = {0.0, 0.25, 0.5, 0.75, 1.0};
    p.bias_coeffs = {0.0, 0.0, 0.0, 0.0, 0.0};
    p.noise_sigma = 0.0;
    return p;
}

Slice render_scan(const Phantom& phantom, const ScannerProfile& profile, std::uint64_t noise_seed) {
    profile.validate();
    const int size = phantom.size;
    Slice s;
    s.pixels = Image2D(size, size, 0.f);
    s.mask.assign(static_cast<size_t>(size) * size, 0);
    Rng rng(noise_seed ^ (profile.seed * 0x9e3779b97f4a7c15ull));
    const auto& base = tissue_base_intensities();
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const size_t i = static_cast<size_t>(y) * size + x;
            const double noise = rng.normal();  // drawn for every pixel, fixed order
            const int cls = phantom.anatomy_map[i];
            if (cls == kBackground) continue;
            s.mask[i] = 1;
            double v = base[cls] * (1.0 + phantom.texture_amp * phantom.texture.at(y, x));
            v = profile.transfer(v);
            v *= profile.bias_at(static_cast<double>(x) / (size - 1),
                                 static_cast<double>(y) / (size - 1));
            v += profile.noise_sigma * noise;
            s.pixels.v[i] = static_cast<float>(v);
        }
    }
    normalize_symmetric(s);
    return s;
}

int sample_slice_index(size_t stack_size, SliceMode mode, std::uint64_t rng_seed) {
    if (stack_size == 0) throw InvalidArgument("sample_slice: empty stack");
    const int n = static_cast<int>(stack_size);
    const int mid = n / 2;
    if (mode == SliceMode::eval) return mid;
    const int lo = std::max(0, mid - 10);
    const int hi = std::min(n - 1, mid + 10);
    Rng rng(rng_seed);
    return lo + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(hi - lo + 1)));
}

Slice sample_slice(const std::vector<Slice>& stack, SliceMode mode, std::uint64_t rng_seed) {
    return stack[static_cast<size_t>(sample_slice_index(stack.size(), mode, rng_seed))];
}

std::vector<std::string> CohortManifest::subject_ids() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& e : entries)
        if (seen.insert(e.subject_id).second) out.push_back(e.subject_id);
    return out;
}

std::vector<std::string> CohortManifest::profile_ids() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& e : entries)
        if (seen.insert(e.profile_id).second) out.push_back(e.profile_id);
    return out;
}

const ManifestEntry* CohortManifest::find(const std::string& subject,
                                          const std::string& profile) const {
    for (const auto& e : entries)
        if (e.subject_id == subject && e.profile_id == profile) return &e;
    return nullptr;
}

Slice CohortManifest::load(const ManifestEntry& e) const { return load_slice(root / e.image_path); }

CohortManifest CohortManifest::subset(const std::vector<std::string>& subjects) const {
    CohortManifest out;
    out.root = root;
    for (const auto& e : entries)
        if (std::find(subjects.begin(), subjects.end(), e.subject_id) != subjects.end())
            out.entries.push_back(e);
    return out;
}

CohortManifest CohortManifest::subset_profiles(const std::vector<std::string>& profiles) const {
    CohortManifest out;
    out.root = root;
    for (const auto& e : entries)
        if (std::find(profiles.begin(), profiles.end(), e.profile_id) != profiles.end())
            out.entries.push_back(e);
    return out;
}

CohortManifest make_traveling_cohort(int n_subjects, const std::vector<ScannerProfile>& profiles,
                                     std::uint64_t seed, int size,
                                     const std::filesystem::path& out_dir) {
    if (n_subjects < 1) throw InvalidArgument("cohort: need >= 1 subject");
    if (profiles.size() < 2) throw InvalidArgument("cohort: need >= 2 profiles");
    std::set<std::string> ids;
    for (const auto& p : profiles)
        if (!ids.insert(p.profile_id).second)
            throw InvalidArgument("cohort: duplicate profile_id " + p.profile_id);

    std::filesystem::create_directories(out_dir);
    CohortManifest manifest;
    manifest.root = out_dir;

    Rng rng(seed);
    std::vector<std::uint64_t> subject_seeds;
    for (int i = 0; i < n_subjects; ++i) subject_seeds.push_back(rng.raw());

    std::ofstream mf(out_dir / "manifest.jsonl");
    for (int i = 0; i < n_subjects; ++i) {
        Phantom ph = generate_phantom(subject_seeds[i], size);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "sub-%03d", i);
        ph.subject_id = buf;
        for (const auto& prof : profiles) {
            const std::uint64_t noise_seed =
                seed ^ (static_cast<std::uint64_t>(i) * 1000003ull) ^
                fnv1a(prof.profile_id.data(), prof.profile_id.size());
            Slice s = render_scan(ph, prof, noise_seed);
            const std::string fname = ph.subject_id + "_" + prof.profile_id + ".bin";
            save_slice(s, out_dir / fname, {ph.subject_id, prof.profile_id});
            ManifestEntry e{ph.subject_id, prof.profile_id, fname, fname + ".mask", ph.age_proxy};
            manifest.entries.push_back(e);
            nlohmann::json j;
            j["subject_id"] = e.subject_id;
            j["profile_id"] = e.profile_id;
            j["image_path"] = e.image_path;
            j["mask_path"] = e.mask_path;
            j["age_proxy"] = e.age_proxy;
            mf << j.dump() << "\n";
        }
    }
    return manifest;
}

CohortManifest load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
    CohortManifest m;
    m.root = manifest_path.parent_path();
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        m.entries.push_back({j["subject_id"].get<std::string>(), j["profile_id"].get<std::string>(),
                             j["image_path"].get<std::string>(), j["mask_path"].get<std::string>(),
                             j["age_proxy"].get<double>()});
    }
    return m;
}

}  // namespace harmon
