#include "harmon/core.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace harmon {

std::string to_string(ValueRange r) {
    switch (r) {
        case ValueRange::raw: return "raw";
        case ValueRange::unit: return "unit";
        case ValueRange::symmetric: return "symmetric";
    }
    return "raw";
}

ValueRange value_range_from_string(const std::string& s) {
    if (s == "raw") return ValueRange::raw;
    if (s == "unit") return ValueRange::unit;
    if (s == "symmetric") return ValueRange::symmetric;
    throw InvalidArgument("unknown value_range: " + s);
}

void normalize_symmetric(Slice& s) {
    float lo = std::numeric_limits<float>::max();
    float hi = std::numeric_limits<float>::lowest();
    bool any = false;
    for (size_t i = 0; i < s.pixels.size(); ++i) {
        if (s.mask[i]) {
            lo = std::min(lo, s.pixels.v[i]);
            hi = std::max(hi, s.pixels.v[i]);
            any = true;
        }
    }
    if (!any) {
        s.value_range = ValueRange::symmetric;
        std::fill(s.pixels.v.begin(), s.pixels.v.end(), -1.f);
        return;
    }
    const float span = hi - lo;
    for (size_t i = 0; i < s.pixels.size(); ++i) {
        if (s.mask[i]) {
            s.pixels.v[i] = span > 0.f ? 2.f * (s.pixels.v[i] - lo) / span - 1.f : 0.f;
        } else {
            s.pixels.v[i] = -1.f;
        }
    }
    s.value_range = ValueRange::symmetric;
}

Image2D masked_pixels(const Slice& s, float background) {
    Image2D out = s.pixels;
    for (size_t i = 0; i < out.size(); ++i)
        if (!s.mask[i]) out.v[i] = background;
    return out;
}

float min_in_mask(const Slice& s) {
    float lo = std::numeric_limits<float>::max();
    for (size_t i = 0; i < s.pixels.size(); ++i)
        if (s.mask[i]) lo = std::min(lo, s.pixels.v[i]);
    return lo;
}

float max_in_mask(const Slice& s) {
    float hi = std::numeric_limits<float>::lowest();
    for (size_t i = 0; i < s.pixels.size(); ++i)
        if (s.mask[i]) hi = std::max(hi, s.pixels.v[i]);
    return hi;
}

double mean_abs_diff_in_mask(const Slice& a, const Slice& b) {
    double acc = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        if (a.mask[i] && b.mask[i]) {
            acc += std::abs(static_cast<double>(a.pixels.v[i]) - b.pixels.v[i]);
            ++n;
        }
    }
    return n ? acc / static_cast<double>(n) : 0.0;
}

Image2D resize_bilinear(const Image2D& src, int oh, int ow) {
    Image2D out(oh, ow);
    const double sy = static_cast<double>(src.h) / oh;
    const double sx = static_cast<double>(src.w) / ow;
    for (int y = 0; y < oh; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        int y1 = std::min(y0 + 1, src.h - 1);
        y0 = std::clamp(y0, 0, src.h - 1);
        for (int x = 0; x < ow; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            int x1 = std::min(x0 + 1, src.w - 1);
            x0 = std::clamp(x0, 0, src.w - 1);
            const double top = src.at(y0, x0) * (1 - wx) + src.at(y0, x1) * wx;
            const double bot = src.at(y1, x0) * (1 - wx) + src.at(y1, x1) * wx;
            out.at(y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
        }
    }
    return out;
}

Mask resize_mask_nearest(const Mask& src, int ih, int iw, int oh, int ow) {
    Mask out(static_cast<size_t>(oh) * ow, 0);
    for (int y = 0; y < oh; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * ih / oh), ih - 1);
        for (int x = 0; x < ow; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * iw / ow), iw - 1);
            out[static_cast<size_t>(y) * ow + x] = src[static_cast<size_t>(sy) * iw + sx];
        }
    }
    return out;
}

void save_slice(const Slice& s, const std::filesystem::path& path, const SliceMeta& meta) {
    {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for write: " + path.string());
        f.write(reinterpret_cast<const char*>(s.pixels.v.data()),
                static_cast<std::streamsize>(s.pixels.v.size() * sizeof(float)));
    }
    std::filesystem::path mask_path = path;
    mask_path += ".mask";
    {
        std::ofstream f(mask_path, std::ios::binary);
        f.write(reinterpret_cast<const char*>(s.mask.data()),
                static_cast<std::streamsize>(s.mask.size()));
    }
    nlohmann::json j;
    j["shape"] = {s.pixels.h, s.pixels.w};
    j["dtype"] = "float32_le";
    j["value_range"] = to_string(s.value_range);
    j["mask_path"] = mask_path.filename().string();
    if (!meta.subject_id.empty()) j["subject_id"] = meta.subject_id;
    if (!meta.profile_id.empty()) j["profile_id"] = meta.profile_id;
    std::filesystem::path side = path;
    side += ".json";
    std::ofstream f(side);
    f << j.dump(2) << "\n";
}

Slice load_slice(const std::filesystem::path& path) {
    std::filesystem::path side = path;
    side += ".json";
    std::ifstream sf(side);
    if (!sf) throw InvalidArgument("missing sidecar: " + side.string());
    nlohmann::json j;
    sf >> j;
    Slice s;
    s.pixels = Image2D(j["shape"][0].get<int>(), j["shape"][1].get<int>());
    s.value_range = value_range_from_string(j["value_range"].get<std::string>());
    {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("missing image file: " + path.string());
        f.read(reinterpret_cast<char*>(s.pixels.v.data()),
               static_cast<std::streamsize>(s.pixels.v.size() * sizeof(float)));
        if (static_cast<size_t>(f.gcount()) != s.pixels.v.size() * sizeof(float))
            throw std::runtime_error("truncated image file: " + path.string());
    }
    s.mask.assign(s.pixels.size(), 1);
    std::filesystem::path mask_path = path.parent_path() / j["mask_path"].get<std::string>();
    std::ifstream mf(mask_path, std::ios::binary);
    if (mf) mf.read(reinterpret_cast<char*>(s.mask.data()), static_cast<std::streamsize>(s.mask.size()));
    return s;
}

std::uint64_t fnv1a(const void* data, size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return fnv1a(buf.data(), buf.size());
}

}  // namespace harmon
