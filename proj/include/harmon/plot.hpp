#pragma once

// Minimal plotting: PNG export (zlib-backed), grayscale image grids with
// signed difference maps, and simple bar charts for metric summaries.

#include <filesystem>
#include <string>
#include <vector>

#include "harmon/core.hpp"

namespace harmon {

struct RgbImage {
    int h = 0, w = 0;
    std::vector<std::uint8_t> v;  // row-major RGB triples

    RgbImage() = default;
    RgbImage(int h_, int w_, std::uint8_t fill = 255)
        : h(h_), w(w_), v(static_cast<size_t>(h_) * w_ * 3, fill) {}

    void set(int y, int x, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const size_t i = (static_cast<size_t>(y) * w + x) * 3;
        v[i] = r;
        v[i + 1] = g;
        v[i + 2] = b;
    }
};

void write_png(const RgbImage& img, const std::filesystem::path& path);

/// Map a symmetric-range image ([-1,1]) to grayscale.
RgbImage slice_to_rgb(const Slice& s);
/// Signed difference map, blue-white-red, saturating at |d| = scale.
RgbImage difference_to_rgb(const Slice& a, const Slice& b, float scale = 0.5f);

/// Lay out equally sized panels in a row-major grid with 2px gutters.
RgbImage tile(const std::vector<RgbImage>& panels, int columns);

struct BarGroup {
    std::string label;
    double baseline = 0.0;
    double harmonized = 0.0;
};

/// Paired bar chart (baseline vs harmonized per group) with a y axis scaled
/// to the data.
RgbImage bar_chart(const std::vector<BarGroup>& groups, const std::string& title);

}  // namespace harmon
