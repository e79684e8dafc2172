#include "harmon/plot.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace harmon {

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> head;
    put_be32(head, static_cast<std::uint32_t>(data.size()));
    f.write(reinterpret_cast<const char*>(head.data()), 4);
    f.write(type, 4);
    if (!data.empty()) f.write(reinterpret_cast<const char*>(data.data()), data.size());
    std::uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    std::vector<std::uint8_t> tail;
    put_be32(tail, crc);
    f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png(const RgbImage& img, const std::filesystem::path& path) {
    if (img.h <= 0 || img.w <= 0) throw InvalidArgument("write_png: empty image");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("write_png: cannot open " + path.string());
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(img.w));
    put_be32(ihdr, static_cast<std::uint32_t>(img.h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(f, "IHDR", ihdr);

    // filter byte 0 per scanline, then one zlib stream
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.h) * (img.w * 3 + 1));
    for (int y = 0; y < img.h; ++y) {
        raw.push_back(0);
        const std::uint8_t* row = img.v.data() + static_cast<size_t>(y) * img.w * 3;
        raw.insert(raw.end(), row, row + static_cast<size_t>(img.w) * 3);
    }
    uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_size);
    if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: zlib compression failed");
    comp.resize(comp_size);
    write_chunk(f, "IDAT", comp);
    write_chunk(f, "IEND", {});
}

RgbImage slice_to_rgb(const Slice& s) {
    RgbImage out(s.h(), s.w());
    for (int y = 0; y < s.h(); ++y)
        for (int x = 0; x < s.w(); ++x) {
            const float t = std::clamp((s.pixels.at(y, x) + 1.f) / 2.f, 0.f, 1.f);
            const auto g = static_cast<std::uint8_t>(std::lround(t * 255.f));
            out.set(y, x, g, g, g);
        }
    return out;
}

RgbImage difference_to_rgb(const Slice& a, const Slice& b, float scale) {
    if (!a.pixels.same_shape(b.pixels)) throw InvalidArgument("difference_to_rgb: shape mismatch");
    RgbImage out(a.h(), a.w());
    for (int y = 0; y < a.h(); ++y)
        for (int x = 0; x < a.w(); ++x) {
            const float d = std::clamp((a.pixels.at(y, x) - b.pixels.at(y, x)) / scale, -1.f, 1.f);
            // blue-white-red
            const float r = d > 0 ? 1.f : 1.f + d;
            const float bl = d < 0 ? 1.f : 1.f - d;
            const float g = 1.f - std::abs(d);
            out.set(y, x, static_cast<std::uint8_t>(std::lround(r * 255.f)),
                    static_cast<std::uint8_t>(std::lround(g * 255.f)),
                    static_cast<std::uint8_t>(std::lround(bl * 255.f)));
        }
    return out;
}

RgbImage tile(const std::vector<RgbImage>& panels, int columns) {
    if (panels.empty() || columns < 1) throw InvalidArgument("tile: bad arguments");
    const int ph = panels[0].h, pw = panels[0].w;
    for (const auto& p : panels)
        if (p.h != ph || p.w != pw) throw InvalidArgument("tile: panels must share a size");
    const int gutter = 2;
    const int rows = (static_cast<int>(panels.size()) + columns - 1) / columns;
    RgbImage out(rows * ph + (rows - 1) * gutter, columns * pw + (columns - 1) * gutter, 32);
    for (size_t i = 0; i < panels.size(); ++i) {
        const int r = static_cast<int>(i) / columns, c = static_cast<int>(i) % columns;
        const int oy = r * (ph + gutter), ox = c * (pw + gutter);
        for (int y = 0; y < ph; ++y)
            std::memcpy(&out.v[((static_cast<size_t>(oy) + y) * out.w + ox) * 3],
                        &panels[i].v[static_cast<size_t>(y) * pw * 3],
                        static_cast<size_t>(pw) * 3);
    }
    return out;
}

namespace {

// 5x7 column-encoded glyphs (LSB = top row) for the characters the charts use.
const std::uint8_t* glyph(char ch) {
    static const std::uint8_t digits[10][5] = {
        {0x3E, 0x51, 0x49, 0x45, 0x3E}, {0x00, 0x42, 0x7F, 0x40, 0x00},
        {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4B, 0x31},
        {0x18, 0x14, 0x12, 0x7F, 0x10}, {0x27, 0x45, 0x45, 0x45, 0x39},
        {0x3C, 0x4A, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
        {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1E}};
    static const std::uint8_t letters[26][5] = {
        {0x7E, 0x11, 0x11, 0x11, 0x7E}, {0x7F, 0x49, 0x49, 0x49, 0x36},
        {0x3E, 0x41, 0x41, 0x41, 0x22}, {0x7F, 0x41, 0x41, 0x22, 0x1C},
        {0x7F, 0x49, 0x49, 0x49, 0x41}, {0x7F, 0x09, 0x09, 0x09, 0x01},
        {0x3E, 0x41, 0x49, 0x49, 0x7A}, {0x7F, 0x08, 0x08, 0x08, 0x7F},
        {0x00, 0x41, 0x7F, 0x41, 0x00}, {0x20, 0x40, 0x41, 0x3F, 0x01},
        {0x7F, 0x08, 0x14, 0x22, 0x41}, {0x7F, 0x40, 0x40, 0x40, 0x40},
        {0x7F, 0x02, 0x0C, 0x02, 0x7F}, {0x7F, 0x04, 0x08, 0x10, 0x7F},
        {0x3E, 0x41, 0x41, 0x41, 0x3E}, {0x7F, 0x09, 0x09, 0x09, 0x06},
        {0x3E, 0x41, 0x51, 0x21, 0x5E}, {0x7F, 0x09, 0x19, 0x29, 0x46},
        {0x46, 0x49, 0x49, 0x49, 0x31}, {0x01, 0x01, 0x7F, 0x01, 0x01},
        {0x3F, 0x40, 0x40, 0x40, 0x3F}, {0x1F, 0x20, 0x40, 0x20, 0x1F},
        {0x3F, 0x40, 0x38, 0x40, 0x3F}, {0x63, 0x14, 0x08, 0x14, 0x63},
        {0x07, 0x08, 0x70, 0x08, 0x07}, {0x61, 0x51, 0x49, 0x45, 0x43}};
    static const std::uint8_t dash[5] = {0x08, 0x08, 0x08, 0x08, 0x08};
    static const std::uint8_t dot[5] = {0x00, 0x60, 0x60, 0x00, 0x00};
    static const std::uint8_t under[5] = {0x40, 0x40, 0x40, 0x40, 0x40};
    static const std::uint8_t plus[5] = {0x08, 0x08, 0x3E, 0x08, 0x08};
    static const std::uint8_t blank[5] = {0, 0, 0, 0, 0};
    if (ch >= '0' && ch <= '9') return digits[ch - '0'];
    if (ch >= 'A' && ch <= 'Z') return letters[ch - 'A'];
    if (ch >= 'a' && ch <= 'z') return letters[ch - 'a'];
    if (ch == '-') return dash;
    if (ch == '.') return dot;
    if (ch == '_') return under;
    if (ch == '+') return plus;
    return blank;
}

void draw_text(RgbImage& img, int y, int x, const std::string& text) {
    for (char ch : text) {
        const std::uint8_t* g = glyph(ch);
        for (int col = 0; col < 5; ++col)
            for (int row = 0; row < 7; ++row)
                if ((g[col] >> row) & 1) {
                    const int yy = y + row, xx = x + col;
                    if (yy >= 0 && yy < img.h && xx >= 0 && xx < img.w) img.set(yy, xx, 0, 0, 0);
                }
        x += 6;
    }
}

void fill_rect(RgbImage& img, int y0, int x0, int y1, int x1, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
    for (int y = std::max(0, y0); y < std::min(img.h, y1); ++y)
        for (int x = std::max(0, x0); x < std::min(img.w, x1); ++x) img.set(y, x, r, g, b);
}

}  // namespace

RgbImage bar_chart(const std::vector<BarGroup>& groups, const std::string& title) {
    if (groups.empty()) throw InvalidArgument("bar_chart: no data");
    const int group_w = 70, margin_l = 44, margin_r = 12, margin_t = 24, margin_b = 24;
    const int plot_h = 160;
    RgbImage img(margin_t + plot_h + margin_b,
                 margin_l + group_w * static_cast<int>(groups.size()) + margin_r);

    double lo = 0.0, hi = 0.0;
    for (const auto& g : groups) {
        lo = std::min({lo, g.baseline, g.harmonized});
        hi = std::max({hi, g.baseline, g.harmonized});
    }
    if (hi <= lo) hi = lo + 1.0;
    const double span = (hi - lo) * 1.1;
    auto to_y = [&](double v) {
        return margin_t + plot_h - static_cast<int>(std::lround((v - lo) / span * plot_h));
    };

    draw_text(img, 6, margin_l, title);
    // axes
    fill_rect(img, margin_t, margin_l - 1, margin_t + plot_h + 1, margin_l, 0, 0, 0);
    fill_rect(img, to_y(0.0), margin_l, to_y(0.0) + 1, img.w - margin_r, 0, 0, 0);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", hi);
    draw_text(img, to_y(hi) - 3, 4, buf);
    std::snprintf(buf, sizeof buf, "%.2f", lo);
    draw_text(img, to_y(lo) - 3, 4, buf);

    const int bar_w = 22;
    for (size_t i = 0; i < groups.size(); ++i) {
        const int x0 = margin_l + static_cast<int>(i) * group_w + 8;
        const int y_zero = to_y(0.0);
        auto bar = [&](int x, double v, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
            const int yv = to_y(v);
            fill_rect(img, std::min(yv, y_zero), x, std::max(yv, y_zero), x + bar_w, r, g, b);
        };
        bar(x0, groups[i].baseline, 150, 150, 150);          // baseline: gray
        bar(x0 + bar_w + 4, groups[i].harmonized, 60, 100, 200);  // harmonized: blue
        draw_text(img, margin_t + plot_h + 6, x0, groups[i].label.substr(0, 10));
    }
    return img;
}

}  // namespace harmon
