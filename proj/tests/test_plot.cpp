#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "harmon/config.hpp"
#include "harmon/phantom.hpp"
#include "harmon/plot.hpp"

using namespace harmon;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("write_png emits a well-formed PNG header and chunks") {
    const fs::path dir = fs::temp_directory_path() / "harmon_test_plot";
    fs::create_directories(dir);
    RgbImage img(5, 7);
    img.set(0, 0, 255, 0, 0);
    img.set(4, 6, 0, 0, 255);
    write_png(img, dir / "t.png");

    const auto bytes = read_bytes(dir / "t.png");
    REQUIRE(bytes.size() > 45);
    const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    for (int i = 0; i < 8; ++i) CHECK(bytes[i] == sig[i]);
    // IHDR follows immediately: width 7, height 5, bit depth 8, color type 2
    CHECK(std::string(bytes.begin() + 12, bytes.begin() + 16) == "IHDR");
    CHECK(bytes[19] == 7);
    CHECK(bytes[23] == 5);
    CHECK(bytes[24] == 8);
    CHECK(bytes[25] == 2);
    CHECK(std::string(bytes.end() - 8, bytes.end() - 4) == "IEND");
    fs::remove_all(dir);
}

TEST_CASE("slice_to_rgb maps the symmetric range to grayscale") {
    const Phantom p = generate_phantom(7, 32);
    const Slice s = render_scan(p, profile_by_id("site_a"), 1);
    const RgbImage img = slice_to_rgb(s);
    CHECK(img.h == 32);
    CHECK(img.w == 32);
    // grayscale: all three channels equal everywhere
    for (size_t i = 0; i + 2 < img.v.size(); i += 3) {
        CHECK(img.v[i] == img.v[i + 1]);
        CHECK(img.v[i] == img.v[i + 2]);
    }
}

TEST_CASE("difference_to_rgb is white for identical inputs and signed otherwise") {
    const Phantom p = generate_phantom(8, 32);
    const Slice a = render_scan(p, profile_by_id("site_a"), 1);
    const RgbImage same = difference_to_rgb(a, a);
    for (std::uint8_t v : same.v) CHECK(v == 255);

    Slice brighter = a;
    for (size_t i = 0; i < brighter.pixels.size(); ++i)
        if (brighter.mask[i]) brighter.pixels.v[i] += 0.4f;
    const RgbImage diff = difference_to_rgb(brighter, a);
    // positive difference -> red dominates blue somewhere
    bool red_seen = false;
    for (size_t i = 0; i + 2 < diff.v.size(); i += 3)
        red_seen = red_seen || diff.v[i] > diff.v[i + 2];
    CHECK(red_seen);
}

TEST_CASE("tile lays out panels in a grid with gutters") {
    const std::vector<RgbImage> panels(5, RgbImage(10, 12));
    const RgbImage grid = tile(panels, 3);
    // 2 rows x 3 columns with 2px gutters between cells
    CHECK(grid.w == 12 * 3 + 2 * 2);
    CHECK(grid.h == 10 * 2 + 2);
}

TEST_CASE("bar_chart renders non-degenerate output for metric groups") {
    const std::vector<BarGroup> groups = {{"SITE_B", 12.0, 19.5}, {"SITE_D", 10.8, 16.2}};
    const RgbImage chart = bar_chart(groups, "PSNR DB");
    CHECK(chart.h > 0);
    CHECK(chart.w > 0);
    bool non_white = false;
    for (std::uint8_t v : chart.v) non_white = non_white || v != 255;
    CHECK(non_white);
}
