// Writes textured stand-in backgrounds for demos and tests. Real datasets
// should use clean experimental micrographs instead.
#include "cavityforge/compositor.hpp"
#include "cavityforge/manifest.hpp"
#include "cavityforge/raster.hpp"
#include "cavityforge/rng.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"make_backgrounds: synthetic stand-in background images"};
    std::string out;
    int count = 1;
    int size = 2048;
    int bit_depth = 16;
    double scale = 0.09;
    std::uint64_t seed = 1;
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--count", count, "number of images")->check(CLI::PositiveNumber);
    app.add_option("--size", size, "side length in pixels")->check(CLI::PositiveNumber);
    app.add_option("--bit-depth", bit_depth, "8 or 16")->check(CLI::IsMember({8, 16}));
    app.add_option("--scale", scale, "pixel scale in nm/px")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "root seed");
    CLI11_PARSE(app, argc, argv);
    try {
        namespace fs = std::filesystem;
        fs::create_directories(out);
        std::string scales;
        for (int i = 0; i < count; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "bg_%03d.pgm", i);
            const auto bg = cavityforge::compose::synthetic_background(
                size, size, scale, bit_depth, cavityforge::derive_seed(seed, {static_cast<std::uint64_t>(i)}));
            cavityforge::io::write_raster(fs::path(out) / name, bg.raster);
            char line[64];
            std::snprintf(line, sizeof line, "%s %.6f\n", name, scale);
            scales += line;
        }
        cavityforge::io::write_text_file_atomic(fs::path(out) / "pixel_scales.txt", scales);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
