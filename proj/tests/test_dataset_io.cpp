#include "cavityforge/boxes.hpp"
#include "cavityforge/errors.hpp"
#include "cavityforge/manifest.hpp"
#include "cavityforge/raster.hpp"
#include "cavityforge/rng.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace cavityforge;
using namespace cavityforge::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("cavityforge_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

DatasetManifest two_image_manifest() {
    DatasetManifest m;
    m.entries.push_back({"images/a.pgm", "labels/a.txt", 0.09, 1024, 1024, "train", 2, std::nullopt});
    m.entries.push_back({"images/b.pgm", "labels/b.txt", 0.079, 2048, 1536, "val", 1, 120.5});
    return m;
}

}  // namespace

TEST(BoxFile, ParsesLabelsAndPredictions) {
    const auto r = parse_box_file("0 0.5 0.25 0.1 0.2\n\n1   0.1 0.2 0.3 0.4 0.9\n");
    ASSERT_EQ(r.size(), 2u);
    EXPECT_FALSE(r[0].is_prediction());
    EXPECT_EQ(r[0].cy, 0.25);
    EXPECT_EQ(r[1].class_id, 1);
    EXPECT_EQ(r[1].confidence, 0.9);
}

TEST(BoxFile, ErrorsCarryLineNumbers) {
    auto line_of = [](std::string_view text) {
        try {
            parse_box_file(text);
        } catch (const ParseError& e) {
            return e.line();
        }
        return std::size_t{0};
    };
    EXPECT_EQ(line_of("0 0.5 0.5 0.1 0.1\n0 0.5 0.5 0.1\n"), 2u);
    EXPECT_EQ(line_of("0 0.5 0.5 0.1 0.1\n\n0 0.5 x 0.1 0.1\n"), 3u);
    EXPECT_EQ(line_of("0 0.5 0.5 1.1 0.1\n"), 1u);
    EXPECT_EQ(line_of("-1 0.5 0.5 0.1 0.1\n"), 1u);
    EXPECT_EQ(line_of("0 0.5 0.5 0.1 0.1 0.5 7\n"), 1u);
}

TEST(BoxFile, ValuesWithinToleranceAreClamped) {
    const auto r = parse_box_file("0 1.0000005 -0.0000005 0.5 0.5\n");
    EXPECT_EQ(r[0].cx, 1.0);
    EXPECT_EQ(r[0].cy, 0.0);
}

TEST(BoxFile, RoundTripTenThousandRecords) {
    Engine eng(99);
    std::vector<BoxRecord> labels, preds;
    for (int i = 0; i < 10000; ++i) {
        BoxRecord b{static_cast<int>(uniform01(eng) * 3), uniform01(eng), uniform01(eng), uniform01(eng),
                    uniform01(eng), std::nullopt};
        labels.push_back(b);
        b.confidence = uniform01(eng);
        preds.push_back(b);
    }
    for (const auto* set : {&labels, &preds}) {
        const auto text = write_box_file(*set);
        const auto back = parse_box_file(text);
        ASSERT_EQ(back.size(), set->size());
        for (std::size_t i = 0; i < back.size(); ++i) {
            const auto& a = (*set)[i];
            const auto& b = back[i];
            EXPECT_EQ(a.class_id, b.class_id);
            EXPECT_NEAR(a.cx, b.cx, 1e-6);
            EXPECT_NEAR(a.cy, b.cy, 1e-6);
            EXPECT_NEAR(a.w, b.w, 1e-6);
            EXPECT_NEAR(a.h, b.h, 1e-6);
            EXPECT_EQ(a.is_prediction(), b.is_prediction());
            if (a.confidence) EXPECT_NEAR(*a.confidence, *b.confidence, 1e-6);
        }
        // The canonical text is a fixed point.
        EXPECT_EQ(write_box_file(back), text);
    }
}

TEST(BoxFile, MixedKindsAreRejected) {
    std::vector<BoxRecord> mixed{{0, 0.5, 0.5, 0.1, 0.1, std::nullopt}, {0, 0.5, 0.5, 0.1, 0.1, 0.5}};
    EXPECT_THROW(write_box_file(mixed), DomainError);
    EXPECT_EQ(write_box_file({}), "");
}

TEST(BoxFile, SaveAndReadBack) {
    const auto dir = scratch_dir("boxes");
    const std::vector<BoxRecord> recs{{0, 0.25, 0.75, 0.125, 0.0625, std::nullopt}};
    save_box_file((dir / "a.txt").string(), recs);
    EXPECT_EQ(read_box_file((dir / "a.txt").string()), recs);
    EXPECT_THROW(read_box_file((dir / "missing.txt").string()), IoError);
}

TEST(BoxPixels, ExactGridRoundTrip) {
    Engine eng(3);
    for (int i = 0; i < 2000; ++i) {
        const int W = 16 + static_cast<int>(uniform01(eng) * 4000);
        const int H = 16 + static_cast<int>(uniform01(eng) * 4000);
        const int x0 = static_cast<int>(uniform01(eng) * (W - 1));
        const int y0 = static_cast<int>(uniform01(eng) * (H - 1));
        const int x1 = x0 + static_cast<int>(uniform01(eng) * (W - 1 - x0));
        const int y1 = y0 + static_cast<int>(uniform01(eng) * (H - 1 - y0));
        const PixelBox px{x0, y0, x1, y1};
        ASSERT_EQ(box_to_pixels(pixels_to_box(px, W, H), W, H), px) << W << "x" << H;
        // Survives the six-decimal text form as well on images up to 4k.
        const auto text = write_box_file({pixels_to_box(px, W, H)});
        ASSERT_EQ(box_to_pixels(parse_box_file(text)[0], W, H), px);
    }
}

TEST(BoxPixels, ClipsToImage) {
    const BoxRecord b{0, 0.0, 1.0, 0.2, 0.2, std::nullopt};
    const auto px = box_to_pixels(b, 100, 50);
    EXPECT_EQ(px, (PixelBox{0, 45, 9, 49}));
    EXPECT_TRUE(box_to_pixels({0, 0.5, 0.5, 0.0, 0.0, std::nullopt}, 100, 100).empty());
}

TEST(Manifest, TextRoundTrip) {
    const auto m = two_image_manifest();
    const auto text = write_manifest(m);
    EXPECT_EQ(parse_manifest(text), m);
    EXPECT_NE(text.find("totals 2 3\n"), std::string::npos);
}

TEST(Manifest, MutatedCountIsDetected) {
    std::string text = write_manifest(two_image_manifest());
    const auto pos = text.find("totals 2 3");
    text.replace(pos, 10, "totals 2 4");
    EXPECT_THROW(parse_manifest(text), ManifestError);
    text.replace(pos, 10, "totals 3 3");
    EXPECT_THROW(parse_manifest(text), ManifestError);
}

TEST(Manifest, MalformedText) {
    EXPECT_THROW(parse_manifest(""), ParseError);
    EXPECT_THROW(parse_manifest("something-else 1\ntotals 0 0\n"), ParseError);
    EXPECT_THROW(parse_manifest("cavityforge-manifest 2\ntotals 0 0\n"), ParseError);
    EXPECT_THROW(parse_manifest("cavityforge-manifest 1\n"), ManifestError);
    EXPECT_THROW(parse_manifest("cavityforge-manifest 1\na b 0.1 10 10 train\ntotals 1 0\n"), ParseError);
    EXPECT_THROW(parse_manifest("cavityforge-manifest 1\na b -0.1 10 10 train 0\ntotals 1 0\n"), ParseError);
    EXPECT_THROW(parse_manifest("cavityforge-manifest 1\ntotals 0 0\nx\n"), ParseError);
    EXPECT_NO_THROW(parse_manifest("cavityforge-manifest 1\n# comment\n\ntotals 0 0"));
}

TEST(Manifest, PathsWithSpacesAreRejected) {
    DatasetManifest m;
    m.entries.push_back({"my image.pgm", "l.txt", 0.09, 10, 10, "train", 0, std::nullopt});
    EXPECT_THROW(write_manifest(m), DomainError);
}

TEST(Manifest, VerifiesFilesOnLoad) {
    const auto dir = scratch_dir("manifest");
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "labels");
    RasterImage img{Grid<std::uint16_t>(4, 4, 7), 8};
    write_raster(dir / "images/a.pgm", img);
    write_raster(dir / "images/b.pgm", img);
    save_box_file((dir / "labels/a.txt").string(),
                  {{0, 0.5, 0.5, 0.1, 0.1, std::nullopt}, {0, 0.2, 0.2, 0.1, 0.1, std::nullopt}});
    save_box_file((dir / "labels/b.txt").string(), {{0, 0.5, 0.5, 0.1, 0.1, std::nullopt}});
    save_manifest(dir / "manifest.txt", two_image_manifest());
    EXPECT_EQ(load_manifest(dir / "manifest.txt"), two_image_manifest());

    // A label file that disagrees with its entry.
    save_box_file((dir / "labels/b.txt").string(), {});
    EXPECT_THROW(load_manifest(dir / "manifest.txt"), ManifestError);
    EXPECT_NO_THROW(load_manifest(dir / "manifest.txt", false));
    fs::remove(dir / "images/a.pgm");
    EXPECT_THROW(load_manifest(dir / "manifest.txt"), ManifestError);
}

TEST(Raster, PgmRoundTripBothDepths) {
    const auto dir = scratch_dir("raster");
    Engine eng(4);
    for (int depth : {8, 16}) {
        RasterImage img{Grid<std::uint16_t>(37, 23), depth};
        for (auto& v : img.pixels.values()) v = static_cast<std::uint16_t>(uniform01(eng) * (img.max_value() + 1));
        for (const char* ext : {".pgm", ".png"}) {
            const auto path = dir / (std::to_string(depth) + ext);
            write_raster(path, img);
            EXPECT_EQ(read_raster(path), img) << path;
        }
    }
}

TEST(Raster, MaskRoundTrip) {
    const auto dir = scratch_dir("mask");
    Mask m(9, 5, 0);
    m(3, 2) = 1;
    m(8, 4) = 1;
    write_mask(dir / "m.png", m);
    EXPECT_EQ(read_mask(dir / "m.png"), m);
    EXPECT_EQ(read_raster(dir / "m.png").pixels(3, 2), 255);
}

TEST(Raster, BadFiles) {
    const auto dir = scratch_dir("badraster");
    write_text_file_atomic(dir / "x.pgm", "P2\n1 1\n255\n0\n");
    EXPECT_THROW(read_raster(dir / "x.pgm"), IoError);
    write_text_file_atomic(dir / "t.pgm", "P5\n4 4\n255\nab");
    EXPECT_THROW(read_raster(dir / "t.pgm"), IoError);
    write_text_file_atomic(dir / "p.png", "not a png");
    EXPECT_THROW(read_raster(dir / "p.png"), IoError);
    EXPECT_THROW(read_raster(dir / "nope.pgm"), IoError);
}
