#include "cavityforge/raster.hpp"

#include "cavityforge/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace cavityforge::io {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

// ---- PGM ----------------------------------------------------------------

int read_pgm_int(std::istream& in) {
    int c = in.get();
    for (;;) {
        while (c != EOF && std::isspace(c)) c = in.get();
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
            continue;
        }
        break;
    }
    if (c == EOF || !std::isdigit(c)) throw IoError("malformed PGM header");
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        if (v > 1'000'000) throw IoError("PGM header value too large");
        c = in.get();
    }
    // `c` is the single whitespace separator after the number.
    return static_cast<int>(v);
}

RasterImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[2];
    in.read(magic, 2);
    if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5') throw IoError(path.string() + ": not a binary PGM");
    const int w = read_pgm_int(in);
    const int h = read_pgm_int(in);
    const int maxval = read_pgm_int(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IoError(path.string() + ": bad PGM dimensions");
    RasterImage img;
    img.bit_depth = maxval < 256 ? 8 : 16;
    img.pixels = Grid<std::uint16_t>(w, h);
    const std::size_t bytes = img.bit_depth == 8 ? 1 : 2;
    std::vector<unsigned char> buf(img.pixels.size() * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw IoError(path.string() + ": truncated PGM data");
    auto px = img.pixels.values();
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = bytes == 1 ? buf[i] : static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
    return img;
}

void write_pgm(std::ostream& out, const RasterImage& img) {
    out << "P5\n" << img.pixels.width() << ' ' << img.pixels.height() << '\n' << img.max_value() << '\n';
    const auto px = img.pixels.values();
    std::vector<unsigned char> buf;
    if (img.bit_depth == 8) {
        buf.resize(px.size());
        for (std::size_t i = 0; i < px.size(); ++i) buf[i] = static_cast<unsigned char>(px[i]);
    } else {
        buf.resize(px.size() * 2);
        for (std::size_t i = 0; i < px.size(); ++i) {
            buf[2 * i] = static_cast<unsigned char>(px[i] >> 8);
            buf[2 * i + 1] = static_cast<unsigned char>(px[i] & 0xff);
        }
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

// ---- PNG ----------------------------------------------------------------

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

RasterImage read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }
    RasterImage img;
    std::vector<png_bytep> rows;
    std::vector<unsigned char> data;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path.string() + ": PNG decode error");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const auto w = png_get_image_width(png, info);
    const auto h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path.string() + ": only single-channel grayscale PNG is supported");
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    img.bit_depth = depth == 16 ? 16 : 8;
    const std::size_t stride = png_get_rowbytes(png, info);
    data.resize(stride * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    img.pixels = Grid<std::uint16_t>(static_cast<int>(w), static_cast<int>(h));
    for (png_uint_32 y = 0; y < h; ++y) {
        for (png_uint_32 x = 0; x < w; ++x) {
            const unsigned char* r = rows[y];
            img.pixels(static_cast<int>(x), static_cast<int>(y)) =
                img.bit_depth == 8 ? r[x] : static_cast<std::uint16_t>((r[2 * x] << 8) | r[2 * x + 1]);
        }
    }
    return img;
}

void write_png(const std::filesystem::path& path, const RasterImage& img) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }
    const int w = img.pixels.width();
    const int h = img.pixels.height();
    const std::size_t bpp = img.bit_depth == 8 ? 1 : 2;
    std::vector<unsigned char> data(static_cast<std::size_t>(w) * h * bpp);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const std::uint16_t v = img.pixels(x, y);
            if (bpp == 1) {
                data[i] = static_cast<unsigned char>(v);
            } else {
                data[2 * i] = static_cast<unsigned char>(v >> 8);
                data[2 * i + 1] = static_cast<unsigned char>(v & 0xff);
            }
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = data.data() + static_cast<std::size_t>(y) * w * bpp;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path.string() + ": PNG encode error");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), img.bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

RasterImage read_raster(const std::filesystem::path& path) {
    const auto ext = lower_ext(path);
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return read_png(path);
    throw IoError("unsupported raster extension '" + ext + "' (use .pgm or .png)");
}

void write_raster(const std::filesystem::path& path, const RasterImage& image) {
    if (image.bit_depth != 8 && image.bit_depth != 16) throw IoError("bit depth must be 8 or 16");
    const auto ext = lower_ext(path);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    if (ext == ".pgm") {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
            write_pgm(out, image);
            if (!out) throw IoError("failed writing " + tmp.string());
        }
    } else if (ext == ".png") {
        write_png(tmp, image);
    } else {
        throw IoError("unsupported raster extension '" + ext + "' (use .pgm or .png)");
    }
    std::filesystem::rename(tmp, path);
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
    RasterImage img;
    img.bit_depth = 8;
    img.pixels = Grid<std::uint16_t>(mask.width(), mask.height());
    auto dst = img.pixels.values();
    auto src = mask.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 255 : 0;
    write_raster(path, img);
}

Mask read_mask(const std::filesystem::path& path) {
    const RasterImage img = read_raster(path);
    Mask m(img.pixels.width(), img.pixels.height(), 0);
    auto dst = m.values();
    auto src = img.pixels.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 1 : 0;
    return m;
}

}  // namespace cavityforge::io
