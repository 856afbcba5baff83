#include "cavityforge/boxes.hpp"

#include "cavityforge/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cavityforge::io {

namespace {

double parse_unit_value(std::string_view tok, std::size_t line, const char* what) {
    double v = 0.0;
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError(std::string("non-numeric ") + what + " '" + std::string(tok) + "'", line);
    }
    if (v < -kClampTolerance || v > 1.0 + kClampTolerance) {
        throw ParseError(std::string(what) + " " + std::string(tok) + " outside [0, 1]", line);
    }
    return std::clamp(v, 0.0, 1.0);
}

int parse_class(std::string_view tok, std::size_t line) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) {
        throw ParseError("invalid class id '" + std::string(tok) + "'", line);
    }
    return v;
}

}  // namespace

std::vector<BoxRecord> parse_box_file(std::string_view text) {
    std::vector<BoxRecord> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        ++line_no;
        std::vector<std::string_view> fields;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            const std::size_t start = i;
            while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            if (i > start) fields.push_back(line.substr(start, i - start));
        }
        if (fields.empty()) continue;
        if (fields.size() != 5 && fields.size() != 6) {
            throw ParseError("expected 5 or 6 fields, found " + std::to_string(fields.size()), line_no);
        }
        BoxRecord r;
        r.class_id = parse_class(fields[0], line_no);
        r.cx = parse_unit_value(fields[1], line_no, "cx");
        r.cy = parse_unit_value(fields[2], line_no, "cy");
        r.w = parse_unit_value(fields[3], line_no, "w");
        r.h = parse_unit_value(fields[4], line_no, "h");
        if (fields.size() == 6) r.confidence = parse_unit_value(fields[5], line_no, "confidence");
        out.push_back(r);
    }
    return out;
}

std::string write_box_file(const std::vector<BoxRecord>& records) {
    if (records.empty()) return {};
    const bool predictions = records.front().is_prediction();
    std::string out;
    char buf[160];
    for (const auto& r : records) {
        if (r.is_prediction() != predictions) throw DomainError("box file mixes labels and predictions");
        int n = 0;
        if (predictions) {
            n = std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f %.6f\n", r.class_id, r.cx, r.cy, r.w, r.h,
                              *r.confidence);
        } else {
            n = std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f\n", r.class_id, r.cx, r.cy, r.w, r.h);
        }
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

std::vector<BoxRecord> read_box_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open box file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_box_file(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line());
    }
}

void save_box_file(const std::string& path, const std::vector<BoxRecord>& records) {
    const std::string text = write_box_file(records);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out << text;
        if (!out) throw IoError("failed writing " + tmp);
    }
    std::rename(tmp.c_str(), path.c_str());
}

PixelBox box_to_pixels(const BoxRecord& box, int image_width, int image_height) {
    const auto lo_x = static_cast<int>(std::lround((box.cx - box.w / 2.0) * image_width));
    const auto hi_x = static_cast<int>(std::lround((box.cx + box.w / 2.0) * image_width));
    const auto lo_y = static_cast<int>(std::lround((box.cy - box.h / 2.0) * image_height));
    const auto hi_y = static_cast<int>(std::lround((box.cy + box.h / 2.0) * image_height));
    PixelBox px{std::max(lo_x, 0), std::max(lo_y, 0), std::min(hi_x, image_width) - 1,
                std::min(hi_y, image_height) - 1};
    if (px.empty()) return PixelBox{};
    return px;
}

BoxRecord pixels_to_box(const PixelBox& px, int image_width, int image_height, int class_id) {
    BoxRecord r;
    r.class_id = class_id;
    const double w = static_cast<double>(image_width);
    const double h = static_cast<double>(image_height);
    r.cx = std::clamp((px.x0 + px.x1 + 1) / (2.0 * w), 0.0, 1.0);
    r.cy = std::clamp((px.y0 + px.y1 + 1) / (2.0 * h), 0.0, 1.0);
    r.w = std::clamp(px.width() / w, 0.0, 1.0);
    r.h = std::clamp(px.height() / h, 0.0, 1.0);
    return r;
}

}  // namespace cavityforge::io
