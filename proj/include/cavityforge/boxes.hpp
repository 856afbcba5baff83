#pragma once

#include "cavityforge/grid.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cavityforge::io {

/// One line of a label (5 fields) or prediction (6 fields) file; coordinates
/// normalized to the original image dimensions.
struct BoxRecord {
    int class_id = 0;
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    std::optional<double> confidence;

    bool is_prediction() const noexcept { return confidence.has_value(); }
    bool operator==(const BoxRecord&) const = default;
};

/// Values may exceed [0, 1] by at most this much before a parse error; they are clamped.
inline constexpr double kClampTolerance = 1e-6;

/// Parses whitespace-separated records, one per line; blank lines are skipped.
/// Throws ParseError carrying the 1-based line number.
std::vector<BoxRecord> parse_box_file(std::string_view text);

/// Canonical text: single spaces, six decimals, '\n' after every record.
/// Throws DomainError when labels and predictions are mixed.
std::string write_box_file(const std::vector<BoxRecord>& records);

std::vector<BoxRecord> read_box_file(const std::string& path);
void save_box_file(const std::string& path, const std::vector<BoxRecord>& records);

/// Half-open integer pixel rectangle [x0, x1) x [y0, y1) covered by a box,
/// rounded from normalized coordinates and clipped to the image. Returned as
/// an inclusive PixelBox (empty when nothing is covered).
PixelBox box_to_pixels(const BoxRecord& box, int image_width, int image_height);

/// Inverse of box_to_pixels for an inclusive pixel rectangle; values clamped to [0, 1].
BoxRecord pixels_to_box(const PixelBox& px, int image_width, int image_height, int class_id = 0);

}  // namespace cavityforge::io
