#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cavityforge::io {

/// One image of a dataset. Paths are relative to the manifest's directory.
struct ManifestEntry {
    std::string image;
    std::string label;
    double pixel_scale = 0.0;    ///< nm per pixel
    int width = 0;
    int height = 0;
    std::string split = "train";
    std::int64_t features = 0;   ///< records in the label file
    std::optional<double> thickness_nm;

    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    static constexpr int kFormatVersion = 1;
    std::vector<ManifestEntry> entries;

    std::size_t image_count() const noexcept { return entries.size(); }
    std::int64_t feature_count() const noexcept;

    bool operator==(const DatasetManifest&) const = default;
};

/// Canonical text form; see docs/formats.md.
std::string write_manifest(const DatasetManifest& manifest);

/// Parses the text form and checks the trailing totals against the entries.
/// ParseError on malformed lines, ManifestError on a count mismatch.
DatasetManifest parse_manifest(std::string_view text);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads and, when `verify_files` is set, checks that every image and label
/// exists and that each label file holds the recorded number of features.
DatasetManifest load_manifest(const std::filesystem::path& path, bool verify_files = true);

/// Reads a whole file; IoError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace cavityforge::io
