#include "cavityforge/manifest.hpp"

#include "cavityforge/boxes.hpp"
#include "cavityforge/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace cavityforge::io {

namespace {

constexpr std::string_view kMagic = "cavityforge-manifest";

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <class T>
T parse_number(std::string_view s, std::size_t line, const char* what) {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw ParseError(std::string("invalid ") + what + " '" + std::string(s) + "'", line);
    }
    return v;
}

std::string shortest(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void check_token(const std::string& s, const char* what) {
    if (s.empty()) throw DomainError(std::string("manifest ") + what + " is empty");
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '#') {
            throw DomainError(std::string("manifest ") + what + " '" + s + "' contains whitespace or '#'");
        }
    }
}

}  // namespace

std::int64_t DatasetManifest::feature_count() const noexcept {
    std::int64_t n = 0;
    for (const auto& e : entries) n += e.features;
    return n;
}

std::string write_manifest(const DatasetManifest& m) {
    std::string out = std::string(kMagic) + " " + std::to_string(DatasetManifest::kFormatVersion) + "\n";
    out += "# image label pixel_scale_nm width height split features [thickness_nm]\n";
    for (const auto& e : m.entries) {
        check_token(e.image, "image path");
        check_token(e.label, "label path");
        check_token(e.split, "split tag");
        out += e.image + " " + e.label + " " + shortest(e.pixel_scale) + " " + std::to_string(e.width) + " " +
               std::to_string(e.height) + " " + e.split + " " + std::to_string(e.features);
        if (e.thickness_nm) out += " " + shortest(*e.thickness_nm);
        out += "\n";
    }
    out += "totals " + std::to_string(m.image_count()) + " " + std::to_string(m.feature_count()) + "\n";
    return out;
}

DatasetManifest parse_manifest(std::string_view text) {
    DatasetManifest m;
    bool have_header = false;
    bool have_totals = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto f = split_fields(line);
        if (f.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (have_totals) throw ParseError("content after the totals line", line_no);
        if (!have_header) {
            if (f.size() != 2 || f[0] != kMagic) throw ParseError("missing manifest header", line_no);
            const int version = parse_number<int>(f[1], line_no, "version");
            if (version != DatasetManifest::kFormatVersion) {
                throw ParseError("unsupported manifest version " + std::to_string(version), line_no);
            }
            have_header = true;
            continue;
        }
        if (f[0] == "totals") {
            if (f.size() != 3) throw ParseError("totals line needs two counts", line_no);
            const auto images = parse_number<std::int64_t>(f[1], line_no, "image count");
            const auto features = parse_number<std::int64_t>(f[2], line_no, "feature count");
            if (images != static_cast<std::int64_t>(m.image_count())) {
                throw ManifestError("image count mismatch: totals say " + std::to_string(images) + ", found " +
                                        std::to_string(m.image_count()),
                                    "totals");
            }
            if (features != m.feature_count()) {
                throw ManifestError("feature count mismatch: totals say " + std::to_string(features) +
                                        ", entries sum to " + std::to_string(m.feature_count()),
                                    "totals");
            }
            have_totals = true;
            continue;
        }
        if (f.size() != 7 && f.size() != 8) throw ParseError("expected 7 or 8 fields, got " + std::to_string(f.size()), line_no);
        ManifestEntry e;
        e.image = std::string(f[0]);
        e.label = std::string(f[1]);
        e.pixel_scale = parse_number<double>(f[2], line_no, "pixel scale");
        e.width = parse_number<int>(f[3], line_no, "width");
        e.height = parse_number<int>(f[4], line_no, "height");
        e.split = std::string(f[5]);
        e.features = parse_number<std::int64_t>(f[6], line_no, "feature count");
        if (f.size() == 8) e.thickness_nm = parse_number<double>(f[7], line_no, "thickness");
        if (!(e.pixel_scale > 0.0) || e.width <= 0 || e.height <= 0 || e.features < 0 ||
            (e.thickness_nm && !(*e.thickness_nm > 0.0))) {
            throw ParseError("non-positive scale, size, thickness or negative count", line_no);
        }
        m.entries.push_back(std::move(e));
    }
    if (!have_header) throw ParseError("missing manifest header", 1);
    if (!have_totals) throw ManifestError("missing totals line", "");
    return m;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view text) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    write_text_file_atomic(path, write_manifest(manifest));
}

DatasetManifest load_manifest(const std::filesystem::path& path, bool verify_files) {
    DatasetManifest m;
    try {
        m = parse_manifest(read_text_file(path));
    } catch (const ParseError& e) {
        throw ManifestError(e.what(), path.string());
    }
    if (!verify_files) return m;
    const auto dir = path.parent_path();
    for (const auto& e : m.entries) {
        if (!std::filesystem::exists(dir / e.image)) throw ManifestError("image file missing", e.image);
        if (!std::filesystem::exists(dir / e.label)) throw ManifestError("label file missing", e.label);
        const auto records = read_box_file((dir / e.label).string());
        if (static_cast<std::int64_t>(records.size()) != e.features) {
            throw ManifestError("feature count mismatch: manifest says " + std::to_string(e.features) +
                                    ", label file holds " + std::to_string(records.size()),
                                e.image);
        }
    }
    return m;
}

}  // namespace cavityforge::io
