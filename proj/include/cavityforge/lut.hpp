#pragma once

#include "cavityforge/physics.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

namespace cavityforge::physics {

/// Radius and defocus axes of a lookup table. Both are kept sorted ascending.
struct GridSpec {
    std::vector<double> radii_nm;
    std::vector<double> defocus_um;

    /// Sorts both axes; throws DomainError on empty axes, duplicates or non-finite values.
    void normalize();
    std::size_t size() const noexcept { return radii_nm.size() * defocus_um.size(); }

    /// Radii 1..50 nm step 1 against five underfocus values spanning 300-2300 um.
    static GridSpec desk_default();

    bool operator==(const GridSpec&) const = default;
};

/// Immutable store of simulated profiles keyed by (radius, defocus) grid point.
class ProfileLut {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    ProfileLut() = default;
    /// `entries` is radius-major: entry (ri, zi) lives at ri * defocus_count + zi.
    ProfileLut(GridSpec grid, MicroscopeParams params, SimulationSettings settings,
               std::vector<ContrastProfile> entries);

    const GridSpec& grid() const noexcept { return grid_; }
    const MicroscopeParams& params() const noexcept { return params_; }
    const SimulationSettings& settings() const noexcept { return settings_; }
    std::uint32_t version() const noexcept { return kFormatVersion; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<ContrastProfile>& entries() const noexcept { return entries_; }

    const ContrastProfile& at(std::size_t radius_index, std::size_t defocus_index) const;

    /// Nearest grid indices in normalized grid coordinates, ties toward the smaller key.
    std::pair<std::size_t, std::size_t> nearest(double radius_nm, double defocus_um) const;

    /// Throws LookupError on an empty table.
    const ContrastProfile& lookup(double radius_nm, double defocus_um) const;

private:
    GridSpec grid_;
    MicroscopeParams params_;
    SimulationSettings settings_;
    std::vector<ContrastProfile> entries_;
};

/// Simulates every grid point, `jobs` at a time. Per-entry wall times are
/// written to `seconds` when given. Result does not depend on `jobs`.
ProfileLut build_lut(GridSpec grid, const MicroscopeParams& params, const SimulationSettings& settings,
                     unsigned jobs = 1, std::vector<double>* seconds = nullptr);

/// Convenience wrapper used by the lookup operation.
inline const ContrastProfile& lut_lookup(const ProfileLut& lut, double radius_nm, double defocus_um) {
    return lut.lookup(radius_nm, defocus_um);
}

void write_lut(const ProfileLut& lut, std::ostream& out);
ProfileLut read_lut(std::istream& in);
void save_lut(const ProfileLut& lut, const std::filesystem::path& path);
ProfileLut load_lut(const std::filesystem::path& path);

}  // namespace cavityforge::physics
