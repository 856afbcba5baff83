#include "cavityforge/lut.hpp"

#include "cavityforge/errors.hpp"
#include "cavityforge/parallel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cavityforge::physics {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'F', 'L', 'U', 'T', '\0', '\0', '\0'};

void normalize_axis(std::vector<double>& axis, const char* name) {
    if (axis.empty()) throw DomainError(std::string("LUT grid axis '") + name + "' is empty");
    for (double v : axis) {
        if (!std::isfinite(v)) throw DomainError(std::string("LUT grid axis '") + name + "' has a non-finite value");
    }
    std::sort(axis.begin(), axis.end());
    if (std::adjacent_find(axis.begin(), axis.end()) != axis.end()) {
        throw DomainError(std::string("LUT grid axis '") + name + "' has duplicate keys");
    }
}

std::size_t nearest_on_axis(const std::vector<double>& axis, double v) {
    const double span = axis.back() - axis.front();
    const double scale = span > 0.0 ? 1.0 / span : 1.0;
    std::size_t best = 0;
    double best_d = std::abs(v - axis[0]) * scale;
    for (std::size_t i = 1; i < axis.size(); ++i) {
        const double d = std::abs(v - axis[i]) * scale;
        if (d < best_d) {  // strict: ties keep the smaller key
            best = i;
            best_d = d;
        }
    }
    return best;
}

std::string key_label(double r, double z) {
    std::ostringstream os;
    os << "(R=" << r << " nm, Z=" << z << " um)";
    return os.str();
}

// Little-endian scalar encoding independent of host order.
void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b, 4);
}

void put_f64(std::ostream& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b, 8);
}

void read_exact(std::istream& in, char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw IoError("LUT file truncated");
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    read_exact(in, reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    read_exact(in, reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void GridSpec::normalize() {
    normalize_axis(radii_nm, "radii_nm");
    normalize_axis(defocus_um, "defocus_um");
}

GridSpec GridSpec::desk_default() {
    GridSpec g;
    for (int r = 1; r <= 50; ++r) g.radii_nm.push_back(static_cast<double>(r));
    g.defocus_um = {-2300.0, -1800.0, -1300.0, -800.0, -300.0};
    return g;
}

ProfileLut::ProfileLut(GridSpec grid, MicroscopeParams params, SimulationSettings settings,
                       std::vector<ContrastProfile> entries)
    : grid_(std::move(grid)), params_(params), settings_(settings), entries_(std::move(entries)) {
    grid_.normalize();
    if (entries_.size() != grid_.size()) {
        throw DomainError("LUT entry count " + std::to_string(entries_.size()) + " does not match grid size " +
                          std::to_string(grid_.size()));
    }
}

const ContrastProfile& ProfileLut::at(std::size_t radius_index, std::size_t defocus_index) const {
    if (radius_index >= grid_.radii_nm.size() || defocus_index >= grid_.defocus_um.size()) {
        throw LookupError("LUT index out of range");
    }
    return entries_[radius_index * grid_.defocus_um.size() + defocus_index];
}

std::pair<std::size_t, std::size_t> ProfileLut::nearest(double radius_nm, double defocus_um) const {
    if (empty()) throw LookupError("lookup in an empty LUT");
    return {nearest_on_axis(grid_.radii_nm, radius_nm), nearest_on_axis(grid_.defocus_um, defocus_um)};
}

const ContrastProfile& ProfileLut::lookup(double radius_nm, double defocus_um) const {
    const auto [ri, zi] = nearest(radius_nm, defocus_um);
    return at(ri, zi);
}

ProfileLut build_lut(GridSpec grid, const MicroscopeParams& params, const SimulationSettings& settings,
                     unsigned jobs, std::vector<double>* seconds) {
    grid.normalize();
    params.validate();
    settings.validate();
    const std::size_t nz = grid.defocus_um.size();
    std::vector<ContrastProfile> entries(grid.size());
    std::vector<double> timing(grid.size(), 0.0);
    parallel_for(grid.size(), jobs, [&](std::size_t i) {
        SimulationRequest req;
        req.radius_nm = grid.radii_nm[i / nz];
        req.defocus_um = grid.defocus_um[i % nz];
        req.params = params;
        req.settings = settings;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            entries[i] = simulate_profile(req);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError(key_label(req.radius_nm, req.defocus_um) + ": " + e.what(), e.residual());
        } catch (const DomainError& e) {
            throw DomainError(key_label(req.radius_nm, req.defocus_um) + ": " + e.what());
        }
        timing[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    if (seconds) *seconds = std::move(timing);
    return ProfileLut(std::move(grid), params, settings, std::move(entries));
}

void write_lut(const ProfileLut& lut, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, ProfileLut::kFormatVersion);
    const auto& g = lut.grid();
    put_u32(out, static_cast<std::uint32_t>(g.radii_nm.size()));
    put_u32(out, static_cast<std::uint32_t>(g.defocus_um.size()));
    for (double r : g.radii_nm) put_f64(out, r);
    for (double z : g.defocus_um) put_f64(out, z);
    const auto& p = lut.params();
    put_f64(out, p.accelerating_voltage);
    put_f64(out, p.mean_inner_potential_phase);
    put_f64(out, p.absorption_coefficient);
    put_f64(out, p.foil_thickness);
    put_f64(out, p.cavity_depth);
    const auto& s = lut.settings();
    put_u32(out, static_cast<std::uint32_t>(s.n_radial_samples));
    put_u32(out, static_cast<std::uint32_t>(s.n_quadrature_nodes));
    put_u32(out, static_cast<std::uint32_t>(s.max_quadrature_nodes));
    put_f64(out, s.rho_max);
    put_f64(out, s.rho_max_limit);
    put_f64(out, s.convergence_tol);
    put_f64(out, s.far_field_tol);
    put_f64(out, s.limits.min_radius_nm);
    put_f64(out, s.limits.max_radius_nm);
    put_f64(out, s.limits.min_defocus_um);
    put_f64(out, s.limits.max_defocus_um);
    put_u32(out, static_cast<std::uint32_t>(lut.size()));
    for (const auto& e : lut.entries()) {
        put_f64(out, e.request.radius_nm);
        put_f64(out, e.request.defocus_um);
        put_f64(out, e.beta);
        put_f64(out, e.rho_max);
        put_f64(out, e.convergence_residual);
        put_u32(out, static_cast<std::uint32_t>(e.psi.size()));
        for (const auto& c : e.psi) {
            put_f64(out, c.real());
            put_f64(out, c.imag());
        }
    }
    if (!out) throw IoError("failed writing LUT stream");
}

ProfileLut read_lut(std::istream& in) {
    std::array<char, 8> magic{};
    read_exact(in, magic.data(), magic.size());
    if (magic != kMagic) throw IoError("not a LUT file (bad magic)");
    const std::uint32_t version = get_u32(in);
    if (version != ProfileLut::kFormatVersion) {
        throw IoError("unsupported LUT format version " + std::to_string(version));
    }
    GridSpec g;
    const std::uint32_t nr = get_u32(in);
    const std::uint32_t nz = get_u32(in);
    for (std::uint32_t i = 0; i < nr; ++i) g.radii_nm.push_back(get_f64(in));
    for (std::uint32_t i = 0; i < nz; ++i) g.defocus_um.push_back(get_f64(in));
    MicroscopeParams p;
    p.accelerating_voltage = get_f64(in);
    p.mean_inner_potential_phase = get_f64(in);
    p.absorption_coefficient = get_f64(in);
    p.foil_thickness = get_f64(in);
    p.cavity_depth = get_f64(in);
    SimulationSettings s;
    s.n_radial_samples = static_cast<int>(get_u32(in));
    s.n_quadrature_nodes = static_cast<int>(get_u32(in));
    s.max_quadrature_nodes = static_cast<int>(get_u32(in));
    s.rho_max = get_f64(in);
    s.rho_max_limit = get_f64(in);
    s.convergence_tol = get_f64(in);
    s.far_field_tol = get_f64(in);
    s.limits.min_radius_nm = get_f64(in);
    s.limits.max_radius_nm = get_f64(in);
    s.limits.min_defocus_um = get_f64(in);
    s.limits.max_defocus_um = get_f64(in);
    const std::uint32_t count = get_u32(in);
    if (count != static_cast<std::uint64_t>(nr) * nz) throw IoError("LUT entry count does not match grid");
    std::vector<ContrastProfile> entries(count);
    for (auto& e : entries) {
        e.request.radius_nm = get_f64(in);
        e.request.defocus_um = get_f64(in);
        e.request.params = p;
        e.request.settings = s;
        e.beta = get_f64(in);
        e.rho_max = get_f64(in);
        e.convergence_residual = get_f64(in);
        e.rho_step = s.rho_max / static_cast<double>(s.n_radial_samples - 1);
        const std::uint32_t n = get_u32(in);
        e.psi.resize(n);
        e.intensity.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            const double re = get_f64(in);
            const double im = get_f64(in);
            e.psi[i] = {re, im};
            e.intensity[i] = std::norm(e.psi[i]);
        }
    }
    return ProfileLut(std::move(g), p, s, std::move(entries));
}

void save_lut(const ProfileLut& lut, const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        write_lut(lut, out);
    }
    std::filesystem::rename(tmp, path);
}

ProfileLut load_lut(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open LUT " + path.string());
    return read_lut(in);
}

}  // namespace cavityforge::physics
