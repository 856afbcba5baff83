#include "cavityforge/patch.hpp"

#include "cavityforge/errors.hpp"
#include "cavityforge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cavityforge::patch {

std::string to_string(SizeCategory c) {
    switch (c) {
        case SizeCategory::Small: return "small";
        case SizeCategory::Medium: return "medium";
        case SizeCategory::Large: return "large";
    }
    return "unknown";
}

SizeClassTable::SizeClassTable() : SizeClassTable(5.0, 20.0, 0.03, 0.07, 0.12) {}

SizeClassTable::SizeClassTable(double small_upper_nm, double medium_upper_nm, double small_amp,
                               double medium_amp, double large_amp) {
    if (!(small_upper_nm > 0.0 && medium_upper_nm > small_upper_nm)) {
        throw DomainError("size class bounds must satisfy 0 < small_upper < medium_upper");
    }
    if (!(small_amp >= 0.0 && small_amp <= medium_amp && medium_amp <= large_amp && large_amp < 1.0)) {
        throw DomainError("warp amplitudes must be non-decreasing from small to large and below 1");
    }
    classes_ = {
        {SizeCategory::Small, 0.0, small_upper_nm, small_amp},
        {SizeCategory::Medium, small_upper_nm, medium_upper_nm, medium_amp},
        {SizeCategory::Large, medium_upper_nm, std::numeric_limits<double>::infinity(), large_amp},
    };
}

const SizeClass& classify_size(double radius_nm, const SizeClassTable& table) {
    if (!(radius_nm > 0.0)) throw DomainError("cavity radius must be positive");
    for (const auto& c : table.classes()) {
        if (radius_nm >= c.lower_nm && radius_nm < c.upper_nm) return c;
    }
    return table.classes().back();
}

double CavityPatch::border_mean() const {
    const int n = intensity.width();
    double sum = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            if (x < 2 || y < 2 || x >= n - 2 || y >= n - 2) {
                sum += intensity(x, y);
                ++count;
            }
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

CavityPatch rotate_profile(const physics::ContrastProfile& profile, double pixel_scale, double contrast_floor) {
    if (!(pixel_scale > 0.0)) throw DomainError("pixel scale must be positive");
    const double radius_nm = profile.request.radius_nm;
    const double half_exact = profile.rho_max * radius_nm / pixel_scale;
    const int half = static_cast<int>(std::ceil(half_exact));
    if (half < 3) {
        throw TooSmallError("patch radius " + std::to_string(half_exact) +
                            " px is below 3 px; use a larger radius or a finer pixel scale");
    }
    const int side = 2 * half + 1;
    CavityPatch out;
    out.intensity = Grid<double>(side, side, 1.0);
    out.physical_radius_nm = radius_nm;
    out.pixel_scale = pixel_scale;
    const double to_rho = pixel_scale / radius_nm;
    for (int y = 0; y < side; ++y) {
        const int dy = y - half;
        for (int x = 0; x < side; ++x) {
            const int dx = x - half;
            const double r = std::sqrt(static_cast<double>(dx * dx + dy * dy));
            out.intensity(x, y) = profile.intensity_at(r * to_rho);
        }
    }
    if (auto rho = profile.first_fringe_rho(contrast_floor)) out.fringe_radius_px = *rho * radius_nm / pixel_scale;
    return out;
}

double sample_bilinear(const Grid<double>& g, double x, double y) noexcept {
    const double maxx = g.width() - 1;
    const double maxy = g.height() - 1;
    x = std::clamp(x, 0.0, maxx);
    y = std::clamp(y, 0.0, maxy);
    const int x0 = std::min(static_cast<int>(x), g.width() - 1);
    const int y0 = std::min(static_cast<int>(y), g.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    if (fx == 0.0 && fy == 0.0) return g(x0, y0);
    const int x1 = std::min(x0 + 1, g.width() - 1);
    const int y1 = std::min(y0 + 1, g.height() - 1);
    const double top = g(x0, y0) * (1.0 - fx) + g(x1, y0) * fx;
    const double bottom = g(x0, y1) * (1.0 - fx) + g(x1, y1) * fx;
    return top * (1.0 - fy) + bottom * fy;
}

namespace {

struct RayHit {
    double radius;
    double value;
};

std::optional<RayHit> scan_ray(const Grid<double>& g, double cx, double cy, double angle, double level,
                               double step, double max_r) {
    const double ux = std::cos(angle);
    const double uy = std::sin(angle);
    const int n = static_cast<int>(std::floor(max_r / step)) + 1;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = sample_bilinear(g, cx + i * step * ux, cy + i * step * uy);
    int i = 0;
    while (i < n && v[static_cast<std::size_t>(i)] < level) ++i;
    while (i < n && v[static_cast<std::size_t>(i)] >= level) ++i;
    if (i >= n) return std::nullopt;
    int best = i;
    while (i < n && v[static_cast<std::size_t>(i)] < level) {
        if (v[static_cast<std::size_t>(i)] < v[static_cast<std::size_t>(best)]) best = i;
        ++i;
    }
    double offset = 0.0;
    if (best > 0 && best + 1 < n) {
        const double a = v[static_cast<std::size_t>(best - 1)];
        const double b = v[static_cast<std::size_t>(best)];
        const double c = v[static_cast<std::size_t>(best + 1)];
        const double denom = a - 2.0 * b + c;
        if (denom > 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
    }
    return RayHit{(best + offset) * step, v[static_cast<std::size_t>(best)]};
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

}  // namespace

FringeMeasurement measure_fringe(const CavityPatch& patch, const FringeCheckOptions& opt) {
    if (opt.rays < 32) throw DomainError("fringe check needs at least 32 rays");
    FringeMeasurement m;
    const auto& g = patch.intensity;
    if (g.empty()) return m;
    const double c = patch.center();
    const double level = 1.0 - opt.contrast_floor;
    std::vector<double> hits;
    for (int k = 0; k < opt.rays; ++k) {
        const double angle = 2.0 * std::numbers::pi * k / opt.rays;
        m.angles.push_back(angle);
        auto hit = scan_ray(g, c, c, angle, level, opt.step_px, c);
        if (hit) {
            m.ray_radius.emplace_back(hit->radius);
            m.ray_min_value.push_back(hit->value);
            hits.push_back(hit->radius);
        } else {
            m.ray_radius.emplace_back(std::nullopt);
            m.ray_min_value.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    m.success_fraction = static_cast<double>(hits.size()) / opt.rays;
    m.found = m.success_fraction >= opt.success_fraction;
    m.radius_px = median(hits);
    return m;
}

std::vector<WarpHarmonic> draw_harmonics(double max_amplitude, std::uint64_t seed) {
    Engine eng(seed);
    double weights[3];
    double wsum = 0.0;
    for (double& w : weights) {
        w = uniform01(eng);
        wsum += w;
    }
    const double total = uniform(eng, 0.0, max_amplitude);
    std::vector<WarpHarmonic> h;
    for (int m = 2; m <= 4; ++m) {
        const double a = wsum > 0.0 ? total * weights[m - 2] / wsum : 0.0;
        h.push_back({m, a, uniform(eng, 0.0, 2.0 * std::numbers::pi)});
    }
    return h;
}

CavityPatch apply_warp(const CavityPatch& patch, const std::vector<WarpHarmonic>& harmonics) {
    double amp_sum = 0.0;
    for (const auto& h : harmonics) amp_sum += std::abs(h.amplitude);
    if (amp_sum >= 1.0) throw DomainError("warp amplitudes must sum to less than 1");
    CavityPatch out = patch;
    out.warp = harmonics;
    if (amp_sum == 0.0) return out;
    const auto& src = patch.intensity;
    const int n = src.width();
    const double c = patch.center();
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double dx = x - c;
            const double dy = y - c;
            if (dx == 0.0 && dy == 0.0) continue;
            const double theta = std::atan2(dy, dx);
            double g = 0.0;
            for (const auto& h : harmonics) g += h.amplitude * std::cos(h.order * theta + h.phase);
            const double f = 1.0 / (1.0 + g);
            out.intensity(x, y) = sample_bilinear(src, c + dx * f, c + dy * f);
        }
    }
    return out;
}

CavityPatch warp_patch(const CavityPatch& patch, const SizeClass& cls, std::uint64_t seed, const WarpOptions& opt) {
    for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
        const auto sub = derive_seed(seed, {stream_id(Stream::Warp), static_cast<std::uint64_t>(attempt)});
        CavityPatch warped = apply_warp(patch, draw_harmonics(cls.max_warp_amplitude, sub));
        const auto fm = measure_fringe(warped, opt.fringe);
        if (fm.found) {
            warped.fringe_radius_px = fm.radius_px;
            warped.rng_seed = seed;
            return warped;
        }
    }
    throw WarpError("fringe lost after " + std::to_string(opt.max_attempts) + " warp attempts", seed);
}

}  // namespace cavityforge::patch
