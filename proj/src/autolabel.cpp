#include "cavityforge/autolabel.hpp"

#include "cavityforge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <queue>
#include <tuple>

namespace cavityforge::label {

namespace {

constexpr int kInterior = 1;
constexpr int kExterior = 2;

LabelMask square_label(const patch::CavityPatch& patch, double radius_px, const LabelOptions& opt) {
    const int n = patch.intensity.width();
    const int c = patch.center();
    const int side = static_cast<int>(std::lround(opt.fallback_scale * 2.0 * radius_px));
    if (side < 1) throw LabelError("fallback square would be empty");
    const int lo = c - (side - 1) / 2;
    const int hi = lo + side - 1;
    if (lo < 0 || hi >= n) {
        throw LabelError("fallback square of side " + std::to_string(side) + " px does not fit the patch");
    }
    LabelMask out;
    out.mask = Mask(n, n, 0);
    for (int y = lo; y <= hi; ++y) {
        for (int x = lo; x <= hi; ++x) out.mask(x, y) = 1;
    }
    out.bbox = {lo, lo, hi, hi};
    out.method = LabelMethod::SquareFallback;
    out.radius_px = radius_px;
    return out;
}

/// Darkest bilinear sample on [from, to] along a ray, parabola-refined.
double darkest_on_ray(const Grid<double>& g, double c, double angle, double from, double to, double step) {
    const double ux = std::cos(angle);
    const double uy = std::sin(angle);
    from = std::max(from, 0.0);
    to = std::min(to, c);
    const int n = std::max(1, static_cast<int>(std::floor((to - from) / step)) + 1);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = from + i * step;
        v[static_cast<std::size_t>(i)] = patch::sample_bilinear(g, c + t * ux, c + t * uy);
    }
    const auto best = static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
    double offset = 0.0;
    if (best > 0 && best + 1 < n) {
        const double a = v[static_cast<std::size_t>(best - 1)];
        const double b = v[static_cast<std::size_t>(best)];
        const double d = v[static_cast<std::size_t>(best + 1)];
        const double denom = a - 2.0 * b + d;
        if (denom > 0.0) offset = std::clamp(0.5 * (a - d) / denom, -0.5, 0.5);
    }
    return from + (best + offset) * step;
}

}  // namespace

Grid<int> watershed(const Grid<double>& relief, Grid<int> labels) {
    const int w = relief.width();
    const int h = relief.height();
    using Item = std::tuple<double, std::uint64_t, int, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    std::uint64_t seq = 0;
    constexpr int dx[4] = {1, -1, 0, 0};
    constexpr int dy[4] = {0, 0, 1, -1};
    auto push_neighbours = [&](int x, int y) {
        for (int k = 0; k < 4; ++k) {
            const int nx = x + dx[k];
            const int ny = y + dy[k];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || labels(nx, ny) != 0) continue;
            labels(nx, ny) = labels(x, y);
            heap.emplace(relief(nx, ny), seq++, nx, ny);
        }
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (labels(x, y) != 0) heap.emplace(relief(x, y), seq++, x, y);
        }
    }
    while (!heap.empty()) {
        const auto [v, s, x, y] = heap.top();
        heap.pop();
        push_neighbours(x, y);
    }
    return labels;
}

LabelMask label_patch(const patch::CavityPatch& patch, const LabelOptions& opt) {
    const auto fm = patch::measure_fringe(patch, opt.fringe);
    if (!fm.found) throw LabelError("no detectable fringe");
    if (fm.radius_px < opt.fallback_radius_px) return square_label(patch, fm.radius_px, opt);

    const auto& g = patch.intensity;
    const int n = g.width();
    const int c = patch.center();

    // Exterior marker: the border ring plus everything beyond the outermost
    // per-ray fringe, so the flood cannot settle on a later, darker ring.
    double r_fringe_max = 0.0;
    for (const auto& r : fm.ray_radius) {
        if (r) r_fringe_max = std::max(r_fringe_max, *r);
    }
    const double r_outer = r_fringe_max + opt.snap_window_px + 1.0;

    Grid<double> relief(n, n);
    Grid<int> markers(n, n, 0);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            relief(x, y) = -g(x, y);
            const double d = std::hypot(x - c, y - c);
            if (x == 0 || y == 0 || x == n - 1 || y == n - 1 || d > r_outer) markers(x, y) = kExterior;
        }
    }
    markers(c, c) = kInterior;
    const Grid<int> basins = watershed(relief, std::move(markers));

    // Per-ray snapping of the interior boundary to the darkest fringe point.
    const int rays = std::max(64, static_cast<int>(std::ceil(4.0 * std::numbers::pi * r_outer)));
    const double step = 0.25;
    std::vector<double> edge(static_cast<std::size_t>(rays));
    for (int k = 0; k < rays; ++k) {
        const double angle = 2.0 * std::numbers::pi * k / rays;
        const double ux = std::cos(angle);
        const double uy = std::sin(angle);
        double boundary = 0.0;
        for (double t = 0.0; t <= c; t += step) {
            const int px = static_cast<int>(std::lround(c + t * ux));
            const int py = static_cast<int>(std::lround(c + t * uy));
            if (!basins.contains(px, py) || basins(px, py) != kInterior) break;
            boundary = t;
        }
        edge[static_cast<std::size_t>(k)] =
            darkest_on_ray(g, c, angle, boundary - opt.snap_window_px, boundary + opt.snap_window_px, step);
    }

    LabelMask out;
    out.mask = Mask(n, n, 0);
    const double dtheta = 2.0 * std::numbers::pi / rays;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double d = std::hypot(x - c, y - c);
            if (d == 0.0) {
                out.mask(x, y) = 1;
                continue;
            }
            double theta = std::atan2(static_cast<double>(y - c), static_cast<double>(x - c));
            if (theta < 0.0) theta += 2.0 * std::numbers::pi;
            const double pos = theta / dtheta;
            const int k0 = static_cast<int>(pos) % rays;
            const int k1 = (k0 + 1) % rays;
            const double t = pos - std::floor(pos);
            const double r = edge[static_cast<std::size_t>(k0)] * (1.0 - t) + edge[static_cast<std::size_t>(k1)] * t;
            if (d <= r + 0.5) out.mask(x, y) = 1;
        }
    }
    out.bbox = tight_bbox(out.mask);
    out.method = LabelMethod::Watershed;
    out.radius_px = fm.radius_px;
    return out;
}

io::BoxRecord mask_to_box(const LabelMask& mask, int origin_x, int origin_y, int image_width, int image_height) {
    if (mask.bbox.empty()) throw DomainError("cannot box an empty mask");
    PixelBox px{mask.bbox.x0 + origin_x, mask.bbox.y0 + origin_y, mask.bbox.x1 + origin_x, mask.bbox.y1 + origin_y};
    return io::pixels_to_box(px, image_width, image_height);
}

}  // namespace cavityforge::label
