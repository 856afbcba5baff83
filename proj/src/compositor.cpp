#include "cavityforge/compositor.hpp"

#include "cavityforge/errors.hpp"
#include "cavityforge/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace cavityforge::compose {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Box-Muller on the library's portable uniform, so draws do not depend on the
// standard library's distribution implementations.
double standard_normal(Engine& eng) {
    double u1 = uniform01(eng);
    while (u1 <= 0.0) u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

namespace {

// Three passes of a running-mean filter approximate a Gaussian blur.
void box_blur(std::vector<double>& v, int w, int h, int radius) {
    std::vector<double> tmp(v.size());
    const double norm = 1.0 / (2 * radius + 1);
    for (int pass = 0; pass < 3; ++pass) {
        for (int y = 0; y < h; ++y) {
            const double* row = &v[static_cast<std::size_t>(y) * w];
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) acc += row[std::clamp(k, 0, w - 1)];
            for (int x = 0; x < w; ++x) {
                tmp[static_cast<std::size_t>(y) * w + x] = acc * norm;
                acc += row[std::min(x + radius + 1, w - 1)] - row[std::max(x - radius, 0)];
            }
        }
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) acc += tmp[static_cast<std::size_t>(std::clamp(k, 0, h - 1)) * w + x];
            for (int y = 0; y < h; ++y) {
                v[static_cast<std::size_t>(y) * w + x] = acc * norm;
                acc += tmp[static_cast<std::size_t>(std::min(y + radius + 1, h - 1)) * w + x] -
                       tmp[static_cast<std::size_t>(std::max(y - radius, 0)) * w + x];
            }
        }
    }
}

}  // namespace

BackgroundImage synthetic_background(int width, int height, double pixel_scale, int bit_depth, std::uint64_t seed,
                                     double mean_level, double texture) {
    if (width <= 0 || height <= 0) throw DomainError("background size must be positive");
    if (bit_depth != 8 && bit_depth != 16) throw DomainError("bit depth must be 8 or 16");
    Engine eng(seed);
    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<double> coarse(n), fine(n);
    for (auto& v : coarse) v = uniform01(eng) - 0.5;
    for (auto& v : fine) v = uniform01(eng) - 0.5;
    box_blur(coarse, width, height, 24);
    box_blur(fine, width, height, 2);
    const auto rms = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s / static_cast<double>(v.size()));
    };
    const double rc = rms(coarse) > 0.0 ? rms(coarse) : 1.0;
    const double rf = rms(fine) > 0.0 ? rms(fine) : 1.0;
    const double gx = uniform(eng, -0.03, 0.03);
    const double gy = uniform(eng, -0.03, 0.03);
    BackgroundImage bg;
    bg.pixel_scale = pixel_scale;
    bg.source_id = "synthetic";
    bg.raster.bit_depth = bit_depth;
    bg.raster.pixels = Grid<std::uint16_t>(width, height);
    const double hi = bg.raster.max_value();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            const double ramp = gx * (x / static_cast<double>(width) - 0.5) + gy * (y / static_cast<double>(height) - 0.5);
            const double rel = 1.0 + ramp + texture * (0.7 * coarse[i] / rc + 0.3 * fine[i] / rf);
            bg.raster.pixels(x, y) = static_cast<std::uint16_t>(std::clamp(std::round(mean_level * hi * rel), 0.0, hi));
        }
    }
    return bg;
}

void BackgroundLimits::check(const BackgroundImage& bg) const {
    if (!(bg.pixel_scale >= min_pixel_scale && bg.pixel_scale <= max_pixel_scale)) {
        throw DomainError("background '" + bg.source_id + "': pixel scale " + fmt(bg.pixel_scale) +
                          " nm/px outside [" + fmt(min_pixel_scale) + ", " + fmt(max_pixel_scale) + "]");
    }
    for (int side : {bg.width(), bg.height()}) {
        if (side < min_side || side > max_side) {
            throw DomainError("background '" + bg.source_id + "': side " + std::to_string(side) +
                              " px outside [" + std::to_string(min_side) + ", " + std::to_string(max_side) + "]");
        }
    }
}

void SizeDistribution::validate() const {
    if (!(min_nm > 0.0) || !(max_nm >= min_nm)) throw DomainError("size distribution bounds must satisfy 0 < min <= max");
    if (edges_nm.empty()) {
        if (!(median_nm > 0.0) || !(log_sigma >= 0.0)) throw DomainError("log-normal needs median > 0 and sigma >= 0");
        return;
    }
    if (edges_nm.size() != weights.size() + 1) throw DomainError("histogram needs one more edge than weights");
    for (std::size_t i = 1; i < edges_nm.size(); ++i) {
        if (!(edges_nm[i] > edges_nm[i - 1])) throw DomainError("histogram edges must increase");
    }
    if (!(edges_nm.front() > 0.0)) throw DomainError("histogram edges must be positive");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DomainError("histogram weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw DomainError("histogram weights sum to zero");
    if (edges_nm.front() > max_nm || edges_nm.back() < min_nm) throw DomainError("histogram lies outside [min, max]");
}

double SizeDistribution::sample(Engine& eng) const {
    for (int attempt = 0; attempt < 10000; ++attempt) {
        double r;
        if (edges_nm.empty()) {
            r = median_nm * std::exp(log_sigma * standard_normal(eng));
        } else {
            const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
            double u = uniform01(eng) * total;
            std::size_t bin = 0;
            while (bin + 1 < weights.size() && u >= weights[bin]) {
                u -= weights[bin];
                ++bin;
            }
            r = uniform(eng, edges_nm[bin], edges_nm[bin + 1]);
        }
        if (r >= min_nm && r <= max_nm) return r;
    }
    throw DomainError("size distribution has negligible mass inside [min, max]");
}

void DefocusDistribution::validate() const {
    if (!(base_um != 0.0) || !std::isfinite(base_um)) throw DomainError("base defocus must be finite and nonzero");
    if (!(jitter_fraction >= 0.0 && jitter_fraction < 1.0)) throw DomainError("defocus jitter must lie in [0, 1)");
}

double DefocusDistribution::sample(Engine& eng) const {
    return base_um * (1.0 + uniform(eng, -jitter_fraction, jitter_fraction));
}

int footprint_half_side(double radius_nm, double pixel_scale, const PlanOptions& opt, double extent_rho) {
    return static_cast<int>(std::ceil(opt.footprint_rho * extent_rho * radius_nm / pixel_scale)) + opt.margin_px;
}

PlacementPlan sample_plan(const BackgroundImage& bg, const SizeDistribution& sizes,
                          const DefocusDistribution& defocus, const PlanOptions& opt, std::uint64_t seed,
                          const ExtentFn& extent) {
    if (opt.target_count < 0) throw DomainError("target feature count must be non-negative");
    if (!(opt.footprint_rho > 0.0)) throw DomainError("footprint_rho must be positive");
    if (opt.margin_px < 0 || opt.max_attempts < 1) throw DomainError("invalid placement margin or attempt cap");
    if (!(bg.pixel_scale > 0.0)) throw DomainError("pixel scale must be positive");
    PlacementPlan plan;
    plan.target_count = opt.target_count;
    plan.margin_px = opt.margin_px;
    if (opt.target_count == 0) return plan;
    sizes.validate();
    defocus.validate();

    const int W = bg.width();
    const int H = bg.height();
    Engine draw(derive_seed(seed, {stream_id(Stream::Plan), 0}));
    Engine place(derive_seed(seed, {stream_id(Stream::Plan), 1}));

    struct Draw {
        double radius;
        double defocus;
        int half;
    };
    std::vector<Draw> draws;
    draws.reserve(static_cast<std::size_t>(opt.target_count));
    double area = 0.0;
    for (int i = 0; i < opt.target_count; ++i) {
        Draw d;
        d.radius = sizes.sample(draw);
        d.defocus = defocus.sample(draw);
        const double rho = extent ? extent(d.radius, d.defocus) : 1.0;
        if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("feature extent must be positive and finite");
        d.half = footprint_half_side(d.radius, bg.pixel_scale, opt, rho);
        const double side = 2.0 * (d.half + opt.margin_px) + 1.0;
        area += side * side;
        draws.push_back(d);
    }
    if (area > opt.max_area_fraction * static_cast<double>(W) * H) {
        throw DomainError("requested density is not achievable: boxes would cover " +
                          fmt(100.0 * area / (static_cast<double>(W) * H)) + "% of the image (limit " +
                          fmt(100.0 * opt.max_area_fraction) + "%)");
    }

    std::vector<PixelBox> taken;  // dilated by the margin
    for (int i = 0; i < opt.target_count; ++i) {
        const Draw& d = draws[static_cast<std::size_t>(i)];
        bool placed = false;
        for (int attempt = 0; attempt < opt.max_attempts && !placed; ++attempt) {
            const int cx = static_cast<int>(uniform01(place) * W);
            const int cy = static_cast<int>(uniform01(place) * H);
            const PixelBox box{cx - d.half, cy - d.half, cx + d.half, cy + d.half};
            if (!box.inside(W, H)) continue;
            const PixelBox grown = box.dilated(opt.margin_px);
            if (std::any_of(taken.begin(), taken.end(), [&](const PixelBox& t) { return t.intersects(grown); })) continue;
            taken.push_back(grown);
            PlanEntry e;
            e.id = i;
            e.cx = cx;
            e.cy = cy;
            e.box = box;
            e.radius_nm = d.radius;
            e.defocus_um = d.defocus;
            e.seed = derive_seed(seed, {stream_id(Stream::Plan), 2, static_cast<std::uint64_t>(i)});
            plan.entries.push_back(e);
            placed = true;
        }
        if (!placed) ++plan.unplaced;
    }
    return plan;
}

NormalizedPatch normalize_patch(const Grid<double>& ratio, const BackgroundImage& bg, const PixelBox& box,
                                const NormalizeOptions& opt) {
    if (!box.inside(bg.width(), bg.height())) throw DomainError("normalization box lies outside the image");
    if (ratio.width() != box.width() || ratio.height() != box.height()) {
        throw DomainError("patch and box dimensions differ");
    }
    const auto& px = bg.raster.pixels;
    const PixelBox ring = box.dilated(opt.ring_px).clipped(bg.width(), bg.height());
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (int y = ring.y0; y <= ring.y1; ++y) {
        for (int x = ring.x0; x <= ring.x1; ++x) {
            if (x >= box.x0 && x <= box.x1 && y >= box.y0 && y <= box.y1) continue;
            const double v = px(x, y);
            ++n;
            const double delta = v - mean;
            mean += delta / static_cast<double>(n);
            m2 += delta * (v - mean);
        }
    }
    NormalizedPatch out;
    if (n == 0 || m2 == 0.0) {
        const auto all = px.values();
        double sum = 0.0;
        for (auto v : all) sum += v;
        out.local_mean = all.empty() ? 0.0 : sum / static_cast<double>(all.size());
        out.used_global_mean = true;
    } else {
        out.local_mean = mean;
    }
    const double hi = bg.raster.max_value();
    out.raster = Grid<double>(ratio.width(), ratio.height());
    auto dst = out.raster.values();
    auto src = ratio.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = src[i] * out.local_mean;
        if (v < 0.0 || v > hi) out.clamped = true;
        dst[i] = std::clamp(v, 0.0, hi);
    }
    return out;
}

Mask LabeledImage::label_mask() const {
    Mask out(image.width(), image.height(), 0);
    for (const auto& f : features) {
        if (f.mask.empty()) continue;
        for (int y = 0; y < f.mask.height(); ++y) {
            for (int x = 0; x < f.mask.width(); ++x) {
                if (f.mask(x, y)) out(f.label_box.x0 + x, f.label_box.y0 + y) = 1;
            }
        }
    }
    return out;
}

namespace {

// Centre crop of an odd square grid to half-side `half`.
Grid<double> crop_center(const Grid<double>& g, int half) {
    const int c = g.width() / 2;
    Grid<double> out(2 * half + 1, 2 * half + 1);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) out(x, y) = g(c - half + x, c - half + y);
    }
    return out;
}

}  // namespace

LabeledImage compose_image(const BackgroundImage& bg, const PlacementPlan& plan, const physics::ProfileLut& lut,
                           const ComposeOptions& opt) {
    LabeledImage out;
    out.image = bg;
    out.planned = static_cast<int>(plan.entries.size());
    if (plan.unplaced > 0) {
        out.warnings.push_back(std::to_string(plan.unplaced) + " feature(s) could not be placed");
    }
    if (plan.entries.empty()) return out;
    if (lut.empty()) throw LookupError("profile lookup table is empty");
    opt.detector.validate();

    auto& canvas = out.image.raster.pixels;
    const int W = canvas.width();
    const int H = canvas.height();
    const double hi = out.image.raster.max_value();
    const double s = bg.pixel_scale;

    for (const PlanEntry& e : plan.entries) {
        if (!e.box.inside(W, H)) throw DomainError("plan entry " + std::to_string(e.id) + " lies outside the image");
        const auto drop = [&](const std::string& why) {
            ++out.dropped;
            out.warnings.push_back("feature " + std::to_string(e.id) + " dropped: " + why);
        };
        try {
            const auto& profile = lut.lookup(e.radius_nm, e.defocus_um);
            patch::CavityPatch p = patch::rotate_profile(profile, s, opt.label.fringe.contrast_floor);
            // Pixels beyond about twice the box half-side never reach the box,
            // even after the strongest warp, so the patch is trimmed first.
            const int box_half = std::max(e.box.width(), e.box.height()) / 2;
            const int keep = std::min(p.center(), 2 * box_half + 8);
            if (keep < p.center()) p.intensity = crop_center(p.intensity, keep);

            const auto& cls = patch::classify_size(e.radius_nm, opt.size_classes);
            patch::CavityPatch warped = patch::warp_patch(p, cls, derive_seed(e.seed, {stream_id(Stream::Warp)}), opt.warp);
            label::LabelMask lab = label::label_patch(warped, opt.label);

            detector::DetectorParams det = opt.detector;
            det.rng_seed = derive_seed(e.seed, {stream_id(Stream::Noise)});
            const Grid<double> enhanced = detector::enhance(warped.intensity, det);

            const int c = warped.center();
            const int ox = e.cx - c;
            const int oy = e.cy - c;
            const PixelBox label_img{lab.bbox.x0 + ox, lab.bbox.y0 + oy, lab.bbox.x1 + ox, lab.bbox.y1 + oy};
            if (!e.box.dilated(-1).contains(label_img)) {
                throw CompositionError("label does not fit inside its placement box");
            }

            const int bw = e.box.width();
            const int bh = e.box.height();
            Grid<double> ratio(bw, bh, 1.0);
            Mask bmask(bw, bh, 0);
            for (int y = 0; y < bh; ++y) {
                for (int x = 0; x < bw; ++x) {
                    const int px = e.box.x0 + x - ox;
                    const int py = e.box.y0 + y - oy;
                    if (enhanced.contains(px, py)) {
                        ratio(x, y) = enhanced(px, py);
                        bmask(x, y) = lab.mask(px, py);
                    }
                }
            }

            const NormalizedPatch norm = normalize_patch(ratio, out.image, e.box, opt.normalize);
            if (norm.used_global_mean) {
                out.warnings.push_back("feature " + std::to_string(e.id) +
                                       ": flat surroundings, normalized with the global mean");
            }

            Grid<double> region(bw, bh);
            for (int y = 0; y < bh; ++y) {
                for (int x = 0; x < bw; ++x) region(x, y) = canvas(e.box.x0 + x, e.box.y0 + y);
            }
            const BlendResult blend = seamless_blend(region, norm.raster, bmask, opt.blend_tolerance);
            for (int y = 0; y < bh; ++y) {
                for (int x = 0; x < bw; ++x) {
                    if (!bmask(x, y)) continue;
                    const double v = std::clamp(std::round(blend.blended(x, y)), 0.0, hi);
                    canvas(e.box.x0 + x, e.box.y0 + y) = static_cast<std::uint16_t>(v);
                }
            }

            FeatureRecord rec;
            rec.plan_id = e.id;
            rec.radius_nm = e.radius_nm;
            rec.defocus_um = e.defocus_um;
            rec.lut_radius_nm = profile.request.radius_nm;
            rec.lut_defocus_um = profile.request.defocus_um;
            rec.seed = e.seed;
            rec.warp = warped.warp;
            rec.method = lab.method;
            rec.fringe_radius_px = lab.radius_px;
            rec.label_box = label_img;
            if (opt.keep_masks) {
                rec.mask = Mask(label_img.width(), label_img.height(), 0);
                for (int y = 0; y < rec.mask.height(); ++y) {
                    for (int x = 0; x < rec.mask.width(); ++x) rec.mask(x, y) = lab.mask(lab.bbox.x0 + x, lab.bbox.y0 + y);
                }
            }
            out.labels.push_back(io::pixels_to_box(label_img, W, H));
            out.features.push_back(std::move(rec));
        } catch (const TooSmallError& ex) {
            drop(ex.what());
        } catch (const WarpError& ex) {
            drop(ex.what());
        } catch (const LabelError& ex) {
            drop(ex.what());
        } catch (const SolverError& ex) {
            drop(ex.what());
        } catch (const CompositionError& ex) {
            drop(ex.what());
        }
    }

    if (out.dropped > opt.max_drop_fraction * out.planned) {
        throw CompositionError(std::to_string(out.dropped) + " of " + std::to_string(out.planned) +
                               " features dropped (limit " + fmt(100.0 * opt.max_drop_fraction) + "%)");
    }
    return out;
}

}  // namespace cavityforge::compose
