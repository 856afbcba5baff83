#include "oracles.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

namespace mp = boost::multiprecision;
using cavityforge::Grid;
using cavityforge::Mask;
using cavityforge::PixelBox;

double wavelength(double volts) {
    const double h = 6.62607015e-34;
    const double m0 = 9.1093837015e-31;
    const double e = 1.602176634e-19;
    const double c = 299792458.0;
    const double energy = e * volts;
    return h / std::sqrt(2.0 * m0 * energy * (1.0 + energy / (2.0 * m0 * c * c)));
}

std::complex<double> riemann_psi(double rho, double radius_nm, double defocus_um, const VoidMaterial& m,
                                 long nodes) {
    const double k = 2.0 * M_PI / wavelength(m.volts);
    const double R = radius_nm * 1e-9;
    const double beta = 2.0 * (defocus_um * 1e-6) / (k * R * R);
    const std::complex<double> I(0.0, 1.0);
    const double h = 1.0 / static_cast<double>(nodes);
    // Kahan-compensated sums for the real and imaginary parts.
    double sr = 0.0, si = 0.0, cr = 0.0, ci = 0.0;
    for (long j = 0; j < nodes; ++j) {
        const double rp = (static_cast<double>(j) + 0.5) * h;
        const double chord = 2.0 * R * std::sqrt(1.0 - rp * rp);
        const std::complex<double> delta =
            std::exp(std::complex<double>(-m.absorption_per_m * chord, m.phase_per_m * chord)) - 1.0;
        const double bessel = rho == 0.0 ? 1.0 : std::cyl_bessel_j(0.0, std::abs(2.0 * rho * rp / beta));
        const std::complex<double> term = delta * bessel * std::exp(I * (rp * rp / beta)) * rp * h;
        double y = term.real() - cr;
        double t = sr + y;
        cr = (t - sr) - y;
        sr = t;
        y = term.imag() - ci;
        t = si + y;
        ci = (t - si) - y;
        si = t;
    }
    return 1.0 - (2.0 * I / beta) * std::exp(I * (rho * rho / beta)) * std::complex<double>(sr, si);
}

namespace {

double bilinear(const Grid<double>& g, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(g.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(g.height() - 1));
    const int x0 = std::min(static_cast<int>(x), g.width() - 2);
    const int y0 = std::min(static_cast<int>(y), g.height() - 2);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = g(x0, y0) * (1.0 - fx) + g(x0 + 1, y0) * fx;
    const double bottom = g(x0, y0 + 1) * (1.0 - fx) + g(x0 + 1, y0 + 1) * fx;
    return top * (1.0 - fy) + bottom * fy;
}

}  // namespace

std::optional<double> ray_fringe(const Grid<double>& img, double cx, double cy, double angle, double floor,
                                 double step) {
    const double dx = std::cos(angle);
    const double dy = std::sin(angle);
    const double reach = std::min({cx, cy, img.width() - 1 - cx, img.height() - 1 - cy});
    const double level = 1.0 - floor;
    bool in_centre_run = bilinear(img, cx, cy) < level;
    bool in_band = false;
    double best = 0.0, best_r = 0.0;
    for (double r = 0.0; r <= reach; r += step) {
        const double v = bilinear(img, cx + r * dx, cy + r * dy);
        const bool dark = v < level;
        if (in_centre_run) {
            if (!dark) in_centre_run = false;
            continue;
        }
        if (dark) {
            if (!in_band || v < best) {
                best = v;
                best_r = r;
            }
            in_band = true;
        } else if (in_band) {
            return best_r;
        }
    }
    return std::nullopt;
}

std::optional<double> ray_mask_edge(const Mask& mask, double cx, double cy, double angle, double step) {
    const double dx = std::cos(angle);
    const double dy = std::sin(angle);
    for (double r = 0.0;; r += step) {
        const int x = static_cast<int>(std::floor(cx + r * dx + 0.5));
        const int y = static_cast<int>(std::floor(cy + r * dy + 0.5));
        if (!mask.contains(x, y)) return std::nullopt;
        if (!mask(x, y)) return r;
    }
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of nothing");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Counts scan_confusion(const Mask& pred, const Mask& gt) {
    Counts c;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            const bool p = pred(x, y) != 0;
            const bool g = gt(x, y) != 0;
            if (p && g) ++c.tp;
            else if (p) ++c.fp;
            else if (g) ++c.fn;
            else ++c.tn;
        }
    }
    return c;
}

bool pairwise_disjoint(std::span<const PixelBox> boxes) {
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < boxes.size(); ++j) {
            const PixelBox& a = boxes[i];
            const PixelBox& b = boxes[j];
            const bool overlap_x = std::max(a.x0, b.x0) <= std::min(a.x1, b.x1);
            const bool overlap_y = std::max(a.y0, b.y0) <= std::min(a.y1, b.y1);
            if (overlap_x && overlap_y) return false;
        }
    }
    return true;
}

double weighted_confidence(std::span<const cavityforge::io::BoxRecord> boxes) {
    double num = 0.0, den = 0.0;
    for (const auto& b : boxes) {
        num += b.w * b.h * b.confidence.value();
        den += b.w * b.h;
    }
    return den > 0.0 ? num / den : 0.0;
}

namespace {

// Round a positive rational to the nearest double, ties to even.
double round_to_double(const mp::cpp_rational& q) {
    if (q == 0) return 0.0;
    if (q < 0) return -round_to_double(-q);
    mp::cpp_int num = mp::numerator(q);
    mp::cpp_int den = mp::denominator(q);
    // Scale so that the integer quotient has exactly 54 significant bits
    // (53 mantissa bits plus one rounding bit).
    long shift = 0;
    const long nbits = static_cast<long>(mp::msb(num)) - static_cast<long>(mp::msb(den));
    shift = 53 - nbits;
    mp::cpp_int a = shift >= 0 ? mp::cpp_int(num << shift) : num;
    mp::cpp_int b = shift >= 0 ? den : mp::cpp_int(den << -shift);
    mp::cpp_int quo = a / b;
    mp::cpp_int rem = a % b;
    while (mp::msb(quo) > 53) {
        rem += (quo & 1) * b;
        quo >>= 1;
        b <<= 1;
        --shift;
    }
    while (mp::msb(quo) < 53) {
        a <<= 1;
        ++shift;
        quo = a / b;
        rem = a % b;
    }
    // quo has 54 bits; drop the lowest one with round-half-even using the remainder.
    const bool half_bit = (quo & 1) != 0;
    const bool sticky = rem != 0;
    quo >>= 1;
    --shift;
    if (half_bit && (sticky || (quo & 1) != 0)) quo += 1;
    return std::ldexp(quo.convert_to<double>(), static_cast<int>(-shift));
}

}  // namespace

double weighted_confidence_exact(std::span<const cavityforge::io::BoxRecord> boxes) {
    mp::cpp_rational num = 0, den = 0;
    for (const auto& b : boxes) {
        const mp::cpp_rational area = mp::cpp_rational(b.w) * mp::cpp_rational(b.h);
        num += area * mp::cpp_rational(b.confidence.value());
        den += area;
    }
    if (den == 0) return 0.0;
    return round_to_double(num / den);
}

double swelling_percent(std::span<const double> diameters_nm, double area_nm2, double thickness_nm) {
    double volume = 0.0;
    for (double d : diameters_nm) volume += M_PI * d * d * d / 6.0;
    return 100.0 * volume / (area_nm2 * thickness_nm - volume);
}

}  // namespace oracle
