#include "cavityforge/detector.hpp"

#include "cavityforge/errors.hpp"
#include "cavityforge/rng.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <random>

namespace cavityforge::detector {

namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex mu;
    return mu;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

void DetectorParams::validate() const {
    if (!(mtf_plateau >= 0.0 && mtf_plateau <= 1.0)) throw DomainError("detector.mtf_plateau must lie in [0, 1]");
    if (!(mtf_halfwidth_nyquist > 0.0)) throw DomainError("detector.mtf_halfwidth_nyquist must be > 0");
    if (!(dqe_zero > 0.0 && dqe_zero <= 1.0)) throw DomainError("detector.dqe_zero must lie in (0, 1]");
    if (!(dose_per_pixel > 0.0)) throw DomainError("detector.dose_per_pixel must be > 0");
}

double mtf(double u, const DetectorParams& p) noexcept {
    const double q = u / p.halfwidth_cycles();
    return p.mtf_plateau + (1.0 - p.mtf_plateau) / (1.0 + q * q);
}

Grid<double> apply_mtf(const Grid<double>& image, const DetectorParams& p) {
    p.validate();
    const int w = image.width();
    const int h = image.height();
    if (w == 0 || h == 0 || p.mtf_plateau == 1.0) return image;
    const int wc = w / 2 + 1;
    std::unique_ptr<double, FftwFree> real(fftw_alloc_real(static_cast<std::size_t>(w) * h));
    std::unique_ptr<fftw_complex, FftwFree> spec(fftw_alloc_complex(static_cast<std::size_t>(wc) * h));
    Plan forward;
    Plan backward;
    {
        std::lock_guard lock(planner_mutex());
        forward.reset(fftw_plan_dft_r2c_2d(h, w, real.get(), spec.get(), FFTW_ESTIMATE));
        backward.reset(fftw_plan_dft_c2r_2d(h, w, spec.get(), real.get(), FFTW_ESTIMATE));
    }
    std::copy(image.values().begin(), image.values().end(), real.get());
    fftw_execute(forward.get());
    const double norm = 1.0 / (static_cast<double>(w) * h);
    for (int y = 0; y < h; ++y) {
        const double fy = static_cast<double>(y <= h / 2 ? y : y - h) / h;
        for (int x = 0; x < wc; ++x) {
            const double fx = static_cast<double>(x) / w;
            const double gain = mtf(std::sqrt(fx * fx + fy * fy), p) * norm;
            auto& c = spec.get()[static_cast<std::size_t>(y) * wc + x];
            c[0] *= gain;
            c[1] *= gain;
        }
    }
    fftw_execute(backward.get());
    Grid<double> out(w, h);
    std::copy(real.get(), real.get() + out.size(), out.values().begin());
    return out;
}

Grid<double> apply_shot_noise(const Grid<double>& image, const DetectorParams& p) {
    p.validate();
    const double effective = p.dose_per_pixel * p.dqe_zero;
    Engine eng(p.rng_seed);
    Grid<double> out(image.width(), image.height());
    auto src = image.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double lambda = std::max(0.0, src[i]) * effective;
        if (lambda <= 0.0) {
            dst[i] = 0.0;
            continue;
        }
        std::poisson_distribution<long long> dist(lambda);
        dst[i] = static_cast<double>(dist(eng)) / effective;
    }
    return out;
}

Grid<double> enhance(const Grid<double>& image, const DetectorParams& p) {
    return apply_shot_noise(apply_mtf(image, p), p);
}

patch::CavityPatch apply_mtf(const patch::CavityPatch& patch, const DetectorParams& p) {
    patch::CavityPatch out = patch;
    out.intensity = apply_mtf(patch.intensity, p);
    return out;
}

patch::CavityPatch apply_shot_noise(const patch::CavityPatch& patch, const DetectorParams& p) {
    patch::CavityPatch out = patch;
    out.intensity = apply_shot_noise(patch.intensity, p);
    return out;
}

}  // namespace cavityforge::detector
