#include "cavityforge/physics.hpp"

#include "cavityforge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace cavityforge::physics {

namespace {

// CODATA 2018 exact / recommended values.
constexpr double kPlanck = 6.62607015e-34;
constexpr double kElectronMass = 9.1093837015e-31;
constexpr double kElementaryCharge = 1.602176634e-19;
constexpr double kSpeedOfLight = 299792458.0;

}  // namespace

double electron_wavelength(double voltage) {
    if (!(voltage > 0.0) || !std::isfinite(voltage)) {
        throw DomainError("accelerating voltage must be positive, got " + std::to_string(voltage));
    }
    const double eV = kElementaryCharge * voltage;
    const double p2 = 2.0 * kElectronMass * eV * (1.0 + eV / (2.0 * kElectronMass * kSpeedOfLight * kSpeedOfLight));
    return kPlanck / std::sqrt(p2);
}

double MicroscopeParams::wavevector() const {
    return 2.0 * std::numbers::pi / wavelength();
}

void MicroscopeParams::validate() const {
    if (!(accelerating_voltage > 0.0)) throw DomainError("microscope.accelerating_voltage must be > 0");
    if (!std::isfinite(mean_inner_potential_phase)) throw DomainError("microscope.mean_inner_potential_phase must be finite");
    if (!std::isfinite(absorption_coefficient)) throw DomainError("microscope.absorption_coefficient must be finite");
    if (!(foil_thickness > 0.0)) throw DomainError("microscope.foil_thickness must be > 0");
    if (!(cavity_depth >= 0.0 && cavity_depth <= foil_thickness)) {
        throw DomainError("microscope.cavity_depth must lie in [0, foil_thickness]");
    }
}

void SimulationSettings::validate() const {
    if (n_radial_samples < 64) throw DomainError("n_radial_samples must be >= 64");
    if (n_quadrature_nodes < 128 || n_quadrature_nodes % 2 != 0) {
        throw DomainError("n_quadrature_nodes must be even and >= 128");
    }
    if (max_quadrature_nodes < 2 * n_quadrature_nodes) {
        throw DomainError("max_quadrature_nodes must be at least twice n_quadrature_nodes");
    }
    if (!(rho_max >= 3.0)) throw DomainError("rho_max must be >= 3");
    if (!(rho_max_limit >= rho_max)) throw DomainError("rho_max_limit must be >= rho_max");
    if (!(convergence_tol > 0.0)) throw DomainError("convergence_tol must be > 0");
    if (!(far_field_tol > 0.0)) throw DomainError("far_field_tol must be > 0");
    if (!(limits.min_radius_nm > 0.0 && limits.min_radius_nm <= limits.max_radius_nm)) {
        throw DomainError("radius limits must satisfy 0 < min <= max");
    }
    if (!(limits.min_defocus_um > 0.0 && limits.min_defocus_um <= limits.max_defocus_um)) {
        throw DomainError("defocus limits must satisfy 0 < min <= max");
    }
}

void SimulationRequest::validate() const {
    params.validate();
    settings.validate();
    if (defocus_um == 0.0) throw DomainError("zero defocus is singular (beta = 0)");
    const auto& lim = settings.limits;
    if (!(radius_nm >= lim.min_radius_nm && radius_nm <= lim.max_radius_nm)) {
        throw DomainError("cavity radius " + std::to_string(radius_nm) + " nm outside [" +
                          std::to_string(lim.min_radius_nm) + ", " + std::to_string(lim.max_radius_nm) + "]");
    }
    const double z = std::abs(defocus_um);
    if (!(z >= lim.min_defocus_um && z <= lim.max_defocus_um)) {
        throw DomainError("defocus |" + std::to_string(defocus_um) + "| um outside [" +
                          std::to_string(lim.min_defocus_um) + ", " + std::to_string(lim.max_defocus_um) + "]");
    }
}

std::complex<double> spherical_void_delta(double rho_prime, double radius_m, const MicroscopeParams& params) {
    const double s = std::max(0.0, 1.0 - rho_prime * rho_prime);
    const double chord = 2.0 * radius_m * std::sqrt(s);
    const std::complex<double> exponent(-params.absorption_coefficient * chord,
                                        params.mean_inner_potential_phase * chord);
    return std::exp(exponent) - 1.0;
}

double reduced_defocus(double defocus_m, double radius_m, double wavevector) {
    return 2.0 * defocus_m / (wavevector * radius_m * radius_m);
}

double ContrastProfile::intensity_at(double rho) const noexcept {
    if (intensity.empty()) return 1.0;
    if (rho <= 0.0) return intensity.front();
    const double pos = rho / rho_step;
    const auto last = intensity.size() - 1;
    if (pos >= static_cast<double>(last)) return intensity.back();
    const auto i = static_cast<std::size_t>(pos);
    const double t = pos - static_cast<double>(i);
    return intensity[i] + t * (intensity[i + 1] - intensity[i]);
}

double ContrastProfile::far_field_deviation() const noexcept {
    if (intensity.empty()) return 0.0;
    const std::size_t n = intensity.size();
    const std::size_t window = std::max<std::size_t>(2, (n + 19) / 20);
    double dev = 0.0;
    for (std::size_t i = n - std::min(window, n); i < n; ++i) {
        dev = std::max(dev, std::abs(intensity[i] - 1.0));
    }
    return dev;
}

std::optional<double> ContrastProfile::first_fringe_rho(double contrast_floor) const {
    const double level = 1.0 - contrast_floor;
    std::size_t i = 0;
    const std::size_t n = intensity.size();
    // A dark band touching the centre is the cavity body, not a fringe.
    while (i < n && intensity[i] < level) ++i;
    while (i < n && intensity[i] >= level) ++i;
    if (i >= n) return std::nullopt;
    std::size_t best = i;
    while (i < n && intensity[i] < level) {
        if (intensity[i] < intensity[best]) best = i;
        ++i;
    }
    return rho_at(best);
}

ContrastProfile simulate_profile(const SimulationRequest& req, const DeltaModel& delta) {
    req.validate();
    const auto& st = req.settings;
    const double radius_m = req.radius_nm * 1e-9;
    const double defocus_m = req.defocus_um * 1e-6;
    const double beta = reduced_defocus(defocus_m, radius_m, req.params.wavevector());
    if (beta == 0.0 || !std::isfinite(beta)) throw DomainError("reduced defocus is zero or non-finite");

    // Substitution u = sqrt(1 - rho'^2) removes the square-root edge of the
    // chord: rho' drho' = -u du, so the integrand on [0,1] in u is smooth.
    // Simpson sums come from nested trapezoid sums, S(2m) = (4 T(2m) - T(m)) / 3,
    // so each refinement only evaluates the new midpoints.
    const int n0 = st.n_quadrature_nodes;
    std::vector<double> node_rho;
    std::vector<std::complex<double>> g;
    int cached = 0;
    // Node tables on the finest grid needed so far. A node j/n of a coarser
    // grid maps to index j * (cached / n), and (jk)/(nk) rounds exactly like
    // j/n, so results do not depend on when the table grew.
    auto ensure_nodes = [&](int n) {
        if (n <= cached) return;
        node_rho.assign(static_cast<std::size_t>(n) + 1, 0.0);
        g.assign(static_cast<std::size_t>(n) + 1, {0.0, 0.0});
        for (int j = 0; j <= n; ++j) {
            const double u = static_cast<double>(j) / n;
            const double rp = std::sqrt(std::max(0.0, 1.0 - u * u));
            const auto idx = static_cast<std::size_t>(j);
            node_rho[idx] = rp;
            const double phase = rp * rp / beta;
            g[idx] = delta(rp, radius_m, req.params) * std::complex<double>(std::cos(phase), std::sin(phase)) * u;
        }
        cached = n;
    };
    ensure_nodes(2 * n0);

    ContrastProfile out;
    out.request = req;
    out.beta = beta;
    out.rho_step = st.rho_max / static_cast<double>(st.n_radial_samples - 1);

    const std::complex<double> prefactor(0.0, -2.0 / beta);
    auto evaluate = [&](double rho, double& residual) {
        const double scale = 2.0 * rho / beta;
        auto term = [&](int j, int n) {
            const auto idx = static_cast<std::size_t>(j) * static_cast<std::size_t>(cached / n);
            return g[idx] * ::j0(scale * node_rho[idx]);
        };
        // Trapezoid sum on n intervals, refined from the sum on n / 2.
        auto refine = [&](const std::complex<double>& t_half, int n) {
            std::complex<double> mid(0.0, 0.0);
            for (int j = 1; j < n; j += 2) mid += term(j, n);
            return 0.5 * t_half + mid / static_cast<double>(n);
        };
        int n = n0 / 2;
        std::complex<double> t_a = 0.5 * (term(0, n) + term(n, n));
        for (int j = 1; j < n; ++j) t_a += term(j, n);
        t_a /= static_cast<double>(n);
        std::complex<double> t_b = refine(t_a, n0);
        std::complex<double> t_c = refine(t_b, 2 * n0);
        std::complex<double> s_coarse = (4.0 * t_b - t_a) / 3.0;
        std::complex<double> s_fine = (4.0 * t_c - t_b) / 3.0;
        const double phase = rho * rho / beta;
        const std::complex<double> carrier = prefactor * std::complex<double>(std::cos(phase), std::sin(phase));
        auto change = [&] { return std::abs(std::norm(1.0 + carrier * s_coarse) - std::norm(1.0 + carrier * s_fine)); };
        residual = change();
        for (int fine = 2 * n0; residual > st.convergence_tol && 2 * fine <= st.max_quadrature_nodes; fine *= 2) {
            ensure_nodes(2 * fine);
            const std::complex<double> t_d = refine(t_c, 2 * fine);
            s_coarse = s_fine;
            s_fine = (4.0 * t_d - t_c) / 3.0;
            t_c = t_d;
            residual = change();
        }
        return 1.0 + carrier * s_coarse;
    };

    double rho_max = st.rho_max;
    std::size_t count = static_cast<std::size_t>(st.n_radial_samples);
    for (;;) {
        for (std::size_t i = out.psi.size(); i < count; ++i) {
            double residual = 0.0;
            const std::complex<double> psi = evaluate(out.rho_at(i), residual);
            if (residual > st.convergence_tol) {
                throw ConvergenceError("quadrature not converged at rho = " + std::to_string(out.rho_at(i)) +
                                           " (node-doubling change " + std::to_string(residual) + ")",
                                       residual);
            }
            out.convergence_residual = std::max(out.convergence_residual, residual);
            out.psi.push_back(psi);
            out.intensity.push_back(std::norm(psi));
        }
        out.rho_max = out.rho_at(count - 1);
        const double dev = out.far_field_deviation();
        if (dev <= st.far_field_tol) break;
        rho_max *= 2.0;
        if (rho_max > st.rho_max_limit) {
            throw ConvergenceError("far field deviates by " + std::to_string(dev) +
                                       " from background at rho_max limit " + std::to_string(st.rho_max_limit),
                                   dev);
        }
        count = static_cast<std::size_t>(std::llround(rho_max / out.rho_step)) + 1;
    }
    return out;
}

}  // namespace cavityforge::physics
