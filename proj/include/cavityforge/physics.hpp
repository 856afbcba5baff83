#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace cavityforge::physics {

/// Relativistic de Broglie wavelength in metres for an accelerating voltage in volts.
double electron_wavelength(double voltage);

struct MicroscopeParams {
    double accelerating_voltage = 200e3;  ///< volts
    /// Phase shift per metre of cavity chord, radians. Negative for a void
    /// (matrix potential removed along the chord).
    double mean_inner_potential_phase = -1.46e8;
    /// Amplitude attenuation per metre of cavity chord. Negative for a void.
    double absorption_coefficient = -1.0e7;
    double foil_thickness = 100e-9;  ///< metres
    double cavity_depth = 50e-9;     ///< metres, measured from the entrance surface

    double wavelength() const { return electron_wavelength(accelerating_voltage); }
    double wavevector() const;  ///< 2*pi / wavelength, 1/m

    /// Throws DomainError naming the offending field.
    void validate() const;

    bool operator==(const MicroscopeParams&) const = default;
};

/// Accepted parameter ranges; the stated defaults are 1-50 nm radius and
/// 300-2300 um defocus magnitude.
struct SimulationLimits {
    double min_radius_nm = 1.0;
    double max_radius_nm = 50.0;
    double min_defocus_um = 300.0;
    double max_defocus_um = 2300.0;

    bool operator==(const SimulationLimits&) const = default;
};

struct SimulationSettings {
    int n_radial_samples = 512;      ///< samples over [0, rho_max]
    int n_quadrature_nodes = 2048;   ///< Simpson intervals on [0, 1]; even
    /// Per-sample refinement cap: a sample whose node-doubling change exceeds
    /// convergence_tol is re-evaluated on doubled grids up to this many intervals.
    int max_quadrature_nodes = 65536;
    double rho_max = 3.0;            ///< initial radial extent in cavity radii
    double rho_max_limit = 96.0;     ///< extension cap for the far-field check
    double convergence_tol = 1e-4;   ///< max |I(n) - I(2n)|
    double far_field_tol = 0.02;     ///< max |I - 1| over the outer 5% of samples
    SimulationLimits limits;

    void validate() const;
    bool operator==(const SimulationSettings&) const = default;
};

struct SimulationRequest {
    double radius_nm = 10.0;
    double defocus_um = -1000.0;  ///< signed; negative is underfocus
    MicroscopeParams params;
    SimulationSettings settings;

    void validate() const;
};

/// Complex modulation Delta(rho') of the exit wave inside the cavity projection.
/// Arguments: reduced radius rho' in [0, 1], cavity radius in metres, material.
using DeltaModel = std::function<std::complex<double>(double, double, const MicroscopeParams&)>;

/// Spherical void: chord c = 2R sqrt(1 - rho'^2), Delta = exp[(i phi - mu) c] - 1.
std::complex<double> spherical_void_delta(double rho_prime, double radius_m,
                                          const MicroscopeParams& params);

/// Reduced defocus beta = 2Z / (k R^2) with SI inputs.
double reduced_defocus(double defocus_m, double radius_m, double wavevector);

/// Radial exit-wave ratio psi/psi_p sampled on a uniform grid rho_i = i * rho_step.
struct ContrastProfile {
    SimulationRequest request;
    double beta = 0.0;
    double rho_step = 0.0;
    double rho_max = 0.0;
    std::vector<std::complex<double>> psi;
    std::vector<double> intensity;
    /// max |I(n) - I(2n)| observed while computing the profile
    double convergence_residual = 0.0;

    std::size_t size() const noexcept { return intensity.size(); }
    double rho_at(std::size_t i) const noexcept { return static_cast<double>(i) * rho_step; }

    /// Linear interpolation; clamps to the last sample beyond rho_max.
    double intensity_at(double rho) const noexcept;

    /// max |I - 1| over the outer 5% of samples.
    double far_field_deviation() const noexcept;

    /// Reduced radius of the darkest sample of the first dark band (samples
    /// below 1 - contrast_floor) that does not contain the centre. nullopt when
    /// there is no such band.
    std::optional<double> first_fringe_rho(double contrast_floor = 0.05) const;
};

/// Evaluates the defocused contrast integral for one (radius, defocus) pair.
/// Each sample starts on n_quadrature_nodes intervals and is checked against
/// the doubled grid; failing samples are refined up to max_quadrature_nodes.
/// Throws DomainError for invalid requests or zero defocus, ConvergenceError
/// when a sample still changes by more than convergence_tol at the cap or the
/// far field does not settle within rho_max_limit.
ContrastProfile simulate_profile(const SimulationRequest& req,
                                 const DeltaModel& delta = spherical_void_delta);

}  // namespace cavityforge::physics
