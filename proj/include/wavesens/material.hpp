#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "wavesens/grid.hpp"

namespace wavesens {

enum class Flavor {
    ScalarRhoScaled,  // γρ0 ü − ∇·(γρ0c0² ∇u) = f
    AcousticInterp,   // κ⁻¹(γ) ü − ∇·(ρ⁻¹(γ) ∇u) = f
};

std::string_view to_string(Flavor f);

struct ScalarConstants {
    double rho0 = 2700.0;     // [kg/m³]
    double c0 = 6000.0;       // [m/s]
    double epsilon = 1.0e-5;  // lower bound of the indicator
};

/// Air (1) and solid (2) parameters.
struct AcousticConstants {
    double rho1 = 1.204;     // [kg/m³]
    double kappa1 = 1.419e5; // [N/m²]
    double rho2 = 2643.0;
    double kappa2 = 6.87e8;
};

/**
 * Indicator field γ plus the background constants of one PDE flavor.
 * Immutable after construction.
 *
 * For AcousticInterp the inverse density and inverse bulk modulus are
 * interpolated linearly in γ; density and bulk modulus per node are cached.
 */
class MaterialModel {
public:
    /// Throws ConfigError if any γ lies outside [ε, 1] or a constant is not positive.
    static MaterialModel scalar(const Grid& grid, std::vector<double> gamma, const ScalarConstants& constants);
    /// Throws ConfigError if any γ lies outside [0, 1] or a constant is not positive.
    static MaterialModel acoustic(const Grid& grid, std::vector<double> gamma, const AcousticConstants& constants);

    static MaterialModel homogeneous_scalar(const Grid& grid, const ScalarConstants& constants, double gamma = 1.0);

    Flavor flavor() const { return flavor_; }
    const Grid& grid() const { return grid_; }
    std::span<const double> gamma() const { return gamma_; }
    const ScalarConstants& scalar_constants() const { return scalar_; }
    const AcousticConstants& acoustic_constants() const { return acoustic_; }

    /// AcousticInterp only: ρ = 1/ρ⁻¹(γ) and κ = 1/κ⁻¹(γ) per node.
    std::span<const double> density() const { return density_; }
    std::span<const double> bulk_modulus() const { return bulk_; }

    /// d(mass coefficient)/dγ: ρ0 or 1/κ2 − 1/κ1.
    double mass_derivative() const;
    /// Upper bound of the wave speed used for the Courant number.
    double max_wave_speed() const;

private:
    MaterialModel() = default;

    Flavor flavor_ = Flavor::ScalarRhoScaled;
    Grid grid_;
    std::vector<double> gamma_;
    ScalarConstants scalar_;
    AcousticConstants acoustic_;
    std::vector<double> density_;
    std::vector<double> bulk_;
};

/// Inverse density and inverse bulk modulus for one indicator value.
double inverse_density(double gamma, const AcousticConstants& c);
double inverse_bulk_modulus(double gamma, const AcousticConstants& c);

/// C = c_max Δt / Δx, stable when C ≤ 1/√d. Report only.
CourantReport cfl_report(const Grid& grid, const MaterialModel& material, const TimeConfig& time);

}  // namespace wavesens
